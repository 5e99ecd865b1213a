//! Piecewise normal random vectors `Z = z₀ + Γ⁻¹Y` with `Y ~ N(0, Σ)`, and
//! confidence intervals for `z₀` when `z₀` is known to lie in `a₀ + E`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::gauss::{build_projector, delta_half_widths, mvn_sample, CovMatrix, SubspaceBasis};
use crate::polyhedral::{default_tolerance, PieceKey, PiecewiseLinearMap};
use crate::report::{IntervalReport, Target};

/// Piece covariances are computed up front for at most this many pieces.
const MAX_CACHED_PIECES: usize = 4096;

#[derive(Clone, Debug)]
pub struct PiecewiseNormalModel {
    gamma: PiecewiseLinearMap,
    sigma: CovMatrix,
    anchor: DVector<f64>,
    center: Option<DVector<f64>>,
    piece_cov: HashMap<PieceKey, CovMatrix>,
}

impl PiecewiseNormalModel {
    /// `anchor` is a point `a₀` of the affine set known to contain `z₀`; the
    /// set is parallel to the lineality space of `gamma`.
    pub fn new(gamma: PiecewiseLinearMap, sigma: CovMatrix, anchor: DVector<f64>) -> Result<Self> {
        let n = gamma.dim();
        if sigma.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: sigma.dim() });
        }
        if anchor.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: anchor.len() });
        }
        let mut model = Self { gamma, sigma, anchor, center: None, piece_cov: HashMap::new() };
        if let Ok(keys) = model.gamma.piece_keys() {
            if keys.len() <= MAX_CACHED_PIECES {
                for key in keys {
                    let q = model.compute_piece_cov(&key)?;
                    model.piece_cov.insert(key, q);
                }
            }
        }
        Ok(model)
    }

    /// Attach the true center; it must lie in `a₀ + E`.
    pub fn with_center(mut self, z0: DVector<f64>) -> Result<Self> {
        if z0.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: z0.len() });
        }
        let offset = &z0 - &self.anchor;
        let gap = distance_to_subspace(self.lineality(), &offset);
        if gap > 1e-9 * (1.0 + offset.amax()) {
            return Err(Error::Config(format!("center is {gap:e} away from the affine set")));
        }
        self.center = Some(z0);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.gamma.dim()
    }

    pub fn gamma(&self) -> &PiecewiseLinearMap {
        &self.gamma
    }

    pub fn sigma(&self) -> &CovMatrix {
        &self.sigma
    }

    pub fn anchor(&self) -> &DVector<f64> {
        &self.anchor
    }

    pub fn center(&self) -> Option<&DVector<f64>> {
        self.center.as_ref()
    }

    pub fn lineality(&self) -> &SubspaceBasis {
        self.gamma.lineality()
    }

    /// `Q_i = M_i⁻¹ Σ M_i⁻ᵀ`.
    pub fn piece_covariance(&self, key: &PieceKey) -> Result<CovMatrix> {
        match self.piece_cov.get(key) {
            Some(q) => Ok(q.clone()),
            None => self.compute_piece_cov(key),
        }
    }

    fn compute_piece_cov(&self, key: &PieceKey) -> Result<CovMatrix> {
        let m = self.gamma.matrix(key);
        let x = m.lu().solve(self.sigma.cholesky_lower()).ok_or(Error::SingularSystem)?;
        let q = &x * x.transpose();
        CovMatrix::new((&q + q.transpose()) * 0.5)
    }

    /// The piece whose interior, shifted by the affine set, contains `z`.
    pub fn classify(&self, z: &DVector<f64>) -> Result<PieceKey> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: z.len() });
        }
        let v = z - &self.anchor;
        self.gamma.locate(&v, default_tolerance(&v))
    }
}

fn distance_to_subspace(e: &SubspaceBasis, v: &DVector<f64>) -> f64 {
    if e.dim() == 0 {
        return v.norm();
    }
    let w = e.basis();
    let gram = w.transpose() * w;
    let coef = gram.lu().solve(&(w.transpose() * v)).expect("basis has full column rank");
    (v - w * coef).norm()
}

/// `Γ⁻¹Y` for one draw `Y ~ N(0, Σ)`.
pub fn sample_offset<R: Rng + ?Sized>(model: &PiecewiseNormalModel, rng: &mut R) -> Result<DVector<f64>> {
    let y = mvn_sample(&model.sigma, rng);
    model.gamma.inverse_apply(&y)
}

/// One draw of `Z = z₀ + Γ⁻¹Y`; needs the center.
pub fn sample_z<R: Rng + ?Sized>(model: &PiecewiseNormalModel, rng: &mut R) -> Result<DVector<f64>> {
    let z0 = model.center.as_ref().ok_or_else(|| Error::Config("model has no center".into()))?;
    Ok(z0 + sample_offset(model, rng)?)
}

fn interval(model: &PiecewiseNormalModel, z: &DVector<f64>, lambda: &CovMatrix, alpha: f64, scale: f64) -> Result<IntervalReport> {
    let p = build_projector(model.lineality(), None, lambda)?;
    let center = p.apply(&(z - &model.anchor)) + &model.anchor;
    let half_widths = delta_half_widths(&p, alpha)?.into_iter().map(|d| d * scale).collect();
    Ok(IntervalReport {
        target: Target::Z0,
        center,
        half_widths,
        selected_cell: None,
        alphas: (0.0, alpha),
        anchor: model.anchor.clone(),
    })
}

/// Exact level-`1 - α` intervals for each coordinate of `z₀` from one
/// observation `Z`. Coordinates along which `E` has no extent get a
/// zero-width interval.
pub fn exact_ci(model: &PiecewiseNormalModel, z: &DVector<f64>, alpha: f64) -> Result<IntervalReport> {
    let key = model.classify(z)?;
    let lambda = model.piece_covariance(&key)?;
    interval(model, z, &lambda, alpha, 1.0)
}

/// The piece covariance selected by an estimate `z_N`.
pub fn asymptotic_lambda(model: &PiecewiseNormalModel, z_n: &DVector<f64>) -> Result<CovMatrix> {
    let key = model.classify(z_n)?;
    model.piece_covariance(&key)
}

/// Intervals for `z₀` from an estimate with `√N (z_N - z₀) → Γ⁻¹Y`.
pub fn asymptotic_ci(model: &PiecewiseNormalModel, z_n: &DVector<f64>, alpha: f64, sample_size: usize) -> Result<IntervalReport> {
    if sample_size == 0 {
        return Err(Error::SampleTooSmall(0));
    }
    let lambda = asymptotic_lambda(model, z_n)?;
    interval(model, z_n, &lambda, alpha, 1.0 / (sample_size as f64).sqrt())
}

/// Per-piece matrices of a model; convenience for harnesses.
pub fn piece_matrices(model: &PiecewiseNormalModel) -> Result<Vec<(PieceKey, DMatrix<f64>)>> {
    Ok(model.gamma.piece_keys()?.into_iter().map(|k| {
        let m = model.gamma.matrix(&k);
        (k, m)
    }).collect())
}
