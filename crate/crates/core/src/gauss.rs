//! Gaussian covariances, subspaces and the oblique projector that splits a
//! normal vector into independent components along a subspace and a complement.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dense::{cholesky, cholesky_solve, numerical_rank, relative_asymmetry, symmetrize, SYMMETRY_TOL};
use crate::error::{Error, Result};
use crate::special::chi2_quantile;

/// Symmetric positive definite matrix with its lower Cholesky factor.
#[derive(Clone, Debug)]
pub struct CovMatrix {
    matrix: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl CovMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.ncols() });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite { index: 0, pivot: f64::NAN });
        }
        let asym = relative_asymmetry(&matrix);
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        let matrix = symmetrize(&matrix);
        let chol = cholesky(&matrix)?;
        Ok(Self { matrix, chol })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn cholesky_lower(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn variance(&self, j: usize) -> f64 {
        self.matrix[(j, j)]
    }

    /// `Σ⁻¹`.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        symmetrize(&cholesky_solve(&self.chol, &DMatrix::identity(n, n)))
    }

    /// `xᵀ Σ⁻¹ x`.
    pub fn mahalanobis_sq(&self, x: &DVector<f64>) -> f64 {
        let y = self.chol.solve_lower_triangular(x).expect("nonzero pivots");
        y.norm_squared()
    }
}

/// Linear subspace of ℝⁿ given by a full-column-rank basis.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    basis: DMatrix<f64>,
}

impl SubspaceBasis {
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let cols = basis.ncols();
        if cols > basis.nrows() {
            return Err(Error::RankDeficient { rank: basis.nrows(), cols });
        }
        let rank = numerical_rank(&basis);
        if rank < cols {
            return Err(Error::RankDeficient { rank, cols });
        }
        Ok(Self { basis })
    }

    /// Span of the standard basis vectors `e_j` for `j` in `coords`.
    pub fn coordinates(n: usize, coords: &[usize]) -> Result<Self> {
        let mut basis = DMatrix::zeros(n, coords.len());
        for (c, &j) in coords.iter().enumerate() {
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, dim: n });
            }
            basis[(j, c)] = 1.0;
        }
        Self::new(basis)
    }

    pub fn trivial(n: usize) -> Self {
        Self { basis: DMatrix::zeros(n, 0) }
    }

    pub fn full(n: usize) -> Self {
        Self { basis: DMatrix::identity(n, n) }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Complement basis built from the standard basis vectors with the largest
    /// residual after projecting out the span, orthonormalized.
    pub fn complement(&self) -> DMatrix<f64> {
        let n = self.ambient_dim();
        let k = self.dim();
        let mut q: Vec<DVector<f64>> = Vec::with_capacity(k);
        for c in 0..k {
            push_orthonormal(&mut q, self.basis.column(c).into_owned());
        }
        // R projects onto the orthogonal complement of everything chosen so
        // far, so ‖R e_j‖² = R_jj and R e_j is the Gram-Schmidt residual.
        let mut r = DMatrix::<f64>::identity(n, n);
        for u in &q {
            r.ger(-1.0, u, u, 1.0);
        }
        let mut w2 = DMatrix::zeros(n, n - k);
        for c in 0..n - k {
            let j = (0..n)
                .max_by(|&a, &b| r[(a, a)].total_cmp(&r[(b, b)]))
                .expect("n > 0");
            let v = r.column(j) / r[(j, j)].sqrt();
            r.ger(-1.0, &v, &v, 1.0);
            w2.set_column(c, &v);
        }
        w2
    }
}

fn push_orthonormal(q: &mut Vec<DVector<f64>>, mut v: DVector<f64>) {
    // Two passes of modified Gram-Schmidt.
    for _ in 0..2 {
        for u in q.iter() {
            let c = u.dot(&v);
            v.axpy(-c, u, 1.0);
        }
    }
    let norm = v.norm();
    if norm > 0.0 {
        q.push(v / norm);
    }
}

/// Oblique projector `P` onto `E` for which `PY` and `(I - P)Y` are independent
/// when `Y ~ N(0, Σ)`.
#[derive(Clone, Debug)]
pub struct ObliqueProjector {
    matrix: DMatrix<f64>,
    conditional: DMatrix<f64>,
    projected_cov: DMatrix<f64>,
    coupling: DMatrix<f64>,
    subspace_dim: usize,
}

impl ObliqueProjector {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Covariance of the `E`-coordinates of `PY` (a `k × k` matrix).
    pub fn conditional_cov(&self) -> &DMatrix<f64> {
        &self.conditional
    }

    /// Covariance of `PY` in ℝⁿ.
    pub fn projected_cov(&self) -> &DMatrix<f64> {
        &self.projected_cov
    }

    /// The regression block `B = Σ̃₁₂ Σ̃₂₂⁻¹` in the `[W₁ W₂]` coordinates.
    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn subspace_dim(&self) -> usize {
        self.subspace_dim
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.matrix * v
    }
}

/// Build `Π_E(Σ)`. `complement` supplies `W₂`; when absent one is constructed.
pub fn build_projector(
    subspace: &SubspaceBasis,
    complement: Option<&DMatrix<f64>>,
    sigma: &CovMatrix,
) -> Result<ObliqueProjector> {
    build_with_coupling(subspace, complement, sigma, None)
}

/// Same construction with the regression block replaced by `coupling`.
/// Any block other than the regression one breaks independence; this exists
/// so that claim can be checked.
pub fn projector_with_coupling(
    subspace: &SubspaceBasis,
    complement: Option<&DMatrix<f64>>,
    sigma: &CovMatrix,
    coupling: &DMatrix<f64>,
) -> Result<ObliqueProjector> {
    build_with_coupling(subspace, complement, sigma, Some(coupling))
}

fn build_with_coupling(
    subspace: &SubspaceBasis,
    complement: Option<&DMatrix<f64>>,
    sigma: &CovMatrix,
    coupling: Option<&DMatrix<f64>>,
) -> Result<ObliqueProjector> {
    let n = sigma.dim();
    if subspace.ambient_dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: subspace.ambient_dim() });
    }
    let k = subspace.dim();
    let w1 = subspace.basis();
    if k == 0 {
        return Ok(ObliqueProjector {
            matrix: DMatrix::zeros(n, n),
            conditional: DMatrix::zeros(0, 0),
            projected_cov: DMatrix::zeros(n, n),
            coupling: DMatrix::zeros(0, n),
            subspace_dim: 0,
        });
    }
    let w2 = match complement {
        Some(w2) => {
            if w2.nrows() != n || w2.ncols() != n - k {
                return Err(Error::DimensionMismatch { expected: n - k, found: w2.ncols() });
            }
            w2.clone()
        }
        None => subspace.complement(),
    };
    let mut w = DMatrix::zeros(n, n);
    w.columns_mut(0, k).copy_from(w1);
    w.columns_mut(k, n - k).copy_from(&w2);
    if numerical_rank(&w) < n {
        return Err(Error::SingularComplement);
    }
    let w_inv = w.clone().lu().try_inverse().ok_or(Error::SingularComplement)?;
    let s = symmetrize(&(&w_inv * sigma.matrix() * w_inv.transpose()));
    let s12 = s.view((0, k), (k, n - k)).into_owned();
    let s22 = s.view((k, k), (n - k, n - k)).into_owned();
    let regression = if n == k {
        DMatrix::zeros(k, 0)
    } else {
        // Σ̃₂₂ is a congruence of Σ, hence positive definite.
        let l22 = cholesky(&s22)?;
        cholesky_solve(&l22, &s12.transpose()).transpose()
    };
    let b = match coupling {
        Some(b) => {
            if b.nrows() != k || b.ncols() != n - k {
                return Err(Error::DimensionMismatch { expected: k * (n - k), found: b.len() });
            }
            b.clone()
        }
        None => regression,
    };
    let top = w_inv.rows(0, k);
    let bottom = w_inv.rows(k, n - k);
    let coords = top - &b * bottom;
    let matrix = w1 * &coords;
    // Covariance of the E-coordinates: [I, -B] Σ̃ [I, -B]ᵀ.
    let conditional = symmetrize(&(&coords * sigma.matrix() * coords.transpose()));
    let projected_cov = symmetrize(&(w1 * &conditional * w1.transpose()));
    Ok(ObliqueProjector { matrix, conditional, projected_cov, coupling: b, subspace_dim: k })
}

/// `δ_j = sqrt(χ²₁(α) · Var((PY)_j))`; zero when row `j` of `P` vanishes.
pub fn delta_half_width(projector: &ObliqueProjector, alpha: f64, j: usize) -> Result<f64> {
    let n = projector.matrix.nrows();
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, dim: n });
    }
    let chi = chi2_quantile(1, alpha)?;
    Ok((chi * projector.projected_cov[(j, j)].max(0.0)).sqrt())
}

/// All `n` half-widths at once.
pub fn delta_half_widths(projector: &ObliqueProjector, alpha: f64) -> Result<Vec<f64>> {
    let chi = chi2_quantile(1, alpha)?;
    Ok((0..projector.matrix.nrows())
        .map(|j| (chi * projector.projected_cov[(j, j)].max(0.0)).sqrt())
        .collect())
}

/// `sqrt(χ²₁(α) · f Q fᵀ)` for a row vector `f`.
pub fn delta_general(q: &CovMatrix, f: &DVector<f64>, alpha: f64) -> Result<f64> {
    if f.len() != q.dim() {
        return Err(Error::DimensionMismatch { expected: q.dim(), found: f.len() });
    }
    let chi = chi2_quantile(1, alpha)?;
    let var = (q.matrix() * f).dot(f);
    Ok((chi * var.max(0.0)).sqrt())
}

/// One draw from `N(0, Σ)`.
pub fn mvn_sample<R: Rng + ?Sized>(sigma: &CovMatrix, rng: &mut R) -> DVector<f64> {
    let g = DVector::from_fn(sigma.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
    sigma.cholesky_lower() * g
}
