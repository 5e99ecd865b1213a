//! Semismooth Newton method for affine variational inequalities over a box,
//! written as the normal-map equation `A Π_S(z) + b + z - Π_S(z) = 0`.

use nalgebra::{DMatrix, DVector};

use crate::dense::BandedMatrix;
use crate::error::{Error, Result};
use crate::polyhedral::BoxSet;

/// The linear part `A`, dense or banded.
#[derive(Clone, Debug)]
pub enum AffineOperator {
    Dense(DMatrix<f64>),
    Banded(BandedMatrix),
}

impl AffineOperator {
    pub fn dim(&self) -> usize {
        match self {
            AffineOperator::Dense(m) => m.nrows(),
            AffineOperator::Banded(b) => b.dim(),
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            AffineOperator::Dense(m) => m * x,
            AffineOperator::Banded(b) => b.mul_vec(x),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            AffineOperator::Dense(m) => m.clone(),
            AffineOperator::Banded(b) => b.to_dense(),
        }
    }

    fn max_abs(&self) -> f64 {
        match self {
            AffineOperator::Dense(m) => m.amax(),
            AffineOperator::Banded(b) => b.to_dense().amax(),
        }
    }

    /// Solve `(A D + I - D) d = r` for the 0/1 diagonal `D = diag(pattern)`.
    fn solve_piece(&self, pattern: &[bool], r: &DVector<f64>) -> Result<DVector<f64>> {
        let n = pattern.len();
        match self {
            AffineOperator::Dense(a) => {
                let j = crate::polyhedral::normal_map_jacobian(a, pattern);
                j.lu().solve(r).ok_or(Error::SingularSystem)
            }
            AffineOperator::Banded(a) => {
                let (kl, ku) = a.bandwidth();
                let mut j = BandedMatrix::zeros(n, kl, ku);
                for row in 0..n {
                    #[allow(clippy::needless_range_loop)]
                    for col in row.saturating_sub(kl)..=(row + ku).min(n - 1) {
                        let v = if pattern[col] {
                            a.get(row, col)
                        } else if row == col {
                            1.0
                        } else {
                            0.0
                        };
                        j.set(row, col, v);
                    }
                }
                j.solve(r)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Residual target relative to `1 + ‖b‖∞ + ‖A‖max · ‖Π_S(z)‖∞`.
    pub tolerance: f64,
    pub max_backtracks: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iterations: 200, tolerance: 1e-13, max_backtracks: 40 }
    }
}

#[derive(Clone, Debug)]
pub struct NormalMapSolution {
    /// Zero of the normal map.
    pub z: DVector<f64>,
    /// `Π_S(z)`, the solution of the variational inequality.
    pub x: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// `A Π_S(z) + b + z - Π_S(z)`.
pub fn normal_map_residual(a: &AffineOperator, b: &DVector<f64>, set: &BoxSet, z: &DVector<f64>) -> DVector<f64> {
    let x = set.project(z);
    a.mul_vec(&x) + b + z - x
}

/// Find `z` with `A Π_S(z) + b + z - Π_S(z) = 0`, starting from `start`
/// (default `-b`).
pub fn solve_box_normal_map(
    a: &AffineOperator,
    b: &DVector<f64>,
    set: &BoxSet,
    start: Option<&DVector<f64>>,
    opts: &NewtonOptions,
) -> Result<NormalMapSolution> {
    let n = set.dim();
    if a.dim() != n || b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    let mut z = match start {
        Some(s) if s.len() == n => s.clone(),
        Some(s) => return Err(Error::DimensionMismatch { expected: n, found: s.len() }),
        None => -b,
    };
    let a_max = a.max_abs();
    let b_max = b.amax();
    let scale = |z: &DVector<f64>| 1.0 + b_max + a_max * set.project(z).amax() + z.amax();
    let mut f = normal_map_residual(a, b, set, &z);
    let mut fnorm = f.norm();
    for it in 0..opts.max_iterations {
        if f.amax() <= opts.tolerance * scale(&z) {
            let x = set.project(&z);
            return Ok(NormalMapSolution { z, x, iterations: it, residual: f.amax() });
        }
        let pattern = set.inside_pattern(&z);
        let d = a.solve_piece(&pattern, &(-&f))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_backtracks {
            let trial = &z + &d * t;
            let ft = normal_map_residual(a, b, set, &trial);
            let nt = ft.norm();
            if nt <= (1.0 - 1e-4 * t) * fnorm || ft.amax() <= opts.tolerance * scale(&trial) {
                z = trial;
                f = ft;
                fnorm = nt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // The full step solves the current piece exactly; once the pattern
            // has settled no decrease is possible below roundoff.
            let trial = &z + &d;
            let ft = normal_map_residual(a, b, set, &trial);
            if set.inside_pattern(&trial) == pattern && ft.amax() <= 1e-9 * scale(&trial) {
                let x = set.project(&trial);
                return Ok(NormalMapSolution { residual: ft.amax(), z: trial, x, iterations: it + 1 });
            }
            return Err(Error::NoConvergence { iterations: it + 1 });
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iterations })
}
