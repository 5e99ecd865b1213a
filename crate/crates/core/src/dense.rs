//! Small dense and banded linear-algebra helpers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check on covariance input.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Lower Cholesky factor, rejecting pivots at or below `n·ε·max(diag)`.
pub fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.ncols() });
    }
    let max_diag = (0..n).map(|i| m[(i, i)]).fold(0.0f64, f64::max);
    let floor = n as f64 * f64::EPSILON * max_diag;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        // Written so that a NaN pivot is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(d > floor) {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solve `L Lᵀ X = B` given the lower factor `L`.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let y = l.solve_lower_triangular(b).expect("nonzero pivots");
    l.transpose().solve_upper_triangular(&y).expect("nonzero pivots")
}

/// Largest absolute asymmetry, relative to the largest entry.
pub fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

/// Average `m` with its transpose.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Numerical rank from a column-pivoted QR.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return 0;
    }
    let qr = m.clone().col_piv_qr();
    let r = qr.r();
    let top = r[(0, 0)].abs();
    if top == 0.0 {
        return 0;
    }
    let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * top * 16.0;
    (0..k).filter(|&i| r[(i, i)].abs() > tol).count()
}

/// `M⁻¹ Σ M⁻ᵀ` for square nonsingular `M`.
pub fn sandwich_inverse(m: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = m.clone().lu();
    let x = lu.solve(sigma).ok_or(Error::SingularSystem)?;
    let y = lu.solve(&x.transpose()).ok_or(Error::SingularSystem)?;
    Ok(symmetrize(&y))
}

/// Square matrix stored by diagonals: `kl` below and `ku` above the main one.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // Row-major: row i holds columns i-kl ..= i+ku.
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn from_dense(m: &DMatrix<f64>, kl: usize, ku: usize) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.ncols() });
        }
        let mut b = Self::zeros(n, kl, ku);
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if b.in_band(i, j) {
                    b.set(i, j, v);
                } else if v != 0.0 {
                    return Err(Error::Config(format!(
                        "entry ({i}, {j}) lies outside bandwidth ({kl}, {ku})"
                    )));
                }
            }
        }
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.offset(i, j)]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let o = self.offset(i, j);
        self.data[o] = v;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
        })
    }

    /// Solve `self · x = b` by banded Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b.len() });
        }
        // Row swaps widen the upper band to kl + ku.
        let width = self.kl + self.ku;
        let stride = width + self.kl + 1;
        let mut w = vec![0.0; n * stride];
        let col = |i: usize, j: usize| j + self.kl - i;
        for i in 0..n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(n.saturating_sub(1));
            for j in lo..=hi {
                w[i * stride + col(i, j)] = self.get(i, j);
            }
        }
        let mut rhs = b.clone();
        let scale = self.data.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        let tiny = n as f64 * f64::EPSILON * scale;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = w[k * stride + col(k, k)].abs();
            for i in k + 1..=last_row {
                let v = w[i * stride + col(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tiny {
                return Err(Error::SingularSystem);
            }
            let last_col = (k + width).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = k * stride + col(k, j);
                    let c = p * stride + col(p, j);
                    w.swap(a, c);
                }
                rhs.swap_rows(k, p);
            }
            let pivot = w[k * stride + col(k, k)];
            for i in k + 1..=last_row {
                let f = w[i * stride + col(i, k)] / pivot;
                if f == 0.0 {
                    continue;
                }
                w[i * stride + col(i, k)] = 0.0;
                for j in k + 1..=last_col {
                    w[i * stride + col(i, j)] -= f * w[k * stride + col(k, j)];
                }
                rhs[i] -= f * rhs[k];
            }
        }
        let mut x = DVector::zeros(n);
        for k in (0..n).rev() {
            let last_col = (k + width).min(n - 1);
            let mut s = rhs[k];
            for j in k + 1..=last_col {
                s -= w[k * stride + col(k, j)] * x[j];
            }
            x[k] = s / w[k * stride + col(k, k)];
        }
        Ok(x)
    }
}
