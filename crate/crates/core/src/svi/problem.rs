//! Stochastic affine variational inequalities with independent uniform noise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dense::BandedMatrix;
use crate::error::{Error, Result};
use crate::normal_map::{solve_box_normal_map, AffineOperator, NewtonOptions, NormalMapSolution};
use crate::polyhedral::BoxSet;

/// Entry `(row, col)` of `A(ξ)` is `lo + width · U` with `U ~ U(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomEntry {
    pub row: usize,
    pub col: usize,
    pub lo: f64,
    pub width: f64,
}

/// `F(x, ξ) = A(ξ) x + b(ξ)` where every random entry is an independent uniform.
#[derive(Clone, Debug)]
pub struct UniformAffine {
    /// Deterministic part of `A(ξ)`; random entries are added on top.
    pub a_fixed: DMatrix<f64>,
    pub a_random: Vec<RandomEntry>,
    /// `b(ξ)_i = b_lo_i + b_width_i · U`; zero width means deterministic.
    pub b_lo: DVector<f64>,
    pub b_width: DVector<f64>,
}

impl UniformAffine {
    pub fn new(
        a_fixed: DMatrix<f64>,
        a_random: Vec<RandomEntry>,
        b_lo: DVector<f64>,
        b_width: DVector<f64>,
    ) -> Result<Self> {
        let n = a_fixed.nrows();
        if a_fixed.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a_fixed.ncols() });
        }
        if b_lo.len() != n || b_width.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b_lo.len().min(b_width.len()) });
        }
        for e in &a_random {
            if e.row >= n || e.col >= n {
                return Err(Error::IndexOutOfRange { index: e.row.max(e.col), dim: n });
            }
            if !(e.width >= 0.0 && e.width.is_finite() && e.lo.is_finite()) {
                return Err(Error::Config(format!("bad range for entry ({}, {})", e.row, e.col)));
            }
        }
        if b_width.iter().chain(b_lo.iter()).any(|v| !v.is_finite()) || b_width.iter().any(|&w| w < 0.0) {
            return Err(Error::Config("bad range for b".into()));
        }
        Ok(Self { a_fixed, a_random, b_lo, b_width })
    }

    pub fn dim(&self) -> usize {
        self.a_fixed.nrows()
    }

    /// Indices of the random coordinates of `b`, in draw order.
    pub fn random_b(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.b_width[i] > 0.0).collect()
    }

    /// Number of uniforms consumed by one draw of `ξ`.
    pub fn draws_per_sample(&self) -> usize {
        self.a_random.len() + self.random_b().len()
    }

    /// Fill `out` with the uniforms of one draw: random `A` entries first,
    /// then random `b` coordinates.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for u in out.iter_mut() {
            *u = rng.random::<f64>();
        }
    }

    /// `A` and `b` with every uniform replaced by `ubar`.
    pub fn assemble(&self, ubar: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let mut a = self.a_fixed.clone();
        for (e, u) in self.a_random.iter().zip(ubar) {
            a[(e.row, e.col)] += e.lo + e.width * u;
        }
        let mut b = self.b_lo.clone();
        for (i, u) in self.random_b().into_iter().zip(&ubar[self.a_random.len()..]) {
            b[i] += self.b_width[i] * u;
        }
        (a, b)
    }

    /// `E[A(ξ)]` and `E[b(ξ)]`.
    pub fn mean(&self) -> (DMatrix<f64>, DVector<f64>) {
        self.assemble(&vec![0.5; self.draws_per_sample()])
    }
}

/// A stochastic affine variational inequality over a box.
#[derive(Clone, Debug)]
pub struct SviProblem {
    pub name: String,
    pub set: BoxSet,
    pub model: UniformAffine,
    /// Declared `(kl, ku)` bandwidth of `A(ξ)`; selects the banded solver.
    pub bandwidth: Option<(usize, usize)>,
}

impl SviProblem {
    pub fn new(name: impl Into<String>, set: BoxSet, model: UniformAffine, bandwidth: Option<(usize, usize)>) -> Result<Self> {
        if set.dim() != model.dim() {
            return Err(Error::DimensionMismatch { expected: set.dim(), found: model.dim() });
        }
        if let Some((kl, ku)) = bandwidth {
            let (a, _) = model.mean();
            BandedMatrix::from_dense(&a, kl, ku)?;
            let outside = model.a_random.iter().any(|e| e.row > e.col + kl || e.col > e.row + ku);
            if outside {
                return Err(Error::Config("random entry outside the declared bandwidth".into()));
            }
        }
        Ok(Self { name: name.into(), set, model, bandwidth })
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn operator(&self, a: DMatrix<f64>) -> AffineOperator {
        match self.bandwidth {
            Some((kl, ku)) => AffineOperator::Banded(BandedMatrix::from_dense(&a, kl, ku).expect("checked at construction")),
            None => AffineOperator::Dense(a),
        }
    }

    /// Solution `(z₀, x₀)` of the true problem.
    pub fn true_solution(&self) -> Result<NormalMapSolution> {
        let (a, b) = self.model.mean();
        solve_box_normal_map(&self.operator(a), &b, &self.set, None, &NewtonOptions::default())
    }
}

/// Which of the built-in random LCP families to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LcpVariant {
    /// `b ~ U(-1, 1)`; the true solution is `z₀ = 0`.
    AllZero,
    /// Two positive, many negative and a third zero coordinates of `z₀`.
    Mixed,
    /// Two positive coordinates, the rest negative.
    TwoActive,
}

fn lcp_matrix_entries(n: usize) -> Vec<RandomEntry> {
    let mut entries = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let width = match row.cmp(&col) {
                std::cmp::Ordering::Equal => 4.0,
                std::cmp::Ordering::Less => 3.0,
                std::cmp::Ordering::Greater => 2.0,
            };
            entries.push(RandomEntry { row, col, lo: 0.0, width });
        }
    }
    entries
}

/// Random LCP on ℝⁿ₊ whose matrix has independent entries: diagonal `U(0, 4)`,
/// above the diagonal `U(0, 3)`, below `U(0, 2)`.
pub fn lcp_problem(variant: LcpVariant, n: usize) -> Result<SviProblem> {
    if n < 3 {
        return Err(Error::Config("random LCP families need n >= 3".into()));
    }
    let mut lo = DVector::from_element(n, -1.0);
    let mut width = DVector::from_element(n, 2.0);
    match variant {
        LcpVariant::AllZero => {}
        LcpVariant::Mixed => {
            for i in 0..2 {
                lo[i] = -2.0;
            }
            for i in n - n / 3..n {
                lo[i] = -1.0;
                width[i] = 0.8;
            }
        }
        LcpVariant::TwoActive => {
            for i in 0..2 {
                lo[i] = -2.0;
            }
        }
    }
    let model = UniformAffine::new(DMatrix::zeros(n, n), lcp_matrix_entries(n), lo, width)?;
    let name = match variant {
        LcpVariant::AllZero => "lcp-zero",
        LcpVariant::Mixed => "lcp-mixed",
        LcpVariant::TwoActive => "lcp-two-active",
    };
    SviProblem::new(name, BoxSet::orthant(n), model, None)
}

/// Convex QP `min ½ xᵀMx + qᵀx` over ℝⁿ₊ with `M = I + 3·11ᵀ` and three
/// blocks of random `q`. The true solution is one on the first block and zero
/// elsewhere, with the last block degenerate.
pub fn qp_problem(n: usize) -> Result<SviProblem> {
    if n == 0 || n % 3 != 0 {
        return Err(Error::Config("the QP family needs n divisible by 3".into()));
    }
    let k = n / 3;
    let m = DMatrix::from_fn(n, n, |i, j| if i == j { 4.0 } else { 3.0 });
    let nf = n as f64;
    let lo = DVector::from_fn(n, |i, _| match i / k {
        0 => -(nf + 2.0),
        1 => -nf,
        _ => -(nf + 1.0),
    });
    let model = UniformAffine::new(m, Vec::new(), lo, DVector::from_element(n, 2.0))?;
    SviProblem::new("qp", BoxSet::orthant(n), model, None)
}
