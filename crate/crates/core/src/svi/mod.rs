//! Sample average approximation of stochastic affine variational inequalities
//! over boxes: sampling, solving the SAA normal map, and the quantities the
//! confidence statements are built from.

mod lemke;
mod problem;

pub use lemke::solve_lcp_lemke;
pub use problem::{lcp_problem, qp_problem, LcpVariant, RandomEntry, SviProblem, UniformAffine};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dense::sandwich_inverse;
use crate::error::{Error, Result};
use crate::gauss::CovMatrix;
use crate::normal_map::{solve_box_normal_map, AffineOperator, NewtonOptions, NormalMapSolution};
use crate::polyhedral::{cell_of_point, default_tolerance, normal_map_jacobian, BoxSet};

/// Draws are folded into `Σ_N` in blocks of this many rows.
const SIGMA_BATCH: usize = 256;

/// `Ā` and `b̄` from `N` draws, plus what is needed to replay the draws.
#[derive(Clone, Debug)]
pub struct SaaEstimate {
    pub a_bar: DMatrix<f64>,
    pub b_bar: DVector<f64>,
    pub sample_size: usize,
    pub seed: u64,
    /// Per-uniform sample means, in draw order.
    pub u_bar: Vec<f64>,
}

/// First pass over the sample: average `A(ξ)` and `b(ξ)`.
pub fn assemble_saa(problem: &SviProblem, sample_size: usize, seed: u64) -> Result<SaaEstimate> {
    if sample_size < 2 {
        return Err(Error::SampleTooSmall(sample_size));
    }
    let k = problem.model.draws_per_sample();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; k];
    let mut buf = vec![0.0; k];
    for _ in 0..sample_size {
        problem.model.draw(&mut rng, &mut buf);
        for (s, u) in sum.iter_mut().zip(&buf) {
            *s += u;
        }
    }
    let u_bar: Vec<f64> = sum.iter().map(|s| s / sample_size as f64).collect();
    let (a_bar, b_bar) = problem.model.assemble(&u_bar);
    Ok(SaaEstimate { a_bar, b_bar, sample_size, seed, u_bar })
}

/// Second pass: sample covariance of `F(x, ξ_i)` around `Ā x + b̄`, divisor `N - 1`.
pub fn estimate_sigma(problem: &SviProblem, saa: &SaaEstimate, x: &DVector<f64>) -> Result<CovMatrix> {
    let n = problem.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    let model = &problem.model;
    let k = model.draws_per_sample();
    let random_b = model.random_b();
    let n_a = model.a_random.len();
    // Each uniform moves one output coordinate by a fixed multiple.
    let mut target = Vec::with_capacity(k);
    let mut gain = Vec::with_capacity(k);
    for e in &model.a_random {
        target.push(e.row);
        gain.push(e.width * x[e.col]);
    }
    for &i in &random_b {
        target.push(i);
        gain.push(model.b_width[i]);
    }
    debug_assert_eq!(target.len(), n_a + random_b.len());

    let mut rng = ChaCha8Rng::seed_from_u64(saa.seed);
    let mut buf = vec![0.0; k];
    let mut acc = DMatrix::<f64>::zeros(n, n);
    let mut block = DMatrix::<f64>::zeros(SIGMA_BATCH, n);
    let mut done = 0;
    while done < saa.sample_size {
        let rows = SIGMA_BATCH.min(saa.sample_size - done);
        block.fill(0.0);
        for r in 0..rows {
            model.draw(&mut rng, &mut buf);
            for c in 0..k {
                block[(r, target[c])] += gain[c] * (buf[c] - saa.u_bar[c]);
            }
        }
        acc.gemm_tr(1.0, &block, &block, 1.0);
        done += rows;
    }
    acc /= (saa.sample_size - 1) as f64;
    CovMatrix::new(acc).map_err(|e| Error::CovarianceNotPd(Box::new(e)))
}

/// Sample covariance of externally supplied vectors, divisor `N - 1`.
pub fn sample_covariance(draws: &[DVector<f64>]) -> Result<CovMatrix> {
    let m = draws.len();
    if m < 2 {
        return Err(Error::SampleTooSmall(m));
    }
    let n = draws[0].len();
    let mut mean = DVector::zeros(n);
    for d in draws {
        if d.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: d.len() });
        }
        mean += d;
    }
    mean /= m as f64;
    let mut acc = DMatrix::zeros(n, n);
    for d in draws {
        let c = d - &mean;
        acc.ger(1.0, &c, &c, 1.0);
    }
    acc /= (m - 1) as f64;
    CovMatrix::new(acc).map_err(|e| Error::CovarianceNotPd(Box::new(e)))
}

/// Solve the SAA normal map by semismooth Newton from `-b̄`. On failure the
/// start is perturbed with draws from `rng` and the solve retried.
pub fn solve_normal_map<R: Rng + ?Sized>(
    a_bar: &AffineOperator,
    b_bar: &DVector<f64>,
    set: &BoxSet,
    rng: &mut R,
    restarts: usize,
) -> Result<NormalMapSolution> {
    let opts = NewtonOptions::default();
    let mut last = match solve_box_normal_map(a_bar, b_bar, set, None, &opts) {
        Ok(s) => return Ok(s),
        Err(e) => e,
    };
    let spread = 0.1 * (1.0 + b_bar.amax());
    for _ in 0..restarts {
        let start = DVector::from_fn(b_bar.len(), |i, _| -b_bar[i] + spread * rng.sample::<f64, _>(StandardNormal));
        match solve_box_normal_map(a_bar, b_bar, set, Some(&start), &opts) {
            Ok(s) => return Ok(s),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// `M_N = Ā D + I - D`, `D` the derivative of `Π_S` at `z_N`. Fails when
/// `z_N` is within `tol` of a face, where `Π_S` is not differentiable.
pub fn jacobian_mn(a_bar: &DMatrix<f64>, z: &DVector<f64>, set: &BoxSet, tol: f64) -> Result<DMatrix<f64>> {
    let cell = cell_of_point(set, z, tol)?;
    let pinned = cell.pinned();
    if !pinned.is_empty() {
        return Err(Error::DegenerateSolution { coords: pinned });
    }
    Ok(normal_map_jacobian(a_bar, &cell.inside_selector()))
}

/// Everything inference needs from one SAA solve.
#[derive(Clone, Debug)]
pub struct SaaSolution {
    pub z: DVector<f64>,
    pub x: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub sigma: CovMatrix,
    pub sample_size: usize,
}

impl SaaSolution {
    /// Assemble from externally computed pieces; `x` is `Π_S(z)`.
    pub fn from_parts(
        set: &BoxSet,
        z: DVector<f64>,
        jacobian: DMatrix<f64>,
        sigma: CovMatrix,
        sample_size: usize,
    ) -> Result<Self> {
        let n = set.dim();
        if z.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: z.len() });
        }
        if jacobian.nrows() != n || jacobian.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: jacobian.nrows() });
        }
        if sigma.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: sigma.dim() });
        }
        if sample_size < 2 {
            return Err(Error::SampleTooSmall(sample_size));
        }
        let x = set.project(&z);
        Ok(Self { z, x, jacobian, sigma, sample_size })
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    /// `Λ_N = M_N⁻¹ Σ_N M_N⁻ᵀ`.
    pub fn lambda(&self) -> Result<CovMatrix> {
        CovMatrix::new(sandwich_inverse(&self.jacobian, self.sigma.matrix())?)
    }
}

/// Seeds for the two random streams of one SAA solve.
#[derive(Clone, Copy, Debug)]
pub struct SolveSeeds {
    pub sample: u64,
    pub perturbation: u64,
}

/// Sample, solve, and estimate `M_N` and `Σ_N`.
pub fn solve_saa(problem: &SviProblem, sample_size: usize, seeds: SolveSeeds) -> Result<(SaaEstimate, SaaSolution)> {
    let saa = assemble_saa(problem, sample_size, seeds.sample)?;
    let op = problem.operator(saa.a_bar.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.perturbation);
    let sol = solve_normal_map(&op, &saa.b_bar, &problem.set, &mut rng, 3)?;
    let jacobian = jacobian_mn(&saa.a_bar, &sol.z, &problem.set, default_tolerance(&sol.z))?;
    let sigma = estimate_sigma(problem, &saa, &sol.x)?;
    let out = SaaSolution { z: sol.z, x: sol.x, jacobian, sigma, sample_size };
    Ok((saa, out))
}
