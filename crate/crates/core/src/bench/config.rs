//! Experiment configuration (TOML).
//!
//! ```toml
//! [problem]
//! kind = "lcp-mixed"        # lcp-zero | lcp-mixed | lcp-two-active | qp | custom
//! n = 10
//!
//! [study]
//! sample_size = 500
//! replications = 200
//! seed = 20240601
//! budgets = [[0.025, 0.025], [0.01, 0.04]]
//! baseline_alpha = 0.05     # optional: also score the naive intervals
//! workers = 4               # optional; output does not depend on it
//!
//! [full_scale]              # optional overrides applied by --full-scale
//! n = 30
//! replications = 500
//! ```
//!
//! A custom problem names a mean matrix (inline rows or a matrix text file,
//! relative to the config file) and draws `A(ξ)_ij = Ā_ij + U(-spread, spread)`
//! on every stored entry, `b(ξ)_j ~ U(b_lower_j, b_upper_j)`:
//!
//! ```toml
//! [problem]
//! kind = "custom"
//! matrix = "a_mean.txt"
//! spread = 0.5
//! b_lower = [-1.0, -1.0, -1.0]
//! b_upper = [1.0, 1.0, 1.0]
//! set = { lower = [0.0, 0.0, 0.0], upper = [inf, inf, inf] }
//! ```

use std::path::Path;

use nalgebra::DVector;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io::{BoxBounds, MatrixData, MatrixSource};
use crate::svi::{lcp_problem, qp_problem, LcpVariant, RandomEntry, SviProblem, UniformAffine};

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub study: StudySpec,
    pub full_scale: Option<ScaleOverride>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemSpec {
    LcpZero { n: usize },
    LcpMixed { n: usize },
    LcpTwoActive { n: usize },
    Qp { n: usize },
    Custom(CustomProblem),
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
pub struct CustomProblem {
    pub matrix: MatrixSource,
    #[serde(default)]
    pub spread: f64,
    pub b_lower: Vec<f64>,
    pub b_upper: Vec<f64>,
    #[serde(default)]
    pub set: BoxBounds,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub sample_size: usize,
    pub replications: usize,
    pub seed: u64,
    pub budgets: Vec<(f64, f64)>,
    pub baseline_alpha: Option<f64>,
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScaleOverride {
    pub n: Option<usize>,
    pub sample_size: Option<usize>,
    pub replications: Option<usize>,
}

/// Guard against configs whose problem would not fit in memory.
const MAX_DIM: usize = 100_000;

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| crate::io::toml_error(text, e))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn check_alpha(a: f64) -> Result<()> {
    if a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(a))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.study;
        if s.sample_size < 2 {
            return Err(Error::SampleTooSmall(s.sample_size));
        }
        if s.replications == 0 {
            return Err(Error::Config("replications must be positive".into()));
        }
        if s.budgets.is_empty() {
            return Err(Error::Config("at least one (alpha1, alpha2) budget is required".into()));
        }
        for &(a1, a2) in &s.budgets {
            check_alpha(a1)?;
            check_alpha(a2)?;
            if a1 + a2 >= 1.0 {
                return Err(Error::Config(format!("budget ({a1}, {a2}) spends the whole level")));
            }
        }
        if let Some(a) = s.baseline_alpha {
            check_alpha(a)?;
        }
        if s.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        if let Some(n) = self.dim() {
            if n == 0 || n > MAX_DIM {
                return Err(Error::Config(format!("dimension {n} out of range")));
            }
        }
        if let ProblemSpec::Custom(c) = &self.problem {
            if c.b_lower.len() != c.b_upper.len() {
                return Err(Error::DimensionMismatch { expected: c.b_lower.len(), found: c.b_upper.len() });
            }
            if !(c.spread.is_finite() && c.spread >= 0.0) {
                return Err(Error::Config("spread must be finite and nonnegative".into()));
            }
            for (l, u) in c.b_lower.iter().zip(&c.b_upper) {
                if !(l.is_finite() && u.is_finite() && l <= u) {
                    return Err(Error::Config(format!("bad b range [{l}, {u}]")));
                }
            }
        }
        Ok(())
    }

    /// Dimension of a built-in family; custom problems take it from their data.
    pub fn dim(&self) -> Option<usize> {
        match &self.problem {
            ProblemSpec::LcpZero { n } | ProblemSpec::LcpMixed { n } | ProblemSpec::LcpTwoActive { n } | ProblemSpec::Qp { n } => Some(*n),
            ProblemSpec::Custom(c) => Some(c.b_lower.len()),
        }
    }

    /// Apply the `[full_scale]` overrides.
    pub fn full_scale(&self) -> Result<Self> {
        let o = self.full_scale.clone().ok_or_else(|| Error::Config("config has no [full_scale] section".into()))?;
        let mut out = self.clone();
        if let Some(n) = o.n {
            match &mut out.problem {
                ProblemSpec::LcpZero { n: m } | ProblemSpec::LcpMixed { n: m } | ProblemSpec::LcpTwoActive { n: m } | ProblemSpec::Qp { n: m } => *m = n,
                ProblemSpec::Custom(_) => return Err(Error::Config("custom problems cannot be rescaled".into())),
            }
        }
        if let Some(v) = o.sample_size {
            out.study.sample_size = v;
        }
        if let Some(v) = o.replications {
            out.study.replications = v;
        }
        out.validate()?;
        Ok(out)
    }

    /// Build the problem; relative matrix paths resolve against `base`.
    pub fn build_problem(&self, base: Option<&Path>) -> Result<SviProblem> {
        match &self.problem {
            ProblemSpec::LcpZero { n } => lcp_problem(LcpVariant::AllZero, *n),
            ProblemSpec::LcpMixed { n } => lcp_problem(LcpVariant::Mixed, *n),
            ProblemSpec::LcpTwoActive { n } => lcp_problem(LcpVariant::TwoActive, *n),
            ProblemSpec::Qp { n } => qp_problem(*n),
            ProblemSpec::Custom(c) => build_custom(c, base),
        }
    }
}

fn build_custom(c: &CustomProblem, base: Option<&Path>) -> Result<SviProblem> {
    let data = c.matrix.load(base)?;
    let mean = data.to_dense();
    let n = c.b_lower.len();
    if mean.nrows() != n || mean.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: mean.nrows() });
    }
    let bandwidth = data.bandwidth();
    let mut random = Vec::new();
    if c.spread > 0.0 {
        for row in 0..n {
            for col in 0..n {
                let stored = match &data {
                    MatrixData::Dense(_) => true,
                    MatrixData::Banded(b) => b.in_band(row, col),
                };
                if stored {
                    random.push(RandomEntry { row, col, lo: -c.spread, width: 2.0 * c.spread });
                }
            }
        }
    }
    let lo = DVector::from_column_slice(&c.b_lower);
    let width = DVector::from_iterator(n, c.b_lower.iter().zip(&c.b_upper).map(|(l, u)| u - l));
    let model = UniformAffine::new(mean, random, lo, width)?;
    SviProblem::new("custom", c.set.build(n)?, model, bandwidth)
}
