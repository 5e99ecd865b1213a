//! Replications of one coverage study.

use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::seed::{derive_seed, StreamRole};
use crate::error::{Error, Result};
use crate::inference::{baseline_intervals, confidence_region, lambda_hat, select_cell, solution_cell, CellEstimate};
use crate::polyhedral::{cell_of_point, default_tolerance, Cell, CoordState};
use crate::report::interval_contains;
use crate::svi::{solve_saa, SolveSeeds, SviProblem};

/// A config resolved into a problem with its true solution.
#[derive(Clone, Debug)]
pub struct Study {
    pub config: ExperimentConfig,
    pub problem: SviProblem,
    pub z0: DVector<f64>,
    pub x0: DVector<f64>,
    pub true_cell: Cell,
    /// Coordinates of `z₀` not on a face of the set.
    pub active_z: Vec<usize>,
    /// Coordinates of `x₀` strictly inside their bounds.
    pub active_x: Vec<usize>,
}

impl Study {
    pub fn prepare(config: ExperimentConfig, base: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let problem = config.build_problem(base)?;
        let truth = problem.true_solution()?;
        let true_cell = cell_of_point(&problem.set, &truth.z, default_tolerance(&truth.z))?;
        let active_z = true_cell.unpinned();
        let active_x = (0..problem.dim()).filter(|&j| true_cell.states()[j] == CoordState::Inside).collect();
        Ok(Self { config, problem, z0: truth.z, x0: truth.x, true_cell, active_z, active_x })
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn inactive_z(&self) -> Vec<usize> {
        self.true_cell.pinned()
    }

    pub fn inactive_x(&self) -> Vec<usize> {
        (0..self.dim()).filter(|j| !self.active_x.contains(j)).collect()
    }
}

/// Outcome of one `(α₁, α₂)` budget in one replication.
#[derive(Clone, Debug, PartialEq)]
pub struct BudgetRecord {
    pub region_hit: bool,
    pub cell: Cell,
    pub z_hit: Vec<bool>,
    pub x_hit: Vec<bool>,
    pub z_half_width: Vec<f64>,
    pub x_half_width: Vec<f64>,
}

/// Naive intervals scored alongside, at level `baseline_alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineRecord {
    pub z_hit: Vec<bool>,
    pub x_hit: Vec<bool>,
    pub z_half_width: Vec<f64>,
    pub x_half_width: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationData {
    pub budgets: Vec<BudgetRecord>,
    pub baseline: Option<BaselineRecord>,
}

#[derive(Clone, Debug)]
pub struct ReplicationRecord {
    pub index: usize,
    /// `Err` carries why the replication was excluded.
    pub outcome: std::result::Result<ReplicationData, String>,
    pub elapsed: Duration,
}

fn hits(center: &DVector<f64>, half_widths: &[f64], truth: &DVector<f64>) -> Vec<bool> {
    (0..truth.len()).map(|j| interval_contains(center[j], half_widths[j], truth[j])).collect()
}

fn replicate(study: &Study, index: usize) -> Result<ReplicationData> {
    let cfg = &study.config.study;
    let set = &study.problem.set;
    let r = index as u64;
    let seeds = SolveSeeds {
        sample: derive_seed(cfg.seed, r, StreamRole::Sample),
        perturbation: derive_seed(cfg.seed, r, StreamRole::Perturbation),
    };
    let (_, sol) = solve_saa(&study.problem, cfg.sample_size, seeds)?;
    let lambda = lambda_hat(&sol)?;
    let p_n = solution_cell(&sol, set)?;
    let mut budgets = Vec::with_capacity(cfg.budgets.len());
    let mut last: Option<CellEstimate> = None;
    for &(a1, a2) in &cfg.budgets {
        let region = confidence_region(&sol, a1)?;
        let cell = select_cell(&region, &p_n, set)?;
        let est = match last.take() {
            Some(e) if e.cell == cell => e,
            _ => CellEstimate::new(&sol, &cell, set, lambda.clone())?,
        };
        let z = est.z_intervals(a1, a2)?;
        let x = est.x_intervals(set, a1, a2)?;
        budgets.push(BudgetRecord {
            region_hit: region.contains(&study.z0),
            cell,
            z_hit: hits(&z.center, &z.half_widths, &study.z0),
            x_hit: hits(&x.center, &x.half_widths, &study.x0),
            z_half_width: z.half_widths,
            x_half_width: x.half_widths,
        });
        last = Some(est);
    }
    let baseline = match cfg.baseline_alpha {
        Some(alpha) => {
            let (z, x) = baseline_intervals(&sol, &lambda, set, alpha)?;
            Some(BaselineRecord {
                z_hit: hits(&z.center, &z.half_widths, &study.z0),
                x_hit: hits(&x.center, &x.half_widths, &study.x0),
                z_half_width: z.half_widths,
                x_half_width: x.half_widths,
            })
        }
        None => None,
    };
    Ok(ReplicationData { budgets, baseline })
}

/// Sample, solve, select a cell and score every budget for replication `index`.
pub fn run_replication(study: &Study, index: usize) -> ReplicationRecord {
    let start = Instant::now();
    let outcome = replicate(study, index).map_err(|e| e.to_string());
    ReplicationRecord { index, outcome, elapsed: start.elapsed() }
}

/// All replications on a pool of `workers` threads, in index order.
pub fn run_study(study: &Study, workers: usize) -> Result<Vec<ReplicationRecord>> {
    let reps = study.config.study.replications;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut records: Vec<ReplicationRecord> = pool.install(|| (0..reps).into_par_iter().map(|r| run_replication(study, r)).collect());
    records.sort_by_key(|r| r.index);
    Ok(records)
}
