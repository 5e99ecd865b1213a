//! Aggregation of replication records into coverage rates.

use std::collections::BTreeMap;

use super::run::{BaselineRecord, BudgetRecord, ReplicationRecord, Study};
use crate::polyhedral::{Cell, CoordState};

/// MIN, Q1, MEDIAN, Q3, MAX.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn as_array(&self) -> [f64; 5] {
        [self.min, self.q1, self.median, self.q3, self.max]
    }
}

/// Quantile of sorted data, interpolating linearly between order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn five_number(values: &[f64]) -> Option<FiveNumber> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(FiveNumber {
        min: v[0],
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
    })
}

/// One character per coordinate: `-` below, `0` at lower, `+` inside,
/// `u` at upper, `a` above, `f` fixed.
pub fn cell_code(cell: &Cell) -> String {
    cell.states()
        .iter()
        .map(|s| match s {
            CoordState::Below => '-',
            CoordState::AtLower => '0',
            CoordState::Inside => '+',
            CoordState::AtUpper => 'u',
            CoordState::Above => 'a',
            CoordState::Fixed => 'f',
        })
        .collect()
}

/// Hit counts and mean half-widths per coordinate for one interval method.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub completed: usize,
    pub z_hits: Vec<usize>,
    pub x_hits: Vec<usize>,
    pub z_mean_half_width: Vec<f64>,
    pub x_mean_half_width: Vec<f64>,
}

impl MethodSummary {
    fn new(n: usize) -> Self {
        Self { completed: 0, z_hits: vec![0; n], x_hits: vec![0; n], z_mean_half_width: vec![0.0; n], x_mean_half_width: vec![0.0; n] }
    }

    fn add(&mut self, z_hit: &[bool], x_hit: &[bool], z_hw: &[f64], x_hw: &[f64]) {
        self.completed += 1;
        for j in 0..self.z_hits.len() {
            self.z_hits[j] += z_hit[j] as usize;
            self.x_hits[j] += x_hit[j] as usize;
            self.z_mean_half_width[j] += z_hw[j];
            self.x_mean_half_width[j] += x_hw[j];
        }
    }

    fn finish(&mut self) {
        if self.completed > 0 {
            let c = self.completed as f64;
            self.z_mean_half_width.iter_mut().for_each(|w| *w /= c);
            self.x_mean_half_width.iter_mut().for_each(|w| *w /= c);
        }
    }

    fn rate(&self, hits: usize) -> f64 {
        if self.completed == 0 {
            f64::NAN
        } else {
            hits as f64 / self.completed as f64
        }
    }

    pub fn z_coverage(&self, j: usize) -> f64 {
        self.rate(self.z_hits[j])
    }

    pub fn x_coverage(&self, j: usize) -> f64 {
        self.rate(self.x_hits[j])
    }

    /// Five-number summary of z coverage over `coords`.
    pub fn z_summary(&self, coords: &[usize]) -> Option<FiveNumber> {
        if self.completed == 0 {
            return None;
        }
        five_number(&coords.iter().map(|&j| self.z_coverage(j)).collect::<Vec<_>>())
    }

    pub fn x_summary(&self, coords: &[usize]) -> Option<FiveNumber> {
        if self.completed == 0 {
            return None;
        }
        five_number(&coords.iter().map(|&j| self.x_coverage(j)).collect::<Vec<_>>())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BudgetSummary {
    pub alphas: (f64, f64),
    pub intervals: MethodSummary,
    /// Replications whose confidence region contained `z₀`.
    pub region_hits: usize,
    /// Selected cells by code, most frequent first.
    pub cells: Vec<(String, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageSummary {
    pub problem: String,
    pub dim: usize,
    pub sample_size: usize,
    pub seed: u64,
    pub requested: usize,
    pub completed: usize,
    /// `(replication, reason)` for every excluded replication.
    pub excluded: Vec<(usize, String)>,
    pub true_cell: String,
    pub active_z: Vec<usize>,
    pub active_x: Vec<usize>,
    pub inactive_z: Vec<usize>,
    pub inactive_x: Vec<usize>,
    pub budgets: Vec<BudgetSummary>,
    pub baseline: Option<(f64, MethodSummary)>,
}

pub fn aggregate(study: &Study, records: &[ReplicationRecord]) -> CoverageSummary {
    let n = study.dim();
    let cfg = &study.config.study;
    let mut ordered: Vec<&ReplicationRecord> = records.iter().collect();
    ordered.sort_by_key(|r| r.index);
    let mut budgets: Vec<(MethodSummary, usize, BTreeMap<String, usize>)> =
        cfg.budgets.iter().map(|_| (MethodSummary::new(n), 0, BTreeMap::new())).collect();
    let mut baseline = cfg.baseline_alpha.map(|a| (a, MethodSummary::new(n)));
    let mut excluded = Vec::new();
    let mut completed = 0;
    for rec in ordered {
        let data = match &rec.outcome {
            Ok(d) => d,
            Err(reason) => {
                excluded.push((rec.index, reason.clone()));
                continue;
            }
        };
        completed += 1;
        for ((m, region, cells), b) in budgets.iter_mut().zip(&data.budgets) {
            let BudgetRecord { region_hit, cell, z_hit, x_hit, z_half_width, x_half_width } = b;
            m.add(z_hit, x_hit, z_half_width, x_half_width);
            *region += *region_hit as usize;
            *cells.entry(cell_code(cell)).or_insert(0) += 1;
        }
        if let (Some((_, m)), Some(b)) = (baseline.as_mut(), data.baseline.as_ref()) {
            let BaselineRecord { z_hit, x_hit, z_half_width, x_half_width } = b;
            m.add(z_hit, x_hit, z_half_width, x_half_width);
        }
    }
    let budgets = cfg
        .budgets
        .iter()
        .zip(budgets)
        .map(|(&alphas, (mut m, region_hits, cells))| {
            m.finish();
            let mut cells: Vec<(String, usize)> = cells.into_iter().collect();
            cells.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            BudgetSummary { alphas, intervals: m, region_hits, cells }
        })
        .collect();
    if let Some((_, m)) = baseline.as_mut() {
        m.finish();
    }
    CoverageSummary {
        problem: study.problem.name.clone(),
        dim: n,
        sample_size: cfg.sample_size,
        seed: cfg.seed,
        requested: cfg.replications,
        completed,
        excluded,
        true_cell: cell_code(&study.true_cell),
        active_z: study.active_z.clone(),
        active_x: study.active_x.clone(),
        inactive_z: study.inactive_z(),
        inactive_x: study.inactive_x(),
        budgets,
        baseline,
    }
}

impl CoverageSummary {
    /// Fraction of completed replications whose region contained `z₀`.
    pub fn region_coverage(&self, budget: usize) -> f64 {
        self.budgets[budget].region_hits as f64 / self.completed as f64
    }

    /// Per active `z` coordinate, mean δ half-width over mean baseline half-width.
    pub fn width_ratios(&self, budget: usize) -> Option<Vec<f64>> {
        let (_, base) = self.baseline.as_ref()?;
        let b = &self.budgets[budget].intervals;
        Some(self.active_z.iter().map(|&j| b.z_mean_half_width[j] / base.z_mean_half_width[j]).collect())
    }
}
