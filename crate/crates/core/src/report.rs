//! Componentwise interval output shared by the inference routines.

use nalgebra::DVector;

use crate::polyhedral::Cell;

/// Intervals whose half-width is zero contain a value when it is within this
/// distance of the center.
pub const DEGENERATE_HIT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Z0,
    X0,
}

/// `center_j ± half_widths_j` for every coordinate `j`.
#[derive(Clone, Debug)]
pub struct IntervalReport {
    pub target: Target,
    pub center: DVector<f64>,
    pub half_widths: Vec<f64>,
    pub selected_cell: Option<Cell>,
    /// Level spent on the region step and on the interval step.
    pub alphas: (f64, f64),
    pub anchor: DVector<f64>,
}

impl IntervalReport {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn lower(&self, j: usize) -> f64 {
        self.center[j] - self.half_widths[j]
    }

    pub fn upper(&self, j: usize) -> f64 {
        self.center[j] + self.half_widths[j]
    }

    /// Nominal simultaneous coverage `1 - α₁ - α₂`.
    pub fn nominal_level(&self) -> f64 {
        1.0 - self.alphas.0 - self.alphas.1
    }

    pub fn contains(&self, j: usize, value: f64) -> bool {
        interval_contains(self.center[j], self.half_widths[j], value)
    }
}

pub fn interval_contains(center: f64, half_width: f64, value: f64) -> bool {
    let gap = (center - value).abs();
    if half_width == 0.0 {
        gap <= DEGENERATE_HIT_TOL
    } else {
        gap <= half_width
    }
}
