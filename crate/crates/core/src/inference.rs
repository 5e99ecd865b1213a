//! Confidence regions and componentwise confidence intervals for the true
//! solution `(z₀, x₀)` from a single SAA solution over a box.

use nalgebra::{DMatrix, DVector};

use crate::box_qp::solve_box_qp;
use crate::error::{Error, Result};
use crate::gauss::{build_projector, delta_general, delta_half_widths, CovMatrix, ObliqueProjector};
use crate::polyhedral::{cell_of_point, default_tolerance, face_projection_data, BoxSet, Cell, CoordState};
use crate::report::{IntervalReport, Target};
use crate::special::chi2_quantile;
use crate::svi::SaaSolution;

/// `{z : (z - z_N)ᵀ A (z - z_N) ≤ c}` with `A = M_Nᵀ Σ_N⁻¹ M_N`, `c = χ²_n(α₁)/N`.
#[derive(Clone, Debug)]
pub struct ConfidenceRegion {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    pub threshold: f64,
    /// `A⁻¹ = Λ_N`.
    pub lambda: CovMatrix,
    pub alpha: f64,
}

impl ConfidenceRegion {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn quadratic_form(&self, z: &DVector<f64>) -> f64 {
        let d = z - &self.center;
        (&self.shape * &d).dot(&d)
    }

    pub fn contains(&self, z: &DVector<f64>) -> bool {
        self.quadratic_form(z) <= self.threshold
    }

    /// Half-length of the region's shadow on coordinate `j`.
    pub fn axis_extent(&self, j: usize) -> f64 {
        (self.threshold * self.lambda.variance(j)).sqrt()
    }
}

/// `Λ_N = M_N⁻¹ Σ_N M_N⁻ᵀ`.
pub fn lambda_hat(sol: &SaaSolution) -> Result<CovMatrix> {
    sol.lambda()
}

pub fn confidence_region(sol: &SaaSolution, alpha1: f64) -> Result<ConfidenceRegion> {
    let lambda = lambda_hat(sol)?;
    let n = sol.dim();
    // Σ = L Lᵀ, so Mᵀ Σ⁻¹ M = (L⁻¹M)ᵀ (L⁻¹M).
    let x = sol
        .sigma
        .cholesky_lower()
        .solve_lower_triangular(&sol.jacobian)
        .ok_or(Error::SingularSystem)?;
    let shape = x.transpose() * &x;
    let shape = (&shape + shape.transpose()) * 0.5;
    let threshold = chi2_quantile(n, alpha1)? / sol.sample_size as f64;
    Ok(ConfidenceRegion { center: sol.z.clone(), shape, threshold, lambda, alpha: alpha1 })
}

/// The `n`-cell containing `z_N`.
pub fn solution_cell(sol: &SaaSolution, set: &BoxSet) -> Result<Cell> {
    let cell = cell_of_point(set, &sol.z, default_tolerance(&sol.z))?;
    if !cell.is_full() {
        return Err(Error::DegenerateSolution { coords: cell.pinned() });
    }
    Ok(cell)
}

// The bound coordinate `j` would be pinned to from its state in `P_N`.
fn pin_target(set: &BoxSet, state: CoordState, z: f64, spread: f64, j: usize) -> Option<(CoordState, f64)> {
    let (l, u) = (set.lower()[j], set.upper()[j]);
    match state {
        CoordState::Below => Some((CoordState::AtLower, l)),
        CoordState::Above => Some((CoordState::AtUpper, u)),
        CoordState::Inside => {
            let dl = if l.is_finite() { (z - l) / spread } else { f64::INFINITY };
            let du = if u.is_finite() { (u - z) / spread } else { f64::INFINITY };
            if dl.is_infinite() && du.is_infinite() {
                None
            } else if dl <= du {
                Some((CoordState::AtLower, l))
            } else {
                Some((CoordState::AtUpper, u))
            }
        }
        _ => None,
    }
}

// Closed range of coordinate `j` over the closure of `P_N`.
fn closure_range(set: &BoxSet, state: CoordState, j: usize) -> (f64, f64) {
    let (l, u) = (set.lower()[j], set.upper()[j]);
    match state {
        CoordState::Below => (f64::NEG_INFINITY, l),
        CoordState::Above => (u, f64::INFINITY),
        CoordState::Inside => (l, u),
        _ => (l, u),
    }
}

/// Smallest value of the region's quadratic form over the face of `P_N`
/// with the coordinates in `pins` fixed.
pub fn min_form_on_face(
    region: &ConfidenceRegion,
    p_n: &Cell,
    set: &BoxSet,
    pins: &[(usize, f64)],
) -> Result<f64> {
    let n = region.dim();
    let mut fixed = vec![None; n];
    for &(j, v) in pins {
        fixed[j] = Some(v);
    }
    let free: Vec<usize> = (0..n).filter(|&j| fixed[j].is_none()).collect();
    let z = &region.center;
    let a = &region.shape;
    let r = DVector::from_fn(n, |j, _| fixed[j].map_or(0.0, |v| v - z[j]));
    if free.is_empty() {
        return Ok((a * &r).dot(&r));
    }
    // Over y = w_F - z_F: yᵀ A_FF y + 2 yᵀ A_FJ r_J + r_Jᵀ A_JJ r_J.
    let h = DMatrix::from_fn(free.len(), free.len(), |p, q| 2.0 * a[(free[p], free[q])]);
    let ar = a * &r;
    let g = DVector::from_fn(free.len(), |p, _| 2.0 * ar[free[p]]);
    let mut lo = Vec::with_capacity(free.len());
    let mut hi = Vec::with_capacity(free.len());
    for &j in &free {
        let (l, u) = closure_range(set, p_n.states()[j], j);
        lo.push(l - z[j]);
        hi.push(u - z[j]);
    }
    let y = solve_box_qp(&h, &g, &lo, &hi)?;
    let mut d = r;
    for (p, &j) in free.iter().enumerate() {
        d[j] = y[p];
    }
    Ok((a * &d).dot(&d).max(0.0))
}

/// A cell of smallest dimension meeting both the region and the closure of
/// `P_N`, found by screening coordinates against the region's axis extents,
/// testing the joint pinning exactly, and dropping the least plausible pin
/// until the test passes.
pub fn select_cell(region: &ConfidenceRegion, p_n: &Cell, set: &BoxSet) -> Result<Cell> {
    let n = region.dim();
    if p_n.ambient_dim() != n || set.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: p_n.ambient_dim() });
    }
    let z = &region.center;
    let mut candidates: Vec<(usize, CoordState, f64, f64)> = Vec::new();
    for j in 0..n {
        let spread = region.lambda.variance(j).sqrt();
        if let Some((state, value)) = pin_target(set, p_n.states()[j], z[j], spread, j) {
            let gap = (z[j] - value).abs();
            if gap <= region.axis_extent(j) {
                candidates.push((j, state, value, gap / spread));
            }
        }
    }
    // Most plausible pins first, so dropping from the back removes the
    // largest standardized distance.
    candidates.sort_by(|a, b| a.3.total_cmp(&b.3).then(a.0.cmp(&b.0)));
    while !candidates.is_empty() {
        let pins: Vec<(usize, f64)> = candidates.iter().map(|c| (c.0, c.2)).collect();
        if min_form_on_face(region, p_n, set, &pins)? <= region.threshold {
            break;
        }
        candidates.pop();
    }
    let mut states = p_n.states().to_vec();
    for (j, state, _, _) in candidates {
        states[j] = state;
    }
    Ok(Cell::new(states))
}

/// `z_N` with the pinned coordinates of `cell` moved onto their bound.
pub fn cell_anchor(sol: &SaaSolution, cell: &Cell, set: &BoxSet) -> DVector<f64> {
    DVector::from_fn(sol.dim(), |j, _| match cell.states()[j] {
        CoordState::AtLower => set.lower()[j],
        CoordState::AtUpper => set.upper()[j],
        _ => sol.z[j],
    })
}

/// Shared state for the intervals attached to one selected cell.
#[derive(Clone, Debug)]
pub struct CellEstimate {
    pub cell: Cell,
    pub anchor: DVector<f64>,
    pub projector: ObliqueProjector,
    pub lambda: CovMatrix,
    /// `z̃_N = Π_Ẽ(Λ_N)(z_N - a₀) + a₀`.
    pub z_tilde: DVector<f64>,
    pub sample_size: usize,
}

impl CellEstimate {
    pub fn new(sol: &SaaSolution, cell: &Cell, set: &BoxSet, lambda: CovMatrix) -> Result<Self> {
        if cell.ambient_dim() != sol.dim() {
            return Err(Error::DimensionMismatch { expected: sol.dim(), found: cell.ambient_dim() });
        }
        let anchor = cell_anchor(sol, cell, set);
        let projector = build_projector(&cell.parallel_subspace(), None, &lambda)?;
        let z_tilde = projector.apply(&(&sol.z - &anchor)) + &anchor;
        Ok(Self { cell: cell.clone(), anchor, projector, lambda, z_tilde, sample_size: sol.sample_size })
    }

    fn root_n(&self) -> f64 {
        (self.sample_size as f64).sqrt()
    }

    pub fn z_intervals(&self, alpha1: f64, alpha2: f64) -> Result<IntervalReport> {
        let scale = self.root_n();
        let half_widths = delta_half_widths(&self.projector, alpha2)?.into_iter().map(|d| d / scale).collect();
        Ok(IntervalReport {
            target: Target::Z0,
            center: self.z_tilde.clone(),
            half_widths,
            selected_cell: Some(self.cell.clone()),
            alphas: (alpha1, alpha2),
            anchor: self.anchor.clone(),
        })
    }

    pub fn x_intervals(&self, set: &BoxSet, alpha1: f64, alpha2: f64) -> Result<IntervalReport> {
        let face = face_projection_data(set, &self.cell)?;
        let center = face.project(&self.z_tilde);
        let scale = self.root_n();
        let n = center.len();
        let p = self.projector.matrix();
        let mut half_widths = Vec::with_capacity(n);
        for j in 0..n {
            // Row j of Π_H̃ Π_Ẽ(Λ_N); Π_H̃ keeps the coordinates free on the face.
            let row = if face.free[j] { p.row(j).transpose() } else { DVector::zeros(n) };
            half_widths.push(delta_general(&self.lambda, &row, alpha2)? / scale);
        }
        Ok(IntervalReport {
            target: Target::X0,
            center,
            half_widths,
            selected_cell: Some(self.cell.clone()),
            alphas: (alpha1, alpha2),
            anchor: face.project(&self.anchor),
        })
    }
}

pub fn ci_z0(sol: &SaaSolution, cell: &Cell, set: &BoxSet, alpha1: f64, alpha2: f64) -> Result<IntervalReport> {
    CellEstimate::new(sol, cell, set, lambda_hat(sol)?)?.z_intervals(alpha1, alpha2)
}

pub fn ci_x0(sol: &SaaSolution, cell: &Cell, set: &BoxSet, alpha1: f64, alpha2: f64) -> Result<IntervalReport> {
    CellEstimate::new(sol, cell, set, lambda_hat(sol)?)?.x_intervals(set, alpha1, alpha2)
}

/// Region, selected cell and both sets of intervals.
#[derive(Clone, Debug)]
pub struct Inference {
    pub region: ConfidenceRegion,
    pub solution_cell: Cell,
    pub z: IntervalReport,
    pub x: IntervalReport,
}

pub fn infer(sol: &SaaSolution, set: &BoxSet, alpha1: f64, alpha2: f64) -> Result<Inference> {
    let region = confidence_region(sol, alpha1)?;
    let p_n = solution_cell(sol, set)?;
    let cell = select_cell(&region, &p_n, set)?;
    let est = CellEstimate::new(sol, &cell, set, region.lambda.clone())?;
    let z = est.z_intervals(alpha1, alpha2)?;
    let x = est.x_intervals(set, alpha1, alpha2)?;
    Ok(Inference { region, solution_cell: p_n, z, x })
}

/// Intervals `z_N ± sqrt(χ²₁(α) Λ_jj / N)` and their images under `Π_S`.
/// These ignore the nonsmooth structure and are not asymptotically exact.
pub fn baseline_intervals(sol: &SaaSolution, lambda: &CovMatrix, set: &BoxSet, alpha: f64) -> Result<(IntervalReport, IntervalReport)> {
    let n = sol.dim();
    let chi = chi2_quantile(1, alpha)?;
    let hw: Vec<f64> = (0..n).map(|j| (chi * lambda.variance(j) / sol.sample_size as f64).sqrt()).collect();
    let mut xc = DVector::zeros(n);
    let mut xw = Vec::with_capacity(n);
    for j in 0..n {
        let (l, u) = (set.lower()[j], set.upper()[j]);
        let lo = (sol.z[j] - hw[j]).clamp(l, u);
        let hi = (sol.z[j] + hw[j]).clamp(l, u);
        xc[j] = 0.5 * (lo + hi);
        xw.push(0.5 * (hi - lo));
    }
    let z = IntervalReport {
        target: Target::Z0,
        center: sol.z.clone(),
        half_widths: hw,
        selected_cell: None,
        alphas: (0.0, alpha),
        anchor: sol.z.clone(),
    };
    let x = IntervalReport {
        target: Target::X0,
        center: xc,
        half_widths: xw,
        selected_cell: None,
        alphas: (0.0, alpha),
        anchor: sol.x.clone(),
    };
    Ok((z, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn worked_solution() -> SaaSolution {
        let set = BoxSet::orthant(2);
        let z = DVector::from_column_slice(&[0.0293, -0.5475]);
        let m = DMatrix::from_row_slice(2, 2, &[0.9971, 0.0, 0.9721, 1.0]);
        let sigma = CovMatrix::new(DMatrix::from_row_slice(2, 2, &[0.3312, 0.0205, 0.0205, 0.0855])).unwrap();
        SaaSolution::from_parts(&set, z, m, sigma, 100).unwrap()
    }

    #[test]
    fn region_shape_and_lambda_are_inverse() {
        let sol = worked_solution();
        let r = confidence_region(&sol, 0.05).unwrap();
        let prod = &r.shape * r.lambda.matrix();
        assert_relative_eq!(prod, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert_relative_eq!(r.lambda.matrix()[(0, 1)], -0.3033, epsilon = 1e-3);
    }

    #[test]
    fn worked_cell_and_intervals() {
        let set = BoxSet::orthant(2);
        let inf = infer(&worked_solution(), &set, 0.05, 0.05).unwrap();
        assert_eq!(inf.solution_cell.to_string(), "(PLUS, MINUS)");
        assert_eq!(inf.z.selected_cell.as_ref().unwrap().to_string(), "(ZERO, MINUS)");
        assert_eq!(inf.z.center[0], 0.0);
        assert_eq!(inf.z.half_widths[0], 0.0);
        assert_relative_eq!(inf.z.center[1], -0.5208, epsilon = 1e-3);
        assert_relative_eq!(inf.z.lower(1), -0.5777, epsilon = 1e-3);
        assert_relative_eq!(inf.z.upper(1), -0.4640, epsilon = 1e-3);
        assert_eq!(inf.x.center, DVector::zeros(2));
        assert_eq!(inf.x.half_widths, vec![0.0, 0.0]);
    }

    #[test]
    fn full_cell_keeps_the_estimate() {
        let set = BoxSet::orthant(2);
        let sol = worked_solution();
        let cell = solution_cell(&sol, &set).unwrap();
        let r = ci_z0(&sol, &cell, &set, 0.05, 0.05).unwrap();
        assert_relative_eq!(r.center, sol.z.clone(), epsilon = 1e-14);
        let lambda = lambda_hat(&sol).unwrap();
        let chi = chi2_quantile(1, 0.05).unwrap();
        for j in 0..2 {
            assert_relative_eq!(r.half_widths[j], (chi * lambda.variance(j) / 100.0).sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn interior_region_selects_the_solution_cell() {
        let set = BoxSet::orthant(2);
        let z = DVector::from_column_slice(&[5.0, -5.0]);
        let sigma = CovMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let sol = SaaSolution::from_parts(&set, z, DMatrix::identity(2, 2), sigma, 1000).unwrap();
        let inf = infer(&sol, &set, 0.05, 0.05).unwrap();
        assert_eq!(inf.z.selected_cell.unwrap(), inf.solution_cell);
    }

    #[test]
    fn wide_region_selects_the_origin() {
        let set = BoxSet::orthant(2);
        let z = DVector::from_column_slice(&[0.1, -0.1]);
        let sigma = CovMatrix::new(DMatrix::identity(2, 2)).unwrap();
        let sol = SaaSolution::from_parts(&set, z, DMatrix::identity(2, 2), sigma, 2).unwrap();
        let inf = infer(&sol, &set, 0.05, 0.05).unwrap();
        assert_eq!(inf.z.selected_cell.unwrap().dim(), 0);
    }

    #[test]
    fn joint_test_rejects_individually_plausible_pins() {
        // Each coordinate alone reaches its face, but not both at once: the
        // ellipse is thin along (1, 1).
        let set = BoxSet::orthant(2);
        let z = DVector::from_column_slice(&[0.2, 0.2]);
        let sigma = CovMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, -0.99, -0.99, 1.0])).unwrap();
        let sol = SaaSolution::from_parts(&set, z, DMatrix::identity(2, 2), sigma, 20).unwrap();
        let region = confidence_region(&sol, 0.05).unwrap();
        assert!(region.axis_extent(0) > 0.2);
        let p_n = solution_cell(&sol, &set).unwrap();
        let cell = select_cell(&region, &p_n, &set).unwrap();
        assert_eq!(cell.dim(), 1);
    }

    #[test]
    fn baseline_on_the_worked_example() {
        let set = BoxSet::orthant(2);
        let sol = worked_solution();
        let lambda = lambda_hat(&sol).unwrap();
        let (z, x) = baseline_intervals(&sol, &lambda, &set, 0.1).unwrap();
        assert_eq!(z.center, sol.z);
        // The second coordinate's interval lies below zero, so it maps to {0}.
        assert!(z.upper(1) < 0.0);
        assert_eq!(x.half_widths[1], 0.0);
        assert_eq!(x.center[1], 0.0);
        assert!(x.lower(0) == 0.0 && x.upper(0) > 0.0);
    }
}
