//! Primal active-set method for `min ½ yᵀHy + gᵀy` subject to `lo ≤ y ≤ hi`,
//! with `H` positive definite.

use nalgebra::{DMatrix, DVector};

use crate::dense::{cholesky, cholesky_solve};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bound {
    Free,
    Lower,
    Upper,
}

pub fn solve_box_qp(h: &DMatrix<f64>, g: &DVector<f64>, lo: &[f64], hi: &[f64]) -> Result<DVector<f64>> {
    let n = g.len();
    if h.nrows() != n || h.ncols() != n || lo.len() != n || hi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: h.nrows() });
    }
    let scale = 1.0 + h.amax() + g.amax();
    let tol = 1e-12 * scale;
    // Feasible start at the origin pushed into the box.
    let mut y = DVector::from_fn(n, |i, _| 0.0f64.clamp(lo[i], hi[i]));
    let mut state: Vec<Bound> = (0..n)
        .map(|i| {
            if lo[i] == hi[i] || (y[i] == lo[i] && lo[i].is_finite()) {
                Bound::Lower
            } else if y[i] == hi[i] && hi[i].is_finite() {
                Bound::Upper
            } else {
                Bound::Free
            }
        })
        .collect();
    let max_iter = 50 * (n + 1);
    for _ in 0..max_iter {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == Bound::Free).collect();
        // Minimizer over the free variables with the others held at their bounds.
        let mut target = y.clone();
        if !free.is_empty() {
            let hff = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
            let mut rhs = DMatrix::zeros(free.len(), 1);
            for (a, &i) in free.iter().enumerate() {
                let mut s = -g[i];
                for k in 0..n {
                    if state[k] != Bound::Free {
                        s -= h[(i, k)] * y[k];
                    }
                }
                rhs[(a, 0)] = s;
            }
            let l = cholesky(&hff)?;
            let sol = cholesky_solve(&l, &rhs);
            for (a, &i) in free.iter().enumerate() {
                target[i] = sol[(a, 0)];
            }
        }
        let step = &target - &y;
        if step.amax() <= tol * (1.0 + y.amax()) {
            y = target;
            let grad = h * &y + g;
            let mut worst: Option<(usize, f64)> = None;
            for i in 0..n {
                if lo[i] == hi[i] {
                    continue;
                }
                let mult = match state[i] {
                    Bound::Free => continue,
                    Bound::Lower => grad[i],
                    Bound::Upper => -grad[i],
                };
                if mult < -tol && worst.is_none_or(|(_, w)| mult < w) {
                    worst = Some((i, mult));
                }
            }
            match worst {
                None => return Ok(y),
                Some((i, _)) => state[i] = Bound::Free,
            }
            continue;
        }
        let mut t = 1.0;
        let mut blocking: Option<(usize, Bound)> = None;
        for &i in &free {
            let d = step[i];
            if d < 0.0 && lo[i].is_finite() {
                let ti = (lo[i] - y[i]) / d;
                if ti < t {
                    t = ti;
                    blocking = Some((i, Bound::Lower));
                }
            } else if d > 0.0 && hi[i].is_finite() {
                let ti = (hi[i] - y[i]) / d;
                if ti < t {
                    t = ti;
                    blocking = Some((i, Bound::Upper));
                }
            }
        }
        let t = t.max(0.0);
        y += &step * t;
        if let Some((i, b)) = blocking {
            y[i] = if b == Bound::Lower { lo[i] } else { hi[i] };
            state[i] = b;
        }
    }
    Err(Error::NoConvergence { iterations: max_iter })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unconstrained_optimum_inside_box() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let g = DVector::from_column_slice(&[-1.0, -1.0]);
        let y = solve_box_qp(&h, &g, &[-10.0, -10.0], &[10.0, 10.0]).unwrap();
        let want = h.clone().lu().solve(&(-&g)).unwrap();
        assert_relative_eq!(y, want, epsilon = 1e-12);
    }

    #[test]
    fn active_bounds_satisfy_kkt() {
        let h = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let g = DVector::from_column_slice(&[-8.0, 3.0, -1.0]);
        let lo = [f64::NEG_INFINITY, 0.0, 0.0];
        let hi = [1.0, f64::INFINITY, f64::INFINITY];
        let y = solve_box_qp(&h, &g, &lo, &hi).unwrap();
        let grad = &h * &y + &g;
        for i in 0..3 {
            assert!(y[i] >= lo[i] - 1e-12 && y[i] <= hi[i] + 1e-12);
            if y[i] > lo[i] + 1e-9 && y[i] < hi[i] - 1e-9 {
                assert!(grad[i].abs() < 1e-10);
            } else if (y[i] - lo[i]).abs() <= 1e-9 {
                assert!(grad[i] >= -1e-10);
            } else {
                assert!(grad[i] <= 1e-10);
            }
        }
        assert_eq!(y[0], 1.0);
        assert_eq!(y[1], 0.0);
    }
}
