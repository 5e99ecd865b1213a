//! Lemke's complementary pivoting method with a lexicographic ratio test.
//! Used as an independent check on the Newton solver for small LCPs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Find `x ≥ 0` with `w = M x + q ≥ 0` and `xᵀw = 0`.
pub fn solve_lcp_lemke(m: &DMatrix<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
    let n = q.len();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
    }
    if q.iter().all(|&v| v >= 0.0) {
        return Ok(DVector::zeros(n));
    }
    // Columns: w (0..n), x (n..2n), artificial (2n), right-hand side (2n+1).
    // Rows start as I w - M x - e x₀ = q.
    let art = 2 * n;
    let rhs = 2 * n + 1;
    let mut t = DMatrix::zeros(n, 2 * n + 2);
    for i in 0..n {
        t[(i, i)] = 1.0;
        for j in 0..n {
            t[(i, n + j)] = -m[(i, j)];
        }
        t[(i, art)] = -1.0;
        t[(i, rhs)] = q[i];
    }
    let mut basis: Vec<usize> = (0..n).collect();
    let scale = 1.0 + m.amax().max(q.amax());
    let tol = 1e-12 * scale;

    // The artificial variable enters at the most negative row.
    let mut leave = (0..n).min_by(|&a, &b| q[a].total_cmp(&q[b])).expect("n > 0");
    pivot(&mut t, leave, art);
    let mut dropped = basis[leave];
    basis[leave] = art;

    let max_pivots = 50 * (n + 1) * (n + 1);
    for count in 0..max_pivots {
        let enter = if dropped < n { dropped + n } else { dropped - n };
        let rows: Vec<usize> = (0..n).filter(|&i| t[(i, enter)] > tol).collect();
        if rows.is_empty() {
            return Err(Error::RayTermination { pivots: count + 1 });
        }
        leave = lexicographic_min(&t, &rows, enter, n, rhs);
        pivot(&mut t, leave, enter);
        dropped = basis[leave];
        basis[leave] = enter;
        if dropped == art {
            let mut x = DVector::zeros(n);
            for (i, &b) in basis.iter().enumerate() {
                if (n..2 * n).contains(&b) {
                    x[b - n] = t[(i, rhs)].max(0.0);
                }
            }
            return Ok(x);
        }
    }
    Err(Error::PivotLimit { pivots: max_pivots })
}

fn pivot(t: &mut DMatrix<f64>, row: usize, col: usize) {
    let p = t[(row, col)];
    let mut r = t.row(row).into_owned();
    r /= p;
    for i in 0..t.nrows() {
        if i == row {
            continue;
        }
        let f = t[(i, col)];
        if f != 0.0 {
            for c in 0..t.ncols() {
                t[(i, c)] -= f * r[c];
            }
        }
    }
    t.set_row(row, &r);
    for i in 0..t.nrows() {
        if i != row {
            t[(i, col)] = 0.0;
        }
    }
}

// Compare (rhs, B⁻¹ row) / pivot entry lexicographically; B⁻¹ sits in the w columns.
fn lexicographic_min(t: &DMatrix<f64>, rows: &[usize], enter: usize, n: usize, rhs: usize) -> usize {
    let key = |i: usize, k: usize| {
        let c = if k == 0 { rhs } else { k - 1 };
        t[(i, c)] / t[(i, enter)]
    };
    let mut best = rows[0];
    for &i in &rows[1..] {
        for k in 0..=n {
            let (a, b) = (key(i, k), key(best, k));
            let eps = 1e-13 * (1.0 + a.abs().max(b.abs()));
            if a < b - eps {
                best = i;
                break;
            }
            if a > b + eps {
                break;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trivial_when_q_nonnegative() {
        let m = DMatrix::identity(3, 3);
        let q = DVector::from_column_slice(&[1.0, 0.0, 2.0]);
        assert_eq!(solve_lcp_lemke(&m, &q).unwrap(), DVector::zeros(3));
    }

    #[test]
    fn small_lcp() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let q = DVector::from_column_slice(&[-5.0, -6.0]);
        let x = solve_lcp_lemke(&m, &q).unwrap();
        assert_relative_eq!(x, DVector::from_column_slice(&[4.0 / 3.0, 7.0 / 3.0]), epsilon = 1e-12);
    }

    #[test]
    fn infeasible_lcp_ends_on_a_ray() {
        // w = -x - 1 can never be nonnegative.
        let m = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let q = DVector::from_column_slice(&[-1.0]);
        assert!(matches!(solve_lcp_lemke(&m, &q), Err(Error::RayTermination { .. })));
    }

    #[test]
    fn degenerate_lcp_terminates() {
        // Ties in the first ratio test need the lexicographic rule.
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 2.0, 2.0, 0.0, 1.0]);
        let q = DVector::from_column_slice(&[-1.0, -1.0, -1.0]);
        let x = solve_lcp_lemke(&m, &q).unwrap();
        let w = &m * &x + &q;
        assert!(w.iter().all(|&v| v >= -1e-12));
        assert!(x.dot(&w).abs() < 1e-12);
    }
}
