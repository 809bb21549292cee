//! Dense tableau simplex for `max c.x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! The origin is feasible, so no phase one is needed. Pivoting uses the
//! largest reduced cost and falls back to Bland's rule after a run of
//! degenerate pivots, which guarantees termination.

use crate::error::{Error, Result};

const EPS: f64 = 1e-12;
const PIVOT_EPS: f64 = 1e-9;
const DEGENERATE_RUN: usize = 32;

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub x: Vec<f64>,
}

pub(crate) fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64], max_pivots: usize) -> Result<LpSolution> {
    let n = c.len();
    let m = b.len();
    debug_assert_eq!(a.len(), m);
    debug_assert!(b.iter().all(|&v| v >= 0.0));
    let width = n + m + 1;
    let rhs = width - 1;

    // rows 0..m constraints, row m objective (reduced costs)
    let mut t = vec![0.0; (m + 1) * width];
    for i in 0..m {
        let row = &mut t[i * width..(i + 1) * width];
        row[..n].copy_from_slice(&a[i]);
        row[n + i] = 1.0;
        row[rhs] = b[i];
    }
    for j in 0..n {
        t[m * width + j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let mut pivots = 0;
    let mut degenerate = 0;
    loop {
        let obj = &t[m * width..(m + 1) * width];
        let bland = degenerate >= DEGENERATE_RUN;
        let entering = if bland {
            (0..n + m).find(|&j| obj[j] < -EPS)
        } else {
            let mut best = None;
            let mut best_val = -EPS;
            for (j, &r) in obj[..n + m].iter().enumerate() {
                if r < best_val {
                    best_val = r;
                    best = Some(j);
                }
            }
            best
        };
        let Some(col) = entering else { break };

        // exact minimum ratio; ties go to the smallest basic index (Bland)
        let mut leaving: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let aij = t[i * width + col];
            if aij > PIVOT_EPS {
                let ratio = t[i * width + rhs].max(0.0) / aij;
                let better = match leaving {
                    None => true,
                    Some(l) => ratio < best_ratio || (ratio == best_ratio && basis[i] < basis[l]),
                };
                if better {
                    best_ratio = ratio;
                    leaving = Some(i);
                }
            }
        }
        let Some(row) = leaving else {
            return Err(Error::InvalidParameter("linear program is unbounded".into()));
        };

        if best_ratio <= EPS {
            degenerate += 1;
        } else {
            degenerate = 0;
        }
        pivot(&mut t, width, m, row, col);
        basis[row] = col;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::LpNotConverged(max_pivots));
        }
    }

    let mut x = vec![0.0; n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[i * width + rhs];
        }
    }
    Ok(LpSolution { x })
}

fn pivot(t: &mut [f64], width: usize, m: usize, row: usize, col: usize) {
    let p = t[row * width + col];
    for v in &mut t[row * width..(row + 1) * width] {
        *v /= p;
    }
    let pivot_row: Vec<f64> = t[row * width..(row + 1) * width].to_vec();
    for i in 0..=m {
        if i == row {
            continue;
        }
        let factor = t[i * width + col];
        if factor == 0.0 {
            continue;
        }
        let r = &mut t[i * width..(i + 1) * width];
        for (v, &pv) in r.iter_mut().zip(&pivot_row) {
            *v -= factor * pv;
        }
        r[col] = 0.0;
        // round-off must not make a basic variable negative
        if i < m && r[width - 1] < 0.0 {
            r[width - 1] = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let sol = maximize(
            &[3.0, 5.0],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            &[4.0, 12.0, 18.0],
            100,
        )
        .unwrap();
        assert_abs_diff_eq!(3.0 * sol.x[0] + 5.0 * sol.x[1], 36.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's cycling example (rewritten as max)
        let c = [0.75, -150.0, 0.02, -6.0];
        let a = vec![
            vec![0.25, -60.0, -0.04, 9.0],
            vec![0.5, -90.0, -0.02, 3.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ];
        let sol = maximize(&c, &a, &[0.0, 0.0, 1.0], 1000).unwrap();
        assert_abs_diff_eq!(c.iter().zip(&sol.x).map(|(c, x)| c * x).sum::<f64>(), 0.05, epsilon = 1e-12);
    }

    #[test]
    fn unbounded_is_reported() {
        assert!(maximize(&[1.0], &[vec![-1.0]], &[1.0], 10).is_err());
    }

    #[test]
    fn pivot_budget() {
        let r = maximize(&[1.0, 1.0], &[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0], 1);
        assert_eq!(r.unwrap_err(), Error::LpNotConverged(1));
    }
}
