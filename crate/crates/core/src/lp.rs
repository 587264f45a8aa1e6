//! Dense primal simplex for packing-type programs
//! `max c·x  s.t.  A x ≤ b, x ≥ 0` with `b ≥ 0`, so the slack basis is
//! feasible and no phase-one is needed.
//!
//! Pivoting is Dantzig's rule with index tie-breaks, falling back to
//! Bland's rule permanently once the objective stalls, which makes the
//! iteration deterministic and cycling-free. The reported vertex is
//! recomputed from the original data by an LU solve on the final basis so
//! the feasibility certificate does not inherit tableau drift.

use rayon::prelude::*;

use crate::{Error, Result};

const OPT_TOL: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-11;
/// Consecutive non-improving pivots tolerated before switching to Bland.
const STALL_LIMIT: usize = 30;

/// `max c·x  s.t.  rows·x ≤ rhs, x ≥ 0`.
#[derive(Debug, Clone)]
pub struct DenseLp {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
    /// `max_i (A x - b)_i` recomputed from the original data (can be
    /// slightly positive through rounding; the certificate bound).
    pub max_constraint_violation: f64,
}

pub fn solve(lp: &DenseLp, max_pivots: usize) -> Result<LpSolution> {
    let m = lp.rows.len();
    let n = lp.objective.len();
    if lp.rhs.len() != m {
        return Err(Error::invalid("rhs length must match the row count"));
    }
    for row in &lp.rows {
        if row.len() != n {
            return Err(Error::invalid("row length must match the objective length"));
        }
    }
    if lp.rhs.iter().any(|&b| b < 0.0) {
        return Err(Error::invalid("slack start requires nonnegative rhs"));
    }
    if m == 0 {
        // only x ≥ 0 constraints: bounded iff no positive objective entry
        if lp.objective.iter().any(|&c| c > OPT_TOL) {
            return Err(Error::Unbounded);
        }
        return Ok(LpSolution {
            x: vec![0.0; n],
            value: 0.0,
            pivots: 0,
            max_constraint_violation: 0.0,
        });
    }

    let width = n + m + 1;
    let mut tab: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    for i in 0..m {
        let mut row = Vec::with_capacity(width);
        row.extend_from_slice(&lp.rows[i]);
        for j in 0..m {
            row.push(if i == j { 1.0 } else { 0.0 });
        }
        row.push(lp.rhs[i]);
        tab.push(row);
    }
    let mut obj_row = vec![0.0; width];
    for j in 0..n {
        obj_row[j] = -lp.objective[j];
    }
    tab.push(obj_row);

    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut pivots = 0usize;
    let mut bland = false;
    let mut stall = 0usize;
    let mut last_objective = 0.0f64;

    loop {
        // entering column
        let obj = &tab[m];
        let entering = if bland {
            (0..n + m).find(|&j| obj[j] < -OPT_TOL)
        } else {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n + m {
                if obj[j] < -OPT_TOL && best.map(|(_, v)| obj[j] < v).unwrap_or(true) {
                    best = Some((j, obj[j]));
                }
            }
            best.map(|(j, _)| j)
        };
        let Some(col) = entering else {
            break; // optimal
        };

        // ratio test; Bland tie-break on the leaving basis variable
        let mut leaving: Option<(usize, f64)> = None;
        for (i, row) in tab.iter().enumerate().take(m) {
            let a = row[col];
            if a > PIVOT_EPS {
                let ratio = row[width - 1] / a;
                match leaving {
                    None => leaving = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-12
                            || ((ratio - lr).abs() <= 1e-12 && basis[i] < basis[li])
                        {
                            leaving = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((row_idx, _)) = leaving else {
            return Err(Error::Unbounded);
        };

        if pivots >= max_pivots {
            return Err(Error::IterationCap { cap: max_pivots });
        }
        pivots += 1;

        // pivot; the rank-one row updates are independent, so they run in
        // parallel with bitwise-identical per-row arithmetic
        let piv = tab[row_idx][col];
        for v in tab[row_idx].iter_mut() {
            *v /= piv;
        }
        let pivot_row = tab[row_idx].clone();
        tab.par_iter_mut().enumerate().for_each(|(i, row)| {
            if i != row_idx {
                let factor = row[col];
                if factor != 0.0 {
                    for (v, p) in row.iter_mut().zip(&pivot_row) {
                        *v -= factor * p;
                    }
                }
            }
        });
        basis[row_idx] = col;

        let objective = tab[m][width - 1];
        if objective > last_objective + 1e-12 {
            stall = 0;
            last_objective = objective;
        } else {
            stall += 1;
            if stall >= STALL_LIMIT {
                bland = true;
            }
        }
    }

    // refactorize: solve B x_B = b against the original columns
    let mut bmat = vec![vec![0.0; m]; m];
    for (k, &var) in basis.iter().enumerate() {
        for i in 0..m {
            bmat[i][k] = if var < n {
                lp.rows[i][var]
            } else if var - n == i {
                1.0
            } else {
                0.0
            };
        }
    }
    let xb = lu_solve(bmat, lp.rhs.clone())
        .ok_or_else(|| Error::invalid("singular basis at optimum"))?;
    let mut x = vec![0.0; n];
    for (k, &var) in basis.iter().enumerate() {
        if var < n {
            x[var] = xb[k].max(0.0);
        }
    }
    let value: f64 = lp.objective.iter().zip(&x).map(|(c, xi)| c * xi).sum();
    let mut max_violation = 0.0f64;
    for (row, &b) in lp.rows.iter().zip(&lp.rhs) {
        let ax: f64 = row.iter().zip(&x).map(|(a, xi)| a * xi).sum();
        max_violation = max_violation.max(ax - b);
    }
    Ok(LpSolution {
        x,
        value,
        pivots,
        max_constraint_violation: max_violation,
    })
}

/// Dense LU solve with partial pivoting; `None` for a singular matrix.
pub fn lu_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let (piv_row, piv_val) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))?;
        if piv_val < 1e-14 {
            return None;
        }
        a.swap(col, piv_row);
        b.swap(col, piv_row);
        for r in (col + 1)..n {
            let factor = a[r][col] / a[col][col];
            if factor != 0.0 {
                for c in col..n {
                    a[r][c] -= factor * a[col][c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in (row + 1)..n {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn textbook_maximum_is_found() {
        // max 5x + 4y, 6x + 4y ≤ 24, x + 2y ≤ 6 → (3, 1.5), value 21
        let lp = DenseLp {
            objective: vec![5.0, 4.0],
            rows: vec![vec![6.0, 4.0], vec![1.0, 2.0]],
            rhs: vec![24.0, 6.0],
        };
        let sol = solve(&lp, 100).unwrap();
        assert_relative_eq!(sol.value, 21.0, max_relative = 1e-12);
        assert_relative_eq!(sol.x[0], 3.0, max_relative = 1e-12);
        assert_relative_eq!(sol.x[1], 1.5, max_relative = 1e-12);
        assert!(sol.max_constraint_violation <= 1e-9);
    }

    #[test]
    fn certificate_mass_equals_reported_value() {
        let lp = DenseLp {
            objective: vec![1.0, 1.0, 1.0],
            rows: vec![
                vec![2.0, 1.0, 0.5],
                vec![0.5, 2.0, 1.0],
                vec![1.0, 0.5, 2.0],
            ],
            rhs: vec![1.0, 1.0, 1.0],
        };
        let sol = solve(&lp, 100).unwrap();
        let direct: f64 = sol.x.iter().sum();
        assert_relative_eq!(direct, sol.value, epsilon = 1e-12);
        assert!(sol.max_constraint_violation <= 1e-9);
    }

    #[test]
    fn unbounded_problem_is_detected() {
        let lp = DenseLp {
            objective: vec![1.0, 0.0],
            rows: vec![vec![-1.0, 1.0]],
            rhs: vec![1.0],
        };
        assert!(matches!(solve(&lp, 100), Err(Error::Unbounded)));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let lp = DenseLp {
            objective: vec![5.0, 4.0],
            rows: vec![vec![6.0, 4.0], vec![1.0, 2.0]],
            rhs: vec![24.0, 6.0],
        };
        assert!(matches!(
            solve(&lp, 1),
            Err(Error::IterationCap { cap: 1 })
        ));
    }

    #[test]
    fn degenerate_vertices_terminate() {
        // degenerate rhs entries exercise the anti-cycling path
        let lp = DenseLp {
            objective: vec![2.0, 3.0, 1.0],
            rows: vec![
                vec![1.0, 1.0, 1.0],
                vec![1.0, 1.0, 0.0],
                vec![0.0, 1.0, 1.0],
            ],
            rhs: vec![1.0, 0.0, 0.0],
        };
        let sol = solve(&lp, 1000).unwrap();
        // x = (0, 0, 0) has objective 0; best feasible puts mass on x3 via row 1 only
        assert!(sol.value >= 0.0);
        assert!(sol.max_constraint_violation <= 1e-9);
    }

    #[test]
    fn zero_objective_stays_at_the_origin() {
        let lp = DenseLp {
            objective: vec![0.0, 0.0],
            rows: vec![vec![1.0, 1.0]],
            rhs: vec![1.0],
        };
        let sol = solve(&lp, 10).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.pivots, 0);
    }

    #[test]
    fn lu_solver_round_trips() {
        let a = vec![
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ];
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = a
            .iter()
            .map(|row| row.iter().zip(&x_true).map(|(r, x)| r * x).sum())
            .collect();
        let x = lu_solve(a, b).unwrap();
        for (got, want) in x.iter().zip(&x_true) {
            assert_relative_eq!(got, want, epsilon = 1e-12);
        }
        // singular matrix is rejected
        assert!(lu_solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }
}
