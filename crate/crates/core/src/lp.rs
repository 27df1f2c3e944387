//! Small dense linear-program solver used as an independent transport oracle.
//!
//! Two-phase tableau simplex with Bland's rule. Solves
//! `min c·x  s.t.  A x = b, x >= 0`. Intended for problems with at most a few
//! thousand variables; there is no sparsity handling.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    rows: usize,
    cols: usize,
    // rows × (cols + 1); last column is the right-hand side
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize, objective: &mut [f64]) {
        let width = self.cols + 1;
        let p = self.at(pr, pc);
        for c in 0..width {
            self.data[pr * width + c] /= p;
        }
        let pivot_row: Vec<f64> = self.data[pr * width..(pr + 1) * width].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * width + pc];
            if f != 0.0 {
                for (c, pv) in pivot_row.iter().enumerate() {
                    self.data[r * width + c] -= f * pv;
                }
            }
        }
        let f = objective[pc];
        if f != 0.0 {
            for (c, pv) in pivot_row.iter().enumerate() {
                objective[c] -= f * pv;
            }
        }
        self.basis[pr] = pc;
    }

    /// Runs simplex iterations on `objective` (reduced costs, last entry = -value)
    /// restricted to entering columns `< allowed`.
    fn optimize(&mut self, objective: &mut [f64], allowed: usize) -> Result<()> {
        let max_iter = 50_000 + 50 * (self.rows + self.cols);
        for _ in 0..max_iter {
            let Some(enter) = (0..allowed).find(|&c| objective[c] < -PIVOT_TOL) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, enter);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - PIVOT_TOL
                                || (ratio <= lratio + PIVOT_TOL && self.basis[r] < self.basis[lr])
                            {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((pr, _)) = leave else {
                return Err(Error::Lp("unbounded".into()));
            };
            self.pivot(pr, enter, objective);
        }
        Err(Error::Lp("iteration limit reached".into()))
    }
}

/// Minimizes `cost · x` subject to `rows · x = rhs`, `x >= 0`.
///
/// `rows` is a dense row-major constraint matrix with `cost.len()` columns.
pub fn solve_equality_lp(rows: &[Vec<f64>], rhs: &[f64], cost: &[f64]) -> Result<LpSolution> {
    let m = rows.len();
    let n = cost.len();
    if rhs.len() != m || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Lp("inconsistent dimensions".into()));
    }
    let cols = n + m;
    let width = cols + 1;
    let mut data = vec![0.0; m * width];
    for (r, (row, &b)) in rows.iter().zip(rhs).enumerate() {
        let sign = if b < 0.0 { -1.0 } else { 1.0 };
        for (c, a) in row.iter().enumerate() {
            data[r * width + c] = sign * a;
        }
        data[r * width + n + r] = 1.0;
        data[r * width + cols] = sign * b;
    }
    let mut t = Tableau {
        rows: m,
        cols,
        data,
        basis: (n..n + m).collect(),
    };

    // Phase 1: minimize the sum of artificials.
    let mut phase1 = vec![0.0; width];
    for r in 0..m {
        for c in 0..n {
            phase1[c] -= t.at(r, c);
        }
        phase1[cols] -= t.rhs(r);
    }
    t.optimize(&mut phase1, n)?;
    if -phase1[cols] > FEASIBILITY_TOL {
        return Err(Error::Lp(format!("infeasible (residual {})", -phase1[cols])));
    }

    // Drive remaining artificials out of the basis; rows where that is
    // impossible are redundant and get dropped.
    let mut r = 0;
    while r < t.rows {
        if t.basis[r] >= n {
            match (0..n).find(|&c| t.at(r, c).abs() > 1e-9) {
                Some(c) => {
                    let mut scratch = vec![0.0; width];
                    t.pivot(r, c, &mut scratch);
                    r += 1;
                }
                None => {
                    t.data.drain(r * width..(r + 1) * width);
                    t.basis.remove(r);
                    t.rows -= 1;
                }
            }
        } else {
            r += 1;
        }
    }

    // Phase 2: reduced costs for the true objective.
    let mut objective = vec![0.0; width];
    objective[..n].copy_from_slice(cost);
    for r in 0..t.rows {
        let cb = cost[t.basis[r]];
        if cb != 0.0 {
            for c in 0..width {
                objective[c] -= cb * t.at(r, c);
            }
        }
    }
    t.optimize(&mut objective, n)?;

    let mut x = vec![0.0; n];
    for r in 0..t.rows {
        if t.basis[r] < n {
            x[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    let objective = x.iter().zip(cost).map(|(xi, ci)| xi * ci).sum();
    Ok(LpSolution { x, objective })
}

/// Solves the transportation problem `min Σ γ_ij cost_ij` with marginals `supply`, `demand`.
///
/// Returns the row-major coupling and its cost.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> Result<LpSolution> {
    let (m, n) = (supply.len(), demand.len());
    let mut rows = Vec::with_capacity(m + n);
    for i in 0..m {
        let mut row = vec![0.0; m * n];
        row[i * n..(i + 1) * n].iter_mut().for_each(|v| *v = 1.0);
        rows.push(row);
    }
    for j in 0..n {
        let mut row = vec![0.0; m * n];
        for i in 0..m {
            row[i * n + j] = 1.0;
        }
        rows.push(row);
    }
    let rhs: Vec<f64> = supply.iter().chain(demand).copied().collect();
    let flat: Vec<f64> = cost.iter().flatten().copied().collect();
    solve_equality_lp(&rows, &rhs, &flat)
}
