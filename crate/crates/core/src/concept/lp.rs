//! Dense two-phase simplex for small equality-form LPs:
//! minimize cᵀx subject to Ax = b, x ≥ 0.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;
const MAX_ITER_FACTOR: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible { phase_one_value: f64 },
}

struct Tableau {
    // rows × (cols + 1); the last column holds the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Reduced costs of `cost` with respect to the current basis.
    fn reduced(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        d.resize(self.cols, 0.0);
        for (row, &b) in self.t.iter().zip(&self.basis) {
            let cb = cost.get(b).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (j, dj) in d.iter_mut().enumerate() {
                    *dj -= cb * row[j];
                }
            }
        }
        d
    }

    /// Simplex iterations with Bland's rule over the allowed columns.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<()> {
        let limit = MAX_ITER_FACTOR * (self.cols + self.t.len()).max(1);
        for _ in 0..limit {
            let d = self.reduced(cost);
            let Some(enter) = (0..allowed).find(|&j| d[j] < -PIVOT_TOL) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[enter];
                if a > PIVOT_TOL {
                    let ratio = row[self.cols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-15 || (ratio <= lr + 1e-15 && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Numerical("linear program is unbounded".into()));
            };
            self.pivot(r, enter);
        }
        Err(Error::Numerical("simplex iteration limit reached".into()))
    }
}

/// Solves min cᵀx, Ax = b, x ≥ 0. Redundant equality rows are dropped
/// after phase one. `feas_tol` bounds the phase-one residual accepted as feasible.
pub fn solve(a: &[Vec<f64>], b: &[f64], c: &[f64], feas_tol: f64) -> Result<LpOutcome> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|r| r.len() != n) {
        return Err(Error::dim("LP constraint shapes disagree"));
    }
    // Phase one: artificial variable per row, rows sign-normalized to b ≥ 0.
    let cols = n + m;
    let mut t = Vec::with_capacity(m);
    for (i, (row, &bi)) in a.iter().zip(b).enumerate() {
        let s = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut r: Vec<f64> = row.iter().map(|v| s * v).collect();
        r.resize(cols + 1, 0.0);
        r[n + i] = 1.0;
        r[cols] = s * bi;
        t.push(r);
    }
    let mut tab = Tableau { t, basis: (n..n + m).collect(), cols };
    let mut phase_one = vec![0.0; cols];
    for v in &mut phase_one[n..] {
        *v = 1.0;
    }
    tab.optimize(&phase_one, cols)?;
    let art: f64 = tab.t.iter().zip(&tab.basis).filter(|(_, &bv)| bv >= n).map(|(r, _)| r[cols]).sum();
    if art > feas_tol {
        return Ok(LpOutcome::Infeasible { phase_one_value: art });
    }
    // Drive remaining artificials out of the basis; drop rows that cannot be.
    let mut i = 0;
    while i < tab.t.len() {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab.t[i][j].abs() > 1e-9) {
                tab.pivot(i, j);
                i += 1;
            } else {
                tab.t.remove(i);
                tab.basis.remove(i);
            }
        } else {
            i += 1;
        }
    }
    // Phase two over the original columns only.
    for row in &mut tab.t {
        for v in &mut row[n..cols] {
            *v = 0.0;
        }
    }
    tab.optimize(c, n)?;
    let mut x = vec![0.0; n];
    for (row, &bv) in tab.t.iter().zip(&tab.basis) {
        if bv < n {
            x[bv] = row[cols].max(0.0);
        }
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpOutcome::Optimal { x, value })
}
