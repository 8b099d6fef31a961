//! Dense two-phase tableau simplex.
//!
//! Bland's rule picks the entering column (lowest index with negative reduced
//! cost) and breaks ratio-test ties by the lowest basic variable, so the
//! method cannot cycle. Variables are nonnegative and the objective is
//! maximized.

use serde::Serialize;

use crate::error::{Error, Result};

const EPS: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Pivot {
    pub iteration: usize,
    pub entering: usize,
    pub leaving: usize,
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

/// `max c·x  s.t.  rows, x >= 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn maximize(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn subject_to(&mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coefficients.len(), self.objective.len(), "constraint width");
        self.constraints.push(Constraint {
            coefficients,
            relation,
            rhs,
        });
        self
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Checks a Farkas certificate: `yᵀA <= 0`, `yᵀb > 0`, `y <= 0` on `<=`
    /// rows and `y >= 0` on `>=` rows. Any such `y` proves infeasibility.
    pub fn certifies_infeasibility(&self, y: &[f64]) -> bool {
        if y.len() != self.constraints.len() {
            return false;
        }
        let tol = 1e-9;
        for (c, &yi) in self.constraints.iter().zip(y) {
            match c.relation {
                Relation::Le if yi > tol => return false,
                Relation::Ge if yi < -tol => return false,
                _ => {}
            }
        }
        for j in 0..self.n_vars() {
            let s: f64 = self.constraints.iter().zip(y).map(|(c, yi)| yi * c.coefficients[j]).sum();
            if s > tol {
                return false;
            }
        }
        let yb: f64 = self.constraints.iter().zip(y).map(|(c, yi)| yi * c.rhs).sum();
        yb > tol
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    n: usize,
    /// Rows of `[A | b]` over all columns: originals, slacks, artificials.
    t: Vec<Vec<f64>>,
    /// Reduced costs; the last slot holds `-z`.
    d: Vec<f64>,
    basis: Vec<usize>,
    /// Column that was basic in each row at the start, for the certificate.
    initial: Vec<usize>,
    flipped: Vec<bool>,
    artificial_from: usize,
    cols: usize,
    pivots: Vec<Pivot>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let n = lp.n_vars();
        let m = lp.constraints.len();
        let mut rows = Vec::with_capacity(m);
        let mut flipped = Vec::with_capacity(m);
        for c in &lp.constraints {
            let (mut a, mut b, mut rel) = (c.coefficients.clone(), c.rhs, c.relation);
            if b < 0.0 {
                a.iter_mut().for_each(|v| *v = -*v);
                b = -b;
                rel = match rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                flipped.push(true);
            } else {
                flipped.push(false);
            }
            rows.push((a, b, rel));
        }
        let n_slack = rows.iter().filter(|r| r.2 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.2 != Relation::Le).count();
        let artificial_from = n + n_slack;
        let cols = artificial_from + n_art;
        let mut t = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let (mut next_slack, mut next_art) = (n, artificial_from);
        for (a, b, rel) in rows {
            let mut row = vec![0.0; cols + 1];
            row[..n].copy_from_slice(&a);
            row[cols] = b;
            match rel {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            t.push(row);
        }
        let initial = basis.clone();
        Tableau {
            n,
            t,
            d: vec![0.0; cols + 1],
            basis,
            initial,
            flipped,
            artificial_from,
            cols,
            pivots: Vec::new(),
        }
    }

    fn set_costs(&mut self, cost: &[f64]) {
        self.d = vec![0.0; self.cols + 1];
        self.d[..self.cols].copy_from_slice(cost);
        for (i, row) in self.t.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (dj, v) in self.d.iter_mut().zip(row) {
                    *dj -= cb * v;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, k: usize) {
        let p = self.t[r][k];
        self.t[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[k];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[k] = 0.0;
            }
        }
        let f = self.d[k];
        if f != 0.0 {
            for (v, pv) in self.d.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.d[k] = 0.0;
        }
        self.basis[r] = k;
        self.pivots.push(Pivot {
            iteration: self.pivots.len(),
            entering: k,
            leaving: r,
            objective: -self.d[self.cols],
        });
    }

    /// Runs Bland's rule on columns `< limit`. Returns `Err(Unbounded)` when the
    /// entering column has no positive entry.
    fn optimize(&mut self, limit: usize) -> Result<()> {
        loop {
            if self.pivots.len() >= MAX_PIVOTS {
                let keep = self.pivots.len().saturating_sub(50);
                return Err(Error::Stalled {
                    iterations: self.pivots.len(),
                    trace: self.pivots[keep..].to_vec(),
                });
            }
            let Some(k) = (0..limit).find(|&j| self.d[j] < -EPS) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                if row[k] > EPS {
                    let ratio = row[self.cols] / row[k];
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - EPS || (ratio <= br + EPS && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, k),
                None => return Err(Error::Unbounded),
            }
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        // Phase 1: minimise the sum of artificials.
        if self.artificial_from < self.cols {
            let mut cost = vec![0.0; self.cols];
            cost[self.artificial_from..].iter_mut().for_each(|c| *c = 1.0);
            self.set_costs(&cost);
            self.optimize(self.cols)?;
            let infeasibility = -self.d[self.cols];
            if infeasibility > FEAS_TOL {
                let certificate = self
                    .initial
                    .iter()
                    .zip(&self.flipped)
                    .map(|(&j, &flip)| {
                        let y = cost[j] - self.d[j];
                        if flip {
                            -y
                        } else {
                            y
                        }
                    })
                    .collect();
                return Err(Error::Infeasible { certificate });
            }
            self.evict_artificials();
        }
        // Phase 2 on the original objective, artificial columns barred.
        let mut cost = vec![0.0; self.cols];
        for (c, &v) in cost.iter_mut().zip(&lp.objective) {
            *c = -v;
        }
        self.set_costs(&cost);
        self.optimize(self.artificial_from)?;
        let mut x = vec![0.0; self.n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n {
                x[b] = self.t[i][self.cols].max(0.0);
            }
        }
        let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            x,
            value,
            pivots: self.pivots.len(),
        })
    }

    /// Pivots zero-level artificials out of the basis and drops redundant rows.
    fn evict_artificials(&mut self) {
        let mut i = 0;
        while i < self.t.len() {
            if self.basis[i] >= self.artificial_from {
                let col = (0..self.artificial_from).find(|&j| self.t[i][j].abs() > EPS);
                match col {
                    Some(k) => self.pivot(i, k),
                    None => {
                        self.t.remove(i);
                        self.basis.remove(i);
                        self.initial.remove(i);
                        self.flipped.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::maximize(vec![3.0, 5.0]);
        lp.subject_to(vec![1.0, 0.0], Relation::Le, 4.0)
            .subject_to(vec![0.0, 2.0], Relation::Le, 12.0)
            .subject_to(vec![3.0, 2.0], Relation::Le, 18.0);
        let sol = lp.solve().unwrap();
        assert!((sol.value - 36.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9 && (sol.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // max x + y, x + y = 1, x >= 0.25, y >= 0.5
        let mut lp = LinearProgram::maximize(vec![1.0, 2.0]);
        lp.subject_to(vec![1.0, 1.0], Relation::Eq, 1.0)
            .subject_to(vec![1.0, 0.0], Relation::Ge, 0.25)
            .subject_to(vec![0.0, 1.0], Relation::Ge, 0.5);
        let sol = lp.solve().unwrap();
        assert!((sol.x[0] - 0.25).abs() < 1e-12);
        assert!((sol.value - 1.75).abs() < 1e-12);
    }

    #[test]
    fn infeasible_has_certificate() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.subject_to(vec![1.0, 1.0], Relation::Le, 1.0)
            .subject_to(vec![1.0, 1.0], Relation::Ge, 2.0);
        match lp.solve() {
            Err(Error::Infeasible { certificate }) => assert!(lp.certifies_infeasibility(&certificate)),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn infeasible_with_negative_rhs() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.subject_to(vec![1.0], Relation::Le, -1.0);
        match lp.solve() {
            Err(Error::Infeasible { certificate }) => assert!(lp.certifies_infeasibility(&certificate)),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_is_reported() {
        let mut lp = LinearProgram::maximize(vec![1.0, 0.0]);
        lp.subject_to(vec![-1.0, 1.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve(), Err(Error::Unbounded)));
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.subject_to(vec![1.0, 1.0], Relation::Eq, 1.0)
            .subject_to(vec![2.0, 2.0], Relation::Eq, 2.0);
        let sol = lp.solve().unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the largest-coefficient rule.
        let mut lp = LinearProgram::maximize(vec![0.75, -150.0, 0.02, -6.0]);
        lp.subject_to(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .subject_to(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .subject_to(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let sol = lp.solve().unwrap();
        assert!((sol.value - 0.05).abs() < 1e-9);
    }
}
