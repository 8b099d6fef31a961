//! Brute-force oracles shared by the oracle suite and the acceptance binary.
//! Nothing here calls the simplex code.
#![allow(dead_code)]

use infobargain::{PersuasionTask, Role};
use rand::Rng;

pub fn random_task<R: Rng>(rng: &mut R, n_s: usize, n_a: usize) -> PersuasionTask {
    let w: Vec<f64> = (0..n_s).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let prior = w.iter().map(|v| v / total).collect();
    let mut table = || -> Vec<Vec<f64>> {
        (0..n_s)
            .map(|_| (0..n_a).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    };
    let sender = table();
    let receiver = table();
    PersuasionTask::new("random", prior, sender, receiver).unwrap()
}

/// Solves the square system `m x = b` by Gaussian elimination with partial
/// pivoting. `None` when singular.
pub fn solve_square(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-11 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| m[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / m[row][row];
    }
    Some(x)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

/// max `c·x` over `x ≥ 0` and the given rows, by enumerating every basic
/// solution. `None` if no basic solution is feasible.
pub fn vertex_enumeration(c: &[f64], rows: &[(Vec<f64>, Rel, f64)]) -> Option<f64> {
    let n = c.len();
    // Candidate active sets: every equality, plus a choice among the
    // inequalities and the bounds `x_i = 0`.
    let mut optional: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut forced: Vec<(Vec<f64>, f64)> = Vec::new();
    for (a, rel, b) in rows {
        match rel {
            Rel::Eq => forced.push((a.clone(), *b)),
            _ => optional.push((a.clone(), *b)),
        }
    }
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        optional.push((e, 0.0));
    }
    if forced.len() > n {
        return None;
    }
    let need = n - forced.len();
    let feasible = |x: &[f64]| {
        x.iter().all(|&v| v >= -1e-9)
            && rows.iter().all(|(a, rel, b)| {
                let lhs: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
                let tol = 1e-9 * (1.0 + b.abs());
                match rel {
                    Rel::Le => lhs <= b + tol,
                    Rel::Ge => lhs >= b - tol,
                    Rel::Eq => (lhs - b).abs() <= tol,
                }
            })
    };
    let mut best: Option<f64> = None;
    let mut pick = Vec::with_capacity(need);
    choose(optional.len(), need, 0, &mut pick, &mut |idx| {
        let mut m: Vec<Vec<f64>> = forced.iter().map(|r| r.0.clone()).collect();
        let mut b: Vec<f64> = forced.iter().map(|r| r.1).collect();
        for &i in idx {
            m.push(optional[i].0.clone());
            b.push(optional[i].1);
        }
        if let Some(x) = solve_square(m, b) {
            if feasible(&x) {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(v, |w: f64| w.max(v)));
            }
        }
    });
    best
}

fn choose(n: usize, k: usize, start: usize, pick: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..n {
        if n - i < k - pick.len() {
            break;
        }
        pick.push(i);
        choose(n, k, i + 1, pick, f);
        pick.pop();
    }
}

/// A posterior with the sender's value under one receiver best response.
#[derive(Clone, Debug)]
struct Candidate {
    mu: Vec<f64>,
    value: f64,
}

fn labelled(task: &PersuasionTask, mu: Vec<f64>, tie_tol: f64) -> Vec<Candidate> {
    let (n_s, n_a) = (task.n_states(), task.n_actions());
    let u: Vec<f64> = (0..n_a)
        .map(|a| (0..n_s).map(|s| mu[s] * task.reward(Role::Receiver, s, a)).sum())
        .collect();
    let top = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0..n_a)
        .filter(|&a| u[a] >= top - tie_tol)
        .map(|a| Candidate {
            value: (0..n_s).map(|s| mu[s] * task.reward(Role::Sender, s, a)).sum(),
            mu: mu.clone(),
        })
        .collect()
}

/// Best convex combination of `n_s` candidates that averages to the prior.
fn best_split(task: &PersuasionTask, cands: &[Candidate]) -> f64 {
    let n_s = task.n_states();
    let mu0 = task.prior();
    let weights = |pts: &[&Candidate]| -> Option<Vec<f64>> {
        let k = pts.len();
        let mut m = vec![vec![1.0; k]; k];
        let mut b = vec![1.0; k];
        for row in 0..k - 1 {
            for (col, p) in pts.iter().enumerate() {
                m[row][col] = p.mu[row];
            }
            b[row] = mu0[row];
        }
        let l = solve_square(m, b)?;
        l.iter().all(|&w| w >= -1e-12).then_some(l)
    };
    let mut best = f64::NEG_INFINITY;
    let mut pick = Vec::with_capacity(n_s);
    choose(cands.len(), n_s, 0, &mut pick, &mut |idx| {
        let pts: Vec<&Candidate> = idx.iter().map(|&i| &cands[i]).collect();
        if let Some(l) = weights(&pts) {
            best = best.max(l.iter().zip(&pts).map(|(w, p)| w * p.value).sum());
        }
    });
    best
}

/// Exact sender optimum by concavification: the receiver's best-response
/// regions are polytopes whose vertices lie where indifference hyperplanes
/// and simplex faces meet, and an optimal split only uses those vertices.
pub fn breakpoint_value(task: &PersuasionTask) -> f64 {
    let (n_s, n_a) = (task.n_states(), task.n_actions());
    let mut planes: Vec<Vec<f64>> = Vec::new();
    for s in 0..n_s {
        let mut e = vec![0.0; n_s];
        e[s] = 1.0;
        planes.push(e);
    }
    for a in 0..n_a {
        for b in a + 1..n_a {
            planes.push(
                (0..n_s)
                    .map(|s| task.reward(Role::Receiver, s, a) - task.reward(Role::Receiver, s, b))
                    .collect(),
            );
        }
    }
    let mut cands = Vec::new();
    let mut pick = Vec::new();
    choose(planes.len(), n_s - 1, 0, &mut pick, &mut |idx| {
        let mut m: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].clone()).collect();
        let mut b = vec![0.0; n_s - 1];
        m.push(vec![1.0; n_s]);
        b.push(1.0);
        if let Some(mu) = solve_square(m, b) {
            if mu.iter().all(|&p| p >= -1e-12) {
                let mu = mu.iter().map(|p| p.max(0.0)).collect();
                cands.extend(labelled(task, mu, 1e-9));
            }
        }
    });
    best_split(task, &cands)
}

/// Sender's best value over splits of the prior into grid posteriors of
/// the given step, receiver best-responding with ties broken for the sender.
///
/// Each action's sender payoff is linear on the grid points where it is a
/// receiver best response, so only the hull vertices of those point sets
/// can appear in an optimal split.
pub fn posterior_grid_value(task: &PersuasionTask, step: f64) -> f64 {
    let n_s = task.n_states();
    let n_a = task.n_actions();
    assert!((2..=3).contains(&n_s), "grid oracle covers two or three states");
    let n = (1.0 / step).round() as i64;
    let mut regions: Vec<Vec<[i64; 2]>> = vec![Vec::new(); n_a];
    let mut visit = |i: i64, j: i64| {
        let k = [i, j, n - i - j];
        let mu: Vec<f64> = k[..n_s].iter().map(|&v| v as f64 / n as f64).collect();
        let u: Vec<f64> = (0..n_a)
            .map(|a| (0..n_s).map(|s| mu[s] * task.reward(Role::Receiver, s, a)).sum())
            .collect();
        let top = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for a in 0..n_a {
            if u[a] >= top - 1e-12 {
                regions[a].push([i, j]);
            }
        }
    };
    for i in 0..=n {
        if n_s == 2 {
            visit(i, n - i);
        } else {
            for j in 0..=n - i {
                visit(i, j);
            }
        }
    }
    let mut cands = Vec::new();
    for (a, pts) in regions.into_iter().enumerate() {
        let hull: Vec<[i64; 2]> = if n_s == 2 {
            let lo = pts.iter().min_by_key(|p| p[0]);
            let hi = pts.iter().max_by_key(|p| p[0]);
            lo.into_iter().chain(hi).copied().collect()
        } else {
            convex_hull(pts)
        };
        for p in hull {
            let k = [p[0], p[1], n - p[0] - p[1]];
            let mu: Vec<f64> = k[..n_s].iter().map(|&v| v as f64 / n as f64).collect();
            let value = (0..n_s).map(|s| mu[s] * task.reward(Role::Sender, s, a)).sum();
            cands.push(Candidate { mu, value });
        }
    }
    best_split(task, &cands)
}

/// Andrew's monotone chain on integer points; returns the hull vertices.
fn convex_hull(mut pts: Vec<[i64; 2]>) -> Vec<[i64; 2]> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [i64; 2], a: [i64; 2], b: [i64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[i64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[i64; 2]>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}
