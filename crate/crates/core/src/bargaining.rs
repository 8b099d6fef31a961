//! Two-player bargaining: Nash solution, alternating offers, ultimatum,
//! and checks of the Nash axioms.
//!
//! Utilities are `[first, second]`; in a reduced persuasion game the first
//! player is the sender.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples used to scan a parametric frontier.
pub const CURVE_SAMPLES: usize = 10_001;

const GOLDEN_ITERS: usize = 200;

pub type Utility = [f64; 2];

/// Parametric frontier `t -> (y_i(t), y_j(t))` on `[lo, hi]`.
#[derive(Clone)]
pub struct Curve {
    pub lo: f64,
    pub hi: f64,
    f: Arc<dyn Fn(f64) -> Utility + Send + Sync>,
}

impl Curve {
    pub fn new(lo: f64, hi: f64, f: impl Fn(f64) -> Utility + Send + Sync + 'static) -> Self {
        assert!(lo <= hi, "empty parameter range");
        Curve {
            lo,
            hi,
            f: Arc::new(f),
        }
    }

    pub fn at(&self, t: f64) -> Utility {
        (self.f)(t)
    }

    pub fn sample_points(&self, n: usize) -> Vec<f64> {
        if n <= 1 || self.hi == self.lo {
            return vec![self.lo];
        }
        (0..n)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (n - 1) as f64)
            .collect()
    }

    fn restricted(&self, lo: f64, hi: f64) -> Curve {
        Curve {
            lo,
            hi,
            f: self.f.clone(),
        }
    }
}

impl fmt::Debug for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Curve[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Clone, Debug)]
pub enum Feasibility {
    Finite(Vec<Utility>),
    Curve(Curve),
}

#[derive(Clone, Debug)]
pub struct BargainingGame {
    pub feasibility: Feasibility,
    pub disagreement: Utility,
}

impl BargainingGame {
    pub fn finite(points: Vec<Utility>, disagreement: Utility) -> Self {
        BargainingGame {
            feasibility: Feasibility::Finite(points),
            disagreement,
        }
    }

    pub fn curve(curve: Curve, disagreement: Utility) -> Self {
        BargainingGame {
            feasibility: Feasibility::Curve(curve),
            disagreement,
        }
    }

    /// Finite points, or the standard sampling of a curve.
    pub fn sampled(&self, n: usize) -> Vec<Utility> {
        match &self.feasibility {
            Feasibility::Finite(p) => p.clone(),
            Feasibility::Curve(c) => c.sample_points(n).into_iter().map(|t| c.at(t)).collect(),
        }
    }

    /// Image under `y -> scale * y + shift` coordinatewise.
    pub fn affine(&self, scale: Utility, shift: Utility) -> BargainingGame {
        let map = move |y: Utility| [scale[0] * y[0] + shift[0], scale[1] * y[1] + shift[1]];
        let feasibility = match &self.feasibility {
            Feasibility::Finite(p) => Feasibility::Finite(p.iter().map(|&y| map(y)).collect()),
            Feasibility::Curve(c) => {
                let inner = c.clone();
                Feasibility::Curve(Curve::new(c.lo, c.hi, move |t| map(inner.at(t))))
            }
        };
        BargainingGame {
            feasibility,
            disagreement: map(self.disagreement),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locator {
    Index(usize),
    Parameter(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Agreement {
    pub utilities: Utility,
    pub locator: Locator,
}

fn nash_product(y: Utility, d: Utility) -> f64 {
    if y[0] < d[0] || y[1] < d[1] {
        f64::NEG_INFINITY
    } else {
        (y[0] - d[0]) * (y[1] - d[1])
    }
}

fn strictly_above(y: Utility, d: Utility) -> bool {
    y[0] > d[0] && y[1] > d[1]
}

fn improves(p: f64, best: f64) -> bool {
    p > best + 1e-12 * best.abs().max(1e-300)
}

fn no_gain_error() -> Error {
    Error::Precondition(
        "no feasible agreement has payoffs that exceed those at the disagreement point".into(),
    )
}

/// Maximizes `(y_i - d_i)(y_j - d_j)` over feasible `y >= d`.
///
/// Finite sets are searched exactly; ties go to the lowest index. Curves are
/// scanned on [`CURVE_SAMPLES`] points and refined by golden-section search
/// around the best sample; ties go to the smallest parameter.
pub fn nash_solution(game: &BargainingGame) -> Result<Agreement> {
    let d = game.disagreement;
    match &game.feasibility {
        Feasibility::Finite(points) => {
            if !points.iter().any(|&y| strictly_above(y, d)) {
                return Err(no_gain_error());
            }
            let mut best = (0, f64::NEG_INFINITY);
            for (i, &y) in points.iter().enumerate() {
                let p = nash_product(y, d);
                if best.1 == f64::NEG_INFINITY && p > best.1 || improves(p, best.1) {
                    best = (i, p);
                }
            }
            Ok(Agreement {
                utilities: points[best.0],
                locator: Locator::Index(best.0),
            })
        }
        Feasibility::Curve(c) => {
            let ts = c.sample_points(CURVE_SAMPLES);
            let ys: Vec<Utility> = ts.iter().map(|&t| c.at(t)).collect();
            if !ys.iter().any(|&y| strictly_above(y, d)) {
                return Err(no_gain_error());
            }
            let mut best = (0, f64::NEG_INFINITY);
            for (k, &y) in ys.iter().enumerate() {
                let p = nash_product(y, d);
                if best.1 == f64::NEG_INFINITY && p > best.1 || improves(p, best.1) {
                    best = (k, p);
                }
            }
            let k = best.0;
            let a = ts[k.saturating_sub(1)];
            let b = ts[(k + 1).min(ts.len() - 1)];
            let t = golden_max(|t| nash_product(c.at(t), d), a, b);
            let (t, y) = if improves(nash_product(c.at(t), d), best.1) {
                (t, c.at(t))
            } else {
                (ts[k], ys[k])
            };
            Ok(Agreement {
                utilities: y,
                locator: Locator::Parameter(t),
            })
        }
    }
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let tol = 1e-13 * (1.0 + a.abs().max(b.abs()));
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    for _ in 0..GOLDEN_ITERS {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e);
        }
    }
    (a + b) / 2.0
}

/// Alternating-offers game over a pie with discount factors
/// `[proposer, responder]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RubinsteinSpec {
    pub pie: f64,
    pub delta: [f64; 2],
}

/// Subgame perfect split `[proposer, responder]`: the proposer keeps
/// `(1 - δ2) / (1 - δ1 δ2)` of the pie and agreement is immediate.
pub fn rubinstein_split(spec: &RubinsteinSpec) -> Result<Utility> {
    let [d1, d2] = spec.delta;
    if !(0.0..=1.0).contains(&d1) || !(0.0..=1.0).contains(&d2) {
        return Err(Error::Config(format!("discount factors {d1}, {d2} must lie in [0, 1]")));
    }
    if !(spec.pie > 0.0) || !spec.pie.is_finite() {
        return Err(Error::Config(format!("pie {} must be positive", spec.pie)));
    }
    if d1 == 1.0 && d2 == 1.0 {
        return Err(Error::Singular(format!(
            "no discounting on either side; the split tends to ({}, {}) as both factors approach 1",
            spec.pie / 2.0,
            spec.pie / 2.0
        )));
    }
    let share = (1.0 - d2) / (1.0 - d1 * d2);
    let proposer = spec.pie * share;
    Ok([proposer, spec.pie - proposer])
}

/// One-shot ultimatum over `pie` divisible in steps of `unit`. A responder who
/// accepts at indifference leaves the proposer everything; otherwise the
/// proposer concedes the smallest unit.
pub fn ultimatum_spe(pie: f64, unit: f64, accept_at_indifference: bool) -> Result<Utility> {
    if !(pie > 0.0) || !(unit > 0.0) || unit > pie {
        return Err(Error::Config(format!("need 0 < unit <= pie, got unit {unit}, pie {pie}")));
    }
    if accept_at_indifference {
        Ok([pie, 0.0])
    } else {
        Ok([pie - unit, unit])
    }
}

/// Frontier queries used to compute stationary alternating-offer equilibria.
pub trait Frontier {
    /// Best point for player `who` subject to the other player getting at
    /// least `floor`; `None` when no feasible point meets the floor.
    fn best_given_floor(&self, who: usize, floor: f64) -> Option<Utility>;
    /// Most the other player can get when `who` makes the offer.
    fn responder_max(&self, who: usize) -> Option<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpeOffers {
    /// Agreement when player `k` proposes, indexed by `k`.
    pub proposals: [Utility; 2],
}

/// Stationary subgame perfect offers of the alternating-offers game on a
/// convex frontier: each proposer gives the responder exactly the discounted
/// value of proposing next round.
pub fn alternating_offers_spe(frontier: &dyn Frontier, d: Utility, delta: [f64; 2]) -> Result<SpeOffers> {
    if delta[0] >= 1.0 && delta[1] >= 1.0 {
        return Err(Error::Singular("both discount factors are 1".into()));
    }
    let missing = || Error::Precondition("frontier has no point above the disagreement point".into());
    // A floor above anything the proposer can concede is capped: the proposer
    // then offers as much as it can.
    let cap = [
        frontier.responder_max(0).ok_or_else(missing)?,
        frontier.responder_max(1).ok_or_else(missing)?,
    ];
    if cap[0] < d[1] || cap[1] < d[0] {
        return Err(missing());
    }
    let offer = |who: usize, floor: f64| frontier.best_given_floor(who, floor.min(cap[who])).ok_or_else(missing);
    let mut x = offer(0, d[1])?;
    let mut y = offer(1, d[0])?;
    for _ in 0..200_000 {
        let y_next = offer(1, d[0] + delta[0] * (x[0] - d[0]))?;
        let x_next = offer(0, d[1] + delta[1] * (y_next[1] - d[1]))?;
        let moved = (x_next[0] - x[0]).abs() + (x_next[1] - x[1]).abs() + (y_next[0] - y[0]).abs()
            + (y_next[1] - y[1]).abs();
        x = x_next;
        y = y_next;
        if moved <= 1e-15 {
            break;
        }
    }
    Ok(SpeOffers { proposals: [x, y] })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AxiomReport {
    pub pareto: bool,
    /// Vacuously true when the game is not symmetric.
    pub symmetry: bool,
    pub iia: bool,
    pub affine_invariance: bool,
    pub symmetric_game: bool,
}

impl AxiomReport {
    pub fn all(&self) -> bool {
        self.pareto && self.symmetry && self.iia && self.affine_invariance
    }
}

pub type Solver<'a> = &'a dyn Fn(&BargainingGame) -> Result<Agreement>;

const AXIOM_SAMPLES: usize = 2_001;

fn close(a: Utility, b: Utility, tol: f64) -> bool {
    (a[0] - b[0]).abs() <= tol * (1.0 + a[0].abs()) && (a[1] - b[1]).abs() <= tol * (1.0 + a[1].abs())
}

fn is_symmetric(game: &BargainingGame, tol: f64) -> bool {
    let d = game.disagreement;
    if (d[0] - d[1]).abs() > tol {
        return false;
    }
    let pts = game.sampled(AXIOM_SAMPLES);
    let reach = match &game.feasibility {
        Feasibility::Finite(_) => tol,
        Feasibility::Curve(_) => {
            let gap = pts
                .windows(2)
                .map(|w| (w[1][0] - w[0][0]).abs().max((w[1][1] - w[0][1]).abs()))
                .fold(0.0, f64::max);
            1.5 * gap + tol
        }
    };
    pts.iter().all(|y| {
        pts.iter()
            .any(|z| (z[0] - y[1]).abs() <= reach && (z[1] - y[0]).abs() <= reach)
    })
}

/// Runs `solver` on `game` and on derived games to test Pareto optimality,
/// symmetry, independence of irrelevant alternatives and invariance to
/// positive affine rescaling.
pub fn check_axioms(solver: Solver, game: &BargainingGame) -> Result<AxiomReport> {
    let sol = solver(game)?;
    let y = sol.utilities;
    let tol = match game.feasibility {
        Feasibility::Finite(_) => 1e-9,
        Feasibility::Curve(_) => 1e-6,
    };

    let pareto = !game.sampled(CURVE_SAMPLES).iter().any(|z| {
        z[0] >= y[0] - 1e-12 && z[1] >= y[1] - 1e-12 && (z[0] > y[0] + tol || z[1] > y[1] + tol)
    });

    let symmetric_game = is_symmetric(game, 1e-9);
    let symmetry = !symmetric_game || (y[0] - y[1]).abs() <= tol;

    let sub = match (&game.feasibility, sol.locator) {
        (Feasibility::Finite(points), Locator::Index(k)) => {
            let kept: Vec<Utility> = points
                .iter()
                .enumerate()
                .filter(|(i, _)| *i == k || i % 2 == 0)
                .map(|(_, p)| *p)
                .collect();
            BargainingGame::finite(kept, game.disagreement)
        }
        (Feasibility::Curve(c), Locator::Parameter(t)) => {
            BargainingGame::curve(c.restricted(t - (t - c.lo) / 2.0, t + (c.hi - t) / 2.0), game.disagreement)
        }
        _ => return Err(Error::Precondition("solver returned a locator of the wrong kind".into())),
    };
    let iia = close(solver(&sub)?.utilities, y, tol);

    let (scale, shift) = ([2.0, 0.5], [1.0, -3.0]);
    let mapped = solver(&game.affine(scale, shift))?.utilities;
    let expected = [scale[0] * y[0] + shift[0], scale[1] * y[1] + shift[1]];
    let affine_invariance = close(mapped, expected, tol);

    Ok(AxiomReport {
        pareto,
        symmetry,
        iia,
        affine_invariance,
        symmetric_game,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_ties_pick_lowest_index() {
        let game = BargainingGame::finite(vec![[1.0, 1.0], [2.0, 0.5], [0.5, 2.0]], [0.0, 0.0]);
        let a = nash_solution(&game).unwrap();
        assert_eq!(a.locator, Locator::Index(0));
        assert_eq!(a.utilities, [1.0, 1.0]);
    }

    #[test]
    fn points_below_disagreement_are_ignored() {
        // (-3, -3) has a large product but is not individually rational.
        let game = BargainingGame::finite(vec![[-3.0, -3.0], [1.0, 0.5]], [0.0, 0.0]);
        assert_eq!(nash_solution(&game).unwrap().utilities, [1.0, 0.5]);
    }

    #[test]
    fn unit_pie_splits_evenly() {
        let game = BargainingGame::curve(Curve::new(0.0, 1.0, |x| [x, 1.0 - x]), [0.0, 0.0]);
        let a = nash_solution(&game).unwrap();
        assert!((a.utilities[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bounded_frontier_prefers_fair_end() {
        let game = BargainingGame::curve(
            Curve::new(0.0, 0.5, |e| [(1.0 + 2.0 * e) / 3.0, (1.0 - 2.0 * e) / 3.0]),
            [0.0, 0.0],
        );
        let a = nash_solution(&game).unwrap();
        assert_eq!(a.locator, Locator::Parameter(0.0));
    }

    #[test]
    fn nothing_above_disagreement_is_an_error() {
        let game = BargainingGame::finite(vec![[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0]);
        let err = nash_solution(&game).unwrap_err();
        assert!(err.to_string().contains("exceed those at the disagreement point"));
    }

    #[test]
    fn rubinstein_closed_form() {
        let s = rubinstein_split(&RubinsteinSpec { pie: 1.0, delta: [0.9, 0.9] }).unwrap();
        assert!((s[0] - 1.0 / 1.9).abs() < 1e-15);
        assert!((s[1] - 0.9 / 1.9).abs() < 1e-15);
        let s = rubinstein_split(&RubinsteinSpec { pie: 1.0, delta: [0.0, 0.5] }).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-15);
        assert!(matches!(
            rubinstein_split(&RubinsteinSpec { pie: 1.0, delta: [1.0, 1.0] }),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn ultimatum_coins() {
        assert_eq!(ultimatum_spe(100.0, 1.0, false).unwrap(), [99.0, 1.0]);
        assert_eq!(ultimatum_spe(100.0, 1.0, true).unwrap(), [100.0, 0.0]);
    }
}
