//! Persuasion recast as a bargaining game.
//!
//! The disagreement point is what both players get when the sender babbles
//! and the receiver acts on the prior. Feasible agreements are payoff pairs
//! reachable by scheme/rule profiles.

use std::collections::HashSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bargaining::{golden_max, BargainingGame, Frontier, Locator, Utility};
use crate::error::{Error, Result};
use crate::model::{evaluate, ActionRule, PayoffPair, PersuasionTask, Role, SignalingScheme, Stochastic};
use crate::persuasion::lp::Relation;
use crate::persuasion::{
    babbling_scheme, best_response_posterior, best_response_prior, best_response_prior_for, obedient_lp,
    optimize_obedient, payoff_row, scheme_from_solution, ObedientProgram, IC_TOL,
};

/// Payoffs at `(φ0, π0)`.
pub fn disagreement_point(task: &PersuasionTask) -> Result<PayoffPair> {
    evaluate(task, &babbling_scheme(task), &best_response_prior(task))
}

#[derive(Clone, Debug, Serialize)]
pub struct Profile {
    pub scheme: SignalingScheme,
    pub rule: ActionRule,
    pub payoffs: PayoffPair,
}

#[derive(Clone, Debug, Serialize)]
pub struct BetterOutcomes {
    pub holds: bool,
    pub witness: Option<Profile>,
}

/// Whether some obedient profile is strictly better for both players than the
/// disagreement point. Solves `max t` subject to both gains being at least `t`.
pub fn check_better_outcomes(task: &PersuasionTask) -> Result<BetterOutcomes> {
    let d = disagreement_point(task)?;
    let width = task.n_states() * task.n_actions();
    let mut objective = vec![0.0; width + 1];
    objective[width] = 1.0;
    let mut lp = obedient_lp(task, objective);
    for (role, floor) in [(Role::Sender, d.sender), (Role::Receiver, d.receiver)] {
        let mut row = payoff_row(task, role, width + 1);
        row[width] = -1.0;
        lp.subject_to(row, Relation::Ge, floor);
    }
    let sol = lp.solve()?;
    if sol.value <= IC_TOL {
        return Ok(BetterOutcomes {
            holds: false,
            witness: None,
        });
    }
    let scheme = scheme_from_solution(task, &sol.x[..width]);
    let rule = best_response_posterior(task, &scheme)?;
    let payoffs = evaluate(task, &scheme, &rule)?;
    let holds = payoffs.dominates(&d, 0.0);
    Ok(BetterOutcomes {
        holds,
        witness: holds.then_some(Profile { scheme, rule, payoffs }),
    })
}

/// One-parameter family of schemes.
#[derive(Clone)]
pub struct SchemeCurve {
    pub lo: f64,
    pub hi: f64,
    pub name: String,
    f: Arc<dyn Fn(f64) -> SignalingScheme + Send + Sync>,
}

impl SchemeCurve {
    pub fn new(
        name: impl Into<String>,
        lo: f64,
        hi: f64,
        f: impl Fn(f64) -> SignalingScheme + Send + Sync + 'static,
    ) -> Self {
        SchemeCurve {
            lo,
            hi,
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// Binary schemes that always send 1 in state 1 and send 1 in state 0
    /// with probability `η ∈ [0, 1/2]`.
    pub fn binary_eta() -> Self {
        SchemeCurve::new("eta", 0.0, 0.5, |eta| {
            SignalingScheme::binary(eta, 1.0).expect("eta in [0, 1]")
        })
    }

    pub fn at(&self, t: f64) -> SignalingScheme {
        (self.f)(t)
    }
}

impl std::fmt::Debug for SchemeCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SchemeCurve({}, [{}, {}])", self.name, self.lo, self.hi)
    }
}

#[derive(Clone, Debug)]
pub enum FeasibilityBuild {
    /// Schemes on a simplex grid, receiver at `π1`.
    ObedientGrid { step: f64 },
    /// A one-parameter scheme family, receiver at `π1`.
    ObedientCurve { curve: SchemeCurve, step: f64 },
    /// Every scheme and every rule on a simplex grid.
    FullProfile { step: f64 },
}

impl Default for FeasibilityBuild {
    fn default() -> Self {
        FeasibilityBuild::ObedientGrid { step: 1e-3 }
    }
}

impl FeasibilityBuild {
    pub fn full_profile() -> Self {
        FeasibilityBuild::FullProfile { step: 1.0 / 50.0 }
    }
}

/// Refuse grids larger than this many profiles.
pub const MAX_GRID_POINTS: u128 = 50_000_000;

/// All compositions of `m` into `k` parts, lexicographic.
fn compositions(m: u32, k: usize) -> Vec<Vec<u32>> {
    fn rec(m: u32, k: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if k == 1 {
            prefix.push(m);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=m {
            prefix.push(v);
            rec(m - v, k - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, k, &mut Vec::new(), &mut out);
    out
}

/// Grid over row-stochastic matrices: each row is a composition of `m`.
#[derive(Clone, Debug)]
struct SimplexGrid {
    rows: usize,
    cols: usize,
    m: u32,
    row_points: Vec<Vec<u32>>,
}

impl SimplexGrid {
    fn new(rows: usize, cols: usize, step: f64) -> Result<Self> {
        let m = steps_per_unit(step)?;
        Ok(SimplexGrid {
            rows,
            cols,
            m,
            row_points: compositions(m, cols),
        })
    }

    fn len(&self) -> u128 {
        (self.row_points.len() as u128).pow(self.rows as u32)
    }

    fn matrix(&self, mut index: usize) -> Stochastic {
        let base = self.row_points.len();
        let mut digits = vec![0; self.rows];
        for r in (0..self.rows).rev() {
            digits[r] = index % base;
            index /= base;
        }
        let data = digits
            .iter()
            .flat_map(|&d| self.row_points[d].iter().map(|&v| v as f64 / self.m as f64))
            .collect();
        Stochastic::from_raw(self.rows, self.cols, data)
    }
}

fn steps_per_unit(step: f64) -> Result<u32> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Config(format!("grid step {step} must lie in (0, 1]")));
    }
    let m = (1.0 / step).round();
    if (m * step - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("grid step {step} does not divide 1")));
    }
    Ok(m as u32)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FeasiblePoint {
    pub payoffs: PayoffPair,
    pub scheme_index: usize,
    /// Only set in full-profile mode; otherwise the rule is `π1`.
    pub rule_index: Option<usize>,
}

/// A bargaining game induced by a task together with the profiles behind
/// each feasible point.
#[derive(Clone, Debug)]
pub struct InducedGame {
    pub game: BargainingGame,
    pub points: Vec<FeasiblePoint>,
    task: PersuasionTask,
    build: FeasibilityBuild,
}

const DEDUP_TOL: f64 = 1e-9;

fn dedup_key(p: PayoffPair) -> (i64, i64) {
    (
        (p.sender / DEDUP_TOL).round() as i64,
        (p.receiver / DEDUP_TOL).round() as i64,
    )
}

impl InducedGame {
    pub fn task(&self) -> &PersuasionTask {
        &self.task
    }

    pub fn build(&self) -> &FeasibilityBuild {
        &self.build
    }

    pub fn scheme(&self, point: &FeasiblePoint) -> SignalingScheme {
        match &self.build {
            FeasibilityBuild::ObedientGrid { step } | FeasibilityBuild::FullProfile { step } => {
                let grid = SimplexGrid::new(self.task.n_states(), self.task.n_actions(), *step)
                    .expect("validated at build time");
                SignalingScheme(grid.matrix(point.scheme_index))
            }
            FeasibilityBuild::ObedientCurve { curve, step } => curve.at(curve_param(curve, *step, point.scheme_index)),
        }
    }

    pub fn rule(&self, point: &FeasiblePoint) -> ActionRule {
        match (&self.build, point.rule_index) {
            (FeasibilityBuild::FullProfile { step }, Some(r)) => {
                let grid = SimplexGrid::new(self.task.n_actions(), self.task.n_actions(), *step)
                    .expect("validated at build time");
                ActionRule(grid.matrix(r))
            }
            _ => best_response_posterior(&self.task, &self.scheme(point)).expect("shapes match"),
        }
    }

    /// Free parameters of a point: the curve parameter, or the flattened
    /// scheme (and rule) entries.
    pub fn parameters(&self, point: &FeasiblePoint) -> Vec<f64> {
        match &self.build {
            FeasibilityBuild::ObedientCurve { curve, step } => vec![curve_param(curve, *step, point.scheme_index)],
            FeasibilityBuild::ObedientGrid { .. } => self.scheme(point).0.as_flat().to_vec(),
            FeasibilityBuild::FullProfile { .. } => {
                let mut v = self.scheme(point).0.as_flat().to_vec();
                v.extend_from_slice(self.rule(point).0.as_flat());
                v
            }
        }
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let (n_s, n_a) = (self.task.n_states(), self.task.n_actions());
        let scheme = (0..n_s).flat_map(|s| (0..n_a).map(move |a| format!("phi_{s}_{a}")));
        match &self.build {
            FeasibilityBuild::ObedientCurve { curve, .. } => vec![curve.name.clone()],
            FeasibilityBuild::ObedientGrid { .. } => scheme.collect(),
            FeasibilityBuild::FullProfile { .. } => scheme
                .chain((0..n_a).flat_map(|g| (0..n_a).map(move |a| format!("pi_{g}_{a}"))))
                .collect(),
        }
    }

    /// CSV with one row per point: parameters, then sender and receiver payoff.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.parameter_names();
        header.push("sender".into());
        header.push("receiver".into());
        w.write_record(&header)?;
        for p in &self.points {
            let mut rec: Vec<String> = self.parameters(p).iter().map(|v| v.to_string()).collect();
            rec.push(p.payoffs.sender.to_string());
            rec.push(p.payoffs.receiver.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn point_for(&self, agreement_locator: Locator) -> Option<&FeasiblePoint> {
        match agreement_locator {
            Locator::Index(i) => self.points.get(i),
            Locator::Parameter(_) => None,
        }
    }
}

fn curve_steps(curve: &SchemeCurve, step: f64) -> Result<usize> {
    if !(step > 0.0) {
        return Err(Error::Config(format!("grid step {step} must be positive")));
    }
    Ok(((curve.hi - curve.lo) / step).round() as usize + 1)
}

fn curve_param(curve: &SchemeCurve, step: f64, k: usize) -> f64 {
    let n = curve_steps(curve, step).unwrap_or(1);
    if n <= 1 {
        curve.lo
    } else {
        curve.lo + (curve.hi - curve.lo) * k as f64 / (n - 1) as f64
    }
}

/// Builds the feasibility set point by point, evaluating in parallel and
/// deduplicating (at 1e-9) in grid order so the result is deterministic.
pub fn build_bargaining_game(task: &PersuasionTask, build: &FeasibilityBuild) -> Result<InducedGame> {
    let d = disagreement_point(task)?;
    let mut seen = HashSet::new();
    let mut points = Vec::new();
    let mut push = |p: FeasiblePoint| {
        if seen.insert(dedup_key(p.payoffs)) {
            points.push(p);
        }
    };
    let obedient = |scheme: &SignalingScheme| -> PayoffPair {
        let rule = best_response_posterior(task, scheme).expect("shapes match");
        evaluate(task, scheme, &rule).expect("shapes match")
    };
    match build {
        FeasibilityBuild::ObedientGrid { step } => {
            let grid = SimplexGrid::new(task.n_states(), task.n_actions(), *step)?;
            if grid.len() > MAX_GRID_POINTS {
                return Err(Error::Config(format!("{} grid points is too many; use a coarser step", grid.len())));
            }
            let payoffs: Vec<PayoffPair> = (0..grid.len() as usize)
                .into_par_iter()
                .map(|i| obedient(&SignalingScheme(grid.matrix(i))))
                .collect();
            for (i, p) in payoffs.into_iter().enumerate() {
                push(FeasiblePoint {
                    payoffs: p,
                    scheme_index: i,
                    rule_index: None,
                });
            }
        }
        FeasibilityBuild::ObedientCurve { curve, step } => {
            let n = curve_steps(curve, *step)?;
            let payoffs: Vec<PayoffPair> = (0..n)
                .into_par_iter()
                .map(|k| obedient(&curve.at(curve_param(curve, *step, k))))
                .collect();
            for (k, p) in payoffs.into_iter().enumerate() {
                push(FeasiblePoint {
                    payoffs: p,
                    scheme_index: k,
                    rule_index: None,
                });
            }
        }
        FeasibilityBuild::FullProfile { step } => {
            let schemes = SimplexGrid::new(task.n_states(), task.n_actions(), *step)?;
            let rules = SimplexGrid::new(task.n_actions(), task.n_actions(), *step)?;
            if schemes.len() * rules.len() > MAX_GRID_POINTS {
                return Err(Error::Config(format!(
                    "{} grid points is too many; use a coarser step",
                    schemes.len() * rules.len()
                )));
            }
            let rule_mats: Vec<ActionRule> = (0..rules.len() as usize).map(|r| ActionRule(rules.matrix(r))).collect();
            for i in 0..schemes.len() as usize {
                let scheme = SignalingScheme(schemes.matrix(i));
                let payoffs: Vec<PayoffPair> = rule_mats
                    .par_iter()
                    .map(|rule| evaluate(task, &scheme, rule).expect("shapes match"))
                    .collect();
                for (r, p) in payoffs.into_iter().enumerate() {
                    push(FeasiblePoint {
                        payoffs: p,
                        scheme_index: i,
                        rule_index: Some(r),
                    });
                }
            }
        }
    }
    if !points.iter().any(|p| p.payoffs.dominates(&d, 0.0)) {
        return Err(Error::Precondition(
            "no sampled profile gives both players more than the disagreement point; refine the grid".into(),
        ));
    }
    let game = BargainingGame::finite(points.iter().map(|p| p.payoffs.into()).collect(), d.into());
    Ok(InducedGame {
        game,
        points,
        task: task.clone(),
        build: build.clone(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NashPersuasion {
    pub scheme: SignalingScheme,
    pub rule: ActionRule,
    pub payoffs: PayoffPair,
    pub disagreement: PayoffPair,
    pub nash_product: f64,
}

/// Best receiver payoff among obedient schemes giving the sender at least `t`.
fn receiver_frontier(task: &PersuasionTask, t: f64) -> Option<(f64, SignalingScheme)> {
    optimize_obedient(task, &ObedientProgram::receiver().with_floor(Role::Sender, t - 1e-12))
        .ok()
        .map(|o| (o.value, o.scheme))
}

/// Maximizes `(R1^i(φ) - R0^i)(R1^j(φ) - R0^j)` over schemes, the receiver
/// playing `π1`. The obedient payoff frontier is concave, so the product is
/// unimodal along the sender's payoff and a golden-section search over it,
/// with an LP at each probe, finds the maximum.
pub fn solve_via_nash_product(task: &PersuasionTask) -> Result<NashPersuasion> {
    let better = check_better_outcomes(task)?;
    let d = disagreement_point(task)?;
    if !better.holds {
        return Err(Error::Precondition(
            "no profile gives both players payoffs that exceed those at the disagreement point".into(),
        ));
    }
    let top = optimize_obedient(task, &ObedientProgram::sender().with_floor(Role::Receiver, d.receiver))?.value;
    let product = |t: f64| match receiver_frontier(task, t) {
        Some((r, _)) if t >= d.sender && r >= d.receiver => (t - d.sender) * (r - d.receiver),
        _ => f64::NEG_INFINITY,
    };
    let t = golden_max(product, d.sender, top);
    let (_, scheme) = receiver_frontier(task, t)
        .ok_or_else(|| Error::Precondition("frontier probe became infeasible".into()))?;
    let rule = best_response_posterior(task, &scheme)?;
    let payoffs = evaluate(task, &scheme, &rule)?;
    Ok(NashPersuasion {
        nash_product: (payoffs.sender - d.sender) * (payoffs.receiver - d.receiver),
        scheme,
        rule,
        payoffs,
        disagreement: d,
    })
}

/// Maps a declared profile to the players' updated declarations.
pub trait JointUpdater {
    fn update(
        &self,
        task: &PersuasionTask,
        scheme: &SignalingScheme,
        rule: &ActionRule,
    ) -> Result<(SignalingScheme, ActionRule)>;
}

/// Simultaneous best responses where the receiver's declaration is read as
/// a commitment to its current payoff: the sender picks the best obedient
/// scheme that leaves the receiver no worse off, the receiver plays `π1`.
#[derive(Clone, Copy, Debug, Default)]
pub struct CommitmentBestResponse;

impl JointUpdater for CommitmentBestResponse {
    fn update(
        &self,
        task: &PersuasionTask,
        scheme: &SignalingScheme,
        rule: &ActionRule,
    ) -> Result<(SignalingScheme, ActionRule)> {
        let current = evaluate(task, scheme, rule)?;
        let program = ObedientProgram::sender().with_floor(Role::Receiver, current.receiver - 1e-12);
        let next_scheme = if scheme.n_signals() == task.n_actions() {
            match optimize_obedient(task, &program) {
                Ok(o) => o.scheme,
                Err(Error::Infeasible { .. }) => scheme.clone(),
                Err(e) => return Err(e),
            }
        } else {
            scheme.clone()
        };
        Ok((next_scheme, best_response_posterior(task, scheme)?))
    }
}

/// A profile is a joint commitment when it is a fixed point of `updater`
/// (within 1e-9) and differs from both `φ0` and `π0`.
pub fn verify_joint_commitment(
    task: &PersuasionTask,
    scheme: &SignalingScheme,
    rule: &ActionRule,
    updater: &dyn JointUpdater,
) -> Result<bool> {
    if scheme.is_uninformative(1e-9) {
        return Ok(false);
    }
    if rule.approx_eq(&best_response_prior_for(task, scheme.n_signals()), 1e-9) {
        return Ok(false);
    }
    let (s, r) = updater.update(task, scheme, rule)?;
    Ok(s.approx_eq(scheme, 1e-9) && r.approx_eq(rule, 1e-9))
}

/// Frontier oracle for the obedient payoff set of a task, used for
/// alternating-offer equilibria between sender (player 0) and receiver.
pub struct ObedientFrontier<'a> {
    pub task: &'a PersuasionTask,
}

impl Frontier for ObedientFrontier<'_> {
    fn best_given_floor(&self, who: usize, floor: f64) -> Option<Utility> {
        let (me, other) = if who == 0 {
            (Role::Sender, Role::Receiver)
        } else {
            (Role::Receiver, Role::Sender)
        };
        let best = optimize_obedient(self.task, &ObedientProgram::maximizing(me).with_floor(other, floor - 1e-12)).ok()?;
        // Among the maximisers, the one best for the other side.
        let program = ObedientProgram::maximizing(other).with_floor(me, best.value - 1e-12).with_floor(other, floor - 1e-12);
        let refined = optimize_obedient(self.task, &program).ok().unwrap_or(best);
        Some(refined.payoffs.into())
    }

    fn responder_max(&self, who: usize) -> Option<f64> {
        let other = if who == 0 { Role::Receiver } else { Role::Sender };
        optimize_obedient(self.task, &ObedientProgram::maximizing(other)).ok().map(|o| o.value)
    }
}

/// Scheme attaining a payoff pair on the obedient frontier.
pub fn scheme_for_payoffs(task: &PersuasionTask, target: Utility) -> Result<SignalingScheme> {
    let program = ObedientProgram::sender().with_floor(Role::Receiver, target[1] - 1e-12);
    Ok(optimize_obedient(task, &program)?.scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::grading;

    #[test]
    fn grading_disagreement_is_zero() {
        assert_eq!(disagreement_point(&grading()).unwrap(), PayoffPair::new(0.0, 0.0));
    }

    #[test]
    fn grading_has_better_outcomes() {
        let b = check_better_outcomes(&grading()).unwrap();
        assert!(b.holds);
        let w = b.witness.unwrap();
        assert!(w.payoffs.sender > 0.0 && w.payoffs.receiver > 0.0);
    }

    #[test]
    fn constant_rewards_have_none() {
        let task = PersuasionTask::new("flat", vec![0.5, 0.5], vec![vec![1.0, 1.0]; 2], vec![vec![2.0, 2.0]; 2]).unwrap();
        assert!(!check_better_outcomes(&task).unwrap().holds);
    }

    #[test]
    fn nash_product_on_grading_is_honest() {
        let n = solve_via_nash_product(&grading()).unwrap();
        let (eta, x2) = n.scheme.0.binary_params().unwrap();
        assert!(eta < 1e-6 && (x2 - 1.0).abs() < 1e-9);
        assert!((n.payoffs.sender - 1.0 / 3.0).abs() < 1e-6);
        assert!((n.payoffs.receiver - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn eta_curve_game() {
        let g = build_bargaining_game(&grading(), &FeasibilityBuild::ObedientCurve {
            curve: SchemeCurve::binary_eta(),
            step: 1e-3,
        })
        .unwrap();
        assert_eq!(g.points.len(), 501);
        let first = g.points[0].payoffs;
        let last = g.points[500].payoffs;
        assert!((first.sender - 1.0 / 3.0).abs() < 1e-15 && (first.receiver - 1.0 / 3.0).abs() < 1e-15);
        assert!((last.sender - 2.0 / 3.0).abs() < 1e-15 && last.receiver.abs() < 1e-15);
        let a = crate::bargaining::nash_solution(&g.game).unwrap();
        assert_eq!(a.locator, Locator::Index(0));
    }

    #[test]
    fn grid_without_gain_is_rejected() {
        let task = PersuasionTask::new("flat", vec![0.5, 0.5], vec![vec![1.0, 1.0]; 2], vec![vec![2.0, 2.0]; 2]).unwrap();
        let err = build_bargaining_game(&task, &FeasibilityBuild::ObedientGrid { step: 0.1 }).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn commitments_on_grading() {
        let task = grading();
        let obey = ActionRule::obedient(2);
        let u = CommitmentBestResponse;
        assert!(verify_joint_commitment(&task, &SignalingScheme::binary(0.0, 1.0).unwrap(), &obey, &u).unwrap());
        assert!(verify_joint_commitment(&task, &SignalingScheme::binary(0.5, 1.0).unwrap(), &obey, &u).unwrap());
        let babble = crate::persuasion::babbling_scheme(&task);
        assert!(!verify_joint_commitment(&task, &babble, &best_response_prior(&task), &u).unwrap());
    }
}
