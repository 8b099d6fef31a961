//! Posteriors, best responses, obedience and the sender's optimal scheme.

pub mod lp;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{evaluate, ActionRule, PayoffPair, PersuasionTask, Role, SignalingScheme, Stochastic};
use lp::{LinearProgram, Relation};

/// Obedience slack and best-response tie tolerance, in joint-probability units.
pub const IC_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Posterior {
    pub belief: Vec<f64>,
    /// False when the signal has probability zero; `belief` is then the prior.
    pub reachable: bool,
}

fn check_scheme(task: &PersuasionTask, scheme: &SignalingScheme) -> Result<()> {
    if scheme.n_states() != task.n_states() {
        return Err(Error::Shape(format!(
            "scheme has {} rows for {} states",
            scheme.n_states(),
            task.n_states()
        )));
    }
    Ok(())
}

pub fn posterior(task: &PersuasionTask, scheme: &SignalingScheme, signal: usize) -> Result<Posterior> {
    check_scheme(task, scheme)?;
    if signal >= scheme.n_signals() {
        return Err(Error::Shape(format!(
            "signal {signal} out of range for {} signals",
            scheme.n_signals()
        )));
    }
    let joint: Vec<f64> = (0..task.n_states())
        .map(|s| task.prior()[s] * scheme.prob(s, signal))
        .collect();
    let total: f64 = joint.iter().sum();
    if total <= 0.0 {
        return Ok(Posterior {
            belief: task.prior().to_vec(),
            reachable: false,
        });
    }
    Ok(Posterior {
        belief: joint.iter().map(|w| w / total).collect(),
        reachable: true,
    })
}

/// Receiver's best action against the prior; ties go to the lowest index.
pub fn prior_best_action(task: &PersuasionTask) -> usize {
    let values: Vec<f64> = (0..task.n_actions())
        .map(|a| {
            (0..task.n_states())
                .map(|s| task.prior()[s] * task.reward(Role::Receiver, s, a))
                .sum()
        })
        .collect();
    argmax_with_preference(&values, None)
}

fn argmax_with_preference(values: &[f64], preferred: Option<usize>) -> usize {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if let Some(p) = preferred {
        if p < values.len() && values[p] >= max - IC_TOL {
            return p;
        }
    }
    values
        .iter()
        .position(|&v| v >= max - IC_TOL)
        .expect("nonempty action set")
}

/// `π0` with one row per signal: always play the prior-best action.
pub fn best_response_prior_for(task: &PersuasionTask, n_signals: usize) -> ActionRule {
    ActionRule(Stochastic::constant(n_signals, task.n_actions(), prior_best_action(task)))
}

/// `π0` over the default signal alphabet (one signal per action).
pub fn best_response_prior(task: &PersuasionTask) -> ActionRule {
    best_response_prior_for(task, task.n_actions())
}

/// `π1`: best response to each posterior. Ties go to the recommended action
/// `a = σ`, then to the lowest index. Unreachable signals fall back to `π0`.
pub fn best_response_posterior(task: &PersuasionTask, scheme: &SignalingScheme) -> Result<ActionRule> {
    check_scheme(task, scheme)?;
    let fallback = prior_best_action(task);
    let choices: Vec<usize> = (0..scheme.n_signals())
        .map(|sig| {
            let weight: f64 = (0..task.n_states())
                .map(|s| task.prior()[s] * scheme.prob(s, sig))
                .sum();
            if weight <= 0.0 {
                return fallback;
            }
            // Joint rather than normalised values keep the tie tolerance on the
            // same scale as the obedience check.
            let values: Vec<f64> = (0..task.n_actions())
                .map(|a| {
                    (0..task.n_states())
                        .map(|s| task.prior()[s] * scheme.prob(s, sig) * task.reward(Role::Receiver, s, a))
                        .sum()
                })
                .collect();
            argmax_with_preference(&values, Some(sig))
        })
        .collect();
    Ok(ActionRule(Stochastic::from_choices(task.n_actions(), &choices)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IcReport {
    pub obedient: bool,
    /// Largest shortfall below zero of any obedience constraint, clipped at 0.
    pub worst_violation: f64,
    /// `(recommended, deviation)` for the worst constraint when not obedient.
    pub violating_pair: Option<(usize, usize)>,
}

/// Obedience: `Σ_s μ0(s) φ(a|s) [r^j(s,a) - r^j(s,a')] >= -IC_TOL` for all `a, a'`.
pub fn incentive_compatibility(task: &PersuasionTask, scheme: &SignalingScheme) -> Result<IcReport> {
    check_scheme(task, scheme)?;
    if scheme.n_signals() != task.n_actions() {
        return Err(Error::Shape(format!(
            "obedience needs one signal per action, scheme has {} signals for {} actions",
            scheme.n_signals(),
            task.n_actions()
        )));
    }
    let mut worst = 0.0;
    let mut pair = None;
    for a in 0..task.n_actions() {
        for b in 0..task.n_actions() {
            if a == b {
                continue;
            }
            let lhs: f64 = (0..task.n_states())
                .map(|s| {
                    task.prior()[s]
                        * scheme.prob(s, a)
                        * (task.reward(Role::Receiver, s, a) - task.reward(Role::Receiver, s, b))
                })
                .sum();
            if -lhs > worst {
                worst = -lhs;
                pair = Some((a, b));
            }
        }
    }
    let obedient = worst <= IC_TOL;
    Ok(IcReport {
        obedient,
        worst_violation: worst,
        violating_pair: if obedient { None } else { pair },
    })
}

/// `φ0`: always send the prior-best action, revealing nothing.
pub fn babbling_scheme(task: &PersuasionTask) -> SignalingScheme {
    SignalingScheme(Stochastic::constant(
        task.n_states(),
        task.n_actions(),
        prior_best_action(task),
    ))
}

/// Full-information scheme: recommend the receiver's best action in each state.
pub fn honest_scheme(task: &PersuasionTask) -> SignalingScheme {
    let choices: Vec<usize> = (0..task.n_states())
        .map(|s| {
            let values: Vec<f64> = (0..task.n_actions())
                .map(|a| task.reward(Role::Receiver, s, a))
                .collect();
            argmax_with_preference(&values, None)
        })
        .collect();
    SignalingScheme(Stochastic::from_choices(task.n_actions(), &choices))
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimalScheme {
    pub scheme: SignalingScheme,
    /// LP objective value.
    pub value: f64,
    /// Payoffs when the receiver obeys.
    pub payoffs: PayoffPair,
    pub ic: IcReport,
}

/// Linear objective over obedient schemes with optional payoff floors.
#[derive(Clone, Copy, Debug, Default)]
pub struct ObedientProgram {
    pub weights: PayoffPair,
    pub sender_floor: Option<f64>,
    pub receiver_floor: Option<f64>,
}

impl ObedientProgram {
    pub fn sender() -> Self {
        ObedientProgram {
            weights: PayoffPair::new(1.0, 0.0),
            ..Default::default()
        }
    }

    pub fn receiver() -> Self {
        ObedientProgram {
            weights: PayoffPair::new(0.0, 1.0),
            ..Default::default()
        }
    }

    pub fn maximizing(role: Role) -> Self {
        match role {
            Role::Sender => Self::sender(),
            Role::Receiver => Self::receiver(),
        }
    }

    pub fn with_floor(mut self, role: Role, floor: f64) -> Self {
        match role {
            Role::Sender => self.sender_floor = Some(floor),
            Role::Receiver => self.receiver_floor = Some(floor),
        }
        self
    }
}

/// Obedience rows and row-sum equalities over `φ(a|s)` at index `s * |A| + a`,
/// padded with `extra` trailing zero columns.
pub(crate) fn obedient_lp(task: &PersuasionTask, objective: Vec<f64>) -> LinearProgram {
    let (n_s, n_a) = (task.n_states(), task.n_actions());
    let width = objective.len();
    let mut lp = LinearProgram::maximize(objective);
    for s in 0..n_s {
        let mut row = vec![0.0; width];
        row[s * n_a..(s + 1) * n_a].iter_mut().for_each(|v| *v = 1.0);
        lp.subject_to(row, Relation::Eq, 1.0);
    }
    for a in 0..n_a {
        for b in 0..n_a {
            if a == b {
                continue;
            }
            let mut row = vec![0.0; width];
            for s in 0..n_s {
                row[s * n_a + a] = task.prior()[s]
                    * (task.reward(Role::Receiver, s, b) - task.reward(Role::Receiver, s, a));
            }
            lp.subject_to(row, Relation::Le, 0.0);
        }
    }
    lp
}

/// Coefficients of `R^role` over the obedient scheme variables.
pub(crate) fn payoff_row(task: &PersuasionTask, role: Role, width: usize) -> Vec<f64> {
    let n_a = task.n_actions();
    let mut row = vec![0.0; width];
    for s in 0..task.n_states() {
        for a in 0..n_a {
            row[s * n_a + a] = task.prior()[s] * task.reward(role, s, a);
        }
    }
    row
}

/// Turns LP output into a clean row-stochastic scheme.
pub(crate) fn scheme_from_solution(task: &PersuasionTask, x: &[f64]) -> SignalingScheme {
    let n_a = task.n_actions();
    let mut data = Vec::with_capacity(task.n_states() * n_a);
    for s in 0..task.n_states() {
        let row: Vec<f64> = x[s * n_a..(s + 1) * n_a]
            .iter()
            .map(|&v| if v < 1e-12 { 0.0 } else { v.min(1.0) })
            .collect();
        let sum: f64 = row.iter().sum();
        data.extend(row.iter().map(|v| v / sum));
    }
    SignalingScheme(Stochastic::from_raw(task.n_states(), n_a, data))
}

pub fn optimize_obedient(task: &PersuasionTask, program: &ObedientProgram) -> Result<OptimalScheme> {
    let width = task.n_states() * task.n_actions();
    let s_row = payoff_row(task, Role::Sender, width);
    let r_row = payoff_row(task, Role::Receiver, width);
    let objective: Vec<f64> = s_row
        .iter()
        .zip(&r_row)
        .map(|(a, b)| program.weights.sender * a + program.weights.receiver * b)
        .collect();
    let mut lp = obedient_lp(task, objective);
    if let Some(f) = program.sender_floor {
        lp.subject_to(s_row, Relation::Ge, f);
    }
    if let Some(f) = program.receiver_floor {
        lp.subject_to(r_row, Relation::Ge, f);
    }
    let sol = lp.solve()?;
    let scheme = scheme_from_solution(task, &sol.x);
    let payoffs = evaluate(task, &scheme, &ActionRule::obedient(task.n_actions()))?;
    let ic = incentive_compatibility(task, &scheme)?;
    Ok(OptimalScheme {
        scheme,
        value: sol.value,
        payoffs,
        ic,
    })
}

/// The sender's commitment optimum: max `R^i` over obedient schemes.
pub fn solve_optimal_scheme(task: &PersuasionTask) -> Result<OptimalScheme> {
    optimize_obedient(task, &ObedientProgram::sender())
}

/// LP optimum minus the sender's payoff at `(φ0, π0)`; never negative.
pub fn persuasion_gain(task: &PersuasionTask) -> Result<f64> {
    let opt = solve_optimal_scheme(task)?;
    let base = evaluate(task, &babbling_scheme(task), &best_response_prior(task))?;
    Ok((opt.value - base.sender).max(0.0))
}
