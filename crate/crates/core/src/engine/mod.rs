//! Turn-based procedures between two agents, with seeded randomness.

mod persuasion;
mod split;
pub mod trace;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionRule, PayoffPair, PersuasionTask, Role, SignalingScheme};

pub use persuasion::{run_cheap_talk, run_long_term, run_one_shot_persuasion, LongTermOptions};
pub use split::{run_rubinstein, run_split, Bargainer, SplitContext, SplitGame, SplitOptions};
pub use trace::{ChatExchange, Event, GameTrace, Message, Outcome, TraceEvent};

/// Tolerance of the consensus tests.
pub const CONSENSUS_TOL: f64 = 1e-9;

pub(crate) fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub stop_probability: f64,
    pub max_timestep: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule {
            stop_probability: 0.1,
            max_timestep: 10,
        }
    }
}

impl StoppingRule {
    pub fn new(stop_probability: f64, max_timestep: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&stop_probability) {
            return Err(Error::Config(format!("stop probability {stop_probability} not in [0, 1]")));
        }
        if max_timestep == 0 {
            return Err(Error::Config("timestep cap must be at least 1".into()));
        }
        Ok(StoppingRule {
            stop_probability,
            max_timestep,
        })
    }

    /// A single round.
    pub fn once() -> Self {
        StoppingRule {
            stop_probability: 1.0,
            max_timestep: 1,
        }
    }

    /// Number of rounds played: stop after each round with probability `p`,
    /// and always after the cap.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        for t in 1..self.max_timestep {
            if rng.gen_bool(self.stop_probability) {
                return t;
            }
        }
        self.max_timestep
    }

    /// `P(T = t)` for `t = 1..=cap`.
    pub fn distribution(&self) -> Vec<f64> {
        let p = self.stop_probability;
        (1..=self.max_timestep)
            .map(|t| {
                let survive = (1.0 - p).powi(t as i32 - 1);
                if t < self.max_timestep {
                    survive * p
                } else {
                    survive
                }
            })
            .collect()
    }

    pub fn mean(&self) -> f64 {
        self.distribution().iter().enumerate().map(|(i, q)| (i + 1) as f64 * q).sum()
    }
}

pub fn sample_stop_time(stopping: &StoppingRule, seed: u64) -> usize {
    stopping.draw(&mut rng_for(seed))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcedureKind {
    OneShot,
    CheapTalk,
    LongTerm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleDynamics {
    Fixed,
    Alternating,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstProposer {
    Agent(usize),
    CoinFlip,
}

/// The rules of the game the agents are told about.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Procedure {
    pub kind: ProcedureKind,
    pub roles: RoleDynamics,
    pub first: FirstProposer,
    pub stopping: StoppingRule,
}

impl Procedure {
    pub fn one_shot() -> Self {
        Procedure {
            kind: ProcedureKind::OneShot,
            roles: RoleDynamics::Fixed,
            first: FirstProposer::Agent(0),
            stopping: StoppingRule::once(),
        }
    }

    pub fn cheap_talk() -> Self {
        Procedure {
            kind: ProcedureKind::CheapTalk,
            ..Procedure::one_shot()
        }
    }

    pub fn long_term(roles: RoleDynamics, first: FirstProposer, stopping: StoppingRule) -> Self {
        Procedure {
            kind: ProcedureKind::LongTerm,
            roles,
            first,
            stopping,
        }
    }

    pub(crate) fn first_proposer<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        match self.first {
            FirstProposer::Agent(k) if k < 2 => Ok(k),
            FirstProposer::Agent(k) => Err(Error::Config(format!("agent {k} does not exist"))),
            FirstProposer::CoinFlip => Ok(rng.gen_range(0..2)),
        }
    }
}

/// What an agent sees when asked to act in a persuasion procedure.
#[derive(Clone, Copy, Debug)]
pub struct TurnContext<'a> {
    pub task: &'a PersuasionTask,
    pub agent: usize,
    pub role: Role,
    pub proposer: bool,
    /// 0-based bargaining round.
    pub timestep: usize,
    pub procedure: &'a Procedure,
}

/// A participant in persuasion procedures. Agent 0 is the sender.
pub trait Agent: Send {
    /// Sender as proposer: the scheme to commit.
    fn propose_scheme(&mut self, ctx: &TurnContext) -> Result<SignalingScheme>;
    /// Receiver as proposer: the scheme `φ1` whose receiver payoff it asks for.
    fn propose_expectation(&mut self, ctx: &TurnContext) -> Result<SignalingScheme>;
    /// Receiver as responder. `scheme` is `None` when nothing was committed.
    fn respond_rule(&mut self, ctx: &TurnContext, scheme: Option<&SignalingScheme>) -> Result<ActionRule>;
    /// Sender as responder to an announced expectation.
    fn respond_scheme(&mut self, ctx: &TurnContext, expectation: &SignalingScheme) -> Result<SignalingScheme>;
    /// Chat exchanges since the last call, for the trace.
    fn take_exchanges(&mut self) -> Vec<ChatExchange> {
        Vec::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub signal: usize,
    pub action: usize,
    pub rewards: PayoffPair,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Realization {
    pub steps: Vec<Step>,
    pub mean: PayoffPair,
    pub std_err: PayoffPair,
}

/// `n` independent rounds of play under a fixed profile.
pub fn realize(task: &PersuasionTask, scheme: &SignalingScheme, rule: &ActionRule, n: usize, seed: u64) -> Result<Realization> {
    realize_with(task, scheme, rule, n, &mut rng_for(seed))
}

fn weighted(row: &[f64]) -> WeightedIndex<f64> {
    WeightedIndex::new(row.iter().map(|&p| p.max(0.0))).expect("probability row has positive mass")
}

pub(crate) fn realize_with<R: Rng + ?Sized>(
    task: &PersuasionTask,
    scheme: &SignalingScheme,
    rule: &ActionRule,
    n: usize,
    rng: &mut R,
) -> Result<Realization> {
    if n == 0 {
        return Err(Error::Config("realization needs at least one step".into()));
    }
    crate::model::evaluate(task, scheme, rule)?;
    let prior = weighted(task.prior());
    let signals: Vec<_> = (0..scheme.n_states()).map(|s| weighted(scheme.0.row(s))).collect();
    let actions: Vec<_> = (0..rule.n_signals()).map(|g| weighted(rule.0.row(g))).collect();
    let mut steps = Vec::with_capacity(n);
    for _ in 0..n {
        let state = prior.sample(rng);
        let signal = signals[state].sample(rng);
        let action = actions[signal].sample(rng);
        steps.push(Step {
            state,
            signal,
            action,
            rewards: PayoffPair::new(
                task.reward(Role::Sender, state, action),
                task.reward(Role::Receiver, state, action),
            ),
        });
    }
    let (mean, std_err) = mean_and_se(&steps);
    Ok(Realization { steps, mean, std_err })
}

fn mean_and_se(steps: &[Step]) -> (PayoffPair, PayoffPair) {
    let n = steps.len() as f64;
    let stats = |f: &dyn Fn(&Step) -> f64| {
        let m = steps.iter().map(f).sum::<f64>() / n;
        if steps.len() < 2 {
            return (m, 0.0);
        }
        let var = steps.iter().map(|s| (f(s) - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    };
    let (ms, ss) = stats(&|s| s.rewards.sender);
    let (mr, sr) = stats(&|s| s.rewards.receiver);
    (PayoffPair::new(ms, mr), PayoffPair::new(ss, sr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::grading;

    #[test]
    fn stop_time_extremes() {
        for seed in 0..50 {
            assert_eq!(sample_stop_time(&StoppingRule::new(1.0, 10).unwrap(), seed), 1);
            assert_eq!(sample_stop_time(&StoppingRule::new(0.0, 10).unwrap(), seed), 10);
        }
    }

    #[test]
    fn stop_distribution_sums_to_one() {
        let d = StoppingRule::default().distribution();
        assert_eq!(d.len(), 10);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_stopping_rules() {
        assert!(StoppingRule::new(1.5, 3).is_err());
        assert!(StoppingRule::new(0.5, 0).is_err());
    }

    #[test]
    fn single_step_realization() {
        let task = grading();
        let r = realize(&task, &SignalingScheme::binary(0.5, 1.0).unwrap(), &ActionRule::obedient(2), 1, 3).unwrap();
        assert_eq!(r.steps.len(), 1);
        assert_eq!(r.std_err, PayoffPair::new(0.0, 0.0));
    }

    #[test]
    fn point_mass_has_no_variance() {
        let task = PersuasionTask::new("pm", vec![0.0, 1.0], vec![vec![0.0, 1.0]; 2], vec![vec![0.0, -1.0], vec![0.0, 1.0]]).unwrap();
        let r = realize(&task, &SignalingScheme::binary(0.0, 1.0).unwrap(), &ActionRule::obedient(2), 500, 9).unwrap();
        assert!(r.steps.iter().all(|s| s.state == 1 && s.action == 1));
        assert_eq!(r.std_err, PayoffPair::new(0.0, 0.0));
        assert_eq!(r.mean, PayoffPair::new(1.0, 1.0));
    }

    #[test]
    fn zero_steps_rejected() {
        let task = grading();
        assert!(realize(&task, &SignalingScheme::binary(0.5, 1.0).unwrap(), &ActionRule::obedient(2), 0, 3).is_err());
    }
}
