use rand::Rng;

use super::trace::{Event, GameTrace, Outcome, Recorder};
use super::{
    realize_with, rng_for, Agent, FirstProposer, Procedure, ProcedureKind, RoleDynamics, StoppingRule, TurnContext,
    CONSENSUS_TOL,
};
use crate::error::{Error, Result};
use crate::model::{evaluate, ActionRule, PayoffPair, PersuasionTask, Role, SignalingScheme};
use crate::persuasion::{babbling_scheme, best_response_posterior, best_response_prior};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LongTermOptions {
    pub procedure: Procedure,
    pub realization_steps: usize,
    /// Record every realized step, not just the summary.
    pub log_samples: bool,
}

impl LongTermOptions {
    pub fn new(roles: RoleDynamics, first: FirstProposer, stopping: StoppingRule) -> Self {
        LongTermOptions {
            procedure: Procedure::long_term(roles, first, stopping),
            realization_steps: 10_000,
            log_samples: true,
        }
    }

    pub fn with_realization(mut self, steps: usize, log_samples: bool) -> Self {
        self.realization_steps = steps;
        self.log_samples = log_samples;
        self
    }
}

const ROLES: [Role; 2] = [Role::Sender, Role::Receiver];

fn by_agent(p: PayoffPair) -> [f64; 2] {
    [p.sender, p.receiver]
}

struct Run<'t> {
    task: &'t PersuasionTask,
    rec: Recorder,
}

impl Run<'_> {
    /// Logs the agent's exchanges, then its result or a protocol violation.
    fn step<T>(&mut self, agent: &mut dyn Agent, idx: usize, t: usize, out: Result<T>) -> std::result::Result<T, String> {
        for exchange in agent.take_exchanges() {
            self.rec.push(t, Some(idx), Event::Exchange { exchange });
        }
        out.map_err(|e| {
            let reason = e.to_string();
            self.rec.push(t, Some(idx), Event::ProtocolViolation { reason: reason.clone() });
            reason
        })
    }

    fn check_scheme(&self, s: SignalingScheme) -> Result<SignalingScheme> {
        if s.n_states() != self.task.n_states() || s.n_signals() != self.task.n_actions() {
            return Err(Error::Shape(format!(
                "scheme is {}x{}, expected {}x{}",
                s.n_states(),
                s.n_signals(),
                self.task.n_states(),
                self.task.n_actions()
            )));
        }
        Ok(s)
    }

    fn check_rule(&self, r: ActionRule) -> Result<ActionRule> {
        let n = self.task.n_actions();
        if r.n_signals() != n || r.n_actions() != n {
            return Err(Error::Shape(format!("rule is {}x{}, expected {n}x{n}", r.n_signals(), r.n_actions())));
        }
        Ok(r)
    }

    fn aborted(self, seed: u64, t: usize, reason: String) -> Result<GameTrace> {
        let d = evaluate(self.task, &babbling_scheme(self.task), &best_response_prior(self.task))?;
        let outcome = Outcome {
            consensus_reached: false,
            deal_timestep: None,
            payoffs: by_agent(d),
            final_proposer: None,
            final_proposer_payoff: None,
            empirical: None,
            roles: Some(ROLES),
            scheme: None,
            rule: None,
            aborted: Some(reason),
        };
        Ok(self.rec.finish(seed, t, outcome))
    }
}

macro_rules! attempt {
    ($run:expr, $seed:expr, $agent:expr, $idx:expr, $t:expr, $call:expr) => {{
        let out = $call;
        match $run.step($agent, $idx, $t, out) {
            Ok(v) => v,
            Err(reason) => return $run.aborted($seed, $t, reason),
        }
    }};
}

/// Long-term persuasion: rounds of proposals until consensus or the sampled
/// stop time, followed by a realization stage under the final profile.
///
/// A sender-proposer commits `φ` and consensus means the receiver answered
/// with `π1(φ)`. A receiver-proposer announces `φ1` and consensus means the
/// sender's answer gives the receiver at least `R^j(φ1, π1(φ1))`; the
/// receiver then plays `π1`, otherwise `π0`.
pub fn run_long_term(
    task: &PersuasionTask,
    agents: [&mut dyn Agent; 2],
    opts: &LongTermOptions,
    seed: u64,
) -> Result<GameTrace> {
    let procedure = &opts.procedure;
    let mut rng = rng_for(seed);
    let stop_time = match procedure.kind {
        ProcedureKind::LongTerm => procedure.stopping.draw(&mut rng),
        _ => 1,
    };
    let mut proposer = procedure.first_proposer(&mut rng)?;
    let mut run = Run {
        task,
        rec: Recorder::default(),
    };
    run.rec.push(
        0,
        None,
        Event::Start {
            procedure: format!("{:?}", procedure.kind).to_lowercase(),
            task: task.label().to_string(),
            seed,
            stop_time: Some(stop_time),
            first_proposer: Some(proposer),
        },
    );
    let ctx = |agent: usize, proposer: bool, t: usize| TurnContext {
        task,
        agent,
        role: ROLES[agent],
        proposer,
        timestep: t,
        procedure,
    };

    let mut declared: Option<(SignalingScheme, ActionRule)> = None;
    let mut deal = None;
    let mut t = 0;
    while t < stop_time {
        if t > 0 && procedure.roles == RoleDynamics::Alternating {
            proposer = 1 - proposer;
            run.rec.push(t, None, Event::RoleSwap { proposer });
        }
        let reached = if proposer == 0 {
            let phi = attempt!(run, seed, &mut *agents[0], 0, t, {
                let c = ctx(0, true, t);
                agents[0].propose_scheme(&c).and_then(|s| run.check_scheme(s))
            });
            run.rec.push(t, Some(0), Event::Commitment { scheme: phi.clone() });
            let rule = attempt!(run, seed, &mut *agents[1], 1, t, {
                let c = ctx(1, false, t);
                agents[1].respond_rule(&c, Some(&phi)).and_then(|r| run.check_rule(r))
            });
            run.rec.push(t, Some(1), Event::RuleResponse { rule: rule.clone() });
            let ok = rule.approx_eq(&best_response_posterior(task, &phi)?, CONSENSUS_TOL);
            declared = Some((phi, rule));
            ok
        } else {
            let expected = attempt!(run, seed, &mut *agents[1], 1, t, {
                let c = ctx(1, true, t);
                agents[1].propose_expectation(&c).and_then(|s| run.check_scheme(s))
            });
            run.rec.push(t, Some(1), Event::Expectation { scheme: expected.clone() });
            let phi = attempt!(run, seed, &mut *agents[0], 0, t, {
                let c = ctx(0, false, t);
                agents[0].respond_scheme(&c, &expected).and_then(|s| run.check_scheme(s))
            });
            run.rec.push(t, Some(0), Event::SchemeResponse { scheme: phi.clone() });
            let target = evaluate(task, &expected, &best_response_posterior(task, &expected)?)?.receiver;
            let pi1 = best_response_posterior(task, &phi)?;
            let ok = evaluate(task, &phi, &pi1)?.receiver >= target - CONSENSUS_TOL;
            let rule = if ok { pi1 } else { best_response_prior(task) };
            declared = Some((phi, rule));
            ok
        };
        run.rec.push(t, None, Event::Consensus { reached });
        if reached {
            deal = Some(t + 1);
            break;
        }
        t += 1;
    }
    let last = t.min(stop_time - 1);
    let (scheme, rule) = declared.unwrap_or_else(|| (babbling_scheme(task), best_response_prior(task)));
    let payoffs = by_agent(evaluate(task, &scheme, &rule)?);
    let empirical = realization(&mut run.rec, task, &scheme, &rule, opts, last, &mut rng)?;
    let outcome = Outcome {
        consensus_reached: deal.is_some(),
        deal_timestep: deal,
        payoffs,
        final_proposer: Some(proposer),
        final_proposer_payoff: Some(payoffs[proposer]),
        empirical,
        roles: Some(ROLES),
        scheme: Some(scheme),
        rule: Some(rule),
        aborted: None,
    };
    Ok(run.rec.finish(seed, last, outcome))
}

fn realization<R: Rng>(
    rec: &mut Recorder,
    task: &PersuasionTask,
    scheme: &SignalingScheme,
    rule: &ActionRule,
    opts: &LongTermOptions,
    t: usize,
    rng: &mut R,
) -> Result<Option<[f64; 2]>> {
    if opts.realization_steps == 0 {
        return Ok(None);
    }
    let r = realize_with(task, scheme, rule, opts.realization_steps, rng)?;
    if opts.log_samples {
        for (step, s) in r.steps.iter().enumerate() {
            rec.push(
                t,
                None,
                Event::Sample {
                    step,
                    state: s.state,
                    signal: s.signal,
                    action: s.action,
                    rewards: by_agent(s.rewards),
                },
            );
        }
    }
    rec.push(
        t,
        None,
        Event::Realization {
            steps: opts.realization_steps,
            mean: by_agent(r.mean),
            std_err: by_agent(r.std_err),
        },
    );
    Ok(Some(by_agent(r.mean)))
}

/// Commit, then one realized round.
pub fn run_one_shot_persuasion(
    task: &PersuasionTask,
    sender: &mut dyn Agent,
    receiver: &mut dyn Agent,
    seed: u64,
) -> Result<GameTrace> {
    let opts = LongTermOptions {
        procedure: Procedure::one_shot(),
        realization_steps: 1,
        log_samples: true,
    };
    run_long_term(task, [sender, receiver], &opts, seed)
}

/// As the one-shot game, but the scheme is never disclosed: the receiver
/// acts on signals alone.
pub fn run_cheap_talk(
    task: &PersuasionTask,
    sender: &mut dyn Agent,
    receiver: &mut dyn Agent,
    seed: u64,
) -> Result<GameTrace> {
    let procedure = Procedure::cheap_talk();
    let opts = LongTermOptions {
        procedure,
        realization_steps: 1,
        log_samples: true,
    };
    let mut rng = rng_for(seed);
    let mut run = Run {
        task,
        rec: Recorder::default(),
    };
    run.rec.push(
        0,
        None,
        Event::Start {
            procedure: "cheap_talk".into(),
            task: task.label().to_string(),
            seed,
            stop_time: Some(1),
            first_proposer: Some(0),
        },
    );
    let phi = attempt!(run, seed, sender, 0, 0, {
        let c = TurnContext {
            task,
            agent: 0,
            role: Role::Sender,
            proposer: true,
            timestep: 0,
            procedure: &procedure,
        };
        sender.propose_scheme(&c).and_then(|s| run.check_scheme(s))
    });
    run.rec.push(0, Some(0), Event::PrivateScheme { scheme: phi.clone() });
    let rule = attempt!(run, seed, receiver, 1, 0, {
        let c = TurnContext {
            task,
            agent: 1,
            role: Role::Receiver,
            proposer: false,
            timestep: 0,
            procedure: &procedure,
        };
        receiver.respond_rule(&c, None).and_then(|r| run.check_rule(r))
    });
    run.rec.push(0, Some(1), Event::RuleResponse { rule: rule.clone() });
    let payoffs = by_agent(evaluate(task, &phi, &rule)?);
    let empirical = realization(&mut run.rec, task, &phi, &rule, &opts, 0, &mut rng)?;
    let outcome = Outcome {
        consensus_reached: false,
        deal_timestep: None,
        payoffs,
        final_proposer: Some(0),
        final_proposer_payoff: Some(payoffs[0]),
        empirical,
        roles: Some(ROLES),
        scheme: Some(phi),
        rule: Some(rule),
        aborted: None,
    };
    Ok(run.rec.finish(seed, 0, outcome))
}
