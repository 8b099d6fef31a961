//! Bargaining over a one-dimensional split.

use serde::{Deserialize, Serialize};

use super::trace::{Event, GameTrace, Outcome, Recorder};
use super::{rng_for, ChatExchange, FirstProposer, Procedure, ProcedureKind, RoleDynamics, StoppingRule};
use crate::bargaining::{Frontier, RubinsteinSpec, Utility};
use crate::error::{Error, Result};

/// A proposer picks `θ ∈ [lo, hi]`; on acceptance the proposer gets
/// `p0 + p1 θ` and the responder `q0 + q1 θ`, otherwise both get 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitGame {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    pub proposer: [f64; 2],
    pub responder: [f64; 2],
    /// Smallest divisible amount, if the good is discrete.
    pub unit: Option<f64>,
}

impl SplitGame {
    /// The proposer keeps `θ` of `pie`.
    pub fn unbounded(pie: f64) -> Self {
        SplitGame {
            label: "unbounded".into(),
            lo: 0.0,
            hi: pie,
            proposer: [0.0, 1.0],
            responder: [pie, -1.0],
            unit: None,
        }
    }

    /// `η ∈ [0, 1/2]` with payoffs `(1 + 2η)/3` and `(1 - 2η)/3`.
    pub fn bounded() -> Self {
        SplitGame {
            label: "bounded".into(),
            lo: 0.0,
            hi: 0.5,
            proposer: [1.0 / 3.0, 2.0 / 3.0],
            responder: [1.0 / 3.0, -2.0 / 3.0],
            unit: None,
        }
    }

    pub fn with_unit(mut self, unit: f64) -> Self {
        self.unit = Some(unit);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `[proposer, responder]` payoffs of an accepted `θ`.
    pub fn shares(&self, theta: f64) -> Utility {
        [
            self.proposer[0] + self.proposer[1] * theta,
            self.responder[0] + self.responder[1] * theta,
        ]
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta.is_finite() && theta >= self.lo - 1e-12 && theta <= self.hi + 1e-12
    }

    /// The `θ` that maximizes the proposer's payoff while giving the
    /// responder at least `floor`.
    pub fn best_theta(&self, floor: f64) -> Option<f64> {
        let (mut lo, mut hi) = (self.lo, self.hi);
        let [q0, q1] = self.responder;
        if q1 > 0.0 {
            lo = lo.max((floor - q0) / q1);
        } else if q1 < 0.0 {
            hi = hi.min((floor - q0) / q1);
        } else if q0 < floor {
            return None;
        }
        if lo > hi + 1e-12 {
            return None;
        }
        let hi = hi.max(lo);
        Some(if self.proposer[1] >= 0.0 { hi } else { lo })
    }
}

impl Frontier for SplitGame {
    fn best_given_floor(&self, who: usize, floor: f64) -> Option<Utility> {
        let [p, q] = self.shares(self.best_theta(floor)?);
        Some(if who == 0 { [p, q] } else { [q, p] })
    }

    fn responder_max(&self, _who: usize) -> Option<f64> {
        let [q0, q1] = self.responder;
        Some(q0 + q1 * if q1 >= 0.0 { self.hi } else { self.lo })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SplitContext<'a> {
    pub game: &'a SplitGame,
    pub agent: usize,
    pub proposer: bool,
    pub timestep: usize,
    pub procedure: &'a Procedure,
    /// Per-agent discount factors, when payoffs shrink over rounds.
    pub discount: Option<[f64; 2]>,
}

pub trait Bargainer: Send {
    fn propose_split(&mut self, ctx: &SplitContext) -> Result<f64>;
    fn respond_split(&mut self, ctx: &SplitContext, theta: f64) -> Result<bool>;
    fn take_exchanges(&mut self) -> Vec<ChatExchange> {
        Vec::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitOptions {
    pub procedure: Procedure,
    pub discount: Option<[f64; 2]>,
}

/// Offers and responses until acceptance or the sampled stop time. With
/// discounting, agent `k` receives `δ_k^t` times its share at round `t`.
pub fn run_split(
    game: &SplitGame,
    agents: [&mut dyn Bargainer; 2],
    opts: &SplitOptions,
    seed: u64,
) -> Result<GameTrace> {
    if !(game.lo <= game.hi) {
        return Err(Error::Config(format!("empty split interval [{}, {}]", game.lo, game.hi)));
    }
    let procedure = &opts.procedure;
    let mut rng = rng_for(seed);
    let stop_time = match procedure.kind {
        ProcedureKind::LongTerm => procedure.stopping.draw(&mut rng),
        _ => 1,
    };
    let mut proposer = procedure.first_proposer(&mut rng)?;
    let mut rec = Recorder::default();
    rec.push(
        0,
        None,
        Event::Start {
            procedure: format!("split_{:?}", procedure.kind).to_lowercase(),
            task: game.label.clone(),
            seed,
            stop_time: Some(stop_time),
            first_proposer: Some(proposer),
        },
    );
    let mut t = 0;
    let mut deal = None;
    let mut payoffs = [0.0; 2];
    let abort = |mut rec: Recorder, t: usize, idx: usize, e: Error| {
        let reason = e.to_string();
        rec.push(t, Some(idx), Event::ProtocolViolation { reason: reason.clone() });
        let outcome = Outcome {
            consensus_reached: false,
            deal_timestep: None,
            payoffs: [0.0; 2],
            final_proposer: None,
            final_proposer_payoff: None,
            empirical: None,
            roles: None,
            scheme: None,
            rule: None,
            aborted: Some(reason),
        };
        Ok(rec.finish(seed, t, outcome))
    };
    while t < stop_time {
        if t > 0 && procedure.roles == RoleDynamics::Alternating {
            proposer = 1 - proposer;
            rec.push(t, None, Event::RoleSwap { proposer });
        }
        let responder = 1 - proposer;
        let ctx = |agent: usize| SplitContext {
            game,
            agent,
            proposer: agent == proposer,
            timestep: t,
            procedure,
            discount: opts.discount,
        };
        let offer = agents[proposer].propose_split(&ctx(proposer));
        for exchange in agents[proposer].take_exchanges() {
            rec.push(t, Some(proposer), Event::Exchange { exchange });
        }
        let theta = match offer.and_then(|th| {
            if game.contains(th) {
                Ok(th.clamp(game.lo, game.hi))
            } else {
                Err(Error::OutOfRange { index: 0, value: th })
            }
        }) {
            Ok(th) => th,
            Err(e) => return abort(rec, t, proposer, e),
        };
        let shares = game.shares(theta);
        rec.push(t, Some(proposer), Event::Offer { theta, shares });
        let answer = agents[responder].respond_split(&ctx(responder), theta);
        for exchange in agents[responder].take_exchanges() {
            rec.push(t, Some(responder), Event::Exchange { exchange });
        }
        let accepted = match answer {
            Ok(a) => a,
            Err(e) => return abort(rec, t, responder, e),
        };
        rec.push(t, Some(responder), Event::Response { accepted });
        rec.push(t, None, Event::Consensus { reached: accepted });
        if accepted {
            let factor = |k: usize| opts.discount.map_or(1.0, |d| d[k].powi(t as i32));
            payoffs[proposer] = shares[0] * factor(proposer);
            payoffs[responder] = shares[1] * factor(responder);
            deal = Some(t + 1);
            break;
        }
        t += 1;
    }
    let last = t.min(stop_time - 1);
    let outcome = Outcome {
        consensus_reached: deal.is_some(),
        deal_timestep: deal,
        payoffs,
        final_proposer: Some(proposer),
        final_proposer_payoff: Some(payoffs[proposer]),
        empirical: None,
        roles: None,
        scheme: None,
        rule: None,
        aborted: None,
    };
    Ok(rec.finish(seed, last, outcome))
}

/// Alternating offers over `spec.pie` with per-round discounting, agent 0
/// proposing first.
pub fn run_rubinstein(
    spec: &RubinsteinSpec,
    agents: [&mut dyn Bargainer; 2],
    stopping: StoppingRule,
    seed: u64,
) -> Result<GameTrace> {
    let opts = SplitOptions {
        procedure: Procedure::long_term(RoleDynamics::Alternating, FirstProposer::Agent(0), stopping),
        discount: Some(spec.delta),
    };
    run_split(&SplitGame::unbounded(spec.pie).with_label("rubinstein"), agents, &opts, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_shares() {
        let g = SplitGame::bounded();
        assert_eq!(g.shares(0.0), [1.0 / 3.0, 1.0 / 3.0]);
        let [p, q] = g.shares(0.5);
        assert!((p - 2.0 / 3.0).abs() < 1e-15 && q.abs() < 1e-15);
    }

    #[test]
    fn best_theta_respects_floor() {
        let g = SplitGame::unbounded(1.0);
        assert_eq!(g.best_theta(0.0), Some(1.0));
        assert!((g.best_theta(0.25).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(g.best_theta(2.0), None);
        assert_eq!(SplitGame::bounded().best_theta(0.0), Some(0.5));
    }
}
