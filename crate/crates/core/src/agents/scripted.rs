//! Deterministic agents playing the analysed equilibrium behaviours.

use std::fmt;

use crate::bargaining::{alternating_offers_spe, golden_max, Frontier, rubinstein_split, RubinsteinSpec, SpeOffers, Utility};
use crate::engine::{Agent, Bargainer, ProcedureKind, RoleDynamics, SplitContext, SplitGame, TurnContext, CONSENSUS_TOL};
use crate::error::{Error, Result};
use crate::model::{evaluate, ActionRule, PersuasionTask, Role, SignalingScheme};
use crate::persuasion::{
    babbling_scheme, best_response_posterior, best_response_prior_for, honest_scheme, optimize_obedient,
    solve_optimal_scheme, ObedientProgram,
};
use crate::reduction::{disagreement_point, scheme_for_payoffs, solve_via_nash_product, ObedientFrontier};
use crate::rules::{MetaActionRule, Threshold};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentRole {
    Sender,
    Receiver,
    Bargainer,
}

impl fmt::Display for AgentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentRole::Sender => "sender",
            AgentRole::Receiver => "receiver",
            AgentRole::Bargainer => "bargainer",
        })
    }
}

#[derive(Clone, Debug)]
pub enum Strategy {
    /// Subgame perfect play. `patience` is the discount factor assumed for
    /// alternating offers when the game itself does not discount;
    /// `accept_at_indifference` decides ultimatum responses to a zero share.
    Spe {
        patience: f64,
        accept_at_indifference: bool,
    },
    Honest,
    Babbling,
    NashFair,
    Satisfaction(Threshold),
    GreedyUltimatum,
}

impl Strategy {
    pub fn spe() -> Self {
        Strategy::Spe {
            patience: 0.99,
            accept_at_indifference: false,
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Strategy::Spe { .. } => "spe".into(),
            Strategy::Honest => "honest".into(),
            Strategy::Babbling => "babbling".into(),
            Strategy::NashFair => "nash-fair".into(),
            Strategy::Satisfaction(t) => format!("satisfaction:{}", t.tag()),
            Strategy::GreedyUltimatum => "greedy-ultimatum".into(),
        }
    }

    /// `spe`, `honest`, `babbling`, `nash-fair`, `greedy-ultimatum` or
    /// `satisfaction[:threshold]`.
    pub fn from_tag(tag: &str) -> Result<Self> {
        let (head, arg) = tag.split_once(':').map_or((tag, None), |(h, a)| (h, Some(a)));
        let s = match head {
            "spe" => Strategy::spe(),
            "honest" => Strategy::Honest,
            "babbling" => Strategy::Babbling,
            "nash-fair" | "nash_fair" => Strategy::NashFair,
            "greedy-ultimatum" | "greedy_ultimatum" => Strategy::GreedyUltimatum,
            "satisfaction" => Strategy::Satisfaction(Threshold::from_tag(arg.unwrap_or("payoff_comparison"))?),
            _ => return Err(Error::Config(format!("unknown strategy {tag:?}"))),
        };
        if arg.is_some() && head != "satisfaction" {
            return Err(Error::Config(format!("strategy {head:?} takes no argument")));
        }
        Ok(s)
    }

    fn allowed(&self, role: AgentRole) -> bool {
        use AgentRole::*;
        matches!(
            (self, role),
            (Strategy::Spe { .. } | Strategy::NashFair, _)
                | (Strategy::Honest | Strategy::Babbling, Sender)
                | (Strategy::Satisfaction(_), Receiver)
                | (Strategy::GreedyUltimatum, Bargainer)
        )
    }
}

#[derive(Clone, Debug)]
pub struct ScriptedAgentSpec {
    pub role: AgentRole,
    pub strategy: Strategy,
}

impl ScriptedAgentSpec {
    pub fn new(role: AgentRole, strategy: Strategy) -> Self {
        ScriptedAgentSpec { role, strategy }
    }
}

pub struct ScriptedAgent {
    spec: ScriptedAgentSpec,
    /// Alternating-offer equilibrium of the last task seen, with its factors.
    spe_cache: Option<(PersuasionTask, [f64; 2], SpeOffers)>,
}

pub fn scripted_agent(spec: ScriptedAgentSpec) -> Result<ScriptedAgent> {
    if let Strategy::Spe { patience, .. } = spec.strategy {
        if !(patience > 0.0 && patience < 1.0) {
            return Err(Error::Config(format!("patience {patience} must lie in (0, 1)")));
        }
    }
    if !spec.strategy.allowed(spec.role) {
        return Err(Error::Config(format!(
            "strategy {} cannot play the {} role",
            spec.strategy.tag(),
            spec.role
        )));
    }
    Ok(ScriptedAgent { spec, spe_cache: None })
}

fn alternating(ctx: &TurnContext) -> bool {
    ctx.procedure.kind == ProcedureKind::LongTerm && ctx.procedure.roles == RoleDynamics::Alternating
}

fn receiver_value(task: &PersuasionTask, scheme: &SignalingScheme) -> Result<f64> {
    Ok(evaluate(task, scheme, &best_response_posterior(task, scheme)?)?.receiver)
}

/// Best scheme for the sender that keeps the receiver at `floor` or above.
fn sender_best_with(task: &PersuasionTask, floor: f64) -> Result<Option<(f64, SignalingScheme)>> {
    match optimize_obedient(task, &ObedientProgram::sender().with_floor(Role::Receiver, floor - 1e-12)) {
        Ok(o) => Ok(Some((o.value, o.scheme))),
        Err(Error::Infeasible { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

impl ScriptedAgent {
    pub fn spec(&self) -> &ScriptedAgentSpec {
        &self.spec
    }

    fn wrong_role(&self, what: &str) -> Error {
        Error::Config(format!("a scripted {} cannot {what}", self.spec.role))
    }

    fn patience(&self) -> f64 {
        match self.spec.strategy {
            Strategy::Spe { patience, .. } => patience,
            _ => 0.99,
        }
    }

    fn persuasion_spe(&mut self, task: &PersuasionTask) -> Result<SpeOffers> {
        let delta = [self.patience(); 2];
        if let Some((t, dl, offers)) = &self.spe_cache {
            if t == task && *dl == delta {
                return Ok(*offers);
            }
        }
        let d = disagreement_point(task)?;
        let offers = alternating_offers_spe(&ObedientFrontier { task }, d.into(), delta)?;
        self.spe_cache = Some((task.clone(), delta, offers));
        Ok(offers)
    }

    /// What agent `me` holds out for when rejecting: the discounted value of
    /// proposing next round.
    fn continuation(&mut self, task: &PersuasionTask, me: usize) -> Result<f64> {
        let d: Utility = disagreement_point(task)?.into();
        let offers = self.persuasion_spe(task)?;
        Ok(d[me] + self.patience() * (offers.proposals[me][me] - d[me]))
    }

    fn require(&self, role: AgentRole, what: &str) -> Result<()> {
        if self.spec.role == role {
            Ok(())
        } else {
            Err(self.wrong_role(what))
        }
    }
}

impl Agent for ScriptedAgent {
    fn propose_scheme(&mut self, ctx: &TurnContext) -> Result<SignalingScheme> {
        self.require(AgentRole::Sender, "commit a signaling scheme")?;
        let task = ctx.task;
        match &self.spec.strategy {
            Strategy::Honest => Ok(honest_scheme(task)),
            Strategy::Babbling => Ok(babbling_scheme(task)),
            Strategy::NashFair => Ok(solve_via_nash_product(task)?.scheme),
            Strategy::Spe { .. } if alternating(ctx) => {
                let offers = self.persuasion_spe(task)?;
                scheme_for_payoffs(task, offers.proposals[0])
            }
            Strategy::Spe { .. } => Ok(solve_optimal_scheme(task)?.scheme),
            _ => Err(self.wrong_role("commit a signaling scheme")),
        }
    }

    fn propose_expectation(&mut self, ctx: &TurnContext) -> Result<SignalingScheme> {
        self.require(AgentRole::Receiver, "announce an expectation")?;
        let task = ctx.task;
        match &self.spec.strategy {
            Strategy::NashFair => Ok(solve_via_nash_product(task)?.scheme),
            Strategy::Satisfaction(_) => Ok(optimize_obedient(task, &ObedientProgram::receiver())?.scheme),
            Strategy::Spe { .. } if alternating(ctx) => {
                let offers = self.persuasion_spe(task)?;
                scheme_for_payoffs(task, offers.proposals[1])
            }
            Strategy::Spe { .. } => {
                // Ultimatum from the receiver: the best obedient outcome that
                // leaves the sender no worse than disagreement.
                let d = disagreement_point(task)?;
                let target = ObedientFrontier { task }
                    .best_given_floor(1, d.sender)
                    .ok_or_else(|| Error::Precondition("no obedient scheme meets the sender's floor".into()))?;
                scheme_for_payoffs(task, target)
            }
            _ => Err(self.wrong_role("announce an expectation")),
        }
    }

    fn respond_rule(&mut self, ctx: &TurnContext, scheme: Option<&SignalingScheme>) -> Result<ActionRule> {
        self.require(AgentRole::Receiver, "choose an action rule")?;
        let task = ctx.task;
        let Some(scheme) = scheme else {
            return Ok(best_response_prior_for(task, task.n_actions()));
        };
        let pi0 = best_response_prior_for(task, scheme.n_signals());
        let pi1 = best_response_posterior(task, scheme)?;
        let value = evaluate(task, scheme, &pi1)?.receiver;
        let accept = match &self.spec.strategy {
            Strategy::Satisfaction(t) => return MetaActionRule::new(t.clone()).resolve(task, scheme),
            Strategy::NashFair => value >= solve_via_nash_product(task)?.payoffs.receiver - CONSENSUS_TOL,
            Strategy::Spe { .. } if alternating(ctx) => value >= self.continuation(task, 1)? - CONSENSUS_TOL,
            Strategy::Spe { .. } => true,
            _ => return Err(self.wrong_role("choose an action rule")),
        };
        Ok(if accept { pi1 } else { pi0 })
    }

    fn respond_scheme(&mut self, ctx: &TurnContext, expectation: &SignalingScheme) -> Result<SignalingScheme> {
        self.require(AgentRole::Sender, "answer an expectation")?;
        let task = ctx.task;
        let target = receiver_value(task, expectation)?;
        let best = sender_best_with(task, target)?;
        match &self.spec.strategy {
            Strategy::Honest => Ok(honest_scheme(task)),
            Strategy::Babbling => Ok(babbling_scheme(task)),
            Strategy::NashFair => {
                let nash = solve_via_nash_product(task)?;
                Ok(match best {
                    Some((v, s)) if v >= nash.payoffs.sender - CONSENSUS_TOL => s,
                    _ => nash.scheme,
                })
            }
            Strategy::Spe { .. } if alternating(ctx) => {
                let floor = self.continuation(task, 0)?;
                match best {
                    Some((v, s)) if v >= floor - CONSENSUS_TOL => Ok(s),
                    _ => {
                        let offers = self.persuasion_spe(task)?;
                        scheme_for_payoffs(task, offers.proposals[0])
                    }
                }
            }
            Strategy::Spe { .. } => {
                let d = disagreement_point(task)?;
                match best {
                    Some((v, s)) if v >= d.sender - CONSENSUS_TOL => Ok(s),
                    _ => Ok(solve_optimal_scheme(task)?.scheme),
                }
            }
            _ => Err(self.wrong_role("answer an expectation")),
        }
    }
}

/// `[δ_me, δ_other]` for agent `me`.
fn factors(ctx: &SplitContext, patience: f64) -> [f64; 2] {
    let d = ctx.discount.unwrap_or([patience; 2]);
    [d[ctx.agent], d[1 - ctx.agent]]
}

/// A split over a pie that the proposer keeps `θ` of.
fn pie_of(game: &SplitGame) -> Option<f64> {
    let plain = game.lo == 0.0 && game.proposer == [0.0, 1.0] && game.responder == [game.hi, -1.0];
    plain.then_some(game.hi)
}

fn split_alternating(ctx: &SplitContext) -> bool {
    ctx.procedure.kind == ProcedureKind::LongTerm && ctx.procedure.roles == RoleDynamics::Alternating
}

impl ScriptedAgent {
    /// Equilibrium `(θ, value)` when this agent proposes with alternating offers.
    fn split_spe(&self, ctx: &SplitContext) -> Result<(f64, f64)> {
        let delta = factors(ctx, self.patience());
        let game = ctx.game;
        if let Some(pie) = pie_of(game) {
            let [mine, _] = rubinstein_split(&RubinsteinSpec { pie, delta })?;
            return Ok((mine, mine));
        }
        let offers = alternating_offers_spe(game, [0.0, 0.0], delta)?;
        let [_, theirs] = offers.proposals[0];
        let theta = game
            .best_theta(theirs - 1e-15)
            .ok_or_else(|| Error::Precondition("equilibrium offer is not a feasible split".into()))?;
        Ok((theta, game.shares(theta)[0]))
    }

    fn nash_theta(game: &SplitGame) -> f64 {
        golden_max(
            |t| {
                let [p, q] = game.shares(t);
                p.max(0.0) * q.max(0.0)
            },
            game.lo,
            game.hi,
        )
    }

    fn greedy_theta(game: &SplitGame) -> f64 {
        if game.proposer[1] >= 0.0 {
            game.hi
        } else {
            game.lo
        }
    }
}

impl Bargainer for ScriptedAgent {
    fn propose_split(&mut self, ctx: &SplitContext) -> Result<f64> {
        self.require(AgentRole::Bargainer, "propose a split")?;
        let game = ctx.game;
        match self.spec.strategy {
            Strategy::GreedyUltimatum => Ok(Self::greedy_theta(game)),
            Strategy::NashFair => Ok(Self::nash_theta(game)),
            Strategy::Spe { .. } if split_alternating(ctx) => Ok(self.split_spe(ctx)?.0),
            Strategy::Spe {
                accept_at_indifference, ..
            } => {
                let floor = if accept_at_indifference {
                    0.0
                } else {
                    game.unit.unwrap_or(1e-3) * game.responder[1].abs().max(f64::MIN_POSITIVE)
                };
                game.best_theta(floor)
                    .or_else(|| game.best_theta(0.0))
                    .ok_or_else(|| Error::Precondition("no split leaves the responder anything".into()))
            }
            _ => Err(self.wrong_role("propose a split")),
        }
    }

    fn respond_split(&mut self, ctx: &SplitContext, theta: f64) -> Result<bool> {
        self.require(AgentRole::Bargainer, "answer a split")?;
        let share = ctx.game.shares(theta)[1];
        Ok(match self.spec.strategy {
            Strategy::GreedyUltimatum => share >= -1e-12,
            Strategy::NashFair => share >= ctx.game.shares(Self::nash_theta(ctx.game))[1] - CONSENSUS_TOL,
            Strategy::Spe { .. } if split_alternating(ctx) => {
                let delta = factors(ctx, self.patience());
                share >= delta[0] * self.split_spe(ctx)?.1 - CONSENSUS_TOL
            }
            Strategy::Spe {
                accept_at_indifference, ..
            } => share > 1e-12 || (accept_at_indifference && share >= -1e-12),
            _ => return Err(self.wrong_role("answer a split")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Procedure;
    use crate::scenarios::grading;

    fn ctx<'a>(task: &'a PersuasionTask, p: &'a Procedure, agent: usize) -> TurnContext<'a> {
        TurnContext {
            task,
            agent,
            role: if agent == 0 { Role::Sender } else { Role::Receiver },
            proposer: agent == 0,
            timestep: 0,
            procedure: p,
        }
    }

    #[test]
    fn incompatible_pairs_are_rejected() {
        for (role, strategy) in [
            (AgentRole::Receiver, Strategy::Honest),
            (AgentRole::Sender, Strategy::GreedyUltimatum),
            (AgentRole::Bargainer, Strategy::Satisfaction(Threshold::PayoffComparison)),
        ] {
            assert!(matches!(scripted_agent(ScriptedAgentSpec::new(role, strategy)), Err(Error::Config(_))));
        }
    }

    #[test]
    fn tags_roundtrip() {
        for tag in ["spe", "honest", "babbling", "nash-fair", "greedy-ultimatum", "satisfaction:honesty"] {
            assert_eq!(Strategy::from_tag(tag).unwrap().tag(), tag);
        }
        assert!(Strategy::from_tag("spe:3").is_err());
    }

    #[test]
    fn spe_sender_matches_lp() {
        let task = grading();
        let p = Procedure::one_shot();
        let mut a = scripted_agent(ScriptedAgentSpec::new(AgentRole::Sender, Strategy::spe())).unwrap();
        let s = a.propose_scheme(&ctx(&task, &p, 0)).unwrap();
        assert_eq!(s, solve_optimal_scheme(&task).unwrap().scheme);
        let (x1, x2) = s.0.binary_params().unwrap();
        assert!((x1 - 0.5).abs() < 1e-9 && (x2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nash_sender_is_honest() {
        let task = grading();
        let p = Procedure::one_shot();
        let mut a = scripted_agent(ScriptedAgentSpec::new(AgentRole::Sender, Strategy::NashFair)).unwrap();
        let (x1, x2) = a.propose_scheme(&ctx(&task, &p, 0)).unwrap().0.binary_params().unwrap();
        assert!(x1 < 1e-6 && (x2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn wrong_entry_point_is_a_config_error() {
        let task = grading();
        let p = Procedure::one_shot();
        let mut a = scripted_agent(ScriptedAgentSpec::new(AgentRole::Sender, Strategy::Honest)).unwrap();
        assert!(matches!(a.respond_rule(&ctx(&task, &p, 1), None), Err(Error::Config(_))));
    }

    #[test]
    fn rubinstein_responder_threshold() {
        use crate::engine::{FirstProposer, StoppingRule};
        let game = SplitGame::unbounded(1.0);
        let p = Procedure::long_term(RoleDynamics::Alternating, FirstProposer::Agent(0), StoppingRule::default());
        let c = SplitContext {
            game: &game,
            agent: 1,
            proposer: false,
            timestep: 0,
            procedure: &p,
            discount: Some([0.9, 0.9]),
        };
        let mut b = scripted_agent(ScriptedAgentSpec::new(AgentRole::Bargainer, Strategy::spe())).unwrap();
        let cut = 0.9 / 1.9;
        assert!(b.respond_split(&c, 1.0 - cut).unwrap());
        assert!(!b.respond_split(&c, 1.0 - cut + 1e-6).unwrap());
    }
}
