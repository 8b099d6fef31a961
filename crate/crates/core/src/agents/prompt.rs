//! Prompts for chat-model agents.

use std::fmt::Write;

use super::template::*;
use crate::engine::{FirstProposer, Message, Procedure, ProcedureKind, RoleDynamics, SplitContext, SplitGame, StoppingRule, TurnContext};
use crate::model::{PersuasionTask, Role, SignalingScheme};

/// What the agent is asked to do this turn.
#[derive(Clone, Copy, Debug)]
pub enum Turn<'a> {
    Propose,
    /// Receiver answering a committed scheme; `None` if it was not disclosed.
    RespondToScheme(Option<&'a SignalingScheme>),
    /// Sender answering the receiver's announced expectation.
    RespondToExpectation(&'a SignalingScheme),
}

/// The task prompt followed by the turn message.
pub fn build_prompt(ctx: &TurnContext, turn: Turn) -> Vec<Message> {
    vec![
        Message::user(task_prompt(ctx.task, ctx.procedure, ctx.agent, ctx.role)),
        Message::user(turn_message(ctx.task, ctx.timestep, turn)),
    ]
}

fn join_or(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} or {}", init.join(", "), last),
    }
}

fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

/// `2/3` for values close to a fraction with a small denominator.
pub fn fraction(p: f64) -> String {
    for d in 1..=1000u32 {
        let n = (p * d as f64).round();
        if (n / d as f64 - p).abs() < 1e-12 {
            return if d == 1 { format!("{n}") } else { format!("{n}/{d}") };
        }
    }
    format!("{p}")
}

fn indices(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn scenario_blurb(task: &PersuasionTask) -> String {
    match task.label() {
        "math_baseline" => MATH_BLURB.to_string(),
        "grading_students" => "Recent graduates entering the job market are either weak students (state 0) or excellent students (state 1). \
A professor (the sender), who can assess student quality, sends grades as signals to an HR representative (the receiver) who makes hiring decisions: action 1 is to hire the student and action 0 is not to hire.\n"
            .to_string(),
        "selling_products" => "A seller (the sender) knows whether a product is of low quality (state 0) or high quality (state 1) and describes it to a buyer (the receiver). \
The buyer decides whether to buy the product (action 1) or not (action 0).\n"
            .to_string(),
        label => {
            let named = |names: &[String]| {
                names.iter().enumerate().map(|(i, n)| format!("{i} ({n})")).collect::<Vec<_>>().join(", ")
            };
            format!(
                "Scenario \"{label}\". The states are {}. The actions are {}.\n",
                named(task.states()),
                named(task.actions())
            )
        }
    }
}

fn payoff_terms(task: &PersuasionTask, who: &str) -> String {
    let mut out = String::new();
    let mut first = true;
    for s in 0..task.n_states() {
        for g in 0..task.n_actions() {
            for a in 0..task.n_actions() {
                let lead = if first { "        " } else { "        + " };
                first = false;
                writeln!(out, "{lead}mu_0(s={s}) * x({s}, {g}) * y({g}, {a}) * {who}(s={s}, a={a})").unwrap();
            }
        }
    }
    out
}

fn general_payoffs(task: &PersuasionTask) -> String {
    format!(
        "\nLet x(s, sigma) represent $varphi(sigma | s)$ (the probability of the sender sending signal sigma when the state is s) \
and y(sigma, a) represent $pi(a | sigma)$ (the probability of the receiver taking action a when the signal is sigma).\n\
Then,\n- The sender's expected payoff is:\n    E(r^i) = \n{}\n- The receiver's expected payoff is: \n    E(r^j) = \n{}",
        payoff_terms(task, "r^i"),
        payoff_terms(task, "r^j")
    )
}

fn general_format(task: &PersuasionTask) -> String {
    let (n_s, n_a) = (task.n_states(), task.n_actions());
    let xs: Vec<String> = (0..n_s).flat_map(|s| (0..n_a).map(move |g| format!("x({s}, {g})"))).collect();
    let ys: Vec<String> = (0..n_a).flat_map(|g| (0..n_a).map(move |a| format!("y({g}, {a})"))).collect();
    format!(
        "\n\n### Format\n\n#### If You Are the Proposer\nFormat the output in JSON according to the following template:\n{{\n    \"Analysis\": \"(Your Summarized Analysis)\", \n    \"Decision\": [{}],\n}}\n\
where x(s, sigma) is $varphi(sigma | s)$ and each group of {n_a} entries for one state sums to 1.\n\
- If you are the sender, this decision specifies your signaling scheme.\n\
- If you are the receiver, this decision specifies the signaling scheme $varphi_1$ you expect the sender to take, claiming that you will follow $pi_1$ if the sender commits to a signaling scheme $varphi$ that yields an expected reward for the receiver at least as high as that induced by $varphi_1$; otherwise, the receiver will follow $pi_0$.\n\n\
#### If You Are the Responder\nFormat the output in JSON according to the following template:\n\
If you are the receiver:\n{{\n    \"Analysis\": \"(Your Summarized Analysis)\", \n    \"Decision\": [{}],\n}}\n\
where y(sigma, a) is $pi(a | sigma)$ and each group of {n_a} entries for one signal sums to 1. This decision specifies your action rule.\n\
If you are the sender, use the proposer template; this decision specifies your signaling scheme.\n\n\
Please STRICTLY adhere to the JSON templates when outputting, and do not output anything else. Please think step by step, and then make a decision based on all the information you know. \
Remember that you and your opponents are both self-interested rational players. Be aware of the consequences of your decisions. Your analysis and decisions should remain logically CONSISTENT.\n\n## Identity\n\n",
        xs.join(", "),
        ys.join(", ")
    )
}

fn first_proposer_line(first: FirstProposer) -> String {
    match first {
        FirstProposer::CoinFlip => "1. Who to be the proposer (in the first run) is determined by a coin flip.\n".into(),
        FirstProposer::Agent(k) => format!("1. The agent {k} is the proposer (in the first run).\n"),
    }
}

fn stopping_note(stopping: &StoppingRule) -> String {
    format!(
        "The loop process has a {} probability of stopping each time it is executed. The initial timstep is 0, and it increases by 1 each time it is executed. If the timestep equals {}, it will stop directly.",
        stopping.stop_probability, stopping.max_timestep
    )
}

const KEEP_ROLES: &str = "    5. If they did not reach a consensus, the two agents keep their roles: the current proposer remains the proposer, and the current responder remains the responder.\n";

const ONE_SHOT_BODY: &str = concat!(
    "2. The proposer decides its policy\n",
    "    - If the sender is the proposer: The sender determines a signaling scheme $varphi$ and commits it to the receiver.\n",
    "    - If the receiver is the proposer: The receiver announces a signaling scheme $varphi_1$, claiming that it will follow $pi_1$ if the sender commits to a signaling scheme $varphi$ that yields an expected reward for the receiver at least as high as that induced by $varphi_1$; otherwise, the receiver will follow $pi_0$.\n",
    "3. The responder decides its policy\n",
    "    - If the receiver is the responder: The receiver decides an action rule\n",
    "    - If the sender is the responder: The sender determines a signaling scheme $varphi$\n",
    "There is only one round of decisions.\n",
);

const CHEAP_TALK: &str = "\n### Task Procedure\n\nThe procedure of this task is as follows:\n\
1. The sender determines a signaling scheme $varphi$ but does not disclose it to the receiver.\n\
2. The receiver decides an action rule $pi$ without knowing the signaling scheme.\n";

fn simulation_only() -> &'static str {
    SIMULATION.trim_end_matches("\n\nNote that:\n")
}

fn procedure_text(procedure: &Procedure) -> String {
    let mut out = String::new();
    match procedure.kind {
        ProcedureKind::LongTerm => {
            out.push_str(PROCEDURE_INTRO);
            out.push_str(&first_proposer_line(procedure.first));
            out.push_str(LOOP_BODY);
            out.push_str(match procedure.roles {
                RoleDynamics::Alternating => SWITCH_ROLES,
                RoleDynamics::Fixed => KEEP_ROLES,
            });
            out.push_str(SIMULATION);
            out.push_str(&stopping_note(&procedure.stopping));
        }
        ProcedureKind::OneShot => {
            out.push_str(PROCEDURE_INTRO);
            out.push_str(&first_proposer_line(procedure.first));
            out.push_str(ONE_SHOT_BODY);
            out.push_str(simulation_only());
        }
        ProcedureKind::CheapTalk => {
            out.push_str(CHEAP_TALK);
            out.push_str(simulation_only());
        }
    }
    out
}

/// The full task description for one agent.
pub fn task_prompt(task: &PersuasionTask, procedure: &Procedure, agent: usize, role: Role) -> String {
    let mut out = String::new();
    out.push_str(SELF_AWARENESS);
    out.push_str(PERSUASION_INTRO);
    out.push_str(&scenario_blurb(task));
    let states = indices(task.n_states());
    let actions = indices(task.n_actions());
    let prior: Vec<String> = task
        .prior()
        .iter()
        .enumerate()
        .map(|(s, p)| format!("$mu_0({s}) = {}$", fraction(*p)))
        .collect();
    writeln!(out, "- Environmental state: {}", join_or(&states)).unwrap();
    writeln!(out, "- Prior state distribution: {}", join_and(&prior)).unwrap();
    writeln!(out, "- The sender's signal: {}", join_or(&actions)).unwrap();
    writeln!(out, "- The receiver's action: {}", join_or(&actions)).unwrap();
    out.push_str(STRATEGY_SPACES);
    for s in 0..task.n_states() {
        for a in 0..task.n_actions() {
            let ri = task.reward(Role::Sender, s, a);
            let rj = task.reward(Role::Receiver, s, a);
            writeln!(
                out,
                "- If state={s} and action={a}, the sender gets {ri} (r^i(s={s}, a={a})={ri}) and the receiver gets {rj} (r^j(s={s}, a={a})={rj})"
            )
            .unwrap();
        }
    }
    if task.is_binary() {
        out.push_str(BINARY_PAYOFFS);
    } else {
        out.push_str(&general_payoffs(task));
    }
    out.push_str(&procedure_text(procedure));
    if task.is_binary() {
        out.push_str(BINARY_FORMAT);
    } else {
        out.push_str(&general_format(task));
    }
    write!(out, "- You are the agent {agent}\n- You are the {role}").unwrap();
    out
}

fn scheme_params(task: &PersuasionTask, scheme: &SignalingScheme) -> String {
    match (task.is_binary(), scheme.0.binary_params()) {
        (true, Some((x1, x2))) => format!("x1={x1} and x2={x2}"),
        _ => format!("varphi = {:?}", scheme.0.to_rows()),
    }
}

const DECIDE: &str = "Please make a decision based on all the information you know.";

pub fn turn_message(task: &PersuasionTask, timestep: usize, turn: Turn) -> String {
    match turn {
        Turn::Propose => format!("The current timestep is {timestep} and you are the proposer. {DECIDE}"),
        Turn::RespondToScheme(Some(s)) | Turn::RespondToExpectation(s) => format!(
            "Now the proposer decides that {}. The current timestep is {timestep} and you are the responder. {DECIDE}",
            scheme_params(task, s)
        ),
        Turn::RespondToScheme(None) => format!(
            "The sender has decided a signaling scheme but does not disclose it. The current timestep is {timestep} and you are the responder. {DECIDE}"
        ),
    }
}

fn linear(a: f64, b: f64) -> String {
    match (a == 0.0, b) {
        (true, b) => format!("{b} * x"),
        (false, b) if b < 0.0 => format!("{a} - {} * x", -b),
        (false, b) => format!("{a} + {b} * x"),
    }
}

fn split_blurb(game: &SplitGame) -> String {
    let lead = match game.label.as_str() {
        "math_baseline" => MATH_BLURB.trim_end().to_string() + " ",
        "splitting_coins" => match game.unit {
            Some(u) => format!("Two players split {} coins, each worth {u}. ", (game.hi / u).round()),
            None => "Two players split a pile of coins. ".to_string(),
        },
        "making_deals" => "A seller and a buyer negotiate the terms of a transaction. ".to_string(),
        _ => String::new(),
    };
    format!(
        "{lead}The proposer suggests a value x in [{}, {}]. If the responder accepts, the proposer receives {} and the responder receives {}. If the responder rejects, both get nothing.",
        game.lo,
        game.hi,
        linear(game.proposer[0], game.proposer[1]),
        linear(game.responder[0], game.responder[1])
    )
}

/// Prompt for bargaining over a split.
pub fn build_split_prompt(ctx: &SplitContext, offer: Option<f64>) -> Vec<Message> {
    let p = ctx.procedure;
    let mut out = String::new();
    out.push_str(SELF_AWARENESS);
    out.push_str(
        "## Task Description\n\nApart from you, there is another self-interested rational player, and you two are going to play a game. \
One player acts as the proposer while the other player acts as the responder. Both parties strive to maximize their own rewards.\n\n### Task Scenario\n\n",
    );
    out.push_str(&split_blurb(ctx.game));
    out.push_str("\n\n### Task Procedure\n\nThe procedure is as follows:\n");
    out.push_str(&first_proposer_line(p.first));
    match p.kind {
        ProcedureKind::LongTerm => {
            out.push_str("2. The following process continues until the responder accepts an offer or the game ends due to a timeout:\n");
            out.push_str("    3. The proposer suggests a value x.\n    4. The responder accepts or rejects it.\n");
            out.push_str(match p.roles {
                RoleDynamics::Alternating => "    5. If the offer is rejected, the two agents switch roles: the current responder becomes the proposer, and the current proposer becomes the responder.\n",
                RoleDynamics::Fixed => "    5. If the offer is rejected, the two agents keep their roles.\n",
            });
            out.push_str("\nNote that:\n");
            out.push_str(&stopping_note(&p.stopping));
            if let Some([d0, d1]) = ctx.discount {
                write!(
                    out,
                    "\nIf an offer is accepted at timestep t, the payoff of agent 0 is multiplied by {d0}^t and the payoff of agent 1 by {d1}^t."
                )
                .unwrap();
            }
        }
        _ => out.push_str("2. The proposer suggests a value x.\n3. The responder accepts or rejects it."),
    }
    out.push_str(
        "\n\n### Format\n\n#### If You Are the Proposer\nFormat the output in JSON according to the following template:\n{\n    \"Analysis\": \"(Your Summarized Analysis)\", \n    \"Decision\": [x],\n}\n\
where x is the value you propose.\n\n#### If You Are the Responder\nFormat the output in JSON according to the following template:\n{\n    \"Analysis\": \"(Your Summarized Analysis)\", \n    \"Decision\": [d],\n}\n\
where d is 1 to accept the offer and 0 to reject it.\n\n\
Please STRICTLY adhere to the JSON templates when outputting, and do not output anything else. Please think step by step, and then make a decision based on all the information you know. \
Remember that you and your opponents are both self-interested rational players. Be aware of the consequences of your decisions. Your analysis and decisions should remain logically CONSISTENT.\n\n## Identity\n\n",
    );
    write!(out, "- You are the agent {}", ctx.agent).unwrap();
    let t = ctx.timestep;
    let turn = match offer {
        None => format!("The current timestep is {t} and you are the proposer. {DECIDE}"),
        Some(x) => format!("Now the proposer decides that x={x}. The current timestep is {t} and you are the responder. {DECIDE}"),
    };
    vec![Message::user(out), Message::user(turn)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions() {
        assert_eq!(fraction(2.0 / 3.0), "2/3");
        assert_eq!(fraction(0.5), "1/2");
        assert_eq!(fraction(1.0), "1");
        assert_eq!(fraction(0.0), "0");
        assert_eq!(fraction(std::f64::consts::FRAC_1_PI), format!("{}", std::f64::consts::FRAC_1_PI));
    }

    #[test]
    fn lists() {
        let v = indices(3);
        assert_eq!(join_or(&v), "0, 1 or 2");
        assert_eq!(join_and(&v[..2]), "0 and 1");
    }

    #[test]
    fn stopping_note_follows_rule() {
        let note = stopping_note(&StoppingRule::new(0.25, 4).unwrap());
        assert!(note.starts_with("The loop process has a 0.25 probability"));
        assert!(note.ends_with("If the timestep equals 4, it will stop directly."));
    }
}
