use infobargain::agents::{scripted_agent, AgentRole, ScriptedAgent, ScriptedAgentSpec, Strategy};
use infobargain::bargaining::RubinsteinSpec;
use infobargain::engine::{
    run_cheap_talk, run_long_term, run_one_shot_persuasion, run_rubinstein, run_split, sample_stop_time, Bargainer, Event,
    FirstProposer, GameTrace, LongTermOptions, Procedure, RoleDynamics, SplitContext, SplitGame, SplitOptions, StoppingRule,
};
use infobargain::scenarios::grading;

fn agent(role: AgentRole, strategy: Strategy) -> ScriptedAgent {
    scripted_agent(ScriptedAgentSpec::new(role, strategy)).unwrap()
}

fn spe_pair() -> (ScriptedAgent, ScriptedAgent) {
    (agent(AgentRole::Sender, Strategy::spe()), agent(AgentRole::Receiver, Strategy::spe()))
}

fn long_term(roles: RoleDynamics, first: FirstProposer, seed: u64) -> GameTrace {
    let (mut s, mut r) = spe_pair();
    let opts = LongTermOptions::new(roles, first, StoppingRule::new(0.1, 10).unwrap()).with_realization(200, false);
    run_long_term(&grading(), [&mut s, &mut r], &opts, seed).unwrap()
}

#[test]
fn same_seed_same_trace() {
    for roles in [RoleDynamics::Fixed, RoleDynamics::Alternating] {
        let a = long_term(roles, FirstProposer::CoinFlip, 17);
        assert_eq!(a, long_term(roles, FirstProposer::CoinFlip, 17));
        assert_eq!(GameTrace::from_jsonl(&a.to_jsonl()).unwrap(), a);
    }
}

#[test]
fn fixed_roles_settle_at_the_commitment_optimum() {
    for seed in 0..20 {
        let t = long_term(RoleDynamics::Fixed, FirstProposer::Agent(0), seed);
        assert!(t.consensus_reached());
        assert_eq!(t.deal_timestep(), Some(1));
        assert!((t.outcome.final_proposer_payoff.unwrap() - 2.0 / 3.0).abs() < 1e-9);
    }
}

#[test]
fn stop_time_comes_from_the_seed() {
    let stopping = StoppingRule::new(0.3, 6).unwrap();
    for seed in 0..30 {
        let (mut s, mut r) = spe_pair();
        let opts = LongTermOptions::new(RoleDynamics::Fixed, FirstProposer::Agent(0), stopping).with_realization(10, false);
        let t = run_long_term(&grading(), [&mut s, &mut r], &opts, seed).unwrap();
        let drawn = t.events.iter().find_map(|e| match e.event {
            Event::Start { stop_time, .. } => stop_time,
            _ => None,
        });
        assert_eq!(drawn, Some(sample_stop_time(&stopping, seed)));
        let last_round = t.of_kind("commitment").map(|e| e.timestep).max().unwrap();
        assert!(last_round < drawn.unwrap());
    }
}

#[test]
fn rejecting_bargainers_play_every_round() {
    struct Stubborn;
    impl Bargainer for Stubborn {
        fn propose_split(&mut self, _: &SplitContext) -> infobargain::Result<f64> {
            Ok(1.0)
        }
        fn respond_split(&mut self, _: &SplitContext, _: f64) -> infobargain::Result<bool> {
            Ok(false)
        }
    }
    let (mut a, mut b) = (Stubborn, Stubborn);
    let opts = SplitOptions {
        procedure: Procedure::long_term(
            RoleDynamics::Alternating,
            FirstProposer::Agent(0),
            StoppingRule::new(0.0, 5).unwrap(),
        ),
        discount: None,
    };
    let t = run_split(&SplitGame::unbounded(1.0), [&mut a, &mut b], &opts, 3).unwrap();
    assert!(!t.consensus_reached());
    assert_eq!(t.of_kind("offer").count(), 5);
}

#[test]
fn rubinstein_agents_agree_immediately() {
    let spec = RubinsteinSpec {
        pie: 1.0,
        delta: [0.9, 0.9],
    };
    let strategy = || Strategy::Spe {
        patience: 0.9,
        accept_at_indifference: false,
    };
    let mut a = agent(AgentRole::Bargainer, strategy());
    let mut b = agent(AgentRole::Bargainer, strategy());
    let t = run_rubinstein(&spec, [&mut a, &mut b], StoppingRule::new(0.0, 50).unwrap(), 1).unwrap();
    assert_eq!(t.deal_timestep(), Some(1));
    assert!((t.outcome.payoffs[0] - 1.0 / 1.9).abs() < 1e-9);
    assert!((t.outcome.payoffs[1] - 0.9 / 1.9).abs() < 1e-9);
}

#[test]
fn one_shot_and_cheap_talk() {
    let (mut s, mut r) = spe_pair();
    let t = run_one_shot_persuasion(&grading(), &mut s, &mut r, 5).unwrap();
    assert!((t.outcome.payoffs[0] - 2.0 / 3.0).abs() < 1e-9);
    assert_eq!(t.of_kind("sample").count(), 1);

    let mut s = agent(AgentRole::Sender, Strategy::spe());
    let mut r = agent(AgentRole::Receiver, Strategy::spe());
    let t = run_cheap_talk(&grading(), &mut s, &mut r, 5).unwrap();
    assert_eq!(t.of_kind("commitment").count(), 0);
    assert_eq!(t.of_kind("private_scheme").count(), 1);
}
