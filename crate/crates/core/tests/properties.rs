use infobargain::bargaining::{check_axioms, nash_solution, BargainingGame, Utility};
use infobargain::engine::{sample_stop_time, StoppingRule};
use infobargain::harness::pearson;
use infobargain::persuasion::{
    babbling_scheme, best_response_posterior, best_response_prior, honest_scheme, incentive_compatibility,
    posterior, solve_optimal_scheme,
};
use infobargain::{evaluate, ActionRule, PersuasionTask, Role, SignalingScheme, Stochastic};
use proptest::prelude::*;

fn prob_row(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.01f64..1.0], n).prop_map(|mut w| {
        if w.iter().all(|&v| v == 0.0) {
            w[0] = 1.0;
        }
        let total: f64 = w.iter().sum();
        w.iter().map(|v| v / total).collect()
    })
}

fn stochastic(rows: usize, cols: usize) -> impl Strategy<Value = Stochastic> {
    prop::collection::vec(prob_row(cols), rows).prop_map(|r| Stochastic::from_rows(r).unwrap())
}

fn task(n_s: usize, n_a: usize) -> impl Strategy<Value = PersuasionTask> {
    let table = move || prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n_a), n_s);
    (prop::collection::vec(0.01f64..1.0, n_s), table(), table()).prop_map(|(w, s, r)| {
        let total: f64 = w.iter().sum();
        PersuasionTask::new("prop", w.iter().map(|v| v / total).collect(), s, r).unwrap()
    })
}

/// Task, two schemes, two action rules and a mixing weight, all conformable.
fn profile() -> impl Strategy<Value = (PersuasionTask, SignalingScheme, SignalingScheme, ActionRule, ActionRule, f64)> {
    (1usize..=4, 1usize..=4, 1usize..=4).prop_flat_map(|(n_s, n_a, n_g)| {
        (
            task(n_s, n_a),
            stochastic(n_s, n_g).prop_map(SignalingScheme),
            stochastic(n_s, n_g).prop_map(SignalingScheme),
            stochastic(n_g, n_a).prop_map(ActionRule),
            stochastic(n_g, n_a).prop_map(ActionRule),
            0.0f64..=1.0,
        )
    })
}

fn mix(a: &Stochastic, b: &Stochastic, t: f64) -> Stochastic {
    let rows = (0..a.n_rows())
        .map(|r| a.row(r).iter().zip(b.row(r)).map(|(x, y)| t * x + (1.0 - t) * y).collect())
        .collect();
    Stochastic::from_rows(rows).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn posteriors_normalize_and_average_to_prior((task, scheme, _, _, _, _) in profile()) {
        let mut recovered = vec![0.0; task.n_states()];
        for sig in 0..scheme.n_signals() {
            let post = posterior(&task, &scheme, sig).unwrap();
            let sum: f64 = post.belief.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12, "signal {} sums to {}", sig, sum);
            if post.reachable {
                let weight: f64 = (0..task.n_states()).map(|s| task.prior()[s] * scheme.prob(s, sig)).sum();
                for (acc, b) in recovered.iter_mut().zip(&post.belief) {
                    *acc += weight * b;
                }
            }
        }
        for (got, want) in recovered.iter().zip(task.prior()) {
            prop_assert!((got - want).abs() <= 1e-12, "{} vs {}", got, want);
        }
    }

    #[test]
    fn uninformative_scheme_keeps_prior_best_response(t in (1usize..=4, 1usize..=4).prop_flat_map(|(s, a)| task(s, a))) {
        let rule = best_response_posterior(&t, &babbling_scheme(&t)).unwrap();
        prop_assert_eq!(rule, best_response_prior(&t));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn evaluate_is_bilinear((task, p, q, pi, rho, t) in profile()) {
        let mixed_scheme = SignalingScheme(mix(&p.0, &q.0, t));
        let lhs = evaluate(&task, &mixed_scheme, &pi).unwrap();
        let (a, b) = (evaluate(&task, &p, &pi).unwrap(), evaluate(&task, &q, &pi).unwrap());
        for role in [Role::Sender, Role::Receiver] {
            prop_assert!(close(lhs.get(role), t * a.get(role) + (1.0 - t) * b.get(role)));
        }
        let mixed_rule = ActionRule(mix(&pi.0, &rho.0, t));
        let lhs = evaluate(&task, &p, &mixed_rule).unwrap();
        let b = evaluate(&task, &p, &rho).unwrap();
        for role in [Role::Sender, Role::Receiver] {
            prop_assert!(close(lhs.get(role), t * a.get(role) + (1.0 - t) * b.get(role)));
        }
    }

    #[test]
    fn evaluate_matches_brute_force((task, p, _, pi, _, _) in profile()) {
        let got = evaluate(&task, &p, &pi).unwrap();
        for role in [Role::Sender, Role::Receiver] {
            let mut want = 0.0;
            for s in 0..task.n_states() {
                for g in 0..p.n_signals() {
                    for a in 0..task.n_actions() {
                        want += task.prior()[s] * p.prob(s, g) * pi.0.get(g, a) * task.reward(role, s, a);
                    }
                }
            }
            prop_assert!(close(got.get(role), want), "{} vs {}", got.get(role), want);
        }
    }

    #[test]
    fn optimum_is_obedient_and_beats_anchors(task in (1usize..=3, 1usize..=3).prop_flat_map(|(s, a)| task(s, a))) {
        let opt = solve_optimal_scheme(&task).unwrap();
        prop_assert!(incentive_compatibility(&task, &opt.scheme).unwrap().obedient);
        let obedient = ActionRule(Stochastic::identity(task.n_actions()));
        let honest = evaluate(&task, &honest_scheme(&task), &obedient).unwrap().sender;
        let babble = evaluate(&task, &babbling_scheme(&task), &best_response_prior(&task)).unwrap().sender;
        prop_assert!(opt.value >= honest - 1e-9 && opt.value >= babble - 1e-9);
    }

    #[test]
    fn pearson_is_symmetric_and_affine_invariant(
        xy in (3usize..40).prop_flat_map(|n| (
            prop::collection::vec(-100.0f64..100.0, n),
            prop::collection::vec(-100.0f64..100.0, n),
        )),
        scale in prop_oneof![0.1f64..10.0, -10.0f64..-0.1],
        shift in -100.0f64..100.0,
    ) {
        let (x, y) = xy;
        let r = pearson(&x, &y).unwrap();
        prop_assert!((r - pearson(&y, &x).unwrap()).abs() <= 1e-15);
        let moved: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
        let r2 = pearson(&moved, &y).unwrap();
        prop_assert!((r2 - scale.signum() * r).abs() <= 1e-12, "{} vs {}", r2, r);
    }

    #[test]
    fn stop_times_stay_in_range(p in 0.0f64..=1.0, cap in 1usize..30, seed in any::<u64>()) {
        let rule = StoppingRule::new(p, cap).unwrap();
        let t = sample_stop_time(&rule, seed);
        prop_assert!((1..=cap).contains(&t));
        prop_assert!((rule.distribution().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(rule.mean() >= 1.0 - 1e-12 && rule.mean() <= cap as f64 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nash_solution_satisfies_axioms(points in prop::collection::vec((0.01f64..1.0, 0.01f64..1.0), 1..12)) {
        let pts: Vec<Utility> = points.iter().map(|&(a, b)| [a, b]).collect();
        let game = BargainingGame::finite(pts, [0.0, 0.0]);
        let report = check_axioms(&nash_solution, &game).unwrap();
        prop_assert!(report.all(), "{:?}", report);
    }
}
