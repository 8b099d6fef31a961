mod common;

use common::{breakpoint_value, posterior_grid_value, random_task, vertex_enumeration, Rel};
use infobargain::persuasion::lp::{LinearProgram, Relation};
use infobargain::persuasion::solve_optimal_scheme;
use infobargain::scenarios::grading;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn grading_matches_posterior_grid() {
    let oracle = posterior_grid_value(&grading(), 1e-3);
    let lp = solve_optimal_scheme(&grading()).unwrap().value;
    assert!((lp - 2.0 / 3.0).abs() < 1e-12);
    assert!((lp - oracle).abs() < 1e-3, "{lp} vs {oracle}");
}

#[test]
fn random_tasks_match_breakpoint_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..100 {
        let n_s = rng.gen_range(2..=3);
        let n_a = rng.gen_range(2..=3);
        let task = random_task(&mut rng, n_s, n_a);
        let lp = solve_optimal_scheme(&task).unwrap().value;
        let exact = breakpoint_value(&task);
        assert!((lp - exact).abs() < 1e-9, "case {case}: lp {lp} vs {exact}");
    }
}

#[test]
fn posterior_grid_bounds_the_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n_s = rng.gen_range(2..=3);
        let n_a = rng.gen_range(2..=3);
        let task = random_task(&mut rng, n_s, n_a);
        let lp = solve_optimal_scheme(&task).unwrap().value;
        let gap = lp - posterior_grid_value(&task, 1e-3);
        // Grid posteriors are feasible splits, so the LP can only be higher.
        assert!(gap >= -1e-9, "case {case}: lp below grid by {}", -gap);
        worst = worst.max(gap);
        within += usize::from(gap <= 1e-3);
    }
    // Case 74 puts a posterior at 0.16943 where the nearest usable grid point
    // is 0.170, and the split weights are steep there.
    assert_eq!(within, 99);
    assert!((worst - 0.0020802785076948216).abs() < 1e-9, "{worst}");
}

#[test]
fn simplex_matches_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checked = 0;
    for case in 0..50 {
        let n = rng.gen_range(2..=12);
        let m = rng.gen_range(1..=4);
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut rows = Vec::new();
        for _ in 0..m {
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let rel = match rng.gen_range(0..4) {
                0 => Rel::Ge,
                1 => Rel::Eq,
                _ => Rel::Le,
            };
            rows.push((a, rel, rng.gen_range(-0.5..1.0)));
        }
        // Keeps the region bounded.
        rows.push((vec![1.0; n], Rel::Le, 3.0));
        let mut lp = LinearProgram::maximize(c.clone());
        for (a, rel, b) in &rows {
            let rel = match rel {
                Rel::Le => Relation::Le,
                Rel::Eq => Relation::Eq,
                Rel::Ge => Relation::Ge,
            };
            lp.subject_to(a.clone(), rel, *b);
        }
        match (lp.solve(), vertex_enumeration(&c, &rows)) {
            (Ok(sol), Some(v)) => {
                assert!((sol.value - v).abs() < 1e-8, "case {case}: {} vs {v}", sol.value);
                checked += 1;
            }
            (Err(infobargain::Error::Infeasible { .. }), None) => {}
            (got, want) => panic!("case {case}: simplex {got:?}, enumeration {want:?}"),
        }
    }
    assert!(checked >= 25, "only {checked} feasible cases");
}
