mod common;

use cbsg::game::{
    best_response_set, brute_force_se, individual_optimization, min_cost_response, pattern_prob, payoff_attacker,
    payoff_defender, solve_cbbi, GameConfig, DEFAULT_PAIR_CAP,
};
use cbsg::lincontrol::MaskMode;
use cbsg::lossmap::{enumerate_patterns, LossTable};
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_config(r: &mut ChaCha8Rng, n: usize, max_levels: u32) -> GameConfig {
    let mut cfg = GameConfig::uniform(n, r.gen_range(1..=max_levels), r.gen_range(1..=max_levels), 1.0, 1.0);
    cfg.gamma_a = (0..n).map(|_| r.gen_range(0.05..1.5)).collect();
    cfg.gamma_d = (0..n).map(|_| r.gen_range(0.05..1.5)).collect();
    cfg
}

fn slack(x: f64, y: f64) -> f64 {
    1e-8 * x.abs().max(y.abs()) + 1e-12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probabilities_normalize(seed in any::<u64>(), n in 1usize..=6, levels in 1u32..=3) {
        let mut r = rng(seed);
        let (ga, gd) = (r.gen_range(0.1..1.0), r.gen_range(0.1..1.0));
        let a = random_action(&mut r, n, levels, ga);
        let d = random_action(&mut r, n, levels, gd);
        let total: f64 = enumerate_patterns(n, 16).unwrap().iter().map(|s| pattern_prob(&a, &d, s)).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_sum(seed in any::<u64>(), n in 1usize..=4) {
        let mut r = rng(seed);
        let t = random_table(&mut r, n);
        let a = random_action(&mut r, n, 3, 0.3);
        let d = random_action(&mut r, n, 2, 0.4);
        prop_assert_eq!(payoff_defender(&a, &d, &t), -payoff_attacker(&a, &d, &t));
    }

    #[test]
    fn cbbi_is_a_stackelberg_equilibrium(seed in any::<u64>(), n in 1usize..=3) {
        let mut r = rng(seed);
        let t = random_table(&mut r, n);
        let cfg = random_config(&mut r, n, 2);
        let cbse = solve_cbbi(&cfg, &t).unwrap();
        let se = brute_force_se(&cfg, &t, DEFAULT_PAIR_CAP).unwrap();
        prop_assert!(rel_close(cbse.attacker_payoff, se.se_payoff, cfg.payoff_tie_tol));
        prop_assert!(se.pairs.iter().any(|(d, a)| *d == cbse.d_star && *a == cbse.a_star));
        prop_assert!(cbse.attacker_payoff >= -cfg.payoff_tie_tol);
        prop_assert_eq!(cbse.defender_payoff, -cbse.attacker_payoff);
    }

    #[test]
    fn cheapest_response_is_cheapest(seed in any::<u64>(), n in 1usize..=3) {
        let mut r = rng(seed);
        let t = random_table(&mut r, n);
        let cfg = random_config(&mut r, n, 3);
        let d = random_action(&mut r, n, cfg.levels_d, 0.5);
        let (_, responses) = best_response_set(&d, &cfg.attacker_actions().unwrap(), &t, cfg.payoff_tie_tol);
        let pick = min_cost_response(&responses, &cfg.gamma_a, cfg.cost_tie_tol).unwrap();
        prop_assert!(responses.iter().all(|a| pick.cost <= a.cost + cfg.cost_tie_tol));
    }

    #[test]
    fn payoffs_monotone_in_own_cost(seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = random_table(&mut r, 3);
        let base = GameConfig::uniform(3, 2, 2, 1.0, 1.0);
        let grid = [0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.2, 2.5];
        let other = r.gen_range(0.1..1.0);
        let att: Vec<f64> = grid.iter().map(|&g| solve_cbbi(&base.clone().with_costs(g, other), &t).unwrap().attacker_payoff).collect();
        let def: Vec<f64> = grid.iter().map(|&g| solve_cbbi(&base.clone().with_costs(other, g), &t).unwrap().defender_payoff).collect();
        for w in att.windows(2).chain(def.windows(2)) {
            prop_assert!(w[1] <= w[0] + slack(w[0], w[1]), "{:?} / {:?}", att, def);
        }
    }

    #[test]
    fn refining_levels_never_hurts_the_refiner(seed in any::<u64>(), eta in 2u32..=3) {
        let mut r = rng(seed);
        let t = random_table(&mut r, 2);
        let cfg = GameConfig::uniform(2, 2, 2, r.gen_range(0.1..1.0), r.gen_range(0.1..1.0));
        let base = solve_cbbi(&cfg, &t).unwrap();
        let fine_d = solve_cbbi(&cfg.clone().with_levels(2, 2 * eta), &t).unwrap();
        let fine_a = solve_cbbi(&cfg.clone().with_levels(2 * eta, 2), &t).unwrap();
        prop_assert!(fine_d.defender_payoff >= base.defender_payoff - slack(base.defender_payoff, fine_d.defender_payoff));
        prop_assert!(fine_a.attacker_payoff >= base.attacker_payoff - slack(base.attacker_payoff, fine_a.attacker_payoff));
    }
}

#[test]
fn extreme_regimes_are_exact() {
    let mut r = rng(5);
    for n in 1..=3 {
        let t = monotone_table(&mut r, n);
        let open = solve_cbbi(&GameConfig::uniform(n, 3, 3, 0.01 / n as f64, 30.0), &t).unwrap();
        assert_eq!(open.attacker_payoff, t.open_loop_delta());
        assert!(open.a_star.steps.iter().all(|&s| s == 3) && open.d_star.is_zero());
        let shut = solve_cbbi(&GameConfig::uniform(n, 3, 3, 0.01 / n as f64, 0.9 / n as f64), &t).unwrap();
        assert_eq!(shut.attacker_payoff, 0.0);
    }
}

#[test]
fn result_independent_of_thread_count() {
    let t = random_table(&mut rng(9), 4);
    let cfg = GameConfig::uniform(4, 3, 3, 0.2, 0.3);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| solve_cbbi(&cfg, &t).unwrap())
    };
    assert_eq!(run(1), run(4));
}

/// Both nodes matter, node 1 slightly more; each player can afford one node fully.
fn crafted() -> LossTable {
    let delta = vec![1.0, 0.5, 0.6, 0.0];
    LossTable {
        model_id: "crafted".into(),
        mode: MaskMode::FullNode,
        n: 2,
        j_opt: 1.0,
        j_by_pattern: delta.iter().map(|d| 1.0 + d).collect(),
        convergence_flags: vec![true; 4],
        delta_by_pattern: delta,
    }
}

#[test]
fn individual_optimization_never_beats_the_game() {
    let t = crafted();
    let mut differs = 0;
    for (ga, gd) in [(0.8, 0.8), (0.9, 0.9), (0.8, 0.9), (0.5, 0.5), (0.2, 0.9)] {
        let cfg = GameConfig::uniform(2, 2, 2, ga, gd);
        let io = individual_optimization(&cfg, &t).unwrap();
        let cbse = solve_cbbi(&cfg, &t).unwrap();
        assert!(-io.payoff_vs_best_response <= cbse.defender_payoff + 1e-12);
        if io.d_io != cbse.d_star {
            differs += 1;
        }
    }
    assert!(differs > 0, "crafted instance should separate the two plans");
}
