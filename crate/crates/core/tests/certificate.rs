mod common;

use common::{optimal_value, random_game};
use markov_ce::driver::{default_eta, run_v_update, RunConfig};
use markov_ce::eval::{
    brute_force_swap_gap_normal_form, certified_cce_gap, certify_series, exact_swap_gap_normal_form,
    per_state_regret, per_state_regret_series, slot_history,
};
use markov_ce::{Error, MarkovGame};
use proptest::prelude::*;

#[test]
fn single_agent_certificate_is_suboptimality() {
    for seed in 0..6u64 {
        let horizon = 1 + seed as usize % 3;
        let game = random_game(1, horizon, 3, &[3], seed);
        let run = run_v_update(&game, &RunConfig::new(60, 0.05)).unwrap();
        let best = optimal_value(&game);
        for c in certify_series(&game, &run, 60).unwrap() {
            let v = run.values[c.t].get(0, 0, game.initial_state());
            assert!((c.ce_gap - (best - v)).abs() < 1e-8, "seed {seed} t {}", c.t);
            assert!((c.cce_gap - c.ce_gap).abs() < 1e-8);
        }
    }
}

#[test]
fn single_step_certificate_matches_oracles() {
    for seed in 0..5u64 {
        let game = random_game(2, 1, 1, &[3, 4], seed);
        let run = run_v_update(&game, &RunConfig::new(40, 0.02)).unwrap();
        let series = certify_series(&game, &run, 40).unwrap();
        for t in [1, 7, 40] {
            let exact = exact_swap_gap_normal_form(&game, &run, t).unwrap();
            let brute = brute_force_swap_gap_normal_form(&game, &run, t).unwrap();
            for i in 0..2 {
                assert!((series[t - 1].per_player[i].ce_gap - exact[i]).abs() < 1e-9);
                assert!((brute[i] - exact[i]).abs() < 1e-9);
                assert!(exact[i] >= -1e-12);
            }
        }
    }
}

#[test]
fn equal_rewards_give_zero_gap() {
    let game = MarkovGame::from_parts(1, 1, &[3, 2], 0, vec![], vec![0.4; 12]).unwrap();
    let run = run_v_update(&game, &RunConfig::new(10, 0.02)).unwrap();
    for g in exact_swap_gap_normal_form(&game, &run, 10).unwrap() {
        assert!(g.abs() < 1e-12);
    }
}

#[test]
fn matching_pennies_stays_uniform_with_zero_gap() {
    let r1 = [1.0, 0.0, 0.0, 1.0];
    let rewards: Vec<f64> = r1.iter().flat_map(|&r| [r, 1.0 - r]).collect();
    let game = MarkovGame::from_parts(1, 1, &[2, 2], 0, vec![], rewards).unwrap();
    let run = run_v_update(&game, &RunConfig::new(8, 0.02)).unwrap();
    for policy in &run.policies {
        for i in 0..2 {
            assert!(policy.get(i, 0, 0).iter().all(|p| (p - 0.5).abs() < 1e-12));
        }
    }
    for g in brute_force_swap_gap_normal_form(&game, &run, 8).unwrap() {
        assert!(g.abs() < 1e-12);
    }
}

#[test]
fn normal_form_oracle_needs_single_step() {
    let game = random_game(2, 2, 1, &[2, 2], 0);
    let run = run_v_update(&game, &RunConfig::new(3, 0.02)).unwrap();
    assert!(matches!(
        exact_swap_gap_normal_form(&game, &run, 3),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn certificate_below_per_state_regret_chain() {
    for seed in 0..4u64 {
        let game = random_game(2, 3, 2, &[2, 2], seed);
        let t = 80;
        let run = run_v_update(&game, &RunConfig::new(t, default_eta(2, 3, 2) * 16.0)).unwrap();
        let gap = certify_series(&game, &run, t).unwrap()[t - 1].ce_gap;
        let table = per_state_regret_series(&game, &run, t).unwrap();
        assert!(gap <= table.chain_bound(t) + 1e-6, "seed {seed}: {gap} vs {}", table.chain_bound(t));
    }
}

#[test]
fn first_episode_regret_is_single_term() {
    let game = random_game(2, 2, 2, &[3, 2], 9);
    let run = run_v_update(&game, &RunConfig::new(5, 0.02)).unwrap();
    let history = slot_history(&game, &run, 0, 1, 1).unwrap();
    let scale = game.horizon() as f64;
    let (x, u) = (&history.strategies[1], &history.utilities[1]);
    let best = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let realized: f64 = x.iter().zip(u).map(|(p, v)| p * v).sum();
    let reg = per_state_regret(&game, &run, 0, 1, 1, 1).unwrap();
    assert!((reg - scale * (best - realized)).abs() < 1e-12);
}

#[test]
fn thinned_runs_cannot_be_certified() {
    let game = random_game(2, 2, 2, &[2, 2], 1);
    let mut config = RunConfig::new(10, 0.02);
    config.history_stride = 5;
    let run = run_v_update(&game, &config).unwrap();
    assert!(matches!(certify_series(&game, &run, 10), Err(Error::Thinned { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn certificate_invariants(
        seed in 0u64..1000,
        players in 1usize..=3,
        horizon in 1usize..=3,
        states in 1usize..=3,
        episodes in 1usize..=25,
    ) {
        let actions: Vec<usize> = (0..players).map(|i| 2 + (seed as usize + i) % 2).collect();
        let game = random_game(players, horizon, states, &actions, seed);
        let run = run_v_update(&game, &RunConfig::new(episodes, 0.03)).unwrap();
        let series = certify_series(&game, &run, episodes).unwrap();
        for c in &series {
            prop_assert!(c.ce_gap >= -1e-9);
            prop_assert!(c.cce_gap <= c.ce_gap + 1e-10);
            for p in &c.per_player {
                prop_assert!(p.deviation <= horizon as f64 + 1e-9);
            }
        }
        prop_assert_eq!(certified_cce_gap(&game, &run, episodes).unwrap(), series[episodes - 1].cce_gap);
        let table = per_state_regret_series(&game, &run, episodes).unwrap();
        for t in 1..=episodes {
            prop_assert!(table.max_at(t) >= -1e-10);
        }
    }
}
