#![allow(dead_code)]

use markov_ce::{generate_random_game, MarkovGame, RandomGameSpec};

pub fn random_game(players: usize, horizon: usize, states: usize, actions: &[usize], seed: u64) -> MarkovGame {
    generate_random_game(&RandomGameSpec {
        players,
        horizon,
        states,
        actions: actions.to_vec(),
        seed,
        concentration: 1.0,
    })
    .unwrap()
}

/// Backward induction for a single-agent game; returns `V*_1(s_1)`.
pub fn optimal_value(game: &MarkovGame) -> f64 {
    assert_eq!(game.players(), 1);
    let (horizon, states, actions) = (game.horizon(), game.states(), game.actions()[0]);
    let mut next = vec![0.0; states];
    for h in (0..horizon).rev() {
        let mut cur = vec![0.0; states];
        for (s, v) in cur.iter_mut().enumerate() {
            *v = (0..actions)
                .map(|a| {
                    let cont = if h + 1 < horizon {
                        game.transition_row(h, s, a).iter().zip(&next).map(|(p, v)| p * v).sum()
                    } else {
                        0.0
                    };
                    game.reward(h, s, a, 0) + cont
                })
                .fold(f64::NEG_INFINITY, f64::max);
        }
        next = cur;
    }
    next[game.initial_state()]
}

/// Mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
