//! Helpers shared by the integration tests, including an independent
//! brute-force evaluation of significant shifts.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shiftband::env::{gen_custom, gen_drifting, gen_piecewise, NoiseFamily, RewardModel};

/// Worst gap of `arm` at round `t`, straight from the matrix.
fn gap(model: &RewardModel, t: usize, arm: usize) -> f64 {
    let row = model.row(t);
    row.iter().cloned().fold(f64::MIN, f64::max) - row[arm]
}

/// Does `arm` have significant regret on some `[s1, end]` with
/// `lo <= s1 < end`? The sum is accumulated backwards from `end`.
fn bad_interval_ending_at(model: &RewardModel, arm: usize, lo: usize, end: usize) -> bool {
    let k = model.num_arms() as f64;
    let mut sum = gap(model, end, arm);
    for s1 in (lo..end).rev() {
        sum += gap(model, s1, arm);
        if sum >= (k * (end - s1) as f64).sqrt() {
            return true;
        }
    }
    false
}

/// First round by which `arm` has had an interval of significant regret
/// starting at or after `lo`.
fn first_bad_end(model: &RewardModel, arm: usize, lo: usize) -> Option<usize> {
    (lo + 1..=model.horizon()).find(|&end| bad_interval_ending_at(model, arm, lo, end))
}

/// Shift rounds and last safe arms by the literal definition: the next shift
/// is the first round by which every arm has had an interval of significant
/// regret since the previous shift; the last safe arm is the smallest-index
/// arm that had none one round earlier.
pub fn brute_force_shifts(model: &RewardModel) -> (Vec<usize>, Vec<usize>) {
    let horizon = model.horizon();
    let k = model.num_arms();
    let mut tau = vec![1];
    let mut last_safe = Vec::new();
    loop {
        let start = *tau.last().unwrap();
        let ends: Vec<Option<usize>> = (0..k).map(|a| first_bad_end(model, a, start)).collect();
        if ends.iter().all(Option::is_some) {
            let end = ends.iter().map(|e| e.unwrap()).max().unwrap();
            let survivor = (0..k)
                .find(|&a| ends[a].unwrap() > end - 1)
                .expect("some arm triggers exactly at the shift");
            last_safe.push(survivor);
            tau.push(end);
        } else {
            last_safe.push(ends.iter().position(Option::is_none).unwrap());
            tau.push(horizon + 1);
            return (tau, last_safe);
        }
    }
}

/// Direct double-loop total variation.
pub fn brute_force_total_variation(model: &RewardModel) -> f64 {
    let mut v = 0.0;
    for t in 2..=model.horizon() {
        let mut worst: f64 = 0.0;
        for a in 0..model.num_arms() {
            worst = worst.max((model.row(t)[a] - model.row(t - 1)[a]).abs());
        }
        v += worst;
    }
    v
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn constant(horizon: usize, means: &[f64], noise: NoiseFamily) -> RewardModel {
    gen_custom(&vec![means.to_vec(); horizon], vec![noise; means.len()]).unwrap()
}

/// Two arms whose means swap at round `at`.
pub fn flip(horizon: usize, at: usize, before: [f64; 2]) -> RewardModel {
    let rows: Vec<Vec<f64>> = (1..=horizon)
        .map(|t| {
            if t < at {
                before.to_vec()
            } else {
                vec![before[1], before[0]]
            }
        })
        .collect();
    gen_custom(&rows, vec![NoiseFamily::Bernoulli; 2]).unwrap()
}

/// Random small instances of mixed kinds.
pub fn random_instance(r: &mut ChaCha8Rng, max_horizon: usize) -> RewardModel {
    let horizon = r.random_range(20..=max_horizon);
    let k = r.random_range(2..=4);
    match r.random_range(0..4) {
        0 => {
            let segs = r.random_range(1..=6);
            gen_piecewise(
                r.random(),
                horizon,
                k,
                segs,
                0.2,
                vec![NoiseFamily::Bernoulli; k],
            )
            .or_else(|_| {
                gen_piecewise(
                    r.random(),
                    horizon,
                    k,
                    1,
                    0.2,
                    vec![NoiseFamily::Bernoulli; k],
                )
            })
            .unwrap()
        }
        1 => {
            let budget = r.random_range(0.0..(horizon as f64 / 20.0).min(5.0));
            gen_drifting(
                r.random(),
                horizon,
                k,
                budget,
                vec![NoiseFamily::Bernoulli; k],
            )
            .unwrap()
        }
        2 => {
            // sparse random jumps
            let mut row: Vec<f64> = (0..k).map(|_| r.random()).collect();
            let rows: Vec<Vec<f64>> = (0..horizon)
                .map(|_| {
                    if r.random::<f64>() < 0.03 {
                        row = (0..k).map(|_| r.random()).collect();
                    }
                    row.clone()
                })
                .collect();
            gen_custom(&rows, vec![NoiseFamily::Bernoulli; k]).unwrap()
        }
        _ => {
            // dense noise: a new random row every round
            let rows: Vec<Vec<f64>> = (0..horizon)
                .map(|_| (0..k).map(|_| r.random()).collect())
                .collect();
            gen_custom(&rows, vec![NoiseFamily::Bernoulli; k]).unwrap()
        }
    }
}
