mod common;

use shiftband::env::{gen_custom, NoiseFamily};
use shiftband::ground_truth::{
    compute_significant_shifts, compute_total_variation, count_best_arm_switches,
    count_change_rounds, significant_regret_trigger, theoretical_bounds,
};
use shiftband::ArmSet;

use common::{brute_force_shifts, brute_force_total_variation, random_instance, rng};

fn rows_model(rows: Vec<Vec<f64>>) -> shiftband::env::RewardModel {
    let k = rows[0].len();
    gen_custom(&rows, vec![NoiseFamily::Bernoulli; k]).unwrap()
}

#[test]
fn alternating_flip_matches_brute_force() {
    let m = rows_model(
        (1..=100)
            .map(|t| {
                if t % 2 == 1 {
                    vec![0.9, 0.1]
                } else {
                    vec![0.1, 0.9]
                }
            })
            .collect(),
    );
    let ann = compute_significant_shifts(&m).unwrap();
    let (tau, last_safe) = brute_force_shifts(&m);
    assert_eq!(ann.tau, tau);
    assert_eq!(ann.last_safe_arm, last_safe);
    assert_eq!(count_best_arm_switches(&m), 99);
}

#[test]
fn single_flip_shift_comes_after_the_flip() {
    let m = rows_model(
        (1..=100)
            .map(|t| {
                if t < 51 {
                    vec![0.9, 0.1]
                } else {
                    vec![0.1, 0.9]
                }
            })
            .collect(),
    );
    let ann = compute_significant_shifts(&m).unwrap();
    let (tau, _) = brute_force_shifts(&m);
    assert_eq!(ann.tau, tau);
    assert_eq!(ann.num_shifts(), 1);
    assert!(ann.tau[1] > 51);
    assert_eq!(compute_total_variation(&m), 0.8);
    assert_eq!(count_best_arm_switches(&m), 1);
}

#[test]
fn gapped_arm_trigger_round() {
    // 0.8 * 2 >= sqrt(2) on [1, 2]
    let m = rows_model(vec![vec![0.9, 0.1]; 30]);
    assert_eq!(significant_regret_trigger(&m, 1, 1), Some(2));
    assert_eq!(significant_regret_trigger(&m, 1, 0), None);
    let single = rows_model(vec![vec![0.4]; 30]);
    assert_eq!(significant_regret_trigger(&single, 1, 0), None);
}

#[test]
fn alternating_switch_count() {
    let m = rows_model(
        (1..=10)
            .map(|t| {
                if t % 2 == 0 {
                    vec![0.2, 0.7]
                } else {
                    vec![0.7, 0.2]
                }
            })
            .collect(),
    );
    assert_eq!(count_best_arm_switches(&m), 9);
}

#[test]
fn structural_properties_on_random_instances() {
    let mut r = rng(7);
    for _ in 0..60 {
        let m = random_instance(&mut r, 300);
        let k = m.num_arms();
        let ann = compute_significant_shifts(&m).unwrap();
        let v = compute_total_variation(&m);
        assert!((v - brute_force_total_variation(&m)).abs() < 1e-9);

        // L <= S <= number of change rounds
        let s = count_best_arm_switches(&m);
        assert!(ann.num_shifts() <= s, "{} > {s}", ann.num_shifts());
        assert!(s <= count_change_rounds(&m));

        // interior phases are at least K/4 long
        let lengths: Vec<usize> = ann.phase_lengths().collect();
        for &len in &lengths[..lengths.len() - 1] {
            assert!(4 * len >= k);
        }

        // safe sets shrink within a phase and keep the last safe arm
        for t in 1..=m.horizon() {
            let g = ann.safe_set(t);
            assert!(g.contains(ann.last_safe_arm_at(t)));
            if t > 1 && ann.phase_of(t) == ann.phase_of(t - 1) {
                assert!(g.is_subset(ann.safe_set(t - 1)));
            }
            if ann.tau.contains(&t) {
                assert_eq!(g, ArmSet::full(k));
            }
        }

        let b = theoretical_bounds(&ann, v);
        assert!(b.sum_sqrt <= b.jensen_bound);
        assert!(b.sum_sqrt <= b.tv_bound);
    }
}
