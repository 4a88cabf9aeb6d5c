mod common;

use lsm_core::readout::{accuracy, normal_equations, train_normal_equations, DEFAULT_RIDGE};
use lsm_core::rng::rng_from_seed;
use proptest::prelude::*;
use rand::Rng;

fn random_system(seed: u64, rows: usize, cols: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = rng_from_seed(seed);
    let states = (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-3.0..3.0)).collect())
        .collect();
    let targets = (0..rows).map(|_| f64::from(rng.gen_range(0..2u8))).collect();
    (states, targets)
}

#[test]
fn matches_exact_rational_solution() {
    for seed in 0..5 {
        let (states, targets) = random_system(seed, 20, 5);
        let exact = common::normal_equations_exact(&states, &targets, DEFAULT_RIDGE);
        let model = train_normal_equations(&states, &targets, DEFAULT_RIDGE).unwrap();
        let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (w, e) in model.weights.iter().zip(&exact) {
            assert!((w - e).abs() <= 1e-9 * scale, "seed {seed}: {w} vs {e}");
        }
    }
}

#[test]
fn threshold_is_mean_training_output() {
    let (states, targets) = random_system(11, 30, 4);
    let m = train_normal_equations(&states, &targets, 0.0).unwrap();
    let mean = states.iter().map(|s| m.output(s).unwrap()).sum::<f64>() / states.len() as f64;
    assert_eq!(m.threshold, mean);
}

fn residual(states: &[Vec<f64>], targets: &[f64], w: &[f64]) -> f64 {
    let (gram, rhs) = normal_equations(states, targets, 0.0);
    let d = rhs.len();
    let mut num = 0.0;
    for i in 0..d {
        let gw: f64 = (0..d).map(|j| gram[i * d + j] * w[j]).sum();
        num += (gw - rhs[i]).powi(2);
    }
    num.sqrt() / rhs.iter().map(|v| v * v).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn full_rank_residual_is_tiny(seed in any::<u64>(), rows in 12usize..40, cols in 1usize..8) {
        let (states, mut targets) = random_system(seed, rows, cols);
        targets[0] = 1.0;
        let m = train_normal_equations(&states, &targets, 0.0).unwrap();
        prop_assert!(residual(&states, &targets, &m.weights) < 1e-8);
    }

    #[test]
    fn separable_states_are_learned(seed in any::<u64>(), n in 10usize..60, dim in 2usize..10) {
        let mut rng = rng_from_seed(seed);
        let direction: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        let mut states = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = (i % 2) as u8;
            let offset = if label == 1 { 2.0 } else { -2.0 };
            let s: Vec<f64> = direction
                .iter()
                .map(|d| d / norm * offset + rng.gen_range(-0.2..0.2))
                .collect();
            states.push(s);
            labels.push(label);
        }
        let targets: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let m = train_normal_equations(&states, &targets, DEFAULT_RIDGE).unwrap();
        prop_assert_eq!(accuracy(&m.classify_all(&states).unwrap(), &labels).unwrap(), 1.0);
    }
}
