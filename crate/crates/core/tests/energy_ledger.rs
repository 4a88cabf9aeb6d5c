mod common;

use lsm_core::data::{synth_dataset, PreprocessMode};
use lsm_core::dynamics::{recurrent_current_magnitude, DynamicsParams};
use lsm_core::energy::{assign_pools, EnergyConfig, EnergyPoolSystem};
use lsm_core::quantization::DigitalLsmConfig;
use lsm_core::rng::rng_from_seed;
use lsm_core::topology::{generate_reservoir, TopologyConfig};
use rand::Rng;

fn time_major(channels: &[Vec<f64>], steps: usize) -> Vec<Vec<f64>> {
    (0..steps).map(|t| channels.iter().map(|c| c[t]).collect()).collect()
}

#[test]
fn floating_ledger_balances_and_never_goes_negative() {
    let data = synth_dataset(2, PreprocessMode::Single, 5).unwrap();
    let samples: Vec<_> = data.all().collect();
    let i_rec = recurrent_current_magnitude(samples.iter().map(|s| s.channels.as_slice()), 5.0).unwrap();
    let mut rng = rng_from_seed(77);
    for run in 0..8 {
        let topo = TopologyConfig {
            n_neurons: 50,
            ..Default::default()
        };
        let graph = generate_reservoir(&topo, &mut rng_from_seed(run)).unwrap();
        let k = [1, 4, 10, 50][rng.gen_range(0..4)];
        let cost = rng.gen_range(0.01..0.25);
        let assignment = assign_pools(&graph.positions(), k, &mut rng).unwrap();
        let pools = EnergyPoolSystem::new(assignment, &EnergyConfig::new(k, cost)).unwrap();
        let rows = time_major(&samples[run as usize % samples.len()].channels, 1500);
        let l = common::ledger_run(&graph, &DynamicsParams::default(), pools, &rows, i_rec);
        assert!(l.imbalance().abs() <= 1e-9, "run {run}: {l:?}");
        assert!(l.min_raw >= 0.0, "run {run}: {l:?}");
        assert!(l.outflow > 0.0);
    }
}

#[test]
fn fixed_point_ledger_is_exact() {
    let cfg = DigitalLsmConfig::default();
    let data = synth_dataset(2, PreprocessMode::Four, 6).unwrap();
    let samples: Vec<_> = data.all().collect();
    let mut rng = rng_from_seed(78);
    for run in 0..8 {
        let graph = generate_reservoir(&cfg.topology, &mut rng_from_seed(100 + run)).unwrap();
        let k = [1, 4, 10][rng.gen_range(0..3)];
        let cost = rng.gen_range(0.01..0.25);
        let assignment = assign_pools(&graph.positions(), k, &mut rng).unwrap();
        let pools =
            EnergyPoolSystem::new_fixed_point(assignment, &EnergyConfig::new(k, cost), cfg.state.energy_bits).unwrap();
        let rows = time_major(&samples[run as usize % samples.len()].channels, 1500);
        let l = common::ledger_run(&graph, &cfg.dynamics, pools, &rows, 2.0);
        assert_eq!(l.imbalance(), 0.0, "run {run}: {l:?}");
        assert!(l.min_raw >= 0.0);
        assert_eq!(l.initial.fract(), 0.0);
        assert_eq!(l.final_.fract(), 0.0);
    }
}

#[test]
fn depleted_pools_wait_for_regeneration() {
    for cost in [0.05, 0.1, 0.15, 0.2, 0.25] {
        for bits in [None, Some(12)] {
            let events = common::depletions(cost, 600, bits, false);
            if cost == 0.05 {
                // regeneration matches the cost, so the pool never drains
                assert!(events.is_empty());
                continue;
            }
            assert!(!events.is_empty(), "cost {cost}");
            for e in &events {
                assert_eq!(e.gap, e.required, "cost {cost} bits {bits:?}: {e:?}");
            }
        }
    }
}

#[test]
fn empty_pool_waits_full_recovery() {
    for cost in [0.05, 0.1, 0.15, 0.2, 0.25] {
        let need = (cost / 0.05f64 - 1e-9).ceil() as usize - 1;
        let first = common::depletions(cost, 50, None, true)[0];
        assert_eq!((first.level, first.gap), (0.0, need), "cost {cost}");
    }
}

#[test]
fn zero_cost_pools_never_block() {
    let graph = common::driven_graph(6, 10.0);
    let pools = EnergyPoolSystem::new(vec![0, 0, 0, 1, 1, 1], &EnergyConfig::new(3, 0.0)).unwrap();
    let rows = vec![vec![1.0]; 200];
    let l = common::ledger_run(&graph, &DynamicsParams::default(), pools, &rows, 0.0);
    assert_eq!(l.spikes, 6 * 200);
    assert_eq!(l.imbalance(), 0.0);
}
