//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use num::{BigInt, BigRational, ToPrimitive, Zero};
use std::f64::consts::PI;

/// Separation by direct transcription of the definitions, using explicit
/// index loops and a per-class centroid recomputed from scratch.
pub fn separation_brute_force(classes: &[Vec<Vec<f64>>]) -> (f64, f64, f64) {
    let n = classes.len();
    let dim = classes[0][0].len();
    let mut centers = vec![vec![0.0; dim]; n];
    for i in 0..n {
        for k in 0..dim {
            let mut s = 0.0;
            for o in &classes[i] {
                s += o[k];
            }
            centers[i][k] = s / classes[i].len() as f64;
        }
    }
    let norm = |a: &[f64], b: &[f64]| {
        let mut s = 0.0;
        for k in 0..a.len() {
            s += (a[k] - b[k]).powi(2);
        }
        s.sqrt()
    };
    let mut sep_d = 0.0;
    for i in 0..n {
        for j in 0..n {
            sep_d += norm(&centers[i], &centers[j]) / (n * n) as f64;
        }
    }
    let mut sep_v = 0.0;
    for i in 0..n {
        let mut rho = 0.0;
        for o in &classes[i] {
            rho += norm(&centers[i], o);
        }
        sep_v += rho / classes[i].len() as f64;
    }
    sep_v /= n as f64;
    (sep_d, sep_v, sep_d / (sep_v + 1.0))
}

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Exact solution of `(XᵀX + ridge·I) w = Xᵀy` with `X = [states | 1]`, the
/// inputs taken as the exact binary values of the floats.
pub fn normal_equations_exact(states: &[Vec<f64>], targets: &[f64], ridge: f64) -> Vec<f64> {
    let d = states[0].len() + 1;
    let rows: Vec<Vec<BigRational>> = states
        .iter()
        .map(|s| {
            let mut r: Vec<BigRational> = s.iter().map(|&v| rational(v)).collect();
            r.push(BigRational::from_integer(BigInt::from(1)));
            r
        })
        .collect();
    let y: Vec<BigRational> = targets.iter().map(|&v| rational(v)).collect();
    let mut a = vec![vec![BigRational::zero(); d + 1]; d];
    for i in 0..d {
        for j in 0..d {
            let mut s = BigRational::zero();
            for r in &rows {
                s += &r[i] * &r[j];
            }
            if i == j {
                s += rational(ridge);
            }
            a[i][j] = s;
        }
        let mut s = BigRational::zero();
        for (r, t) in rows.iter().zip(&y) {
            s += &r[i] * t;
        }
        a[i][d] = s;
    }
    for col in 0..d {
        let p = (col..d).find(|&r| !a[r][col].is_zero()).expect("nonsingular");
        a.swap(col, p);
        let pivot = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col && !row[col].is_zero() {
                let f = &row[col] / &pivot[col];
                for (x, pv) in row.iter_mut().zip(&pivot).skip(col) {
                    *x -= &f * pv;
                }
            }
        }
    }
    (0..d).map(|i| (&a[i][d] / &a[i][i]).to_f64().unwrap()).collect()
}

/// Magnitude response of a Butterworth design after the bilinear map, in
/// closed form: `1/√(1 + x⁴)` with `x = (Ω² − Ω₀²)/(Ω·B)` for the band,
/// `1/√(1 + (Ω/Ωc)⁸)` for a zero lower edge.
pub fn butterworth_magnitude(low: f64, high: f64, f: f64, fs: f64) -> f64 {
    let w = (PI * f / fs).tan();
    let wh = (PI * high / fs).tan();
    if low == 0.0 {
        1.0 / (1.0 + (w / wh).powi(8)).sqrt()
    } else {
        let wl = (PI * low / fs).tan();
        let x = (w * w - wl * wh) / (w * (wh - wl));
        1.0 / (1.0 + x.powi(4)).sqrt()
    }
}

pub fn tone(f: f64, fs: f64, n: usize) -> Vec<f64> {
    (0..n).map(|t| (2.0 * PI * f * t as f64 / fs).sin()).collect()
}

pub fn tail_peak(y: &[f64], n: usize) -> f64 {
    y[y.len() - n..].iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

use lsm_core::dynamics::{step, DynamicsParams, ReservoirState};
use lsm_core::energy::{EnergyConfig, EnergyPoolSystem};
use lsm_core::topology::{GraphDocument, NeuronKind, NeuronRecord, ReservoirGraph};

/// Unconnected excitatory neurons on a line, each fed by input 0 with
/// weight `drive`.
pub fn driven_graph(n: usize, drive: f64) -> ReservoirGraph {
    ReservoirGraph::from_document(&GraphDocument {
        n_inputs: 1,
        neurons: (0..n)
            .map(|i| NeuronRecord {
                index: i,
                position: [i as f64 / n as f64, 0.0, 0.0],
                kind: NeuronKind::Excitatory,
                pool: None,
            })
            .collect(),
        recurrent: vec![],
        input: (0..n).map(|i| (i, 0, drive)).collect(),
    })
    .unwrap()
}

#[derive(Debug, Clone, Copy)]
pub struct Ledger {
    pub initial: f64,
    pub final_: f64,
    pub inflow: f64,
    pub outflow: f64,
    /// Lowest pool level seen after any step, in raw units.
    pub min_raw: f64,
    pub spikes: u64,
}

impl Ledger {
    pub fn imbalance(&self) -> f64 {
        (self.inflow - self.outflow) - (self.final_ - self.initial)
    }
}

/// Steps `sample` (time-major rows) through the reservoir, checking pool
/// levels after every step. All quantities in raw pool units.
pub fn ledger_run(
    graph: &ReservoirGraph,
    params: &DynamicsParams,
    mut pools: EnergyPoolSystem,
    rows: &[Vec<f64>],
    i_rec: f64,
) -> Ledger {
    pools.refill();
    let initial = pools.total_raw_energy();
    let mut state = ReservoirState::new(graph.n_neurons(), params);
    let mut min_raw = f64::INFINITY;
    let mut spikes = 0;
    for row in rows {
        spikes += step(&mut state, graph, row, i_rec, params, Some(&mut pools)).unwrap() as u64;
        for p in 0..pools.n_pools() {
            min_raw = min_raw.min(pools.raw_energy(p));
        }
    }
    Ledger {
        initial,
        final_: pools.total_raw_energy(),
        inflow: pools.raw_inflow(),
        outflow: pools.raw_outflow(),
        min_raw,
        spikes,
    }
}

/// A spike that left its pool unable to fund another, with the pool level
/// right after it (internal units) and the silent steps until the next spike.
#[derive(Debug, Clone, Copy)]
pub struct Depletion {
    pub level: f64,
    pub gap: usize,
    /// ⌈(cost − level)/regen⌉ − 1: the fewest silent steps regeneration allows.
    pub required: usize,
}

/// Drives a single neuron hard enough to fire on every funded step and
/// records each depletion. With `start_empty` the pool starts at zero and the
/// wait for the first spike is recorded as a depletion at level 0.
#[allow(dead_code)]
pub fn depletions(cost: f64, steps: usize, energy_bits: Option<u32>, start_empty: bool) -> Vec<Depletion> {
    let graph = driven_graph(1, 10.0);
    let params = DynamicsParams::default();
    let cfg = EnergyConfig::new(1, cost);
    let mut pools = match energy_bits {
        Some(b) => EnergyPoolSystem::new_fixed_point(vec![0], &cfg, b).unwrap(),
        None => EnergyPoolSystem::new(vec![0], &cfg).unwrap(),
    };
    let (raw_cost, raw_regen) = (pools.raw_cost(), pools.raw_regen(0));
    let required = |level: f64| (((raw_cost - level) / raw_regen) - 1e-9).ceil().max(0.0) as usize - 1;
    let mut state = ReservoirState::new(1, &params);
    let mut pending: Option<(i64, f64)> = None;
    if start_empty {
        pools.set_energy(0, 0.0);
        pending = Some((-1, 0.0));
    }
    let mut out = Vec::new();
    for t in 0..steps {
        let fired = step(&mut state, &graph, &[1.0], 0.0, &params, Some(&mut pools)).unwrap();
        if fired == 1 {
            if let Some((at, level)) = pending.take() {
                let gap = (t as i64 - at - 1) as usize;
                out.push(Depletion { level, gap, required: required(level) });
            }
            let level = pools.raw_energy(0);
            if level < raw_cost {
                pending = Some((t as i64, level));
            }
        }
    }
    out
}
