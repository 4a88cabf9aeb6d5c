//! One experiment run: build, simulate, train, score.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::data::{Dataset, EegSample};
use crate::dynamics::{recurrent_current_magnitude, Reservoir, RunOptions};
use crate::energy::{assign_pools, EnergyPoolSystem};
use crate::error::{Error, Result};
use crate::metrics::{lyapunov_for_neuron, separation, LyapunovValue};
use crate::quantization::{quantize_inputs, quantize_recurrent_weights};
use crate::readout::{accuracy, train_normal_equations, ReadoutModel};
use crate::rng::{derive_seed, stream, STREAM_GRAPH, STREAM_LYAPUNOV, STREAM_POOLS};
use crate::topology::{generate_reservoir, ReservoirGraph};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// `None` when the run had no energy pools.
    pub pool_size: Option<usize>,
    pub energy_cost: f64,
    pub c_scale: f64,
    pub l_scale: f64,
    pub seed_index: usize,
    pub seed: u64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub separation: f64,
    pub sep_d: f64,
    pub sep_v: f64,
    pub lyapunov: LyapunovValue,
    /// Spikes over every train and test sample.
    pub total_reservoir_spikes: u64,
    pub mean_spikes_per_sample: f64,
    pub recurrent_current: f64,
}

impl RunResult {
    /// True when every measured quantity matches bit for bit, ignoring the
    /// pool-size label.
    pub fn same_measurements(&self, other: &RunResult) -> bool {
        let bits = |r: &RunResult| {
            [
                r.train_accuracy,
                r.test_accuracy,
                r.separation,
                r.sep_d,
                r.sep_v,
                r.lyapunov.as_f64(),
                r.mean_spikes_per_sample,
                r.recurrent_current,
            ]
            .map(f64::to_bits)
        };
        bits(self) == bits(other)
            && self.total_reservoir_spikes == other.total_reservoir_spikes
            && self.seed == other.seed
    }
}

/// Channel-major samples ready for the reservoir, inputs already quantised
/// for digital configs.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedInputs {
    pub train: Vec<Vec<Vec<f64>>>,
    pub train_labels: Vec<u8>,
    pub test: Vec<Vec<Vec<f64>>>,
    pub test_labels: Vec<u8>,
}

pub fn prepare_inputs(dataset: &Dataset, config: &ExperimentConfig) -> Result<PreparedInputs> {
    if dataset.train.is_empty() || dataset.test.is_empty() {
        return Err(Error::EmptyInput("train or test split"));
    }
    if dataset.n_channels != config.topology.n_inputs {
        return Err(Error::DimensionMismatch {
            context: "dataset channels vs n_inputs",
            expected: config.topology.n_inputs,
            actual: dataset.n_channels,
        });
    }
    let convert = |samples: &[EegSample]| -> (Vec<Vec<Vec<f64>>>, Vec<u8>) {
        samples
            .iter()
            .map(|s| {
                let mut channels = s.channels.clone();
                if let Some(d) = &config.digital {
                    quantize_inputs(&mut channels, &d.input_format);
                }
                (channels, s.label)
            })
            .unzip()
    };
    let (train, train_labels) = convert(&dataset.train);
    let (test, test_labels) = convert(&dataset.test);
    Ok(PreparedInputs {
        train,
        train_labels,
        test,
        test_labels,
    })
}

/// Seed of run `seed_index` under `master_seed`. It does not depend on the
/// pool size or cost, so every cell of a sweep sees the same graph and
/// Lyapunov draw at a given index.
pub fn run_seed(master_seed: u64, seed_index: usize) -> u64 {
    derive_seed(master_seed, seed_index as u64)
}

pub fn build_graph(config: &ExperimentConfig, seed: u64) -> Result<ReservoirGraph> {
    let mut graph = generate_reservoir(&config.topology, &mut stream(seed, STREAM_GRAPH))?;
    if let Some(d) = &config.digital {
        quantize_recurrent_weights(&mut graph, d.weight_bits)?;
    }
    Ok(graph)
}

pub fn build_pools(config: &ExperimentConfig, graph: &ReservoirGraph, seed: u64) -> Result<Option<EnergyPoolSystem>> {
    let Some(energy) = &config.energy else {
        return Ok(None);
    };
    let assignment = assign_pools(&graph.positions(), energy.neurons_per_pool, &mut stream(seed, STREAM_POOLS))?;
    let pools = match &config.digital {
        Some(d) => EnergyPoolSystem::new_fixed_point(assignment, energy, d.energy_bits)?,
        None => EnergyPoolSystem::new(assignment, energy)?,
    };
    Ok(Some(pools))
}

/// Everything a finished run leaves behind besides its summary.
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub result: RunResult,
    pub graph: ReservoirGraph,
    pub pool_assignment: Option<Vec<usize>>,
    pub model: ReadoutModel,
    pub test_states: Vec<Vec<f64>>,
}

fn run_all(reservoir: &Reservoir<'_>, samples: &[Vec<Vec<f64>>]) -> Result<(Vec<Vec<f64>>, u64)> {
    let runs: Vec<_> = samples
        .par_iter()
        .map(|s| reservoir.run(s, RunOptions::default()))
        .collect::<Result<_>>()?;
    let spikes = runs.iter().map(|r| r.total_spikes).sum();
    Ok((runs.into_iter().map(|r| r.final_trace).collect(), spikes))
}

pub fn run_prepared_full(
    config: &ExperimentConfig,
    inputs: &PreparedInputs,
    seed_index: usize,
    seed: u64,
) -> Result<RunArtifacts> {
    config.validate()?;
    let graph = build_graph(config, seed)?;
    let pools = build_pools(config, &graph, seed)?;
    let pool_assignment = pools.as_ref().map(|p| p.assignment().to_vec());
    let i_rec = recurrent_current_magnitude(
        inputs.train.iter().map(Vec::as_slice),
        config.dynamics.alpha_recurrent,
    )?;
    let reservoir = Reservoir::new(&graph, config.dynamics.clone(), i_rec)?.with_pools(pools)?;

    let (train_states, train_spikes) = run_all(&reservoir, &inputs.train)?;
    let targets: Vec<f64> = inputs.train_labels.iter().map(|&l| f64::from(l)).collect();
    let model = train_normal_equations(&train_states, &targets, config.ridge)?;
    let train_accuracy = accuracy(&model.classify_all(&train_states)?, &inputs.train_labels)?;

    let (test_states, test_spikes) = run_all(&reservoir, &inputs.test)?;
    let test_accuracy = accuracy(&model.classify_all(&test_states)?, &inputs.test_labels)?;

    let by_class: Vec<Vec<Vec<f64>>> = [0u8, 1]
        .iter()
        .map(|&c| {
            test_states
                .iter()
                .zip(&inputs.test_labels)
                .filter(|(_, &l)| l == c)
                .map(|(s, _)| s.clone())
                .collect::<Vec<_>>()
        })
        .filter(|v| !v.is_empty())
        .collect();
    let sep = separation(&by_class)?;

    let mut lrng = stream(seed, STREAM_LYAPUNOV);
    let sample = lrng.gen_range(0..inputs.test.len());
    let neuron = lrng.gen_range(0..graph.n_neurons());
    let lyap = lyapunov_for_neuron(&reservoir, &inputs.test[sample], neuron)?;

    let total = train_spikes + test_spikes;
    let n_samples = inputs.train.len() + inputs.test.len();
    let result = RunResult {
        pool_size: config.energy.map(|e| e.neurons_per_pool),
        energy_cost: config.energy.map_or(0.0, |e| e.cost_per_spike),
        c_scale: config.topology.c_scale,
        l_scale: config.topology.l_scale,
        seed_index,
        seed,
        train_accuracy,
        test_accuracy,
        separation: sep.separation,
        sep_d: sep.sep_d,
        sep_v: sep.sep_v,
        lyapunov: lyap.value,
        total_reservoir_spikes: total,
        mean_spikes_per_sample: total as f64 / n_samples as f64,
        recurrent_current: i_rec,
    };
    Ok(RunArtifacts {
        result,
        graph,
        pool_assignment,
        model,
        test_states,
    })
}

fn with_context(config: &ExperimentConfig, seed_index: usize, e: Error) -> Error {
    Error::Run {
        pool_size: config.energy.map(|e| e.neurons_per_pool),
        cost: config.energy.map_or(0.0, |e| e.cost_per_spike),
        seed_index,
        source: Box::new(e),
    }
}

pub fn run_prepared(
    config: &ExperimentConfig,
    inputs: &PreparedInputs,
    master_seed: u64,
    seed_index: usize,
) -> Result<RunResult> {
    run_prepared_full(config, inputs, seed_index, run_seed(master_seed, seed_index))
        .map(|a| a.result)
        .map_err(|e| with_context(config, seed_index, e))
}

/// Runs one `(config, seed)` pair on an already split dataset.
pub fn run_experiment(config: &ExperimentConfig, dataset: &Dataset, master_seed: u64, seed_index: usize) -> Result<RunResult> {
    let inputs = prepare_inputs(dataset, config).map_err(|e| with_context(config, seed_index, e))?;
    run_prepared(config, &inputs, master_seed, seed_index)
}
