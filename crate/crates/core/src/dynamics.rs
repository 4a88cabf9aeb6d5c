//! Leaky integrate-and-fire reservoir dynamics.
//!
//! Inputs are injected as direct current every step. A spike at step `t`
//! delivers `weight × recurrent_current` to each target at step `t + 1`.
//! Each neuron keeps an activity trace that jumps on a spike and decays
//! linearly otherwise; the trace vector after the last step is the state the
//! readout sees.
//!
//! Per-step order with energy pools attached:
//!
//! 1. regenerate pools
//! 2. compute injected currents from inputs and last step's spikes
//! 3. hold members of depleted pools at reset, integrate everyone else
//! 4. neurons at or above threshold propose spikes
//! 5. pools grant proposals in ascending neuron order
//! 6. granted neurons reset and bump their trace, the rest decay
//! 7. pools that just ran dry reset all their members
//! 8. (fixed point only) re-quantise membranes and traces

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::energy::EnergyPoolSystem;
use crate::error::{Error, Result};
use crate::quantization::StateQuantization;
use crate::topology::ReservoirGraph;

pub const EEG_SAMPLE_RATE_HZ: f64 = 173.61;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    pub v_threshold: f64,
    pub v_reset: f64,
    /// Membrane time constant, seconds.
    pub tau_membrane: f64,
    /// Step length, seconds.
    pub dt: f64,
    pub alpha_recurrent: f64,
    pub trace_increment: f64,
    /// Trace lost per step without a spike.
    pub trace_decay: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantization: Option<StateQuantization>,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            v_threshold: 1.0,
            v_reset: 0.0,
            tau_membrane: 0.1,
            dt: 1.0 / EEG_SAMPLE_RATE_HZ,
            alpha_recurrent: 5.0,
            trace_increment: 1.0,
            trace_decay: 0.01,
            quantization: None,
        }
    }
}

impl DynamicsParams {
    /// Membrane retention per step, `1 - dt / tau`.
    pub fn leak(&self) -> f64 {
        1.0 - self.dt / self.tau_membrane
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.v_threshold > self.v_reset) {
            return bad("v_threshold must exceed v_reset");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.tau_membrane > self.dt) {
            return bad("tau_membrane must exceed dt");
        }
        if !(self.trace_decay >= 0.0) || !(self.trace_increment >= 0.0) {
            return bad("trace increment and decay must be non-negative");
        }
        Ok(())
    }
}

/// Mean absolute input over every sample, channel and step, times `alpha`.
pub fn recurrent_current_magnitude<'a>(
    samples: impl IntoIterator<Item = &'a [Vec<f64>]>,
    alpha: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for sample in samples {
        for channel in sample {
            for v in channel {
                sum += v.abs();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyInput("dataset for recurrent current"));
    }
    Ok(alpha * sum / count as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirState {
    pub membrane: Vec<f64>,
    pub trace: Vec<f64>,
    pub spiked: Vec<bool>,
}

impl ReservoirState {
    pub fn new(n: usize, params: &DynamicsParams) -> Self {
        Self {
            membrane: vec![params.v_reset; n],
            trace: vec![0.0; n],
            spiked: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.membrane.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membrane.is_empty()
    }
}

/// Spiking neuron indices per timestep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpikeRaster {
    pub n_neurons: usize,
    pub steps: Vec<Vec<u32>>,
}

impl SpikeRaster {
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn total(&self) -> u64 {
        self.steps.iter().map(|s| s.len() as u64).sum()
    }

    pub fn spike_times(&self, neuron: usize) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter(|(_, s)| s.contains(&(neuron as u32)))
            .map(|(t, _)| t)
            .collect()
    }

    /// `timestep,neuron_index,1` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestep", "neuron_index", "spike"])?;
        for (t, spikes) in self.steps.iter().enumerate() {
            for &n in spikes {
                w.write_record([t.to_string(), n.to_string(), "1".to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<raster>", e))?;
        Ok(())
    }
}

/// Scratch buffers reused across steps.
#[derive(Debug, Default)]
struct Stepper {
    input_current: Vec<f64>,
    recurrent_sum: Vec<f64>,
    proposals: Vec<usize>,
    fired: Vec<usize>,
}

impl Stepper {
    fn new(n: usize) -> Self {
        Self {
            input_current: vec![0.0; n],
            recurrent_sum: vec![0.0; n],
            proposals: Vec::with_capacity(n),
            fired: Vec::with_capacity(n),
        }
    }

    fn step(
        &mut self,
        state: &mut ReservoirState,
        graph: &ReservoirGraph,
        input_values: &[f64],
        i_rec: f64,
        params: &DynamicsParams,
        mut energy: Option<&mut EnergyPoolSystem>,
    ) -> usize {
        let n = state.len();
        if let Some(pools) = energy.as_deref_mut() {
            pools.regenerate();
        }

        self.input_current.iter_mut().for_each(|c| *c = 0.0);
        self.recurrent_sum.iter_mut().for_each(|c| *c = 0.0);
        graph.input.mul_add(input_values, &mut self.input_current);
        for (source, &fired) in state.spiked.iter().enumerate() {
            if fired {
                for &(target, w) in graph.recurrent.column(source) {
                    self.recurrent_sum[target as usize] += w;
                }
            }
        }

        let leak = params.leak();
        self.proposals.clear();
        for i in 0..n {
            if energy.as_deref().is_some_and(|p| p.neuron_blocked(i)) {
                state.membrane[i] = params.v_reset;
                continue;
            }
            let current = self.input_current[i] + self.recurrent_sum[i] * i_rec;
            state.membrane[i] = leak * state.membrane[i] + current;
            if state.membrane[i] >= params.v_threshold {
                self.proposals.push(i);
            }
        }

        self.fired.clear();
        let mut newly_depleted = Vec::new();
        match energy.as_deref_mut() {
            Some(pools) => {
                let outcome = pools.gate_spikes(&self.proposals);
                self.fired.extend(outcome.granted);
                newly_depleted = outcome.newly_depleted;
            }
            None => self.fired.extend_from_slice(&self.proposals),
        }

        state.spiked.iter_mut().for_each(|s| *s = false);
        for &i in &self.fired {
            state.spiked[i] = true;
            state.membrane[i] = params.v_reset;
        }
        for i in 0..n {
            if state.spiked[i] {
                state.trace[i] += params.trace_increment;
            } else {
                state.trace[i] = (state.trace[i] - params.trace_decay).max(0.0);
            }
        }

        if let Some(pools) = energy.as_deref() {
            for &p in &newly_depleted {
                for &i in pools.members(p) {
                    state.membrane[i] = params.v_reset;
                }
            }
        }

        if let Some(q) = &params.quantization {
            for v in &mut state.membrane {
                *v = q.membrane.quantize(*v);
            }
            for t in &mut state.trace {
                *t = q.trace.quantize(*t);
            }
        }
        self.fired.len()
    }
}

fn check_state(state: &ReservoirState, graph: &ReservoirGraph, input_values: &[f64]) -> Result<()> {
    let n = graph.n_neurons();
    for (len, context) in [
        (state.membrane.len(), "membrane vector"),
        (state.trace.len(), "trace vector"),
        (state.spiked.len(), "spike vector"),
    ] {
        if len != n {
            return Err(Error::DimensionMismatch {
                context,
                expected: n,
                actual: len,
            });
        }
    }
    if input_values.len() != graph.n_inputs() {
        return Err(Error::DimensionMismatch {
            context: "input values",
            expected: graph.n_inputs(),
            actual: input_values.len(),
        });
    }
    Ok(())
}

/// Advances `state` by one timestep. Returns the number of granted spikes.
pub fn step(
    state: &mut ReservoirState,
    graph: &ReservoirGraph,
    input_values: &[f64],
    i_rec: f64,
    params: &DynamicsParams,
    energy: Option<&mut EnergyPoolSystem>,
) -> Result<usize> {
    check_state(state, graph, input_values)?;
    if let Some(pools) = energy.as_deref() {
        if pools.assignment().len() != graph.n_neurons() {
            return Err(Error::DimensionMismatch {
                context: "pool assignment",
                expected: graph.n_neurons(),
                actual: pools.assignment().len(),
            });
        }
    }
    Ok(Stepper::new(graph.n_neurons()).step(state, graph, input_values, i_rec, params, energy))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub record_raster: bool,
    /// Neuron forced to spike before the first step.
    pub perturb: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRun {
    pub final_trace: Vec<f64>,
    /// Trace right before the first sample step (non-zero only when perturbed).
    pub initial_trace: Vec<f64>,
    pub raster: Option<SpikeRaster>,
    /// Spikes emitted during the sample steps; a forced spike is not counted.
    pub total_spikes: u64,
    /// Pool state after the last step.
    pub pools: Option<EnergyPoolSystem>,
}

/// A graph bound to dynamics parameters, a recurrent current and optionally a
/// pool layout. Each run starts from rest with full pools.
#[derive(Clone, Debug)]
pub struct Reservoir<'g> {
    graph: &'g ReservoirGraph,
    params: DynamicsParams,
    recurrent_current: f64,
    pools: Option<EnergyPoolSystem>,
}

impl<'g> Reservoir<'g> {
    pub fn new(graph: &'g ReservoirGraph, params: DynamicsParams, recurrent_current: f64) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            graph,
            params,
            recurrent_current,
            pools: None,
        })
    }

    pub fn with_pools(mut self, pools: Option<EnergyPoolSystem>) -> Result<Self> {
        if let Some(p) = &pools {
            if p.assignment().len() != self.graph.n_neurons() {
                return Err(Error::DimensionMismatch {
                    context: "pool assignment",
                    expected: self.graph.n_neurons(),
                    actual: p.assignment().len(),
                });
            }
        }
        self.pools = pools;
        Ok(self)
    }

    pub fn graph(&self) -> &ReservoirGraph {
        self.graph
    }

    pub fn params(&self) -> &DynamicsParams {
        &self.params
    }

    pub fn recurrent_current(&self) -> f64 {
        self.recurrent_current
    }

    pub fn pools(&self) -> Option<&EnergyPoolSystem> {
        self.pools.as_ref()
    }

    /// Runs one sample given as channel-major series.
    pub fn run(&self, sample: &[Vec<f64>], opts: RunOptions) -> Result<SampleRun> {
        let n = self.graph.n_neurons();
        if sample.len() != self.graph.n_inputs() {
            return Err(Error::DimensionMismatch {
                context: "sample channels",
                expected: self.graph.n_inputs(),
                actual: sample.len(),
            });
        }
        let n_steps = sample.first().map_or(0, Vec::len);
        if let Some(bad) = sample.iter().find(|c| c.len() != n_steps) {
            return Err(Error::DimensionMismatch {
                context: "channel length",
                expected: n_steps,
                actual: bad.len(),
            });
        }

        let mut state = ReservoirState::new(n, &self.params);
        let mut pools = self.pools.clone();
        if let Some(p) = pools.as_mut() {
            p.refill();
        }

        if let Some(neuron) = opts.perturb {
            if neuron >= n {
                return Err(Error::DimensionMismatch {
                    context: "perturbed neuron",
                    expected: n,
                    actual: neuron,
                });
            }
            let granted = match pools.as_mut() {
                Some(p) => {
                    let outcome = p.gate_spikes(&[neuron]);
                    for &pool in &outcome.newly_depleted {
                        for &i in p.members(pool) {
                            state.membrane[i] = self.params.v_reset;
                        }
                    }
                    !outcome.granted.is_empty()
                }
                None => true,
            };
            if granted {
                state.spiked[neuron] = true;
                state.trace[neuron] += self.params.trace_increment;
                if let Some(q) = &self.params.quantization {
                    state.trace[neuron] = q.trace.quantize(state.trace[neuron]);
                }
            }
        }
        let initial_trace = state.trace.clone();

        let mut stepper = Stepper::new(n);
        let mut raster = opts.record_raster.then(|| SpikeRaster {
            n_neurons: n,
            steps: Vec::with_capacity(n_steps),
        });
        let mut total = 0u64;
        let mut values = vec![0.0; sample.len()];
        for t in 0..n_steps {
            for (v, channel) in values.iter_mut().zip(sample) {
                *v = channel[t];
            }
            let fired = stepper.step(
                &mut state,
                self.graph,
                &values,
                self.recurrent_current,
                &self.params,
                pools.as_mut(),
            );
            total += fired as u64;
            if let Some(r) = raster.as_mut() {
                r.steps.push(stepper.fired.iter().map(|&i| i as u32).collect());
            }
        }

        Ok(SampleRun {
            final_trace: state.trace,
            initial_trace,
            raster,
            total_spikes: total,
            pools,
        })
    }
}
