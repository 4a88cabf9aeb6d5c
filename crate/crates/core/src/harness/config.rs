//! Experiment configuration and the flat key-value config file.
//!
//! A config file is a flat TOML table. Every field is optional; unset fields
//! keep their defaults. `digital = true` switches the defaults to the
//! reduced-precision reservoir (60 neurons, lengths × 0.14, dt = 0.01) before
//! explicit values are applied. Command-line flags are merged on top with
//! [`ConfigOverrides::merge`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::PreprocessMode;
use crate::dynamics::DynamicsParams;
use crate::energy::EnergyConfig;
use crate::error::{Error, Result};
use crate::quantization::{DigitalBits, DigitalLsmConfig, FixedPointFormat, StateQuantization};
use crate::readout::DEFAULT_RIDGE;
use crate::topology::TopologyConfig;

/// Fixed-point settings beyond the per-step state formats (which live in
/// [`DynamicsParams::quantization`]).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DigitalSettings {
    pub input_format: FixedPointFormat,
    pub weight_bits: u32,
    pub energy_bits: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub topology: TopologyConfig,
    pub dynamics: DynamicsParams,
    /// `None` runs without energy pools.
    pub energy: Option<EnergyConfig>,
    pub ridge: f64,
    pub digital: Option<DigitalSettings>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            topology: TopologyConfig::default(),
            dynamics: DynamicsParams::default(),
            energy: None,
            ridge: DEFAULT_RIDGE,
            digital: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_digital(cfg: &DigitalLsmConfig) -> Self {
        Self {
            topology: cfg.topology.clone(),
            dynamics: cfg.dynamics.clone(),
            energy: None,
            ridge: DEFAULT_RIDGE,
            digital: Some(DigitalSettings {
                input_format: cfg.input_format,
                weight_bits: cfg.weight_bits,
                energy_bits: cfg.state.energy_bits,
            }),
        }
    }

    pub fn with_energy(mut self, energy: Option<EnergyConfig>) -> Self {
        self.energy = energy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.dynamics.validate()?;
        if let Some(e) = &self.energy {
            e.validate()?;
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::InvalidConfig("ridge must be non-negative".into()));
        }
        Ok(())
    }
}

/// Partial settings from a config file or the command line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    // topology
    pub n_neurons: Option<usize>,
    pub p_inhibitory: Option<f64>,
    pub c_ee: Option<f64>,
    pub c_ie: Option<f64>,
    pub c_ei: Option<f64>,
    pub c_ii: Option<f64>,
    pub l_ee: Option<f64>,
    pub l_ie: Option<f64>,
    pub l_ei: Option<f64>,
    pub l_ii: Option<f64>,
    pub sigma_e: Option<f64>,
    pub sigma_i: Option<f64>,
    pub sigma_input: Option<f64>,
    pub p_input: Option<f64>,
    pub c_scale: Option<f64>,
    pub l_scale: Option<f64>,
    pub n_inputs: Option<usize>,
    // dynamics
    pub v_threshold: Option<f64>,
    pub v_reset: Option<f64>,
    pub tau_membrane: Option<f64>,
    pub dt: Option<f64>,
    pub alpha_recurrent: Option<f64>,
    pub trace_increment: Option<f64>,
    pub trace_decay: Option<f64>,
    // energy
    pub energy: Option<bool>,
    pub neurons_per_pool: Option<usize>,
    pub cost_per_spike: Option<f64>,
    pub regen_fraction: Option<f64>,
    pub capacity_per_neuron: Option<f64>,
    // readout
    pub ridge: Option<f64>,
    // fixed point
    pub digital: Option<bool>,
    pub input_bits: Option<u32>,
    pub weight_bits: Option<u32>,
    pub state_bits: Option<u32>,
    // data
    pub mode: Option<PreprocessMode>,
    pub dataset: Option<PathBuf>,
    pub synthetic: Option<bool>,
    pub synthetic_per_class: Option<usize>,
    pub data_seed: Option<u64>,
    // sweep
    pub pool_sizes: Option<Vec<usize>>,
    pub energy_costs: Option<Vec<f64>>,
    pub c_scales: Option<Vec<f64>>,
    pub l_scales: Option<Vec<f64>>,
    pub n_seeds: Option<usize>,
    pub master_seed: Option<u64>,
}

macro_rules! merge_fields {
    ($base:ident, $top:ident; $($f:ident),* $(,)?) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl ConfigOverrides {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Values set in `top` win.
    pub fn merge(mut self, top: ConfigOverrides) -> Self {
        merge_fields!(self, top;
            n_neurons, p_inhibitory, c_ee, c_ie, c_ei, c_ii, l_ee, l_ie, l_ei, l_ii,
            sigma_e, sigma_i, sigma_input, p_input, c_scale, l_scale, n_inputs,
            v_threshold, v_reset, tau_membrane, dt, alpha_recurrent, trace_increment, trace_decay,
            energy, neurons_per_pool, cost_per_spike, regen_fraction, capacity_per_neuron,
            ridge, digital, input_bits, weight_bits, state_bits,
            mode, dataset, synthetic, synthetic_per_class, data_seed,
            pool_sizes, energy_costs, c_scales, l_scales, n_seeds, master_seed,
        );
        self
    }

    pub fn is_digital(&self) -> bool {
        self.digital.unwrap_or(false)
    }

    pub fn mode(&self) -> PreprocessMode {
        self.mode.unwrap_or(if self.is_digital() {
            PreprocessMode::Four
        } else {
            PreprocessMode::Single
        })
    }

    pub fn energy_config(&self) -> EnergyConfig {
        let d = EnergyConfig::default();
        EnergyConfig {
            neurons_per_pool: self.neurons_per_pool.unwrap_or(d.neurons_per_pool),
            cost_per_spike: self.cost_per_spike.unwrap_or(d.cost_per_spike),
            regen_fraction: self.regen_fraction.unwrap_or(d.regen_fraction),
            capacity_per_neuron: self.capacity_per_neuron.unwrap_or(d.capacity_per_neuron),
        }
    }

    /// Energy pools are on when requested explicitly or when any pool field
    /// is set.
    pub fn energy_enabled(&self) -> bool {
        self.energy.unwrap_or(self.neurons_per_pool.is_some() || self.cost_per_spike.is_some())
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let digital = self.is_digital();
        let mut topo = TopologyConfig {
            n_inputs: self.mode().n_channels(),
            ..Default::default()
        };
        let mut dynp = DynamicsParams::default();
        if digital {
            topo.n_neurons = DigitalLsmConfig::N_NEURONS;
            topo.l_scale = DigitalLsmConfig::L_SCALE;
            dynp.dt = DigitalLsmConfig::DT;
        }

        let o = self;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        if let Some(n) = o.n_neurons {
            topo.n_neurons = n;
        }
        if let Some(n) = o.n_inputs {
            topo.n_inputs = n;
        }
        set(&mut topo.p_inhibitory, o.p_inhibitory);
        set(&mut topo.c.ee, o.c_ee);
        set(&mut topo.c.ie, o.c_ie);
        set(&mut topo.c.ei, o.c_ei);
        set(&mut topo.c.ii, o.c_ii);
        set(&mut topo.l.ee, o.l_ee);
        set(&mut topo.l.ie, o.l_ie);
        set(&mut topo.l.ei, o.l_ei);
        set(&mut topo.l.ii, o.l_ii);
        set(&mut topo.sigma_e, o.sigma_e);
        set(&mut topo.sigma_i, o.sigma_i);
        set(&mut topo.sigma_input, o.sigma_input);
        set(&mut topo.p_input, o.p_input);
        set(&mut topo.c_scale, o.c_scale);
        set(&mut topo.l_scale, o.l_scale);
        set(&mut dynp.v_threshold, o.v_threshold);
        set(&mut dynp.v_reset, o.v_reset);
        set(&mut dynp.tau_membrane, o.tau_membrane);
        set(&mut dynp.dt, o.dt);
        set(&mut dynp.alpha_recurrent, o.alpha_recurrent);
        set(&mut dynp.trace_increment, o.trace_increment);
        set(&mut dynp.trace_decay, o.trace_decay);

        let digital_settings = if digital {
            let d = DigitalBits::default();
            let bits = DigitalBits {
                input_bits: o.input_bits.unwrap_or(d.input_bits),
                weight_bits: o.weight_bits.unwrap_or(d.weight_bits),
                state_bits: o.state_bits.unwrap_or(d.state_bits),
            };
            let state = StateQuantization::for_params(&dynp, bits.state_bits)?;
            dynp.quantization = Some(state);
            if !(2..=32).contains(&bits.input_bits) || !(2..=32).contains(&bits.weight_bits) {
                return Err(Error::InvalidConfig("fixed-point widths must lie in 2..=32".into()));
            }
            Some(DigitalSettings {
                input_format: FixedPointFormat::new(
                    bits.input_bits,
                    true,
                    1.0 / (1u64 << (bits.input_bits - 1)) as f64,
                )?,
                weight_bits: bits.weight_bits,
                energy_bits: state.energy_bits,
            })
        } else {
            None
        };

        let cfg = ExperimentConfig {
            topology: topo,
            dynamics: dynp,
            energy: self.energy_enabled().then(|| self.energy_config()),
            ridge: o.ridge.unwrap_or(DEFAULT_RIDGE),
            digital: digital_settings,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
