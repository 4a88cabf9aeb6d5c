//! Saturating fixed-point formats and the reduced-precision reservoir.

use serde::{Deserialize, Serialize};

use crate::dynamics::DynamicsParams;
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::topology::{generate_reservoir, ReservoirGraph, SparseWeights, TopologyConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointFormat {
    pub total_bits: u32,
    pub signed: bool,
    /// Value of one least-significant step.
    pub scale: f64,
}

impl FixedPointFormat {
    pub fn new(total_bits: u32, signed: bool, scale: f64) -> Result<Self> {
        let f = Self {
            total_bits,
            signed,
            scale,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=32).contains(&self.total_bits) {
            return Err(Error::InvalidConfig(format!(
                "fixed-point width {} outside 2..=32",
                self.total_bits
            )));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::InvalidConfig("fixed-point scale must be positive".into()));
        }
        Ok(())
    }

    pub fn min_code(&self) -> i64 {
        if self.signed {
            -(1i64 << (self.total_bits - 1))
        } else {
            0
        }
    }

    pub fn max_code(&self) -> i64 {
        if self.signed {
            (1i64 << (self.total_bits - 1)) - 1
        } else {
            (1i64 << self.total_bits) - 1
        }
    }

    pub fn min_value(&self) -> f64 {
        self.min_code() as f64 * self.scale
    }

    pub fn max_value(&self) -> f64 {
        self.max_code() as f64 * self.scale
    }

    /// Nearest code (ties to even), saturated to the representable range.
    pub fn encode(&self, value: f64) -> i64 {
        if value.is_nan() {
            return 0;
        }
        let q = (value / self.scale).round_ties_even();
        q.clamp(self.min_code() as f64, self.max_code() as f64) as i64
    }

    pub fn decode(&self, code: i64) -> f64 {
        code as f64 * self.scale
    }

    pub fn quantize(&self, value: f64) -> f64 {
        self.decode(self.encode(value))
    }
}

pub fn quantize(value: f64, format: &FixedPointFormat) -> f64 {
    format.quantize(value)
}

/// Formats applied to simulated state after every step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateQuantization {
    pub membrane: FixedPointFormat,
    pub trace: FixedPointFormat,
    /// Width of the unsigned energy codes.
    pub energy_bits: u32,
}

impl StateQuantization {
    /// Membranes span twice the threshold in signed codes; traces use the
    /// per-step decay as their step so the decay stays representable.
    pub fn for_params(params: &DynamicsParams, state_bits: u32) -> Result<Self> {
        let membrane = FixedPointFormat::new(
            state_bits,
            true,
            2.0 * params.v_threshold.abs().max(f64::MIN_POSITIVE) / (1u64 << state_bits) as f64,
        )?;
        let trace_step = if params.trace_decay > 0.0 {
            params.trace_decay
        } else {
            params.trace_increment / 100.0
        };
        let trace = FixedPointFormat::new(state_bits, false, trace_step)?;
        Ok(Self {
            membrane,
            trace,
            energy_bits: state_bits,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DigitalBits {
    pub input_bits: u32,
    pub weight_bits: u32,
    pub state_bits: u32,
}

impl Default for DigitalBits {
    fn default() -> Self {
        Self {
            input_bits: 21,
            weight_bits: 3,
            state_bits: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DigitalLsmConfig {
    pub topology: TopologyConfig,
    pub dynamics: DynamicsParams,
    pub input_format: FixedPointFormat,
    pub weight_bits: u32,
    pub state: StateQuantization,
}

impl DigitalLsmConfig {
    pub const N_NEURONS: usize = 60;
    pub const L_SCALE: f64 = 0.14;
    pub const DT: f64 = 0.01;

    /// Derives the digital variant from analog settings: 60 neurons, synaptic
    /// lengths scaled by 0.14 and a 0.01 s step.
    pub fn from_base(topology: &TopologyConfig, dynamics: &DynamicsParams, bits: DigitalBits) -> Result<Self> {
        let topology = TopologyConfig {
            n_neurons: Self::N_NEURONS,
            l_scale: Self::L_SCALE,
            ..topology.clone()
        };
        let mut dynamics = DynamicsParams {
            dt: Self::DT,
            ..dynamics.clone()
        };
        let state = StateQuantization::for_params(&dynamics, bits.state_bits)?;
        dynamics.quantization = Some(state);
        // Inputs are scaled into [-1, 1] before quantisation.
        let input_format = FixedPointFormat::new(
            bits.input_bits,
            true,
            1.0 / (1u64 << (bits.input_bits - 1)) as f64,
        )?;
        Ok(Self {
            topology,
            dynamics,
            input_format,
            weight_bits: bits.weight_bits,
            state,
        })
    }
}

impl Default for DigitalLsmConfig {
    fn default() -> Self {
        let topology = TopologyConfig {
            n_inputs: 4,
            ..Default::default()
        };
        Self::from_base(&topology, &DynamicsParams::default(), DigitalBits::default())
            .expect("default digital formats are valid")
    }
}

/// Per-matrix symmetric weight format: the largest magnitude lands on the top
/// positive code.
pub fn weight_format(weights: &SparseWeights, bits: u32) -> Result<Option<FixedPointFormat>> {
    let max = weights.max_abs();
    if max == 0.0 {
        return Ok(None);
    }
    let top = ((1i64 << (bits - 1)) - 1) as f64;
    FixedPointFormat::new(bits, true, max / top).map(Some)
}

/// Quantises recurrent weights in place and drops weights rounded to zero.
pub fn quantize_recurrent_weights(graph: &mut ReservoirGraph, bits: u32) -> Result<()> {
    if let Some(format) = weight_format(&graph.recurrent, bits)? {
        for (_, _, w) in graph.recurrent.iter_mut() {
            *w = format.quantize(*w);
        }
        graph.recurrent.prune_zeros();
    }
    Ok(())
}

pub fn build_digital_lsm(config: &DigitalLsmConfig, rng: &mut SimRng) -> Result<ReservoirGraph> {
    let mut graph = generate_reservoir(&config.topology, rng)?;
    quantize_recurrent_weights(&mut graph, config.weight_bits)?;
    Ok(graph)
}

/// Quantises every value of a per-timestep input matrix.
pub fn quantize_inputs(sample: &mut [Vec<f64>], format: &FixedPointFormat) {
    for row in sample {
        for v in row {
            *v = format.quantize(*v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn three_bit() -> FixedPointFormat {
        FixedPointFormat::new(3, true, 0.25).unwrap()
    }

    #[test]
    fn zero_maps_to_zero() {
        for f in [three_bit(), FixedPointFormat::new(12, false, 0.01).unwrap()] {
            assert_eq!(f.quantize(0.0), 0.0);
        }
    }

    #[test]
    fn three_bit_grid() {
        let f = three_bit();
        assert_eq!(f.min_value(), -1.0);
        assert_eq!(f.max_value(), 0.75);
        assert_eq!(f.quantize(0.26), 0.25);
        assert_eq!(f.quantize(5.0), 0.75);
        assert_eq!(f.quantize(-5.0), -1.0);
        // ties to even code
        assert_eq!(f.quantize(0.125), 0.0);
        assert_eq!(f.quantize(0.375), 0.5);
    }

    #[test]
    fn rejects_bad_formats() {
        assert!(FixedPointFormat::new(1, true, 1.0).is_err());
        assert!(FixedPointFormat::new(33, true, 1.0).is_err());
        assert!(FixedPointFormat::new(8, true, 0.0).is_err());
    }

    #[test]
    fn digital_defaults() {
        let cfg = DigitalLsmConfig::default();
        assert_eq!(cfg.topology.n_neurons, 60);
        assert_eq!(cfg.topology.l_scale, 0.14);
        assert_eq!(cfg.dynamics.dt, 0.01);
        assert_eq!(cfg.input_format.total_bits, 21);
        assert_eq!(cfg.weight_bits, 3);
        assert_eq!(cfg.state.membrane.total_bits, 12);
        assert_eq!(cfg.state.energy_bits, 12);
    }

    #[test]
    fn digital_graph_weights_on_three_bit_grid() {
        let cfg = DigitalLsmConfig::default();
        let raw = generate_reservoir(&cfg.topology, &mut rng_from_seed(4)).unwrap();
        let g = build_digital_lsm(&cfg, &mut rng_from_seed(4)).unwrap();
        let f = weight_format(&raw.recurrent, 3).unwrap().unwrap();
        let zeroed = raw
            .recurrent
            .triplets()
            .filter(|&(_, _, w)| f.quantize(w) == 0.0)
            .count();
        assert_eq!(g.recurrent.nnz(), raw.recurrent.nnz() - zeroed);
        for (_, _, w) in g.recurrent.triplets() {
            let code = w / f.scale;
            assert!((code - code.round()).abs() < 1e-9);
            assert!((-4.0..=3.0).contains(&code.round()));
        }

        let mut again = g.clone();
        quantize_recurrent_weights(&mut again, 3).unwrap();
        assert_eq!(again, g);
    }

    proptest! {
        #[test]
        fn idempotent_and_monotone(x in -1e3f64..1e3, y in -1e3f64..1e3, bits in 2u32..=24, signed: bool) {
            let f = FixedPointFormat::new(bits, signed, 0.37).unwrap();
            let qx = f.quantize(x);
            prop_assert_eq!(f.quantize(qx), qx);
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            prop_assert!(f.quantize(lo) <= f.quantize(hi));
        }

        #[test]
        fn saturation_keeps_sign(x in 1.0f64..1e9) {
            let f = three_bit();
            prop_assert!(f.quantize(x) > 0.0);
            prop_assert!(f.quantize(-x) < 0.0);
        }
    }
}
