//! Random spatial reservoir construction.
//!
//! Neurons sit at uniform random points of the unit cube. Each ordered pair is
//! connected independently with a probability that falls off as a Gaussian of
//! the Euclidean distance, parameterised per (source kind, target kind). Raw
//! weights are uniform, inhibitory sources are made negative and finally every
//! neuron's inbound weights are rescaled so that each synapse type sums to a
//! fixed target.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuronKind {
    Excitatory,
    Inhibitory,
}

/// A 2×2 table of per-connection-type scalars, keyed by (source, target).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindTable {
    pub ee: f64,
    pub ie: f64,
    pub ei: f64,
    pub ii: f64,
}

impl KindTable {
    pub fn get(&self, source: NeuronKind, target: NeuronKind) -> f64 {
        use NeuronKind::*;
        match (source, target) {
            (Excitatory, Excitatory) => self.ee,
            (Inhibitory, Excitatory) => self.ie,
            (Excitatory, Inhibitory) => self.ei,
            (Inhibitory, Inhibitory) => self.ii,
        }
    }

    fn values(&self) -> [f64; 4] {
        [self.ee, self.ie, self.ei, self.ii]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub n_neurons: usize,
    pub p_inhibitory: f64,
    /// Maximum connection chance per (source, target) kind.
    pub c: KindTable,
    /// Synaptic length per (source, target) kind.
    pub l: KindTable,
    pub sigma_e: f64,
    pub sigma_i: f64,
    pub sigma_input: f64,
    pub p_input: f64,
    pub c_scale: f64,
    pub l_scale: f64,
    pub n_inputs: usize,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            n_neurons: 100,
            p_inhibitory: 0.15,
            c: KindTable {
                ee: 1.0,
                ie: 0.2,
                ei: 0.3,
                ii: 0.15,
            },
            l: KindTable {
                ee: 1.5,
                ie: 4.0,
                ei: 4.0,
                ii: 5.0,
            },
            sigma_e: 4.0,
            sigma_i: 5.5,
            sigma_input: 7.0,
            p_input: 0.5,
            c_scale: 1.0,
            l_scale: 1.0,
            n_inputs: 1,
        }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_neurons == 0 {
            return bad("n_neurons must be positive".into());
        }
        if self.n_inputs == 0 {
            return bad("n_inputs must be positive".into());
        }
        for (name, p) in [("p_inhibitory", self.p_inhibitory), ("p_input", self.p_input)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.c.values().iter().any(|&c| !(c >= 0.0)) || !(self.c_scale >= 0.0) {
            return bad("connection chances and c_scale must be non-negative".into());
        }
        if self.l.values().iter().any(|&l| !(l > 0.0)) || !(self.l_scale > 0.0) {
            return bad("synaptic lengths and l_scale must be strictly positive".into());
        }
        for (name, s) in [
            ("sigma_e", self.sigma_e),
            ("sigma_i", self.sigma_i),
            ("sigma_input", self.sigma_input),
        ] {
            if !(s > 0.0) {
                return bad(format!("{name} must be strictly positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronSpec {
    pub index: usize,
    pub position: [f64; 3],
    pub kind: NeuronKind,
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Probability that `source` projects onto `target`.
pub fn connection_probability(
    source_pos: &[f64; 3],
    target_pos: &[f64; 3],
    source_kind: NeuronKind,
    target_kind: NeuronKind,
    config: &TopologyConfig,
) -> f64 {
    let d = distance(source_pos, target_pos);
    let c = config.c_scale * config.c.get(source_kind, target_kind);
    let l = config.l_scale * config.l.get(source_kind, target_kind);
    (c * (-(d / l).powi(2)).exp()).min(1.0)
}

/// Column-oriented sparse matrix: `columns[source]` lists `(target, weight)`
/// in ascending target order. Spike propagation walks one column per spiking
/// source.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseWeights {
    n_rows: usize,
    columns: Vec<Vec<(u32, f64)>>,
}

impl SparseWeights {
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            columns: vec![Vec::new(); n_cols],
        }
    }

    /// Builds from `(target, source, weight)` triplets. Duplicate entries are
    /// summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut m = Self::empty(n_rows, n_cols);
        for (row, col, w) in triplets {
            if row >= n_rows {
                return Err(Error::DimensionMismatch {
                    context: "weight triplet row",
                    expected: n_rows,
                    actual: row,
                });
            }
            if col >= n_cols {
                return Err(Error::DimensionMismatch {
                    context: "weight triplet column",
                    expected: n_cols,
                    actual: col,
                });
            }
            m.columns[col].push((row as u32, w));
        }
        for col in &mut m.columns {
            col.sort_by_key(|&(r, _)| r);
            col.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, col: usize) -> &[(u32, f64)] {
        &self.columns[col]
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns[col]
            .binary_search_by_key(&(row as u32), |&(r, _)| r)
            .map(|k| self.columns[col][k].1)
            .unwrap_or(0.0)
    }

    /// `(target, source, weight)` in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(c, col)| col.iter().map(move |&(r, w)| (r as usize, c, w)))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (usize, usize, &mut f64)> + '_ {
        self.columns
            .iter_mut()
            .enumerate()
            .flat_map(|(c, col)| col.iter_mut().map(move |(r, w)| (*r as usize, c, w)))
    }

    /// Drops entries whose weight is exactly zero.
    pub fn prune_zeros(&mut self) {
        for col in &mut self.columns {
            col.retain(|&(_, w)| w != 0.0);
        }
    }

    /// `out += self · x`, walking columns in ascending order.
    pub fn mul_add(&self, x: &[f64], out: &mut [f64]) {
        for (col, &xv) in self.columns.iter().zip(x) {
            if xv == 0.0 {
                continue;
            }
            for &(r, w) in col {
                out[r as usize] += w * xv;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.triplets().fold(0.0, |m, (_, _, w)| m.max(w.abs()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirGraph {
    pub neurons: Vec<NeuronSpec>,
    /// `n × n`, row = target, column = source.
    pub recurrent: SparseWeights,
    /// `n × n_inputs`, row = target neuron, column = input channel.
    pub input: SparseWeights,
}

impl ReservoirGraph {
    pub fn n_neurons(&self) -> usize {
        self.neurons.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.input.n_cols()
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        self.neurons.iter().map(|n| n.position).collect()
    }

    /// Renormalises inbound sums per neuron and synapse type. Neurons without
    /// any inbound synapse of a type are left alone for that type.
    pub fn apply_synaptic_scaling(&mut self, config: &TopologyConfig) {
        let n = self.n_neurons();
        let mut exc = vec![0.0; n];
        let mut inh = vec![0.0; n];
        for (target, source, w) in self.recurrent.triplets() {
            match self.neurons[source].kind {
                NeuronKind::Excitatory => exc[target] += w,
                NeuronKind::Inhibitory => inh[target] += -w,
            }
        }
        let factor = |sum: f64, goal: f64| if sum > 0.0 { goal / sum } else { 1.0 };
        let kinds: Vec<NeuronKind> = self.neurons.iter().map(|n| n.kind).collect();
        for (target, source, w) in self.recurrent.iter_mut() {
            *w *= match kinds[source] {
                NeuronKind::Excitatory => factor(exc[target], config.sigma_e),
                NeuronKind::Inhibitory => factor(inh[target], config.sigma_i),
            };
        }

        let mut inp = vec![0.0; n];
        for (target, _, w) in self.input.triplets() {
            inp[target] += w;
        }
        for (target, _, w) in self.input.iter_mut() {
            *w *= factor(inp[target], config.sigma_input);
        }
    }

    /// Copy of the graph with every recurrent synapse removed.
    pub fn without_recurrent(&self) -> Self {
        Self {
            neurons: self.neurons.clone(),
            recurrent: SparseWeights::empty(self.n_neurons(), self.n_neurons()),
            input: self.input.clone(),
        }
    }

    pub fn inbound_sums(&self, target: usize) -> InboundSums {
        let mut sums = InboundSums::default();
        for (t, source, w) in self.recurrent.triplets() {
            if t != target {
                continue;
            }
            match self.neurons[source].kind {
                NeuronKind::Excitatory => {
                    sums.excitatory += w;
                    sums.n_excitatory += 1;
                }
                NeuronKind::Inhibitory => {
                    sums.inhibitory += -w;
                    sums.n_inhibitory += 1;
                }
            }
        }
        for (t, _, w) in self.input.triplets() {
            if t == target {
                sums.input += w;
                sums.n_input += 1;
            }
        }
        sums
    }

    pub fn to_document(&self, pools: Option<&[usize]>) -> GraphDocument {
        GraphDocument {
            n_inputs: self.n_inputs(),
            neurons: self
                .neurons
                .iter()
                .map(|n| NeuronRecord {
                    index: n.index,
                    position: n.position,
                    kind: n.kind,
                    pool: pools.map(|p| p[n.index]),
                })
                .collect(),
            recurrent: self.recurrent.triplets().collect(),
            input: self.input.triplets().collect(),
        }
    }

    pub fn from_document(doc: &GraphDocument) -> Result<Self> {
        let n = doc.neurons.len();
        let mut neurons = Vec::with_capacity(n);
        for (i, rec) in doc.neurons.iter().enumerate() {
            if rec.index != i {
                return Err(Error::InvalidConfig(format!(
                    "neuron records must be in index order (found {} at position {i})",
                    rec.index
                )));
            }
            neurons.push(NeuronSpec {
                index: rec.index,
                position: rec.position,
                kind: rec.kind,
            });
        }
        Ok(Self {
            neurons,
            recurrent: SparseWeights::from_triplets(n, n, doc.recurrent.iter().copied())?,
            input: SparseWeights::from_triplets(n, doc.n_inputs, doc.input.iter().copied())?,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InboundSums {
    pub excitatory: f64,
    pub inhibitory: f64,
    pub input: f64,
    pub n_excitatory: usize,
    pub n_inhibitory: usize,
    pub n_input: usize,
}

/// Serialisable form of a [`ReservoirGraph`]. Weight lists are
/// `[target, source, weight]` triplets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub n_inputs: usize,
    pub neurons: Vec<NeuronRecord>,
    pub recurrent: Vec<(usize, usize, f64)>,
    pub input: Vec<(usize, usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronRecord {
    pub index: usize,
    pub position: [f64; 3],
    pub kind: NeuronKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<usize>,
}

/// Draws a reservoir. Random values are consumed in a fixed order: positions,
/// kinds, recurrent edge trials (target-major), recurrent weights, input edge
/// trials (target-major), input weights.
pub fn generate_reservoir(config: &TopologyConfig, rng: &mut SimRng) -> Result<ReservoirGraph> {
    config.validate()?;
    let n = config.n_neurons;

    let positions: Vec<[f64; 3]> = (0..n)
        .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
        .collect();
    let kinds: Vec<NeuronKind> = (0..n)
        .map(|_| {
            if rng.gen::<f64>() < config.p_inhibitory {
                NeuronKind::Inhibitory
            } else {
                NeuronKind::Excitatory
            }
        })
        .collect();

    let mut edges = Vec::new();
    for target in 0..n {
        for source in 0..n {
            if source == target {
                continue;
            }
            let p = connection_probability(
                &positions[source],
                &positions[target],
                kinds[source],
                kinds[target],
                config,
            );
            if rng.gen::<f64>() < p {
                edges.push((target, source));
            }
        }
    }
    let recurrent: Vec<(usize, usize, f64)> = edges
        .into_iter()
        .map(|(t, s)| {
            let w: f64 = rng.gen();
            let signed = match kinds[s] {
                NeuronKind::Excitatory => w,
                NeuronKind::Inhibitory => -w,
            };
            (t, s, signed)
        })
        .collect();

    let mut input_edges = Vec::new();
    for target in 0..n {
        for channel in 0..config.n_inputs {
            if rng.gen::<f64>() < config.p_input {
                input_edges.push((target, channel));
            }
        }
    }
    let input: Vec<(usize, usize, f64)> = input_edges
        .into_iter()
        .map(|(t, c)| (t, c, rng.gen::<f64>()))
        .collect();

    let neurons = positions
        .into_iter()
        .zip(kinds)
        .enumerate()
        .map(|(index, (position, kind))| NeuronSpec {
            index,
            position,
            kind,
        })
        .collect();
    let mut graph = ReservoirGraph {
        neurons,
        recurrent: SparseWeights::from_triplets(n, n, recurrent)?,
        input: SparseWeights::from_triplets(n, config.n_inputs, input)?,
    };
    graph.apply_synaptic_scaling(config);
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use approx::assert_relative_eq;

    fn origin() -> [f64; 3] {
        [0.0; 3]
    }

    #[test]
    fn probability_at_zero_distance_is_max_chance() {
        let cfg = TopologyConfig::default();
        let e = NeuronKind::Excitatory;
        let i = NeuronKind::Inhibitory;
        assert_eq!(connection_probability(&origin(), &origin(), e, e, &cfg), 1.0);
        assert_eq!(connection_probability(&origin(), &origin(), i, i, &cfg), 0.15);
        assert_eq!(connection_probability(&origin(), &origin(), i, e, &cfg), 0.2);
        assert_eq!(connection_probability(&origin(), &origin(), e, i, &cfg), 0.3);
    }

    #[test]
    fn probability_one_length_away() {
        let cfg = TopologyConfig::default();
        let e = NeuronKind::Excitatory;
        // d = 1.5 = L_EE
        let a = [0.0, 0.0, 0.0];
        let b = [1.5, 0.0, 0.0];
        assert_relative_eq!(
            connection_probability(&a, &b, e, e, &cfg),
            (-1.0f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            connection_probability(&a, &b, e, e, &cfg),
            0.367879,
            epsilon = 1e-6
        );
    }

    #[test]
    fn c_scale_is_clamped() {
        let cfg = TopologyConfig {
            c_scale: 10.0,
            ..Default::default()
        };
        let i = NeuronKind::Inhibitory;
        assert_eq!(connection_probability(&origin(), &origin(), i, i, &cfg), 1.0);
    }

    #[test]
    fn rejects_empty_reservoir() {
        let cfg = TopologyConfig {
            n_neurons: 0,
            ..Default::default()
        };
        assert!(generate_reservoir(&cfg, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn full_input_wiring_gives_sigma_input_per_neuron() {
        let cfg = TopologyConfig {
            p_input: 1.0,
            n_inputs: 1,
            ..Default::default()
        };
        let g = generate_reservoir(&cfg, &mut rng_from_seed(3)).unwrap();
        for i in 0..cfg.n_neurons {
            let col = g.input.column(0);
            let (_, w) = col.iter().find(|(r, _)| *r as usize == i).unwrap();
            assert_relative_eq!(*w, 7.0, max_relative = 1e-12);
        }
        assert_eq!(g.input.nnz(), cfg.n_neurons);
    }

    #[test]
    fn zero_c_scale_gives_no_recurrence() {
        let cfg = TopologyConfig {
            c_scale: 0.0,
            ..Default::default()
        };
        let g = generate_reservoir(&cfg, &mut rng_from_seed(1)).unwrap();
        assert_eq!(g.recurrent.nnz(), 0);
    }

    #[test]
    fn inbound_sums_hit_targets() {
        let cfg = TopologyConfig::default();
        let mut inhibitory = 0usize;
        for seed in 0..20 {
            let g = generate_reservoir(&cfg, &mut rng_from_seed(seed)).unwrap();
            inhibitory += g
                .neurons
                .iter()
                .filter(|n| n.kind == NeuronKind::Inhibitory)
                .count();
            for i in 0..g.n_neurons() {
                let s = g.inbound_sums(i);
                if s.n_excitatory > 0 {
                    assert_relative_eq!(s.excitatory, 4.0, max_relative = 1e-9);
                }
                if s.n_inhibitory > 0 {
                    assert_relative_eq!(s.inhibitory, 5.5, max_relative = 1e-9);
                }
                if s.n_input > 0 {
                    assert_relative_eq!(s.input, 7.0, max_relative = 1e-9);
                }
            }
        }
        let frac = inhibitory as f64 / 2000.0;
        assert!((0.05..=0.25).contains(&frac), "inhibitory fraction {frac}");
    }

    #[test]
    fn no_autapses_and_sign_discipline() {
        let g = generate_reservoir(&TopologyConfig::default(), &mut rng_from_seed(11)).unwrap();
        for (t, s, w) in g.recurrent.triplets() {
            assert_ne!(t, s);
            match g.neurons[s].kind {
                NeuronKind::Excitatory => assert!(w >= 0.0),
                NeuronKind::Inhibitory => assert!(w <= 0.0),
            }
        }
        assert!(g.input.triplets().all(|(_, _, w)| w >= 0.0));
    }

    #[test]
    fn document_round_trip() {
        let g = generate_reservoir(&TopologyConfig::default(), &mut rng_from_seed(5)).unwrap();
        let doc = g.to_document(None);
        let text = serde_json::to_string(&doc).unwrap();
        let back: GraphDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(ReservoirGraph::from_document(&back).unwrap(), g);
    }
}
