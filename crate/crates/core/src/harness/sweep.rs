//! Pool-size × energy-cost × seed sweeps and their aggregation.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::experiment::{prepare_inputs, run_prepared, PreparedInputs, RunResult};
use super::stats::Stat;
use crate::data::Dataset;
use crate::energy::EnergyConfig;
use crate::error::{Error, Result};

pub const DEFAULT_POOL_SIZES: [usize; 5] = [1, 4, 10, 50, 100];
pub const DEFAULT_COSTS: [f64; 6] = [0.0, 0.05, 0.10, 0.15, 0.20, 0.25];
pub const DEFAULT_SEEDS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Topology, dynamics and readout settings shared by every cell. Its
    /// `energy` field supplies regeneration and capacity; pool size and cost
    /// come from the grid.
    pub base: ExperimentConfig,
    pub pool_sizes: Vec<usize>,
    pub energy_costs: Vec<f64>,
    pub n_seeds: usize,
    pub master_seed: u64,
    /// Optional connectivity grids; empty means the base value only.
    pub c_scales: Vec<f64>,
    pub l_scales: Vec<f64>,
    /// Worker threads; `None` uses the global pool, `Some(1)` runs serially.
    pub jobs: Option<usize>,
}

impl SweepConfig {
    pub fn new(base: ExperimentConfig) -> Self {
        Self {
            base,
            pool_sizes: DEFAULT_POOL_SIZES.to_vec(),
            energy_costs: DEFAULT_COSTS.to_vec(),
            n_seeds: DEFAULT_SEEDS,
            master_seed: 0,
            c_scales: Vec::new(),
            l_scales: Vec::new(),
            jobs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pool_sizes.is_empty() || self.energy_costs.is_empty() {
            return Err(Error::InvalidConfig("pool_sizes and energy_costs must be nonempty".into()));
        }
        if self.n_seeds == 0 {
            return Err(Error::InvalidConfig("n_seeds must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        self.base.validate()
    }

    fn grid(values: &[f64], base: f64) -> Vec<f64> {
        if values.is_empty() {
            vec![base]
        } else {
            values.to_vec()
        }
    }

    /// Every cell configuration in a fixed order.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let energy_base = self.base.energy.unwrap_or_default();
        let mut out = Vec::new();
        for c in Self::grid(&self.c_scales, self.base.topology.c_scale) {
            for l in Self::grid(&self.l_scales, self.base.topology.l_scale) {
                for &k in &self.pool_sizes {
                    for &cost in &self.energy_costs {
                        let mut cfg = self.base.clone();
                        cfg.topology.c_scale = c;
                        cfg.topology.l_scale = l;
                        cfg.energy = Some(EnergyConfig {
                            neurons_per_pool: k,
                            cost_per_spike: cost,
                            ..energy_base
                        });
                        out.push(cfg);
                    }
                }
            }
        }
        out
    }
}

/// Grid coordinates of one cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub pool_size: usize,
    pub energy_cost: f64,
    pub c_scale: f64,
    pub l_scale: f64,
}

impl CellKey {
    fn of(cfg: &ExperimentConfig) -> Self {
        let e = cfg.energy.unwrap_or_default();
        Self {
            pool_size: e.neurons_per_pool,
            energy_cost: e.cost_per_spike,
            c_scale: cfg.topology.c_scale,
            l_scale: cfg.topology.l_scale,
        }
    }

    fn from_run(r: &RunResult) -> Self {
        Self {
            pool_size: r.pool_size.unwrap_or(0),
            energy_cost: r.energy_cost,
            c_scale: r.c_scale,
            l_scale: r.l_scale,
        }
    }

    pub fn cmp_key(&self, other: &Self) -> Ordering {
        self.c_scale
            .total_cmp(&other.c_scale)
            .then(self.l_scale.total_cmp(&other.l_scale))
            .then(self.pool_size.cmp(&other.pool_size))
            .then(self.energy_cost.total_cmp(&other.energy_cost))
    }

    fn same(&self, other: &Self) -> bool {
        self.cmp_key(other) == Ordering::Equal
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub key: CellKey,
    pub n_runs: usize,
    pub train_accuracy: Stat,
    pub test_accuracy: Stat,
    pub separation: Stat,
    pub sep_d: Stat,
    pub sep_v: Stat,
    /// Over finite estimates only; `None` when every run was `-inf`.
    pub lyapunov: Option<Stat>,
    pub neg_inf_count: usize,
    pub total_spikes: Stat,
    pub spikes_per_sample: Stat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub key: CellKey,
    pub seed_index: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub aggregates: Vec<AggregateResult>,
    /// Successful runs sorted by cell key, then seed index.
    pub runs: Vec<RunResult>,
    pub failures: Vec<CellFailure>,
}

fn sort_runs(runs: &mut [RunResult]) {
    runs.sort_by(|a, b| {
        CellKey::from_run(a)
            .cmp_key(&CellKey::from_run(b))
            .then(a.seed_index.cmp(&b.seed_index))
    });
}

/// Reduces runs to one row per cell. The input order does not matter.
pub fn aggregate(runs: &[RunResult]) -> Vec<AggregateResult> {
    let mut sorted = runs.to_vec();
    sort_runs(&mut sorted);
    let mut out = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let key = CellKey::from_run(&sorted[start]);
        let end = start
            + sorted[start..]
                .iter()
                .take_while(|r| CellKey::from_run(r).same(&key))
                .count();
        out.push(aggregate_cell(key, &sorted[start..end]));
        start = end;
    }
    out
}

fn aggregate_cell(key: CellKey, runs: &[RunResult]) -> AggregateResult {
    let stat = |f: fn(&RunResult) -> f64| {
        let v: Vec<f64> = runs.iter().map(f).collect();
        Stat::of(&v).unwrap_or_default()
    };
    let finite: Vec<f64> = runs.iter().filter_map(|r| r.lyapunov.finite()).collect();
    AggregateResult {
        key,
        n_runs: runs.len(),
        train_accuracy: stat(|r| r.train_accuracy),
        test_accuracy: stat(|r| r.test_accuracy),
        separation: stat(|r| r.separation),
        sep_d: stat(|r| r.sep_d),
        sep_v: stat(|r| r.sep_v),
        lyapunov: Stat::of(&finite),
        neg_inf_count: runs.len() - finite.len(),
        total_spikes: stat(|r| r.total_reservoir_spikes as f64),
        spikes_per_sample: stat(|r| r.mean_spikes_per_sample),
    }
}

/// Runs every `(cell, seed)` pair on a fixed dataset split.
pub fn sweep(config: &SweepConfig, dataset: &Dataset) -> Result<SweepOutput> {
    config.validate()?;
    let inputs = prepare_inputs(dataset, &config.base)?;
    let cells = config.cells();
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..config.n_seeds).map(move |s| (c, s)))
        .collect();
    let exec = |&(c, s): &(usize, usize)| run_prepared(&cells[c], &inputs, config.master_seed, s);

    let results: Vec<Result<RunResult>> = match config.jobs {
        Some(1) => tasks.iter().map(exec).collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(|| tasks.par_iter().map(exec).collect()),
        None => tasks.par_iter().map(exec).collect(),
    };
    Ok(collect(&cells, &tasks, results))
}

fn collect(cells: &[ExperimentConfig], tasks: &[(usize, usize)], results: Vec<Result<RunResult>>) -> SweepOutput {
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (&(c, s), r) in tasks.iter().zip(results) {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => failures.push(CellFailure {
                key: CellKey::of(&cells[c]),
                seed_index: s,
                message: e.to_string(),
            }),
        }
    }
    sort_runs(&mut runs);
    failures.sort_by(|a, b| a.key.cmp_key(&b.key).then(a.seed_index.cmp(&b.seed_index)));
    SweepOutput {
        aggregates: aggregate(&runs),
        runs,
        failures,
    }
}

/// Same grid with pool gating switched off: one baseline run per seed.
pub fn baseline_runs(config: &SweepConfig, inputs: &PreparedInputs) -> Vec<Result<RunResult>> {
    let base = config.base.clone().with_energy(None);
    (0..config.n_seeds)
        .map(|s| run_prepared(&base, inputs, config.master_seed, s))
        .collect()
}
