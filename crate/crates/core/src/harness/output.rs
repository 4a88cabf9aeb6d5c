//! Result files: aggregate CSV (plot-ready) and JSON documents.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces the values exactly. A cell whose Lyapunov runs were all `-inf`
//! has empty Lyapunov columns; `neg_inf_count` says how many runs were left
//! out of the mean.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::RunResult;
use super::stats::Stat;
use super::sweep::{AggregateResult, CellKey};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct AggregateRow {
    pool_size: usize,
    energy_cost: f64,
    n_runs: usize,
    train_acc_mean: f64,
    train_acc_std: f64,
    test_acc_mean: f64,
    test_acc_std: f64,
    separation_mean: f64,
    separation_std: f64,
    sep_d_mean: f64,
    sep_d_std: f64,
    sep_v_mean: f64,
    sep_v_std: f64,
    lyapunov_mean: Option<f64>,
    lyapunov_std: Option<f64>,
    neg_inf_count: usize,
    total_spikes_mean: f64,
    total_spikes_std: f64,
    spikes_per_sample_mean: f64,
    spikes_per_sample_std: f64,
    c_scale: f64,
    l_scale: f64,
}

impl From<&AggregateResult> for AggregateRow {
    fn from(a: &AggregateResult) -> Self {
        Self {
            pool_size: a.key.pool_size,
            energy_cost: a.key.energy_cost,
            n_runs: a.n_runs,
            train_acc_mean: a.train_accuracy.mean,
            train_acc_std: a.train_accuracy.std,
            test_acc_mean: a.test_accuracy.mean,
            test_acc_std: a.test_accuracy.std,
            separation_mean: a.separation.mean,
            separation_std: a.separation.std,
            sep_d_mean: a.sep_d.mean,
            sep_d_std: a.sep_d.std,
            sep_v_mean: a.sep_v.mean,
            sep_v_std: a.sep_v.std,
            lyapunov_mean: a.lyapunov.map(|s| s.mean),
            lyapunov_std: a.lyapunov.map(|s| s.std),
            neg_inf_count: a.neg_inf_count,
            total_spikes_mean: a.total_spikes.mean,
            total_spikes_std: a.total_spikes.std,
            spikes_per_sample_mean: a.spikes_per_sample.mean,
            spikes_per_sample_std: a.spikes_per_sample.std,
            c_scale: a.key.c_scale,
            l_scale: a.key.l_scale,
        }
    }
}

impl From<AggregateRow> for AggregateResult {
    fn from(r: AggregateRow) -> Self {
        let s = |mean, std| Stat { mean, std };
        Self {
            key: CellKey {
                pool_size: r.pool_size,
                energy_cost: r.energy_cost,
                c_scale: r.c_scale,
                l_scale: r.l_scale,
            },
            n_runs: r.n_runs,
            train_accuracy: s(r.train_acc_mean, r.train_acc_std),
            test_accuracy: s(r.test_acc_mean, r.test_acc_std),
            separation: s(r.separation_mean, r.separation_std),
            sep_d: s(r.sep_d_mean, r.sep_d_std),
            sep_v: s(r.sep_v_mean, r.sep_v_std),
            lyapunov: r.lyapunov_mean.map(|m| s(m, r.lyapunov_std.unwrap_or(0.0))),
            neg_inf_count: r.neg_inf_count,
            total_spikes: s(r.total_spikes_mean, r.total_spikes_std),
            spikes_per_sample: s(r.spikes_per_sample_mean, r.spikes_per_sample_std),
        }
    }
}

pub fn write_aggregates_csv<W: Write>(aggregates: &[AggregateResult], out: W) -> Result<()> {
    if aggregates.is_empty() {
        return Err(Error::EmptyInput("aggregates"));
    }
    let mut w = csv::Writer::from_writer(out);
    for a in aggregates {
        w.serialize(AggregateRow::from(a))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_aggregates_csv<R: Read>(input: R) -> Result<Vec<AggregateResult>> {
    csv::Reader::from_reader(input)
        .deserialize::<AggregateRow>()
        .map(|r| r.map(AggregateResult::from).map_err(Error::from))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn emit_results(aggregates: &[AggregateResult], path: &Path, format: OutputFormat) -> Result<()> {
    if aggregates.is_empty() {
        return Err(Error::EmptyInput("aggregates"));
    }
    let mut out = create(path)?;
    match format {
        OutputFormat::Csv => write_aggregates_csv(aggregates, &mut out)?,
        OutputFormat::Json => serde_json::to_writer_pretty(&mut out, aggregates)?,
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Per-run records as CSV, one row per run.
pub fn write_runs_csv<W: Write>(runs: &[RunResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "pool_size",
        "energy_cost",
        "c_scale",
        "l_scale",
        "seed_index",
        "seed",
        "train_accuracy",
        "test_accuracy",
        "separation",
        "sep_d",
        "sep_v",
        "lyapunov",
        "total_reservoir_spikes",
        "mean_spikes_per_sample",
    ])?;
    for r in runs {
        w.write_record([
            r.pool_size.map(|k| k.to_string()).unwrap_or_default(),
            r.energy_cost.to_string(),
            r.c_scale.to_string(),
            r.l_scale.to_string(),
            r.seed_index.to_string(),
            r.seed.to_string(),
            r.train_accuracy.to_string(),
            r.test_accuracy.to_string(),
            r.separation.to_string(),
            r.sep_d.to_string(),
            r.sep_v.to_string(),
            r.lyapunov.finite().map(|v| v.to_string()).unwrap_or_default(),
            r.total_reservoir_spikes.to_string(),
            r.mean_spikes_per_sample.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}
