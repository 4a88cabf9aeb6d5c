//! `lsm`: generate reservoirs, run single experiments and sweeps, compute
//! metrics on stored states.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use lsm_core::data::{load_dataset, synth_dataset, Dataset, PreprocessMode};
use lsm_core::dynamics::{recurrent_current_magnitude, Reservoir, RunOptions};
use lsm_core::harness::{
    build_graph, build_pools, emit_results, prepare_inputs, read_json, run_prepared_full, run_seed, sweep,
    write_json, write_runs_csv, ConfigOverrides, OutputFormat, SweepConfig,
};
use lsm_core::metrics::{l2_distance, lyapunov_from_distances, separation};
use lsm_core::readout::LabeledStates;

const DEFAULT_SYNTHETIC_PER_CLASS: usize = 50;
const DEFAULT_DATA_SEED: u64 = 0;

#[derive(Parser)]
#[command(name = "lsm", version, about = "Liquid state machine with shared energy pools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a reservoir graph and write it as JSON.
    Generate(GenerateArgs),
    /// Run one experiment and print its result as JSON.
    Run(RunArgs),
    /// Sweep pool sizes × energy costs × seeds and write the aggregate CSV.
    Sweep(SweepArgs),
    /// Separation (and optionally a Lyapunov estimate) from stored states.
    Metrics(MetricsArgs),
}

#[derive(Args, Clone, Default)]
struct ModelArgs {
    /// Flat TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the reduced-precision reservoir.
    #[arg(long)]
    digital: bool,
    #[arg(long)]
    c_scale: Option<f64>,
    #[arg(long)]
    l_scale: Option<f64>,
    #[arg(long)]
    master_seed: Option<u64>,
}

#[derive(Args, Clone, Default)]
struct DataArgs {
    /// Directory holding the `Z/` and `S/` class folders.
    #[arg(long, conflicts_with = "synthetic")]
    dataset: Option<PathBuf>,
    /// Use the synthetic surrogate (the default without --dataset).
    #[arg(long)]
    synthetic: bool,
    /// Recordings per class for the synthetic surrogate.
    #[arg(long)]
    synthetic_per_class: Option<usize>,
    /// `single` or `four`.
    #[arg(long)]
    mode: Option<PreprocessMode>,
    /// Seed of the dataset split (and of the synthetic recordings).
    #[arg(long)]
    data_seed: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    seed_index: usize,
    /// Also assign energy pools of this size and record them.
    #[arg(long)]
    pool_size: Option<usize>,
    #[arg(long)]
    mode: Option<PreprocessMode>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    pool_size: Option<usize>,
    #[arg(long)]
    cost: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed_index: usize,
    /// Result JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Spike raster CSV of the first test sample.
    #[arg(long)]
    raster: Option<PathBuf>,
    /// Trained readout as JSON.
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Final test-set traces with labels as JSON (input for `metrics`).
    #[arg(long)]
    states_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated, e.g. `1,4,10,50,100`.
    #[arg(long, value_delimiter = ',')]
    pool_sizes: Option<Vec<usize>>,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long)]
    costs: Option<String>,
    #[arg(long)]
    seeds: Option<usize>,
    /// Comma-separated connectivity scale grid.
    #[arg(long, value_delimiter = ',')]
    c_scales: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    l_scales: Option<Vec<f64>>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Aggregate CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Per-run CSV path.
    #[arg(long)]
    runs_out: Option<PathBuf>,
    /// Also write the aggregates as JSON.
    #[arg(long)]
    json_out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// JSON `{ "states": [[...]], "labels": [...] }`.
    #[arg(long)]
    states: PathBuf,
    /// JSON `{ "initial": [a, b], "final": [a, b], "horizon": seconds }`.
    #[arg(long)]
    lyapunov: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct StatesFile {
    states: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

#[derive(Deserialize)]
struct TrajectoryPair {
    initial: [Vec<f64>; 2],
    #[serde(rename = "final")]
    final_: [Vec<f64>; 2],
    horizon: f64,
}

fn parse_costs(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let [start, stop, step] = [parts[0], parts[1], parts[2]].map(|p| p.trim().parse::<f64>());
        let (start, stop, step) = (start?, stop?, step?);
        if step.is_nan() || step <= 0.0 || stop < start {
            bail!("cost range {text:?} needs step > 0 and stop >= start");
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // snap to 12 decimals so 3 × 0.05 prints as 0.15
        return Ok((0..=n)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect());
    }
    text.split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad cost {p:?}")))
        .collect()
}

fn overrides(model: &ModelArgs, mode: Option<PreprocessMode>) -> Result<ConfigOverrides> {
    let file = match &model.config {
        Some(p) => ConfigOverrides::from_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => ConfigOverrides::default(),
    };
    let flags = ConfigOverrides {
        digital: model.digital.then_some(true),
        c_scale: model.c_scale,
        l_scale: model.l_scale,
        master_seed: model.master_seed,
        mode,
        ..Default::default()
    };
    Ok(file.merge(flags))
}

fn with_data(o: ConfigOverrides, data: &DataArgs) -> ConfigOverrides {
    o.merge(ConfigOverrides {
        dataset: data.dataset.clone(),
        synthetic: data.synthetic.then_some(true),
        synthetic_per_class: data.synthetic_per_class,
        data_seed: data.data_seed,
        ..Default::default()
    })
}

fn load_data(o: &ConfigOverrides) -> Result<Dataset> {
    let seed = o.data_seed.unwrap_or(DEFAULT_DATA_SEED);
    let mode = o.mode();
    match (&o.dataset, o.synthetic.unwrap_or(false)) {
        (Some(root), false) => load_dataset(root, mode, seed).with_context(|| format!("loading {}", root.display())),
        _ => Ok(synth_dataset(
            o.synthetic_per_class.unwrap_or(DEFAULT_SYNTHETIC_PER_CLASS),
            mode,
            seed,
        )?),
    }
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Pretty JSON to stdout; a closed pipe (e.g. `| head`) is not an error.
fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut o = overrides(&args.model, args.mode)?;
    if let Some(k) = args.pool_size {
        o.neurons_per_pool = Some(k);
    }
    let cfg = o.resolve()?;
    let seed = run_seed(o.master_seed.unwrap_or(0), args.seed_index);
    let graph = build_graph(&cfg, seed)?;
    let pools = build_pools(&cfg, &graph, seed)?;
    let doc = graph.to_document(pools.as_ref().map(|p| p.assignment()));
    write_json(&doc, &args.out)?;
    eprintln!(
        "wrote {} neurons, {} recurrent and {} input synapses to {}",
        graph.n_neurons(),
        graph.recurrent.nnz(),
        graph.input.nnz(),
        args.out.display()
    );
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut o = with_data(overrides(&args.model, args.data.mode)?, &args.data);
    if args.pool_size.is_some() {
        o.neurons_per_pool = args.pool_size;
    }
    if args.cost.is_some() {
        o.cost_per_spike = args.cost;
    }
    let cfg = o.resolve()?;
    let data = load_data(&o)?;
    let inputs = prepare_inputs(&data, &cfg)?;
    let seed = run_seed(o.master_seed.unwrap_or(0), args.seed_index);
    let artifacts = run_prepared_full(&cfg, &inputs, args.seed_index, seed)?;

    match &args.out {
        Some(p) => write_json(&artifacts.result, p)?,
        None => print_json(&artifacts.result)?,
    }
    if let Some(p) = &args.model_out {
        write_json(&artifacts.model, p)?;
    }
    if let Some(p) = &args.states_out {
        write_json(
            &StatesFile {
                states: artifacts.test_states.clone(),
                labels: inputs.test_labels.clone(),
            },
            p,
        )?;
    }
    if let Some(p) = &args.raster {
        let i_rec = recurrent_current_magnitude(inputs.train.iter().map(Vec::as_slice), cfg.dynamics.alpha_recurrent)?;
        let pools = build_pools(&cfg, &artifacts.graph, seed)?;
        let reservoir = Reservoir::new(&artifacts.graph, cfg.dynamics.clone(), i_rec)?.with_pools(pools)?;
        let sample = reservoir.run(
            &inputs.test[0],
            RunOptions {
                record_raster: true,
                perturb: None,
            },
        )?;
        let mut w = writer(p)?;
        sample.raster.expect("raster requested").write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let mut o = with_data(overrides(&args.model, args.data.mode)?, &args.data);
    let flags = ConfigOverrides {
        pool_sizes: args.pool_sizes.clone(),
        energy_costs: args.costs.as_deref().map(parse_costs).transpose()?,
        n_seeds: args.seeds,
        c_scales: args.c_scales.clone(),
        l_scales: args.l_scales.clone(),
        ..Default::default()
    };
    o = o.merge(flags);
    let base = o.resolve()?;
    let data = load_data(&o)?;
    let defaults = SweepConfig::new(base.clone());
    let cfg = SweepConfig {
        pool_sizes: o.pool_sizes.clone().unwrap_or(defaults.pool_sizes),
        energy_costs: o.energy_costs.clone().unwrap_or(defaults.energy_costs),
        n_seeds: o.n_seeds.unwrap_or(defaults.n_seeds),
        master_seed: o.master_seed.unwrap_or(0),
        c_scales: o.c_scales.clone().unwrap_or_default(),
        l_scales: o.l_scales.clone().unwrap_or_default(),
        jobs: args.jobs,
        base,
    };
    let out = sweep(&cfg, &data)?;
    for f in &out.failures {
        eprintln!(
            "failed: k={} cost={} seed_index={}: {}",
            f.key.pool_size, f.key.energy_cost, f.seed_index, f.message
        );
    }
    if out.aggregates.is_empty() {
        bail!("every run failed");
    }
    emit_results(&out.aggregates, &args.out, OutputFormat::Csv)?;
    if let Some(p) = &args.json_out {
        emit_results(&out.aggregates, p, OutputFormat::Json)?;
    }
    if let Some(p) = &args.runs_out {
        let mut w = writer(p)?;
        write_runs_csv(&out.runs, &mut w)?;
        w.flush()?;
    }
    eprintln!(
        "{} cells, {} runs, {} failures -> {}",
        out.aggregates.len(),
        out.runs.len(),
        out.failures.len(),
        args.out.display()
    );
    Ok(())
}

fn metrics(args: MetricsArgs) -> Result<()> {
    let file: StatesFile = read_json(&args.states)?;
    let labeled = LabeledStates {
        states: file.states,
        labels: file.labels,
    };
    labeled.validate()?;
    let by_class: Vec<Vec<Vec<f64>>> = [0u8, 1]
        .iter()
        .map(|&c| {
            labeled
                .states
                .iter()
                .zip(&labeled.labels)
                .filter(|(_, &l)| l == c)
                .map(|(s, _)| s.clone())
                .collect::<Vec<_>>()
        })
        .filter(|v| !v.is_empty())
        .collect();
    let sep = separation(&by_class)?;
    let mut report = serde_json::json!({ "separation": sep });
    if let Some(p) = &args.lyapunov {
        let pair: TrajectoryPair = read_json(p)?;
        let est = lyapunov_from_distances(
            l2_distance(&pair.initial[0], &pair.initial[1]),
            l2_distance(&pair.final_[0], &pair.final_[1]),
            pair.horizon,
        )?;
        report["lyapunov"] = serde_json::to_value(est)?;
    }
    match &args.out {
        Some(p) => write_json(&report, p)?,
        None => print_json(&report)?,
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Metrics(a) => metrics(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_ranges() {
        assert_eq!(
            parse_costs("0:0.25:0.05").unwrap(),
            vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25]
        );
        assert_eq!(parse_costs("0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        assert!(parse_costs("0:1:0").is_err());
        assert!(parse_costs("x").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
