use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use memcl_core::benchmark::{mean_std, IdxPaths};
use memcl_core::device::{DeviceLevelTable, DEFAULT_LEVELS, DEFAULT_MIN_US, DEFAULT_REL_STD, DEFAULT_SPACING_US};
use memcl_core::energy::{report, EnergyCostTable};
use memcl_core::{run_continual, ExperimentConfig, IdxDataset, TaskSequence};
use rayon::prelude::*;

use crate::artifacts::{self, human_bytes, RunSummary};

#[derive(Debug, Parser)]
#[command(name = "memcl", version, about = "Continual learning on simulated memristor spiking networks")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train on the task sequence and write per-seed artifacts.
    Train(TrainArgs),
    /// Repeat training for each value of one numeric config key.
    Sweep(SweepArgs),
    /// Summarize the artifacts of a train or sweep output directory.
    Report(ReportArgs),
    /// Write a device level table CSV.
    GenDeviceTable(GenTableArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// First seed (overrides run.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds (overrides run.seeds).
    #[arg(long)]
    seeds: Option<usize>,
    /// Fraction of each task's training split to present.
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Output directory (overrides run.out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra numeric override, `section.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Energy cost table CSV (`op_kind,pJ`).
    #[arg(long)]
    costs: Option<PathBuf>,
    /// Suppress per-task progress on stderr.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Numeric config key, e.g. `plasticity.post_threshold`.
    #[arg(long)]
    key: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    values: Vec<f64>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Output directory of `train` or `sweep`.
    dir: PathBuf,
}

#[derive(Debug, Args)]
struct GenTableArgs {
    #[arg(long, default_value_t = DEFAULT_LEVELS)]
    levels: usize,
    /// Lowest level mean, µS.
    #[arg(long, default_value_t = DEFAULT_MIN_US)]
    min_us: f64,
    /// Spacing between level means, µS.
    #[arg(long, default_value_t = DEFAULT_SPACING_US)]
    spacing_us: f64,
    /// Std as a fraction of each level mean.
    #[arg(long, default_value_t = DEFAULT_REL_STD)]
    rel_std: f64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report_cmd(a),
        Command::GenDeviceTable(a) => gen_table(a),
    }
}

fn resolve(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::default(),
    };
    for kv in &a.set {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set `{kv}` must be KEY=VALUE"))?;
        let v: f64 = v.trim().parse().with_context(|| format!("--set `{kv}`: value is not a number"))?;
        cfg = cfg.with_override(k.trim(), v)?;
    }
    if let Some(s) = a.seed {
        cfg.run.seed = s;
    }
    if let Some(n) = a.seeds {
        cfg.run.seeds = n;
    }
    if let Some(f) = a.train_fraction {
        cfg.run.train_fraction = f;
    }
    if let Some(o) = &a.out {
        cfg.run.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn costs(a: &RunArgs) -> Result<EnergyCostTable> {
    Ok(match &a.costs {
        Some(p) => EnergyCostTable::from_csv_path(p)?,
        None => EnergyCostTable::default(),
    })
}

fn load_data(cfg: &ExperimentConfig) -> Result<(IdxDataset, IdxDataset)> {
    let dir = cfg.data_dir()?;
    Ok(IdxPaths::in_dir(&dir).load()?)
}

/// Runs every seed of `cfg` (in parallel) and writes artifacts under
/// `out/seed-<n>`. Returns the summaries in seed order.
fn train_seeds(
    cfg: &ExperimentConfig,
    data: &(IdxDataset, IdxDataset),
    costs: &EnergyCostTable,
    out: &Path,
    quiet: bool,
) -> Result<Vec<RunSummary>> {
    let tasks = TaskSequence::new(cfg.data.tasks.clone())?;
    let seeds: Vec<u64> = (0..cfg.run.seeds as u64).map(|k| cfg.run.seed + k).collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let mut run_cfg = cfg.clone();
            run_cfg.run.seed = seed;
            run_cfg.run.seeds = 1;
            let r = run_continual(&data.0, &data.1, &tasks, &run_cfg, seed, |t, row| {
                if !quiet {
                    let cells: Vec<String> = row.iter().map(|a| format!("{a:.2}")).collect();
                    eprintln!("[seed {seed}] after task {}: {}", t + 1, cells.join(" "));
                }
            })?;
            let summary = RunSummary::new(&run_cfg, &r);
            let energy = report(&r.counters, costs, r.train_samples)?;
            artifacts::write_run(&artifacts::seed_dir(out, seed), &r.matrix, &summary, &energy)?;
            Ok(summary)
        })
        .collect()
}

fn print_means(label: &str, runs: &[RunSummary]) {
    let means: Vec<f64> = runs.iter().map(|r| r.mean_accuracy).collect();
    let (m, s) = mean_std(&means);
    let n_tasks = runs.first().map_or(0, |r| r.final_per_task.len());
    let per_task: Vec<String> = (0..n_tasks)
        .map(|t| {
            let xs: Vec<f64> = runs.iter().map(|r| r.final_per_task[t]).collect();
            format!("{:.2}", mean_std(&xs).0)
        })
        .collect();
    println!("{label}mean {m:.2} ± {s:.2} over {} seed(s); final per task: {}", runs.len(), per_task.join(" "));
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = resolve(&a.run)?;
    let costs = costs(&a.run)?;
    let data = load_data(&cfg)?;
    let runs = train_seeds(&cfg, &data, &costs, &cfg.run.out, a.run.quiet)?;
    print_means("", &runs);
    println!("artifacts in {}", cfg.run.out.display());
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    if a.values.is_empty() {
        bail!("--values must list at least one value");
    }
    let base = resolve(&a.run)?;
    // Reject unknown keys before loading any data.
    let configs: Vec<(f64, ExperimentConfig)> =
        a.values.iter().map(|&v| Ok((v, base.with_override(&a.key, v)?))).collect::<Result<_>>()?;
    let costs = costs(&a.run)?;
    let data = load_data(&base)?;
    let out = base.run.out.clone();
    let mut table = String::from("key,value,seeds,mean,std");
    let n_tasks = base.data.tasks.len();
    for t in 1..=n_tasks {
        table.push_str(&format!(",task{t}"));
    }
    table.push('\n');
    for (v, cfg) in &configs {
        let dir = out.join(format!("{}={v}", a.key));
        let runs = train_seeds(cfg, &data, &costs, &dir, a.run.quiet)?;
        print_means(&format!("{}={v}: ", a.key), &runs);
        let (m, s) = mean_std(&runs.iter().map(|r| r.mean_accuracy).collect::<Vec<_>>());
        table.push_str(&format!("{},{v},{},{m:.4},{s:.4}", a.key, runs.len()));
        for t in 0..n_tasks {
            let xs: Vec<f64> = runs.iter().map(|r| r.final_per_task[t]).collect();
            table.push_str(&format!(",{:.4}", mean_std(&xs).0));
        }
        table.push('\n');
    }
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("sweep.csv"), &table).context("writing sweep.csv")?;
    print!("{table}");
    Ok(())
}

fn report_group(label: &str, runs: &[artifacts::LoadedRun]) {
    let summaries: Vec<RunSummary> = runs.iter().map(|r| r.summary.clone()).collect();
    let first = &summaries[0];
    println!("{label}{} / {} / n_mem={} / train_fraction={}", first.dataset, first.mode, first.n_mem, first.train_fraction);
    print_means("  accuracy: ", &summaries);
    println!("  memory overhead: {}", human_bytes(first.memory_overhead_bytes));
    let n = runs.len() as f64;
    let avg = |f: &dyn Fn(&memcl_core::EnergyReport) -> f64| runs.iter().map(|r| f(&r.energy)).sum::<f64>() / n;
    let total = avg(&|e| e.per_sample_pj);
    let per = |x: f64| if total > 0.0 { 100.0 * x / total } else { 0.0 };
    let samples = avg(&|e| e.n_samples as f64);
    let comp = avg(&|e| e.breakdown.computation_pj) / samples;
    let sram = avg(&|e| e.breakdown.sram_pj) / samples;
    let mem = avg(&|e| e.breakdown.memristor_pj) / samples;
    println!(
        "  update energy per sample: {total:.1} pJ (computation {comp:.1} pJ {:.1}%, SRAM {sram:.1} pJ {:.1}%, memristor {mem:.1} pJ {:.1}%)",
        per(comp),
        per(sram),
        per(mem)
    );
    println!(
        "  events per sample: eligible {:.1}, programmed {:.1}",
        avg(&|e| e.eligibility_events as f64) / samples,
        avg(&|e| e.program_events as f64) / samples
    );
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    let dir = &a.dir;
    if !dir.is_dir() {
        bail!("run directory not found: {}", dir.display());
    }
    let has_seeds = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .any(|e| e.file_name().to_string_lossy().starts_with("seed-"));
    if has_seeds || dir.join(artifacts::SUMMARY).exists() {
        report_group("", &artifacts::find_runs(dir)?);
        return Ok(());
    }
    // Sweep layout: one subdirectory per value.
    let mut subs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subs.sort();
    if subs.is_empty() {
        bail!("missing artifact {} (no seed-* directories in {})", artifacts::SUMMARY, dir.display());
    }
    for s in subs {
        let name = s.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        report_group(&format!("[{name}] "), &artifacts::find_runs(&s)?);
    }
    Ok(())
}

fn gen_table(a: GenTableArgs) -> Result<()> {
    let table = DeviceLevelTable::equispaced(a.levels, a.min_us, a.spacing_us, a.rel_std)?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    match &a.out {
        Some(p) => fs::write(p, &buf).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}
