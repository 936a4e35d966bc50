//! Per-seed run artifacts: `accuracy.csv`, `summary.json`, `energy.json`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use memcl_core::benchmark::{metrics, AccuracyMatrix};
use memcl_core::{EnergyReport, ExperimentConfig, RunResult};
use serde::{Deserialize, Serialize};

pub const ACCURACY: &str = "accuracy.csv";
pub const SUMMARY: &str = "summary.json";
pub const ENERGY: &str = "energy.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub dataset: String,
    pub mode: String,
    pub n_mem: usize,
    pub train_fraction: f64,
    pub train_samples: u64,
    pub mean_accuracy: f64,
    pub final_per_task: Vec<f64>,
    pub forgetting: Vec<f64>,
    pub accuracy_matrix: Vec<Vec<f64>>,
    pub memory_overhead_bytes: usize,
    pub config: ExperimentConfig,
}

impl RunSummary {
    pub fn new(cfg: &ExperimentConfig, r: &RunResult) -> Self {
        let s = metrics(&r.matrix);
        Self {
            seed: r.seed,
            dataset: cfg.data.dataset.clone(),
            mode: cfg.plasticity.mode.name().to_string(),
            n_mem: cfg.network.n_mem,
            train_fraction: cfg.run.train_fraction,
            train_samples: r.train_samples,
            mean_accuracy: s.mean_final,
            final_per_task: s.final_per_task,
            forgetting: s.forgetting,
            accuracy_matrix: r.matrix.dense(),
            memory_overhead_bytes: r.memory_overhead_bytes,
            config: cfg.clone(),
        }
    }
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

/// Writes via a temporary sibling and a rename so readers never observe a
/// partial file.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))
}

pub fn write_run(dir: &Path, matrix: &AccuracyMatrix, summary: &RunSummary, energy: &EnergyReport) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_atomic(&dir.join(ACCURACY), matrix.to_csv_string().as_bytes())?;
    write_atomic(&dir.join(SUMMARY), &serde_json::to_vec_pretty(summary)?)?;
    write_atomic(&dir.join(ENERGY), &serde_json::to_vec_pretty(energy)?)?;
    Ok(())
}

pub struct LoadedRun {
    pub summary: RunSummary,
    pub energy: EnergyReport,
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let p = dir.join(name);
    if !p.exists() {
        anyhow::bail!("missing artifact {}", p.display());
    }
    fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    read(dir, ACCURACY)?;
    let summary = serde_json::from_str(&read(dir, SUMMARY)?).with_context(|| format!("parsing {}/{SUMMARY}", dir.display()))?;
    let energy = serde_json::from_str(&read(dir, ENERGY)?).with_context(|| format!("parsing {}/{ENERGY}", dir.display()))?;
    Ok(LoadedRun { summary, energy })
}

/// Seed directories below `dir` (or `dir` itself if it holds a run),
/// sorted by path.
pub fn find_runs(dir: &Path) -> Result<Vec<LoadedRun>> {
    if !dir.is_dir() {
        anyhow::bail!("run directory not found: {}", dir.display());
    }
    if dir.join(SUMMARY).exists() {
        return Ok(vec![load_run(dir)?]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("seed-")))
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        anyhow::bail!("no seed-* run directories in {} (missing artifact {SUMMARY})", dir.display());
    }
    dirs.iter().map(|d| load_run(d)).collect()
}

/// "314.4 kB" / "404 B" style size (decimal units).
pub fn human_bytes(b: usize) -> String {
    if b < 1000 {
        format!("{b} B")
    } else if b < 1_000_000 {
        format!("{:.1} kB", b as f64 / 1e3)
    } else {
        format!("{:.1} MB", b as f64 / 1e6)
    }
}
