//! Experiment configuration: a TOML file with one table per subsystem.
//! Every key is optional and falls back to the documented default; unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::device::{DeviceLevelTable, WeightMapping};
use crate::error::{Error, Result};
use crate::plasticity::PlasticityConfig;
use crate::snn::{NetworkSettings, NetworkShape, NeuronParams};

/// Environment variable consulted when `data.dir` is unset; the dataset
/// name is appended to it.
pub const DATA_DIR_ENV: &str = "MEMCL_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Dataset name, used for `$MEMCL_DATA_DIR/<dataset>` lookup and reports.
    pub dataset: String,
    /// Directory holding the four standard IDX files.
    pub dir: Option<PathBuf>,
    /// Ordered class pairs; the first class of each pair maps to output 0.
    pub tasks: Vec<[u8; 2]>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { dataset: "mnist".into(), dir: None, tasks: vec![[0, 1], [2, 3], [4, 5], [6, 7], [8, 9]] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub hidden: usize,
    pub outputs: usize,
    /// Memristors in parallel per weight.
    pub n_mem: usize,
    /// Spike rate of a white pixel, Hz.
    pub input_rate_hz: f32,
    /// Spike rate of the label neuron's target train, Hz.
    pub target_rate_hz: f32,
    pub hidden_gain: f32,
    pub output_gain: f32,
    /// Activity trace time constant, ms.
    pub tau_trace: f32,
    /// Feedback weights are uniform in `[-a, a]`.
    pub feedback_amplitude: f32,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            hidden: 200,
            outputs: 2,
            n_mem: 7,
            input_rate_hz: 1000.0,
            target_rate_hz: 150.0,
            hidden_gain: 8.0,
            output_gain: 1.0,
            tau_trace: 20.0,
            feedback_amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceConfig {
    /// CSV level table; the built-in 10-level table when unset.
    pub table: Option<PathBuf>,
    /// Programming noise of the built-in table as a fraction of each mean.
    pub rel_std: f64,
    /// Nominal signed weight range is `[-weight_half_range, +weight_half_range]`.
    pub weight_half_range: f64,
    /// Std of additive weight read noise (weight units); 0 disables it.
    pub read_noise: f32,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        Self { table: None, rel_std: crate::device::DEFAULT_REL_STD, weight_half_range: 0.5, read_noise: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Consecutive seeds starting at `seed`.
    pub seeds: usize,
    /// Fraction of each task's training samples presented.
    pub train_fraction: f64,
    /// Timesteps per training sample.
    pub t_train: usize,
    /// Timesteps per evaluation sample.
    pub t_eval: usize,
    /// Cap on test samples per task; all of them when unset.
    pub eval_limit: Option<usize>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            seeds: 1,
            train_fraction: 1.0,
            t_train: 100,
            t_eval: 100,
            eval_limit: None,
            out: PathBuf::from("runs/default"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub network: NetworkConfig,
    pub device: DeviceConfig,
    pub neuron: NeuronParams,
    pub plasticity: PlasticityConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound { kind: "config", path: path.to_path_buf() },
            _ => Error::io(format!("reading {}", path.display()), e),
        })?;
        Self::from_toml_str(&s).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        let n = &self.network;
        if n.hidden == 0 {
            return err("network.hidden must be >= 1".into());
        }
        if n.outputs != 2 {
            return err(format!("network.outputs must be 2 (shared two-way head), got {}", n.outputs));
        }
        if n.n_mem == 0 {
            return err("network.n_mem must be >= 1".into());
        }
        for (k, v) in [
            ("input_rate_hz", n.input_rate_hz),
            ("target_rate_hz", n.target_rate_hz),
            ("tau_trace", n.tau_trace),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return err(format!("network.{k} must be >= 0, got {v}"));
            }
        }
        if !(n.tau_trace > 0.0) {
            return err("network.tau_trace must be > 0".into());
        }
        self.neuron.validate()?;
        self.plasticity.validate()?;
        if !(self.device.rel_std >= 0.0) {
            return err("device.rel_std must be >= 0".into());
        }
        if !(self.device.weight_half_range > 0.0) {
            return err("device.weight_half_range must be > 0".into());
        }
        if !(self.device.read_noise >= 0.0) {
            return err("device.read_noise must be >= 0".into());
        }
        let r = &self.run;
        if !(r.train_fraction > 0.0 && r.train_fraction <= 1.0) {
            return err(format!("run.train_fraction must be in (0, 1], got {}", r.train_fraction));
        }
        if r.t_train == 0 || r.t_eval == 0 {
            return err("run.t_train and run.t_eval must be >= 1".into());
        }
        if r.seeds == 0 {
            return err("run.seeds must be >= 1".into());
        }
        for (t, pair) in self.data.tasks.iter().enumerate() {
            if pair.iter().any(|&c| c > 9) || pair[0] == pair[1] {
                return err(format!("data.tasks[{t}] = {pair:?} must be two distinct classes in 0..=9"));
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> NetworkShape {
        NetworkShape { inputs: 784, hidden: self.network.hidden, outputs: self.network.outputs }
    }

    pub fn device_table(&self) -> Result<DeviceLevelTable> {
        match &self.device.table {
            Some(p) => DeviceLevelTable::from_csv_path(p),
            None => DeviceLevelTable::equispaced(
                crate::device::DEFAULT_LEVELS,
                crate::device::DEFAULT_MIN_US,
                crate::device::DEFAULT_SPACING_US,
                self.device.rel_std,
            ),
        }
    }

    pub fn mapping(&self, table: &DeviceLevelTable) -> WeightMapping {
        WeightMapping::symmetric(table, self.network.n_mem, self.device.weight_half_range)
    }

    pub fn network_settings(&self) -> NetworkSettings {
        let dt_s = self.neuron.dt / 1000.0;
        NetworkSettings {
            params: self.neuron,
            tau_trace: self.network.tau_trace,
            input_max_prob: self.network.input_rate_hz * dt_s,
            target_rate: self.network.target_rate_hz * dt_s,
            hidden_gain: self.network.hidden_gain,
            output_gain: self.network.output_gain,
            read_noise: self.device.read_noise,
            feedback_amplitude: self.network.feedback_amplitude,
        }
    }

    /// Dataset directory: `data.dir`, else `$MEMCL_DATA_DIR/<dataset>`.
    pub fn data_dir(&self) -> Result<PathBuf> {
        if let Some(d) = &self.data.dir {
            return Ok(d.clone());
        }
        match std::env::var_os(DATA_DIR_ENV) {
            Some(root) => Ok(PathBuf::from(root).join(&self.data.dataset)),
            None => Err(Error::Config(format!("data.dir unset and {DATA_DIR_ENV} not set"))),
        }
    }

    /// Copy with the numeric key `section.name` set to `value`.
    pub fn with_override(&self, key: &str, value: f64) -> Result<Self> {
        let (section, name) = key
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override key `{key}` must look like `section.name`")))?;
        let mut root = toml::Table::try_from(self).map_err(|e| Error::Serde(e.to_string()))?;
        let table = root
            .get_mut(section)
            .and_then(|v| v.as_table_mut())
            .ok_or_else(|| Error::Config(format!("unknown config key `{key}`")))?;
        let new = match table.get(name) {
            Some(toml::Value::Integer(_)) => {
                if value.fract() != 0.0 {
                    return Err(Error::Config(format!("`{key}` is an integer key, got {value}")));
                }
                toml::Value::Integer(value as i64)
            }
            Some(toml::Value::Float(_)) => toml::Value::Float(value),
            // Unset optional key: integral values stay integers so they can
            // fill either integer or float fields.
            None if value.fract() == 0.0 => toml::Value::Integer(value as i64),
            None => toml::Value::Float(value),
            Some(_) => return Err(Error::Config(format!("`{key}` is not a numeric key"))),
        };
        table.insert(name.to_string(), new);
        let cfg: Self = root.try_into().map_err(|e: toml::de::Error| {
            Error::Config(format!("cannot set `{key}`: {}", e.message()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}
