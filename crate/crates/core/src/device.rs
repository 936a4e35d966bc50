//! 1T1R memristor model: quantized, noisy conductance levels, multi-device
//! weights with round-robin programming, and the bias-column mapping from
//! conductance to signed weight.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound of the default high-conductance range, µS.
pub const DEFAULT_MIN_US: f64 = 40.0;
/// Mean spacing between adjacent default levels, µS.
pub const DEFAULT_SPACING_US: f64 = 27.0;
/// Number of low-resistance levels used for weights.
pub const DEFAULT_LEVELS: usize = 10;
/// Default programming noise as a fraction of each level mean.
pub const DEFAULT_REL_STD: f64 = 0.05;

const MIN_LEVELS: usize = 2;
const MAX_LEVELS: usize = 64;
/// Floor applied to drawn conductances so a device never reads as open or negative.
const MIN_CONDUCTANCE_US: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub mean_us: f64,
    pub std_us: f64,
}

/// Ordered set of programmable conductance levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceLevelTable {
    levels: Vec<Level>,
}

impl Default for DeviceLevelTable {
    fn default() -> Self {
        Self::equispaced(DEFAULT_LEVELS, DEFAULT_MIN_US, DEFAULT_SPACING_US, DEFAULT_REL_STD)
            .expect("default table is valid")
    }
}

impl DeviceLevelTable {
    pub fn new(levels: Vec<Level>) -> Result<Self> {
        if !(MIN_LEVELS..=MAX_LEVELS).contains(&levels.len()) {
            return Err(Error::DeviceTable(format!(
                "level count {} outside [{MIN_LEVELS}, {MAX_LEVELS}]",
                levels.len()
            )));
        }
        for (k, l) in levels.iter().enumerate() {
            if !(l.mean_us.is_finite() && l.mean_us > 0.0) {
                return Err(Error::DeviceTable(format!("level {k}: mean must be > 0")));
            }
            if !(l.std_us.is_finite() && l.std_us >= 0.0) {
                return Err(Error::DeviceTable(format!("level {k}: std must be >= 0")));
            }
        }
        if let Some(k) = levels.windows(2).position(|w| w[1].mean_us <= w[0].mean_us) {
            return Err(Error::DeviceTable(format!(
                "level means must be strictly increasing (level {} <= level {k})",
                k + 1
            )));
        }
        Ok(Self { levels })
    }

    /// `count` levels at `min + k * spacing`, each with std `rel_std * mean`.
    pub fn equispaced(count: usize, min_us: f64, spacing_us: f64, rel_std: f64) -> Result<Self> {
        Self::new(
            (0..count)
                .map(|k| {
                    let mean_us = min_us + spacing_us * k as f64;
                    Level { mean_us, std_us: rel_std * mean_us }
                })
                .collect(),
        )
    }

    /// Same means, all standard deviations set to zero.
    pub fn noiseless(&self) -> Self {
        Self {
            levels: self.levels.iter().map(|l| Level { std_us: 0.0, ..*l }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> Level {
        self.levels[k]
    }

    pub fn min_mean(&self) -> f64 {
        self.levels[0].mean_us
    }

    pub fn max_mean(&self) -> f64 {
        self.levels[self.levels.len() - 1].mean_us
    }

    pub fn range(&self) -> f64 {
        self.max_mean() - self.min_mean()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min_mean() + self.max_mean())
    }

    /// Average spacing between adjacent level means.
    pub fn resolution(&self) -> f64 {
        self.range() / (self.len() - 1) as f64
    }

    pub fn mean_of_means(&self) -> f64 {
        self.levels.iter().map(|l| l.mean_us).sum::<f64>() / self.len() as f64
    }

    /// Parses the `level,mean_uS,std_uS` CSV format. Levels must be listed as
    /// 0, 1, 2, ... with no gaps or duplicates.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::DeviceTable(e.to_string()))?.clone();
        let expected = ["level", "mean_uS", "std_uS"];
        if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
            return Err(Error::DeviceTable(format!(
                "expected header `level,mean_uS,std_uS`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut levels = Vec::new();
        for (row, record) in rdr.deserialize::<(usize, f64, f64)>().enumerate() {
            let (level, mean_us, std_us) =
                record.map_err(|e| Error::DeviceTable(format!("row {}: {e}", row + 1)))?;
            if level != levels.len() {
                return Err(Error::DeviceTable(format!(
                    "row {}: level {level} out of order (expected {})",
                    row + 1,
                    levels.len()
                )));
            }
            levels.push(Level { mean_us, std_us });
        }
        Self::new(levels)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::io(format!("device table {}", path.display()), e))?;
        Self::from_csv_reader(file)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::DeviceTable(e.to_string());
        wtr.write_record(["level", "mean_uS", "std_uS"]).map_err(io)?;
        for (k, l) in self.levels.iter().enumerate() {
            wtr.serialize((k, l.mean_us, l.std_us)).map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::io("device table", e))?;
        Ok(())
    }
}

/// A single 1T1R cell: its programmed level and the conductance realized by
/// the last programming event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemristorDevice {
    pub level: u8,
    pub conductance_us: f32,
}

/// Draws a conductance for `level` from the table's normal model.
fn draw_conductance<R: Rng + ?Sized>(table: &DeviceLevelTable, level: usize, rng: &mut R) -> f64 {
    let Level { mean_us, std_us } = table.level(level);
    let g = if std_us > 0.0 {
        Normal::new(mean_us, std_us).expect("finite std").sample(rng)
    } else {
        mean_us
    };
    g.max(MIN_CONDUCTANCE_US)
}

/// Programs `device` to `target` with a fresh noise draw.
pub fn program_level<R: Rng + ?Sized>(
    device: &mut MemristorDevice,
    target: usize,
    table: &DeviceLevelTable,
    rng: &mut R,
) -> Result<()> {
    if target >= table.len() {
        return Err(Error::LevelOutOfRange { level: target, levels: table.len() });
    }
    device.level = target as u8;
    device.conductance_us = draw_conductance(table, target, rng) as f32;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Up,
    Down,
}

/// Global round-robin counter selecting which device of a multi-memristor
/// weight receives the next programming pulse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateArbiter {
    pub counter: u64,
}

impl UpdateArbiter {
    pub fn select(&self, n_mem: usize) -> usize {
        (self.counter % n_mem as u64) as usize
    }
}

/// Steps the arbiter-selected device one level in `direction`, saturating at
/// the table bounds. Saturated devices are rewritten at the same level with a
/// new noise draw. Returns the change in effective conductance.
pub fn step_devices<R: Rng + ?Sized>(
    devices: &mut [MemristorDevice],
    direction: Direction,
    arbiter: &mut UpdateArbiter,
    table: &DeviceLevelTable,
    rng: &mut R,
) -> f32 {
    assert!(!devices.is_empty(), "weight has no devices");
    let idx = arbiter.select(devices.len());
    arbiter.counter += 1;
    let dev = &mut devices[idx];
    let before = dev.conductance_us;
    let level = dev.level as usize;
    let target = match direction {
        Direction::Up => (level + 1).min(table.len() - 1),
        Direction::Down => level.saturating_sub(1),
    };
    program_level(dev, target, table, rng).expect("target clamped to table");
    dev.conductance_us - before
}

/// `n_mem` devices in parallel forming one weight.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiMemristorWeight {
    pub devices: Vec<MemristorDevice>,
}

impl MultiMemristorWeight {
    pub fn programmed<R: Rng + ?Sized>(
        levels: &[usize],
        table: &DeviceLevelTable,
        rng: &mut R,
    ) -> Result<Self> {
        let mut devices = vec![MemristorDevice { level: 0, conductance_us: 0.0 }; levels.len()];
        for (d, &l) in devices.iter_mut().zip(levels) {
            program_level(d, l, table, rng)?;
        }
        Ok(Self { devices })
    }

    pub fn n_mem(&self) -> usize {
        self.devices.len()
    }

    pub fn effective_conductance(&self) -> f64 {
        self.devices.iter().map(|d| d.conductance_us as f64).sum()
    }

    pub fn step<R: Rng + ?Sized>(
        &mut self,
        direction: Direction,
        arbiter: &mut UpdateArbiter,
        table: &DeviceLevelTable,
        rng: &mut R,
    ) {
        step_devices(&mut self.devices, direction, arbiter, table, rng);
    }
}

/// Maps effective conductance to a signed weight through a bias column and
/// a feedback scaling conductance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightMapping {
    pub g_bias_us: f64,
    pub g_scale_us: f64,
}

impl WeightMapping {
    pub fn new(g_bias_us: f64, g_scale_us: f64) -> Result<Self> {
        if !(g_scale_us.is_finite() && g_scale_us > 0.0) {
            return Err(Error::Config(format!("g_scale must be > 0, got {g_scale_us}")));
        }
        Ok(Self { g_bias_us, g_scale_us })
    }

    /// Bias at `n_mem` times the table midpoint; scale chosen so the nominal
    /// weight range is `[-half_range, +half_range]` for any `n_mem`.
    pub fn symmetric(table: &DeviceLevelTable, n_mem: usize, half_range: f64) -> Self {
        let n = n_mem as f64;
        Self {
            g_bias_us: n * table.midpoint(),
            g_scale_us: n * table.range() / (2.0 * half_range),
        }
    }

    pub fn weight(&self, g_effective_us: f64) -> f64 {
        (g_effective_us - self.g_bias_us) / self.g_scale_us
    }

    /// Nominal weight change of one average level step.
    pub fn step_size(&self, table: &DeviceLevelTable) -> f64 {
        table.resolution() / self.g_scale_us
    }
}

pub fn read_weight(weight: &MultiMemristorWeight, mapping: &WeightMapping) -> f64 {
    mapping.weight(weight.effective_conductance())
}

/// A `rows x cols` crossbar of multi-memristor weights, row-major by
/// pre-synaptic index. Keeps a cached copy of the mapped weights for the
/// forward pass.
#[derive(Debug, Clone)]
pub struct Crossbar {
    rows: usize,
    cols: usize,
    n_mem: usize,
    mapping: WeightMapping,
    devices: Vec<MemristorDevice>,
    weights: Vec<f32>,
    pub arbiter: UpdateArbiter,
}

impl Crossbar {
    /// Programs every device to an independently drawn uniform level.
    pub fn init<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        n_mem: usize,
        table: &DeviceLevelTable,
        mapping: WeightMapping,
        rng: &mut R,
    ) -> Self {
        assert!(rows >= 1 && cols >= 1 && n_mem >= 1, "crossbar dimensions must be >= 1");
        let n_levels = table.len();
        let devices: Vec<MemristorDevice> = (0..rows * cols * n_mem)
            .map(|_| {
                let level = rng.random_range(0..n_levels);
                MemristorDevice {
                    level: level as u8,
                    conductance_us: draw_conductance(table, level, rng) as f32,
                }
            })
            .collect();
        let mut xbar = Self {
            rows,
            cols,
            n_mem,
            mapping,
            devices,
            weights: vec![0.0; rows * cols],
            arbiter: UpdateArbiter::default(),
        };
        for idx in 0..rows * cols {
            xbar.refresh(idx);
        }
        xbar
    }

    /// Programs device `d` to `levels[d]`, devices laid out weight-major.
    pub fn from_levels<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        n_mem: usize,
        levels: &[usize],
        table: &DeviceLevelTable,
        mapping: WeightMapping,
        rng: &mut R,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || n_mem == 0 || levels.len() != rows * cols * n_mem {
            return Err(Error::Input(format!(
                "{} levels given for a {rows}x{cols} crossbar with {n_mem} devices per weight",
                levels.len()
            )));
        }
        let mut devices = vec![MemristorDevice { level: 0, conductance_us: 0.0 }; levels.len()];
        for (d, &l) in devices.iter_mut().zip(levels) {
            program_level(d, l, table, rng)?;
        }
        let mut xbar = Self {
            rows,
            cols,
            n_mem,
            mapping,
            devices,
            weights: vec![0.0; rows * cols],
            arbiter: UpdateArbiter::default(),
        };
        for idx in 0..rows * cols {
            xbar.refresh(idx);
        }
        Ok(xbar)
    }

    fn refresh(&mut self, idx: usize) {
        let g: f64 = self.devices_at(idx).iter().map(|d| d.conductance_us as f64).sum();
        self.weights[idx] = self.mapping.weight(g) as f32;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_mem(&self) -> usize {
        self.n_mem
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn device_count(&self) -> usize {
        self.devices.len()
    }

    pub fn mapping(&self) -> &WeightMapping {
        &self.mapping
    }

    /// Mapped weights, row-major `[pre][post]`.
    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn weight(&self, pre: usize, post: usize) -> f32 {
        self.weights[pre * self.cols + post]
    }

    pub fn row(&self, pre: usize) -> &[f32] {
        &self.weights[pre * self.cols..(pre + 1) * self.cols]
    }

    pub fn devices_at(&self, idx: usize) -> &[MemristorDevice] {
        &self.devices[idx * self.n_mem..(idx + 1) * self.n_mem]
    }

    pub fn effective_conductance(&self, idx: usize) -> f64 {
        self.devices_at(idx).iter().map(|d| d.conductance_us as f64).sum()
    }

    /// Programs the weight at flat index `idx` one level in `direction`.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        idx: usize,
        direction: Direction,
        table: &DeviceLevelTable,
        rng: &mut R,
    ) {
        let range = idx * self.n_mem..(idx + 1) * self.n_mem;
        step_devices(&mut self.devices[range], direction, &mut self.arbiter, table, rng);
        self.refresh(idx);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn blank() -> MemristorDevice {
        MemristorDevice { level: 0, conductance_us: 0.0 }
    }

    #[test]
    fn default_table_spans_40_to_283() {
        let t = DeviceLevelTable::default();
        assert_eq!(t.len(), 10);
        assert_abs_diff_eq!(t.min_mean(), 40.0);
        assert_abs_diff_eq!(t.max_mean(), 283.0, epsilon = 1e-9);
        assert_abs_diff_eq!(t.resolution(), 27.0, epsilon = 1e-9);
        for (k, l) in t.levels().iter().enumerate() {
            assert_abs_diff_eq!(l.mean_us, 40.0 + 27.0 * k as f64, epsilon = 1e-9);
            assert_abs_diff_eq!(l.std_us, 0.05 * l.mean_us, epsilon = 1e-12);
        }
    }

    #[test]
    fn program_level_noiseless_values() {
        let t = DeviceLevelTable::default().noiseless();
        let mut r = rng();
        let mut d = blank();
        for (level, g) in [(0, 40.0), (9, 283.0), (3, 121.0)] {
            program_level(&mut d, level, &t, &mut r).unwrap();
            assert_eq!(d.level as usize, level);
            assert_abs_diff_eq!(d.conductance_us as f64, g, epsilon = 1e-4);
        }
    }

    #[test]
    fn program_level_rejects_out_of_range() {
        let t = DeviceLevelTable::default();
        let err = program_level(&mut blank(), 10, &t, &mut rng()).unwrap_err();
        assert!(matches!(err, Error::LevelOutOfRange { level: 10, levels: 10 }));
    }

    #[test]
    fn step_single_device_up_and_saturate() {
        let t = DeviceLevelTable::default().noiseless();
        let mut r = rng();
        let mut w = MultiMemristorWeight::programmed(&[4], &t, &mut r).unwrap();
        let mut arb = UpdateArbiter::default();
        w.step(Direction::Up, &mut arb, &t, &mut r);
        assert_eq!(w.devices[0].level, 5);
        assert_abs_diff_eq!(w.devices[0].conductance_us as f64, 175.0, epsilon = 1e-4);

        let mut top = MultiMemristorWeight::programmed(&[9], &t, &mut r).unwrap();
        top.step(Direction::Up, &mut arb, &t, &mut r);
        assert_eq!(top.devices[0].level, 9);
        let mut bottom = MultiMemristorWeight::programmed(&[0], &t, &mut r).unwrap();
        bottom.step(Direction::Down, &mut arb, &t, &mut r);
        assert_eq!(bottom.devices[0].level, 0);
        assert_eq!(arb.counter, 3);
    }

    #[test]
    fn saturated_write_redraws_noise() {
        let t = DeviceLevelTable::default();
        let mut r = rng();
        let mut w = MultiMemristorWeight::programmed(&[9], &t, &mut r).unwrap();
        let before = w.devices[0].conductance_us;
        w.step(Direction::Up, &mut UpdateArbiter::default(), &t, &mut r);
        assert_eq!(w.devices[0].level, 9);
        assert_ne!(w.devices[0].conductance_us, before);
    }

    #[test]
    fn arbiter_selects_counter_mod_n() {
        let t = DeviceLevelTable::default().noiseless();
        let mut r = rng();
        let mut w = MultiMemristorWeight::programmed(&[5, 5, 5], &t, &mut r).unwrap();
        let mut arb = UpdateArbiter { counter: 4 };
        w.step(Direction::Down, &mut arb, &t, &mut r);
        let levels: Vec<u8> = w.devices.iter().map(|d| d.level).collect();
        assert_eq!(levels, vec![5, 4, 5]);
        assert_eq!(arb.counter, 5);
    }

    #[test]
    fn read_weight_examples() {
        let t = DeviceLevelTable::default().noiseless();
        let m = WeightMapping::symmetric(&t, 1, 0.5);
        assert_abs_diff_eq!(m.g_bias_us, 161.5, epsilon = 1e-9);
        assert_abs_diff_eq!(m.g_scale_us, 243.0, epsilon = 1e-9);
        let mut r = rng();
        let hi = MultiMemristorWeight::programmed(&[9], &t, &mut r).unwrap();
        let lo = MultiMemristorWeight::programmed(&[0], &t, &mut r).unwrap();
        assert_abs_diff_eq!(read_weight(&hi, &m), 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(read_weight(&lo, &m), -0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(m.weight(m.g_bias_us), 0.0);
    }

    #[test]
    fn multi_device_mapping_keeps_range() {
        let t = DeviceLevelTable::default().noiseless();
        let m = WeightMapping::symmetric(&t, 7, 0.5);
        let mut r = rng();
        let hi = MultiMemristorWeight::programmed(&[9; 7], &t, &mut r).unwrap();
        let lo = MultiMemristorWeight::programmed(&[0; 7], &t, &mut r).unwrap();
        assert_abs_diff_eq!(hi.effective_conductance() - lo.effective_conductance(), 7.0 * 243.0, epsilon = 1e-3);
        assert_abs_diff_eq!(read_weight(&hi, &m), 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(read_weight(&lo, &m), -0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(m.step_size(&t), 1.0 / 63.0, epsilon = 1e-12);
    }

    #[test]
    fn crossbar_counts_and_lattice() {
        let t = DeviceLevelTable::default().noiseless();
        let m = WeightMapping::symmetric(&t, 1, 0.5);
        let x = Crossbar::init(1, 1, 1, &t, m, &mut rng());
        let w = x.weight(0, 0) as f64;
        let on_lattice = (0..10).any(|k| (w - (40.0 + 27.0 * k as f64 - 161.5) / 243.0).abs() < 1e-6);
        assert!(on_lattice, "{w} not on quantization lattice");

        let big = Crossbar::init(784, 200, 7, &t, WeightMapping::symmetric(&t, 7, 0.5), &mut rng());
        assert_eq!(big.len(), 156_800);
        assert_eq!(big.device_count(), 1_097_600);
    }

    #[test]
    fn csv_round_trip_and_strictness() {
        let t = DeviceLevelTable::default();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = DeviceLevelTable::from_csv_reader(buf.as_slice()).unwrap();
        for (a, b) in t.levels().iter().zip(back.levels()) {
            assert_abs_diff_eq!(a.mean_us, b.mean_us, epsilon = 1e-9);
            assert_abs_diff_eq!(a.std_us, b.std_us, epsilon = 1e-9);
        }

        let unsorted = "level,mean_uS,std_uS\n1,50,1\n0,40,1\n";
        assert!(DeviceLevelTable::from_csv_reader(unsorted.as_bytes()).is_err());
        let dup = "level,mean_uS,std_uS\n0,40,1\n0,50,1\n";
        assert!(DeviceLevelTable::from_csv_reader(dup.as_bytes()).is_err());
        let decreasing = "level,mean_uS,std_uS\n0,60,1\n1,50,1\n";
        assert!(DeviceLevelTable::from_csv_reader(decreasing.as_bytes()).is_err());
        let bad_header = "lvl,mean,std\n0,40,1\n1,50,1\n";
        assert!(DeviceLevelTable::from_csv_reader(bad_header.as_bytes()).is_err());
        let one_level = "level,mean_uS,std_uS\n0,40,1\n";
        assert!(DeviceLevelTable::from_csv_reader(one_level.as_bytes()).is_err());
    }
}
