//! Operation counting for the parameter-update phase and conversion to
//! energy through a per-operation cost table.
//!
//! Forward-pass and error computation are excluded: only the work done to
//! decide on and apply weight updates, and to maintain metaplastic
//! coefficients, is tallied.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::ops::{AddAssign, Index};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! op_kinds {
    ($($variant:ident => $name:literal, $group:ident, $cost:expr;)*) => {
        /// Operation kinds tallied during the parameter-update phase.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum OpKind { $($variant),* }

        impl OpKind {
            pub const ALL: &'static [OpKind] = &[$(OpKind::$variant),*];

            pub fn name(self) -> &'static str {
                match self { $(OpKind::$variant => $name),* }
            }

            pub fn group(self) -> CostGroup {
                match self { $(OpKind::$variant => CostGroup::$group),* }
            }

            /// Placeholder cost in pJ. Not measured values; only ratios
            /// between runs are meaningful.
            pub fn default_cost_pj(self) -> f64 {
                match self { $(OpKind::$variant => $cost),* }
            }
        }
    };
}

op_kinds! {
    SramRead16 => "sram_read_16", Sram, 1.0;
    SramWrite16 => "sram_write_16", Sram, 1.0;
    SramRead32 => "sram_read_32", Sram, 2.0;
    SramWrite32 => "sram_write_32", Sram, 2.0;
    SmallSramRead16 => "small_sram_read_16", Sram, 0.05;
    SmallSramWrite16 => "small_sram_write_16", Sram, 0.05;
    MemristorProgram => "memristor_program", Memristor, 10.0;
    MemristorRead => "memristor_read", Memristor, 1.0;
    RngDraw => "rng_draw", Computation, 0.5;
    ExpEval => "exp_eval", Computation, 4.0;
    BilinearEval => "bilinear_eval", Computation, 1.0;
    Multiply => "multiply", Computation, 1.0;
    AddCompare => "add_compare", Computation, 0.2;
}

const N_KINDS: usize = OpKind::ALL.len();

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OpKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::CostTable(format!("unknown op kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostGroup {
    Computation,
    Sram,
    Memristor,
}

/// Tallies per operation kind plus event counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpCounters {
    tallies: [u64; N_KINDS],
    /// Weights that passed every update-eligibility test.
    pub eligibility_events: u64,
    /// Memristor programming pulses applied.
    pub program_events: u64,
}

impl OpCounters {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn record(&mut self, kind: OpKind, n: u64) {
        self.tallies[kind as usize] += n;
    }

    pub fn get(&self, kind: OpKind) -> u64 {
        self.tallies[kind as usize]
    }

    /// SRAM reads and writes of any width or array size.
    pub fn sram_accesses(&self) -> u64 {
        OpKind::ALL.iter().filter(|k| k.group() == CostGroup::Sram).map(|&k| self.get(k)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (OpKind, u64)> + '_ {
        OpKind::ALL.iter().map(|&k| (k, self.get(k)))
    }
}

impl Index<OpKind> for OpCounters {
    type Output = u64;

    fn index(&self, kind: OpKind) -> &u64 {
        &self.tallies[kind as usize]
    }
}

impl AddAssign<&OpCounters> for OpCounters {
    fn add_assign(&mut self, rhs: &OpCounters) {
        for (a, b) in self.tallies.iter_mut().zip(rhs.tallies) {
            *a += b;
        }
        self.eligibility_events += rhs.eligibility_events;
        self.program_events += rhs.program_events;
    }
}

/// Energy per operation kind, pJ.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyCostTable {
    costs: [f64; N_KINDS],
}

impl Default for EnergyCostTable {
    fn default() -> Self {
        let mut costs = [0.0; N_KINDS];
        for &k in OpKind::ALL {
            costs[k as usize] = k.default_cost_pj();
        }
        Self { costs }
    }
}

impl EnergyCostTable {
    pub fn zeros() -> Self {
        Self { costs: [0.0; N_KINDS] }
    }

    pub fn cost(&self, kind: OpKind) -> f64 {
        self.costs[kind as usize]
    }

    pub fn set(&mut self, kind: OpKind, pj: f64) -> Result<()> {
        if !(pj.is_finite() && pj >= 0.0) {
            return Err(Error::CostTable(format!("{kind}: cost must be >= 0, got {pj}")));
        }
        self.costs[kind as usize] = pj;
        Ok(())
    }

    /// Parses `op_kind,pJ` CSV. Kinds not listed keep their default cost.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::CostTable(e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["op_kind", "pJ"] {
            return Err(Error::CostTable("expected header `op_kind,pJ`".into()));
        }
        let mut table = Self::default();
        let mut seen = Vec::new();
        for (row, rec) in rdr.deserialize::<(String, f64)>().enumerate() {
            let (name, pj) = rec.map_err(|e| Error::CostTable(format!("row {}: {e}", row + 1)))?;
            let kind: OpKind = name.parse()?;
            if seen.contains(&kind) {
                return Err(Error::CostTable(format!("duplicate op kind `{kind}`")));
            }
            seen.push(kind);
            table.set(kind, pj)?;
        }
        Ok(table)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(format!("cost table {}", path.display()), e))?;
        Self::from_csv_reader(f)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("op_kind,pJ\n");
        for &k in OpKind::ALL {
            s.push_str(&format!("{},{}\n", k.name(), self.cost(k)));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub computation_pj: f64,
    pub sram_pj: f64,
    pub memristor_pj: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.computation_pj + self.sram_pj + self.memristor_pj
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub n_samples: u64,
    pub total_pj: f64,
    pub per_sample_pj: f64,
    pub breakdown: EnergyBreakdown,
    /// Breakdown divided by the total; all zero when the total is zero.
    pub fractions: EnergyBreakdown,
    pub counts: BTreeMap<String, u64>,
    pub eligibility_events: u64,
    pub program_events: u64,
}

/// Converts tallies to energy. The total is computed as the sum of the
/// three group subtotals so the breakdown conserves it exactly.
pub fn report(counters: &OpCounters, costs: &EnergyCostTable, n_samples: u64) -> Result<EnergyReport> {
    if n_samples == 0 {
        return Err(Error::Input("energy report needs at least one sample".into()));
    }
    let mut b = EnergyBreakdown { computation_pj: 0.0, sram_pj: 0.0, memristor_pj: 0.0 };
    for (kind, n) in counters.iter() {
        let e = n as f64 * costs.cost(kind);
        match kind.group() {
            CostGroup::Computation => b.computation_pj += e,
            CostGroup::Sram => b.sram_pj += e,
            CostGroup::Memristor => b.memristor_pj += e,
        }
    }
    let total = b.total();
    let frac = |x: f64| if total > 0.0 { x / total } else { 0.0 };
    let fractions = EnergyBreakdown {
        computation_pj: frac(b.computation_pj),
        sram_pj: frac(b.sram_pj),
        memristor_pj: frac(b.memristor_pj),
    };
    Ok(EnergyReport {
        n_samples,
        total_pj: total,
        per_sample_pj: total / n_samples as f64,
        breakdown: b,
        fractions,
        counts: counters.iter().map(|(k, n)| (k.name().to_string(), n)).collect(),
        eligibility_events: counters.eligibility_events,
        program_events: counters.program_events,
    })
}
