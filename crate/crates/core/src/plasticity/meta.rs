use crate::energy::{OpCounters, OpKind};

/// Fractional bits of the unsigned 16-bit fixed-point coefficient format.
pub const M_FRAC_BITS: u32 = 8;
const M_ONE: f32 = (1u32 << M_FRAC_BITS) as f32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaMode {
    /// One coefficient per synapse.
    Individual,
    /// One coefficient per post-synaptic neuron, shared by its fan-in.
    Shared,
}

/// Metaplastic coefficients of one layer, stored as 16-bit fixed point.
/// Coefficients only ever grow, saturating at `m_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaplasticState {
    pub mode: MetaMode,
    rows: usize,
    cols: usize,
    raw: Vec<u16>,
    delta_raw: u16,
    max_raw: u16,
    pub pre_threshold: f32,
    pub post_threshold: f32,
}

fn to_raw(x: f32) -> u16 {
    (x * M_ONE).round().clamp(0.0, u16::MAX as f32) as u16
}

impl MetaplasticState {
    pub const MAX_REPRESENTABLE: f32 = u16::MAX as f32 / M_ONE;

    pub fn new(
        mode: MetaMode,
        rows: usize,
        cols: usize,
        delta_m: f32,
        m_max: f32,
        pre_threshold: f32,
        post_threshold: f32,
    ) -> Self {
        let n = match mode {
            MetaMode::Individual => rows * cols,
            MetaMode::Shared => cols,
        };
        Self {
            mode,
            rows,
            cols,
            raw: vec![0; n],
            delta_raw: to_raw(delta_m),
            max_raw: to_raw(m_max),
            pre_threshold,
            post_threshold,
        }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn storage_bytes(&self) -> usize {
        self.raw.len() * std::mem::size_of::<u16>()
    }

    /// Quantized increment actually applied per evolution step.
    pub fn delta(&self) -> f32 {
        self.delta_raw as f32 / M_ONE
    }

    pub fn m_max(&self) -> f32 {
        self.max_raw as f32 / M_ONE
    }

    /// Coefficient governing the weight at flat index `pre * cols + post`.
    #[inline]
    pub fn m_at(&self, idx: usize) -> f32 {
        let k = match self.mode {
            MetaMode::Individual => idx,
            MetaMode::Shared => idx % self.cols,
        };
        self.raw[k] as f32 / M_ONE
    }

    pub fn values(&self) -> impl Iterator<Item = f32> + '_ {
        self.raw.iter().map(|&r| r as f32 / M_ONE)
    }

    /// Read op kind for this storage: shared coefficients live in a small
    /// array with cheaper accesses.
    pub fn read_kind(&self) -> OpKind {
        match self.mode {
            MetaMode::Individual => OpKind::SramRead16,
            MetaMode::Shared => OpKind::SmallSramRead16,
        }
    }

    fn write_kind(&self) -> OpKind {
        match self.mode {
            MetaMode::Individual => OpKind::SramWrite16,
            MetaMode::Shared => OpKind::SmallSramWrite16,
        }
    }

    #[inline]
    fn bump(&mut self, k: usize) {
        self.raw[k] = self.raw[k].saturating_add(self.delta_raw).min(self.max_raw.max(self.raw[k]));
    }

    /// Per-synapse growth: `m_ij += delta` where the pre trace clears the
    /// pre threshold and the post trace clears the post threshold.
    /// Returns the number of coefficients touched.
    pub fn evolve_individual(&mut self, pre_trace: &[f32], post_trace: &[f32], counters: &mut OpCounters) -> u64 {
        assert_eq!(self.mode, MetaMode::Individual);
        assert_eq!(pre_trace.len(), self.rows);
        assert_eq!(post_trace.len(), self.cols);
        let posts: Vec<usize> = (0..self.cols).filter(|&j| post_trace[j] >= self.post_threshold).collect();
        if posts.is_empty() {
            return 0;
        }
        let mut touched = 0u64;
        let pre_th = self.pre_threshold;
        for i in (0..self.rows).filter(|&i| pre_trace[i] >= pre_th) {
            for &j in &posts {
                self.bump(i * self.cols + j);
            }
            touched += posts.len() as u64;
        }
        counters.record(self.read_kind(), touched);
        counters.record(self.write_kind(), touched);
        touched
    }

    /// Per-neuron growth: `m_j += delta` where the post trace clears the
    /// post threshold.
    pub fn evolve_shared(&mut self, post_trace: &[f32], counters: &mut OpCounters) -> u64 {
        assert_eq!(self.mode, MetaMode::Shared);
        assert_eq!(post_trace.len(), self.cols);
        let mut touched = 0u64;
        for j in 0..self.cols {
            if post_trace[j] >= self.post_threshold {
                self.bump(j);
                touched += 1;
            }
        }
        counters.record(self.read_kind(), touched);
        counters.record(self.write_kind(), touched);
        touched
    }

    pub fn evolve(&mut self, pre_trace: &[f32], post_trace: &[f32], counters: &mut OpCounters) -> u64 {
        match self.mode {
            MetaMode::Individual => self.evolve_individual(pre_trace, post_trace, counters),
            MetaMode::Shared => self.evolve_shared(post_trace, counters),
        }
    }
}
