use rand::Rng;

use super::{update_probability, MetaFunction, MetaplasticState, PlasticityConfig};
use crate::device::{DeviceLevelTable, Direction};
use crate::energy::{OpCounters, OpKind};
use crate::snn::StepContext;

/// High-precision per-synapse gradient accumulators (modelled as 32-bit
/// storage). Cleared at the start of every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientAccumulator {
    pub acc: Vec<f32>,
    /// Weight change equivalent to one conductance level.
    pub step_threshold: f32,
}

impl GradientAccumulator {
    pub fn new(len: usize, step_threshold: f32) -> Self {
        assert!(step_threshold > 0.0, "step threshold must be positive");
        Self { acc: vec![0.0; len], step_threshold }
    }

    pub fn storage_bytes(&self) -> usize {
        self.acc.len() * std::mem::size_of::<f32>()
    }

    pub fn reset(&mut self) {
        self.acc.fill(0.0);
    }
}

/// Gradient accumulation with activity-dependent metaplasticity for one
/// layer at one timestep.
///
/// Each synapse from a spiking pre-neuron into a neuron whose current lies
/// inside the boxcar accumulates `-eta * U_j * f(|m w|)`. Whenever the
/// accumulator reaches one level's worth, the weight is programmed one level
/// in the accumulator's sign and that amount is subtracted.
#[allow(clippy::too_many_arguments)]
pub fn gradient_accumulate_step<D: Rng + ?Sized>(
    ctx: StepContext<'_>,
    meta: &MetaplasticState,
    function: MetaFunction,
    grad: &mut GradientAccumulator,
    cfg: &PlasticityConfig,
    eta: f32,
    table: &DeviceLevelTable,
    device_rng: &mut D,
    counters: &mut OpCounters,
) {
    let StepContext { layer, pre_active, post_current, dendrite, crossbar } = ctx;
    let lp = cfg.layer(layer);
    let cols = crossbar.cols();
    let step = grad.step_threshold;
    let eligible: Vec<usize> = (0..cols).filter(|&j| lp.in_boxcar(post_current[j])).collect();
    let events = (pre_active.len() * eligible.len()) as u64;
    counters.eligibility_events += events;
    counters.record(meta.read_kind(), events);
    counters.record(OpKind::SramRead32, events);
    counters.record(OpKind::SramWrite32, events);
    counters.record(OpKind::MemristorRead, events);
    counters.record(function.op_kind(), events);
    counters.record(OpKind::Multiply, events);
    counters.record(OpKind::AddCompare, events);

    for &i in pre_active {
        let base = i as usize * cols;
        for &j in &eligible {
            let idx = base + j;
            let f = update_probability(meta.m_at(idx), crossbar.weights()[idx], &function);
            let a = &mut grad.acc[idx];
            *a += -eta * dendrite[j] * f;
            while a.abs() >= step {
                let (direction, sign) = if *a > 0.0 { (Direction::Up, 1.0) } else { (Direction::Down, -1.0) };
                *a -= sign * step;
                crossbar.step(idx, direction, table, device_rng);
                counters.program_events += 1;
                counters.record(OpKind::MemristorProgram, 1);
            }
        }
    }
}
