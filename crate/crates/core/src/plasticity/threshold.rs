use rand::Rng;

use super::{update_probability, MetaFunction, MetaplasticState, PlasticityConfig, ShufflePermutation};
use crate::device::{Crossbar, DeviceLevelTable, Direction};
use crate::energy::{OpCounters, OpKind};
use crate::snn::StepContext;

/// Where an error-threshold engine gets the update probability of an
/// eligible weight.
#[derive(Debug, Clone, Copy)]
pub enum ProbabilitySource<'a> {
    /// Every eligible weight is programmed; no draw is made.
    Always,
    /// `f(|m w|)` of the weight itself.
    Meta { meta: &'a MetaplasticState, function: MetaFunction },
    /// `f(|m w|)` evaluated at the permuted weight index.
    Shuffled { meta: &'a MetaplasticState, function: MetaFunction, permutation: &'a ShufflePermutation },
    /// The same probability for every weight.
    Uniform(f32),
}

impl ProbabilitySource<'_> {
    #[inline]
    fn probability(&self, xbar: &Crossbar, idx: usize, counters: &mut OpCounters) -> Option<f32> {
        match *self {
            ProbabilitySource::Always => None,
            ProbabilitySource::Meta { meta, function } => {
                counters.record(meta.read_kind(), 1);
                counters.record(OpKind::MemristorRead, 1);
                counters.record(function.op_kind(), 1);
                Some(update_probability(meta.m_at(idx), xbar.weights()[idx], &function))
            }
            ProbabilitySource::Shuffled { meta, function, permutation } => {
                let k = permutation.apply(idx);
                counters.record(meta.read_kind(), 1);
                counters.record(OpKind::MemristorRead, 1);
                counters.record(function.op_kind(), 1);
                Some(update_probability(meta.m_at(k), xbar.weights()[k], &function))
            }
            ProbabilitySource::Uniform(p) => Some(p),
        }
    }
}

/// Error-threshold update for one layer at one timestep.
///
/// Every post-neuron whose dendritic error magnitude exceeds `u_th` gets a
/// programming decision for each synapse from a spiking pre-neuron, provided
/// its current lies inside the boxcar. Accepted synapses move one level up
/// for negative error and down for positive error. The neuron's dendritic
/// error is then cleared.
#[allow(clippy::too_many_arguments)]
pub fn threshold_update_step<E: Rng + ?Sized, D: Rng + ?Sized>(
    ctx: StepContext<'_>,
    source: ProbabilitySource<'_>,
    cfg: &PlasticityConfig,
    u_th: f32,
    table: &DeviceLevelTable,
    decision_rng: &mut E,
    device_rng: &mut D,
    counters: &mut OpCounters,
) {
    let StepContext { layer, pre_active, post_current, dendrite, crossbar } = ctx;
    let lp = cfg.layer(layer);
    let cols = crossbar.cols();
    for j in 0..cols {
        let u = dendrite[j];
        if u.abs() <= u_th {
            continue;
        }
        if lp.in_boxcar(post_current[j]) {
            let direction = if u < 0.0 { Direction::Up } else { Direction::Down };
            for &i in pre_active {
                let idx = i as usize * cols + j;
                counters.eligibility_events += 1;
                let accept = match source.probability(crossbar, idx, counters) {
                    None => true,
                    Some(p) => {
                        counters.record(OpKind::RngDraw, 1);
                        counters.record(OpKind::AddCompare, 1);
                        decision_rng.random::<f32>() <= p
                    }
                };
                if accept {
                    crossbar.step(idx, direction, table, device_rng);
                    counters.program_events += 1;
                    counters.record(OpKind::MemristorProgram, 1);
                }
            }
        }
        dendrite[j] = 0.0;
    }
}
