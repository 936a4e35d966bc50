use rand_chacha::ChaCha8Rng;

use super::{
    gradient_accumulate_step, threshold_update_step, GradientAccumulator, MetaFunction, MetaplasticState,
    PlasticityConfig, PlasticityMode, ProbabilitySource, ShufflePermutation,
};
use crate::device::DeviceLevelTable;
use crate::energy::OpCounters;
use crate::error::Result;
use crate::snn::{Network, SampleTrace, StepContext};

/// Independent random streams used by the engines, so that the decision
/// draws never perturb device noise and vice versa.
#[derive(Debug, Clone)]
pub struct PlasticityRngs {
    pub decision: ChaCha8Rng,
    pub device: ChaCha8Rng,
    pub shuffle: ChaCha8Rng,
}

/// Uniform update probability divided by `factor` at every task boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayingPlasticity {
    pub p: f32,
    pub factor: f32,
}

impl DecayingPlasticity {
    pub fn on_task_boundary(&mut self) {
        self.p /= self.factor;
    }
}

/// A configured plasticity engine covering both layers of a network.
#[derive(Debug, Clone)]
pub struct Engine {
    cfg: PlasticityConfig,
    function: MetaFunction,
    table: DeviceLevelTable,
    meta: Vec<MetaplasticState>,
    grad: Vec<GradientAccumulator>,
    permutations: Vec<ShufflePermutation>,
    decaying: Option<DecayingPlasticity>,
}

impl Engine {
    pub fn new(cfg: &PlasticityConfig, network: &Network, table: &DeviceLevelTable) -> Result<Self> {
        cfg.validate()?;
        let xbars = network.crossbars();
        let meta = match cfg.mode.meta_mode() {
            Some(mode) => xbars
                .iter()
                .enumerate()
                .map(|(layer, x)| {
                    let lp = cfg.layer(layer);
                    MetaplasticState::new(
                        mode,
                        x.rows(),
                        x.cols(),
                        cfg.delta_m,
                        cfg.m_max,
                        lp.pre_threshold,
                        lp.post_threshold,
                    )
                })
                .collect(),
            None => Vec::new(),
        };
        let grad = if cfg.mode == PlasticityMode::GradAccumMeta {
            xbars
                .iter()
                .map(|x| GradientAccumulator::new(x.len(), x.mapping().step_size(table) as f32))
                .collect()
        } else {
            Vec::new()
        };
        let permutations = if cfg.mode == PlasticityMode::RandomConsolidation {
            // Keys are drawn per sample in `begin_sample`.
            let mut zero = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
            xbars.iter().map(|x| ShufflePermutation::random(x.len(), &mut zero)).collect()
        } else {
            Vec::new()
        };
        let decaying = (cfg.mode == PlasticityMode::DecayingPlasticity)
            .then_some(DecayingPlasticity { p: cfg.p_initial, factor: cfg.decay_factor });
        Ok(Self { cfg: cfg.clone(), function: cfg.function(), table: table.clone(), meta, grad, permutations, decaying })
    }

    pub fn mode(&self) -> PlasticityMode {
        self.cfg.mode
    }

    pub fn config(&self) -> &PlasticityConfig {
        &self.cfg
    }

    pub fn meta(&self) -> &[MetaplasticState] {
        &self.meta
    }

    pub fn gradients(&self) -> &[GradientAccumulator] {
        &self.grad
    }

    /// Replaces the shuffle with the identity (random consolidation only).
    pub fn set_identity_permutation(&mut self) {
        self.permutations.iter_mut().for_each(|p| *p = ShufflePermutation::Identity);
    }

    /// The task-boundary hook. Only the decaying ablation is task-aware;
    /// every other engine returns `None`.
    pub fn task_boundary_listener(&mut self) -> Option<&mut DecayingPlasticity> {
        self.decaying.as_mut()
    }

    pub fn decaying(&self) -> Option<&DecayingPlasticity> {
        self.decaying.as_ref()
    }

    /// Bytes of auxiliary state actually held (coefficients + accumulators).
    pub fn memory_overhead_bytes(&self) -> usize {
        self.meta.iter().map(|m| m.storage_bytes()).sum::<usize>()
            + self.grad.iter().map(|g| g.storage_bytes()).sum::<usize>()
    }

    pub fn begin_sample(&mut self, rngs: &mut PlasticityRngs) {
        for p in &mut self.permutations {
            p.reshuffle(&mut rngs.shuffle);
        }
    }

    pub fn step(&mut self, ctx: StepContext<'_>, rngs: &mut PlasticityRngs, counters: &mut OpCounters) {
        let layer = ctx.layer;
        let lp = self.cfg.layer(layer);
        if self.cfg.mode == PlasticityMode::GradAccumMeta {
            gradient_accumulate_step(
                ctx,
                &self.meta[layer],
                self.function,
                &mut self.grad[layer],
                &self.cfg,
                lp.eta,
                &self.table,
                &mut rngs.device,
                counters,
            );
            return;
        }
        let source = match self.cfg.mode {
            PlasticityMode::None => ProbabilitySource::Always,
            PlasticityMode::ProbMetaIndividual | PlasticityMode::ProbMetaShared => {
                ProbabilitySource::Meta { meta: &self.meta[layer], function: self.function }
            }
            PlasticityMode::RandomConsolidation => ProbabilitySource::Shuffled {
                meta: &self.meta[layer],
                function: self.function,
                permutation: &self.permutations[layer],
            },
            PlasticityMode::DecayingPlasticity => {
                ProbabilitySource::Uniform(self.decaying.expect("decaying state").p)
            }
            PlasticityMode::GradAccumMeta => unreachable!(),
        };
        threshold_update_step(
            ctx,
            source,
            &self.cfg,
            lp.u_th,
            &self.table,
            &mut rngs.decision,
            &mut rngs.device,
            counters,
        );
    }

    /// End-of-sample bookkeeping: coefficient growth from the final traces
    /// and clearing of gradient accumulators.
    pub fn end_sample(&mut self, traces: &SampleTrace<'_>, counters: &mut OpCounters) {
        let pairs = [(traces.input, traces.hidden), (traces.hidden, traces.output)];
        for (meta, (pre, post)) in self.meta.iter_mut().zip(pairs) {
            meta.evolve(pre, post, counters);
        }
        for g in &mut self.grad {
            g.reset();
        }
    }
}
