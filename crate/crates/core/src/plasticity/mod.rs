//! Weight-update engines.
//!
//! * Error-threshold engines program a weight one conductance level when the
//!   dendritic error of its post-synaptic neuron crosses `u_th`. The
//!   probabilistic variants gate each pulse with an update probability
//!   derived from a metaplastic coefficient and the weight magnitude.
//! * The gradient engine accumulates metaplasticity-modulated eRBP updates in
//!   high-precision memory and programs a level whenever one level's worth
//!   has accrued.
//! * Two ablations: random consolidation (probabilities shuffled across
//!   weights) and decaying uniform probability (the only task-aware engine).

mod engine;
mod gradient;
mod meta;
mod permutation;
mod threshold;

pub use engine::{DecayingPlasticity, Engine, PlasticityRngs};
pub use gradient::{gradient_accumulate_step, GradientAccumulator};
pub use meta::{MetaMode, MetaplasticState, M_FRAC_BITS};
pub use permutation::ShufflePermutation;
pub use threshold::{threshold_update_step, ProbabilitySource};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which engine drives weight updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlasticityMode {
    /// Error-threshold training with every eligible weight programmed.
    None,
    ProbMetaIndividual,
    ProbMetaShared,
    GradAccumMeta,
    RandomConsolidation,
    DecayingPlasticity,
}

impl PlasticityMode {
    pub const ALL: [PlasticityMode; 6] = [
        PlasticityMode::None,
        PlasticityMode::ProbMetaIndividual,
        PlasticityMode::ProbMetaShared,
        PlasticityMode::GradAccumMeta,
        PlasticityMode::RandomConsolidation,
        PlasticityMode::DecayingPlasticity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlasticityMode::None => "none",
            PlasticityMode::ProbMetaIndividual => "prob_meta_individual",
            PlasticityMode::ProbMetaShared => "prob_meta_shared",
            PlasticityMode::GradAccumMeta => "grad_accum_meta",
            PlasticityMode::RandomConsolidation => "random_consolidation",
            PlasticityMode::DecayingPlasticity => "decaying_plasticity",
        }
    }

    /// Engines that keep metaplastic coefficients.
    pub fn meta_mode(self) -> Option<MetaMode> {
        match self {
            PlasticityMode::ProbMetaIndividual
            | PlasticityMode::GradAccumMeta
            | PlasticityMode::RandomConsolidation => Some(MetaMode::Individual),
            PlasticityMode::ProbMetaShared => Some(MetaMode::Shared),
            PlasticityMode::None | PlasticityMode::DecayingPlasticity => None,
        }
    }
}

/// Piecewise-linear stand-in for `exp(-x)` on `x >= 0`:
/// `1 - slope1 * x` up to `knee`, then continuing with `slope2`, floored at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bilinear {
    pub slope1: f32,
    pub knee: f32,
    pub slope2: f32,
}

impl Default for Bilinear {
    fn default() -> Self {
        Self { slope1: 0.7, knee: 0.9, slope2: 0.17 }
    }
}

impl Bilinear {
    pub fn eval(&self, x: f32) -> f32 {
        let y = if x <= self.knee {
            1.0 - self.slope1 * x
        } else {
            1.0 - self.slope1 * self.knee - self.slope2 * (x - self.knee)
        };
        y.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionVariant {
    Exponential,
    Bilinear,
}

/// The metaplasticity function `f(|m w|)` with its evaluation variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetaFunction {
    Exponential,
    Bilinear(Bilinear),
}

impl MetaFunction {
    #[inline]
    pub fn eval(&self, x: f32) -> f32 {
        match self {
            MetaFunction::Exponential => (-x).exp(),
            MetaFunction::Bilinear(b) => b.eval(x),
        }
    }

    pub fn op_kind(&self) -> crate::energy::OpKind {
        match self {
            MetaFunction::Exponential => crate::energy::OpKind::ExpEval,
            MetaFunction::Bilinear(_) => crate::energy::OpKind::BilinearEval,
        }
    }
}

/// Update probability of a weight with coefficient `m`: `f(|m * w|)`.
#[inline]
pub fn update_probability(m: f32, w: f32, f: &MetaFunction) -> f32 {
    f.eval((m * w).abs())
}

/// All plasticity hyperparameters. Layer-specific values fall back to the
/// shared ones when unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlasticityConfig {
    pub mode: PlasticityMode,
    /// Dendritic error magnitude that triggers a programming decision.
    pub u_th: f32,
    pub output_u_th: Option<f32>,
    /// Learning rate of the gradient engine.
    pub eta: f32,
    pub output_eta: Option<f32>,
    /// Boxcar bounds on the post-synaptic current.
    pub i_min: f32,
    pub i_max: f32,
    pub output_i_min: Option<f32>,
    pub output_i_max: Option<f32>,
    pub function: FunctionVariant,
    pub bilinear: Bilinear,
    pub delta_m: f32,
    pub m_max: f32,
    pub pre_threshold: f32,
    pub post_threshold: f32,
    pub output_pre_threshold: Option<f32>,
    pub output_post_threshold: Option<f32>,
    /// Starting probability of the decaying ablation.
    pub p_initial: f32,
    /// Divisor applied to the decaying probability at each task boundary.
    pub decay_factor: f32,
}

impl Default for PlasticityConfig {
    fn default() -> Self {
        Self {
            mode: PlasticityMode::ProbMetaIndividual,
            u_th: 0.04,
            output_u_th: None,
            eta: 0.05,
            output_eta: None,
            i_min: -2.0,
            i_max: 2.0,
            output_i_min: None,
            output_i_max: None,
            function: FunctionVariant::Exponential,
            bilinear: Bilinear::default(),
            delta_m: 0.2,
            m_max: 48.0,
            pre_threshold: 0.8,
            post_threshold: 0.8,
            output_pre_threshold: None,
            output_post_threshold: None,
            p_initial: 1.0,
            decay_factor: 5.0,
        }
    }
}

/// Per-layer view of the resolved hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerParams {
    pub u_th: f32,
    pub eta: f32,
    pub pre_threshold: f32,
    pub post_threshold: f32,
    pub i_min: f32,
    pub i_max: f32,
}

impl LayerParams {
    #[inline]
    pub fn in_boxcar(&self, current: f32) -> bool {
        self.i_min < current && current < self.i_max
    }
}

impl PlasticityConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        for layer in 0..2 {
            let p = self.layer(layer);
            if !(p.u_th.is_finite() && p.u_th > 0.0) {
                return err(format!("plasticity: u_th must be > 0 (layer {layer}: {})", p.u_th));
            }
            if !(p.eta.is_finite() && p.eta > 0.0) {
                return err(format!("plasticity: eta must be > 0 (layer {layer}: {})", p.eta));
            }
            if !(p.i_min < p.i_max) {
                return err(format!("plasticity: i_min ({}) must be < i_max ({}) (layer {layer})", p.i_min, p.i_max));
            }
        }
        if !(self.delta_m >= 0.0 && self.m_max >= 0.0) {
            return err("plasticity: delta_m and m_max must be >= 0".into());
        }
        if self.m_max > MetaplasticState::MAX_REPRESENTABLE {
            return err(format!(
                "plasticity: m_max {} exceeds 16-bit fixed-point range {}",
                self.m_max,
                MetaplasticState::MAX_REPRESENTABLE
            ));
        }
        if !(self.p_initial > 0.0 && self.p_initial <= 1.0) {
            return err(format!("plasticity: p_initial must be in (0, 1], got {}", self.p_initial));
        }
        if !(self.decay_factor >= 1.0) {
            return err(format!("plasticity: decay_factor must be >= 1, got {}", self.decay_factor));
        }
        Ok(())
    }

    pub fn function(&self) -> MetaFunction {
        match self.function {
            FunctionVariant::Exponential => MetaFunction::Exponential,
            FunctionVariant::Bilinear => MetaFunction::Bilinear(self.bilinear),
        }
    }

    /// Layer 0 is input→hidden, layer 1 hidden→output.
    pub fn layer(&self, layer: usize) -> LayerParams {
        let pick = |base: f32, over: Option<f32>| if layer == 1 { over.unwrap_or(base) } else { base };
        LayerParams {
            u_th: pick(self.u_th, self.output_u_th),
            eta: pick(self.eta, self.output_eta),
            pre_threshold: pick(self.pre_threshold, self.output_pre_threshold),
            post_threshold: pick(self.post_threshold, self.output_post_threshold),
            i_min: pick(self.i_min, self.output_i_min),
            i_max: pick(self.i_max, self.output_i_max),
        }
    }
}

/// Extra memory, in bytes, that an engine needs beyond the weights of a
/// network with `weights` synapses and `post_neurons` plastic neurons.
pub fn memory_overhead_bytes(mode: PlasticityMode, weights: usize, post_neurons: usize) -> usize {
    const M_BYTES: usize = 2;
    const ACC_BYTES: usize = 4;
    match mode {
        PlasticityMode::None | PlasticityMode::DecayingPlasticity => 0,
        PlasticityMode::ProbMetaIndividual | PlasticityMode::RandomConsolidation => weights * M_BYTES,
        PlasticityMode::ProbMetaShared => post_neurons * M_BYTES,
        PlasticityMode::GradAccumMeta => weights * (M_BYTES + ACC_BYTES),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponential_examples() {
        let f = MetaFunction::Exponential;
        assert_eq!(update_probability(0.0, 0.7, &f), 1.0);
        assert_abs_diff_eq!(update_probability(2.0, 0.5, &f), 0.36788, epsilon = 1e-5);
        assert_abs_diff_eq!(update_probability(10.0, 1.0, &f), 4.54e-5, epsilon = 1e-7);
        assert_eq!(update_probability(3.0, -0.2, &f), update_probability(3.0, 0.2, &f));
    }

    #[test]
    fn bilinear_tracks_exponential() {
        let b = MetaFunction::Bilinear(Bilinear::default());
        assert_eq!(b.eval(0.0), 1.0);
        let worst = (0..=60_000)
            .map(|k| k as f32 * 1e-4)
            .map(|x| (b.eval(x) - (-x).exp()).abs())
            .fold(0.0f32, f32::max);
        assert!(worst < 0.07, "max abs error {worst}");
        assert!(b.eval(10.0) == 0.0);
    }

    #[test]
    fn memory_overhead_for_784_200_2() {
        let weights = 784 * 200 + 200 * 2;
        let neurons = 200 + 2;
        assert_eq!(memory_overhead_bytes(PlasticityMode::ProbMetaIndividual, weights, neurons), 314_400);
        assert_eq!(memory_overhead_bytes(PlasticityMode::ProbMetaShared, weights, neurons), 404);
        assert_eq!(memory_overhead_bytes(PlasticityMode::GradAccumMeta, weights, neurons), 943_200);
        assert_eq!(memory_overhead_bytes(PlasticityMode::None, weights, neurons), 0);
    }

    #[test]
    fn layer_overrides() {
        let cfg = PlasticityConfig { output_u_th: Some(0.9), output_post_threshold: Some(2.0), ..Default::default() };
        assert_eq!(cfg.layer(0).u_th, cfg.u_th);
        assert_eq!(cfg.layer(1).u_th, 0.9);
        assert_eq!(cfg.layer(1).post_threshold, 2.0);
        assert_eq!(cfg.layer(1).pre_threshold, cfg.pre_threshold);
    }

    #[test]
    fn validation() {
        assert!(PlasticityConfig::default().validate().is_ok());
        assert!(PlasticityConfig { u_th: 0.0, ..Default::default() }.validate().is_err());
        assert!(PlasticityConfig { i_min: 2.0, i_max: 1.0, ..Default::default() }.validate().is_err());
        assert!(PlasticityConfig { m_max: 300.0, ..Default::default() }.validate().is_err());
    }
}
