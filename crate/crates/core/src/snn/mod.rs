//! Event-driven random backpropagation building blocks: Poisson encoding,
//! leaky integrate-and-fire dynamics, error neurons, random error feedback,
//! dendritic error integration and activity traces.
//!
//! All state is `f32`; every update is a forward-Euler step of width `dt`.

mod network;

pub use network::{Network, NetworkSettings, NetworkShape, SampleTrace, StepContext};

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuronParams {
    /// Synaptic time constant, ms.
    pub tau_syn: f32,
    /// Membrane time constant, ms. Also the dendritic time constant.
    pub tau_mem: f32,
    /// Membrane gain (resistance with capacitance folded in).
    pub r: f32,
    pub v_rest: f32,
    pub v_th: f32,
    /// Refractory period in timesteps.
    pub t_ref: u32,
    /// Timestep, ms.
    pub dt: f32,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self { tau_syn: 4.0, tau_mem: 20.0, r: 1.0, v_rest: 0.0, v_th: 1.0, t_ref: 4, dt: 1.0 }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [("tau_syn", self.tau_syn), ("tau_mem", self.tau_mem), ("dt", self.dt)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("neuron.{name} must be > 0, got {v}")));
            }
        }
        if !(self.v_th > self.v_rest) {
            return Err(Error::Config(format!(
                "neuron.v_th ({}) must exceed neuron.v_rest ({})",
                self.v_th, self.v_rest
            )));
        }
        Ok(())
    }
}

/// Binary spike indicator per neuron at one timestep.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SpikeVector(pub Vec<bool>);

impl SpikeVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&s| s).count()
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter_map(|(i, &s)| s.then_some(i))
    }

    pub fn as_f32(&self) -> impl Iterator<Item = f32> + '_ {
        self.0.iter().map(|&s| if s { 1.0 } else { 0.0 })
    }
}

impl From<Vec<bool>> for SpikeVector {
    fn from(v: Vec<bool>) -> Self {
        Self(v)
    }
}

/// Per-neuron dynamical state of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub current: Vec<f32>,
    pub potential: Vec<f32>,
    pub refractory: Vec<u32>,
    pub trace: Vec<f32>,
    pub dendrite: Vec<f32>,
}

impl LayerState {
    pub fn new(n: usize, params: &NeuronParams) -> Self {
        Self {
            current: vec![0.0; n],
            potential: vec![params.v_rest; n],
            refractory: vec![0; n],
            trace: vec![0.0; n],
            dendrite: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    pub fn reset(&mut self, params: &NeuronParams) {
        self.current.fill(0.0);
        self.potential.fill(params.v_rest);
        self.refractory.fill(0);
        self.trace.fill(0.0);
        self.dendrite.fill(0.0);
    }
}

/// Per-pixel spike probability for one timestep, `pixel * max_prob`
/// clamped to `[0, 1]`. `max_prob` is `rate_max * dt`.
pub fn spike_probability(pixel: f32, max_prob: f32) -> f32 {
    (pixel * max_prob).clamp(0.0, 1.0)
}

/// Independent Bernoulli spike per pixel. Zero-probability pixels consume no
/// random draws.
pub fn encode_poisson<R: Rng + ?Sized>(
    image: &[f32],
    max_prob: f32,
    rng: &mut R,
    out: &mut SpikeVector,
) -> Result<()> {
    if let Some(i) = image.iter().position(|&p| !(p >= 0.0)) {
        return Err(Error::Input(format!("pixel {i} is negative or NaN: {}", image[i])));
    }
    out.0.resize(image.len(), false);
    for (s, &px) in out.0.iter_mut().zip(image) {
        let p = spike_probability(px, max_prob);
        *s = p > 0.0 && (p >= 1.0 || rng.random::<f32>() < p);
    }
    Ok(())
}

/// One LIF step: synaptic current, then membrane, then threshold and reset.
pub fn lif_step(state: &mut LayerState, weighted_input: &[f32], params: &NeuronParams, spikes: &mut SpikeVector) {
    let syn = params.dt / params.tau_syn;
    let mem = params.dt / params.tau_mem;
    spikes.0.resize(state.len(), false);
    for j in 0..state.len() {
        let i = &mut state.current[j];
        *i += syn * (weighted_input[j] - *i);
        let v = &mut state.potential[j];
        if state.refractory[j] > 0 {
            state.refractory[j] -= 1;
            *v = params.v_rest;
            spikes.0[j] = false;
            continue;
        }
        *v += mem * ((params.v_rest - *v) + *i * params.r);
        if *v >= params.v_th {
            spikes.0[j] = true;
            *v = params.v_rest;
            state.refractory[j] = params.t_ref;
        } else {
            spikes.0[j] = false;
        }
    }
}

/// Instantaneous error neurons: false positive where the output spiked
/// without a target spike, false negative for the converse.
pub fn error_spikes(out: &SpikeVector, target: &SpikeVector) -> (SpikeVector, SpikeVector) {
    assert_eq!(out.len(), target.len(), "output/target length mismatch");
    let fp = out.0.iter().zip(&target.0).map(|(&o, &l)| o && !l).collect();
    let fn_ = out.0.iter().zip(&target.0).map(|(&o, &l)| !o && l).collect();
    (SpikeVector(fp), SpikeVector(fn_))
}

pub fn error_at_output(fp: &SpikeVector, fn_: &SpikeVector) -> Vec<f32> {
    fp.as_f32().zip(fn_.as_f32()).map(|(p, n)| p - n).collect()
}

/// Fixed random projections from the error neurons to the hidden layer,
/// stored row-major `[hidden][output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackWeights {
    pub hidden: usize,
    pub outputs: usize,
    pub w_fp: Vec<f32>,
    pub w_fn: Vec<f32>,
}

impl FeedbackWeights {
    pub fn random<R: Rng + ?Sized>(hidden: usize, outputs: usize, amplitude: f32, rng: &mut R) -> Self {
        let dist = Uniform::new_inclusive(-amplitude, amplitude).expect("finite amplitude");
        let w_fp = (0..hidden * outputs).map(|_| dist.sample(rng)).collect();
        let w_fn = (0..hidden * outputs).map(|_| dist.sample(rng)).collect();
        Self { hidden, outputs, w_fp, w_fn }
    }
}

/// Projects error-neuron spikes onto the hidden layer.
pub fn error_at_hidden(fp: &SpikeVector, fn_: &SpikeVector, fb: &FeedbackWeights, out: &mut [f32]) {
    assert_eq!(fp.len(), fb.outputs);
    assert_eq!(fn_.len(), fb.outputs);
    assert_eq!(out.len(), fb.hidden);
    out.fill(0.0);
    for k in fp.active() {
        for (i, e) in out.iter_mut().enumerate() {
            *e += fb.w_fp[i * fb.outputs + k];
        }
    }
    for k in fn_.active() {
        for (i, e) in out.iter_mut().enumerate() {
            *e -= fb.w_fn[i * fb.outputs + k];
        }
    }
}

/// Leaky dendritic integration of the projected error.
pub fn dendrite_step(u: &mut [f32], error: &[f32], params: &NeuronParams) {
    let k = params.dt / params.tau_mem;
    for (u, &e) in u.iter_mut().zip(error) {
        *u += k * (-*u + e * params.r);
    }
}

/// Low-pass activity trace, `X += dt * (-X / tau + S)`.
pub fn trace_step(trace: &mut [f32], spikes: &SpikeVector, tau_tr: f32, dt: f32) {
    for (x, s) in trace.iter_mut().zip(spikes.as_f32()) {
        *x += dt * (-*x / tau_tr + s);
    }
}

/// Periodic target train for the label neuron at `rate` spikes per step;
/// other outputs are silent. `rate >= 1` fires every step.
pub fn target_spikes(label: usize, t: usize, rate: f32, out: &mut SpikeVector) {
    out.0.fill(false);
    let fires = if rate >= 1.0 {
        true
    } else if rate <= 0.0 {
        false
    } else {
        ((t + 1) as f64 * rate as f64).floor() > (t as f64 * rate as f64).floor()
    };
    out.0[label] = fires;
}
