use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{
    dendrite_step, encode_poisson, error_at_hidden, error_at_output, error_spikes, lif_step,
    target_spikes, trace_step, FeedbackWeights, LayerState, NeuronParams, SpikeVector,
};
use crate::device::{Crossbar, DeviceLevelTable, WeightMapping};

/// Layer widths of the single-hidden-layer network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkShape {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
}

impl Default for NetworkShape {
    fn default() -> Self {
        Self { inputs: 784, hidden: 200, outputs: 2 }
    }
}

/// What a plasticity engine sees for one layer at one timestep.
pub struct StepContext<'a> {
    /// 0 for input→hidden, 1 for hidden→output.
    pub layer: usize,
    pub pre_active: &'a [u32],
    pub post_current: &'a [f32],
    pub dendrite: &'a mut [f32],
    pub crossbar: &'a mut Crossbar,
}

/// Activity traces at the end of a sample presentation.
pub struct SampleTrace<'a> {
    pub input: &'a [f32],
    pub hidden: &'a [f32],
    pub output: &'a [f32],
}

#[derive(Debug, Clone)]
pub struct Network {
    pub shape: NetworkShape,
    pub params: NeuronParams,
    pub tau_trace: f32,
    /// Spike probability per step of a fully white pixel.
    pub input_max_prob: f32,
    /// Target spikes per step for the label neuron.
    pub target_rate: f32,
    /// Gains applied to the summed synaptic input of each layer.
    pub hidden_gain: f32,
    pub output_gain: f32,
    /// Std of additive weight read noise; zero disables it.
    pub read_noise: f32,
    pub hidden_xbar: Crossbar,
    pub output_xbar: Crossbar,
    pub feedback: FeedbackWeights,
    pub hidden: LayerState,
    pub output: LayerState,
    pub input_trace: Vec<f32>,
    scratch: Scratch,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    in_spikes: SpikeVector,
    in_active: Vec<u32>,
    hidden_in: Vec<f32>,
    hidden_spikes: SpikeVector,
    hidden_active: Vec<u32>,
    output_in: Vec<f32>,
    output_spikes: SpikeVector,
    target: SpikeVector,
    hidden_err: Vec<f32>,
}

/// Network-level settings not owned by the crossbars.
#[derive(Debug, Clone, Copy)]
pub struct NetworkSettings {
    pub params: NeuronParams,
    pub tau_trace: f32,
    pub input_max_prob: f32,
    pub target_rate: f32,
    pub hidden_gain: f32,
    pub output_gain: f32,
    pub read_noise: f32,
    pub feedback_amplitude: f32,
}

impl Network {
    /// Builds crossbars with uniformly random device levels and fresh
    /// random feedback weights.
    pub fn new<R: Rng + ?Sized>(
        shape: NetworkShape,
        n_mem: usize,
        table: &DeviceLevelTable,
        mapping: WeightMapping,
        settings: NetworkSettings,
        rng: &mut R,
    ) -> Self {
        let hidden_xbar = Crossbar::init(shape.inputs, shape.hidden, n_mem, table, mapping, rng);
        let output_xbar = Crossbar::init(shape.hidden, shape.outputs, n_mem, table, mapping, rng);
        let feedback = FeedbackWeights::random(shape.hidden, shape.outputs, settings.feedback_amplitude, rng);
        let params = settings.params;
        Self {
            shape,
            params,
            tau_trace: settings.tau_trace,
            input_max_prob: settings.input_max_prob,
            target_rate: settings.target_rate,
            hidden_gain: settings.hidden_gain,
            output_gain: settings.output_gain,
            read_noise: settings.read_noise,
            hidden_xbar,
            output_xbar,
            feedback,
            hidden: LayerState::new(shape.hidden, &params),
            output: LayerState::new(shape.outputs, &params),
            input_trace: vec![0.0; shape.inputs],
            scratch: Scratch::default(),
        }
    }

    pub fn reset_state(&mut self) {
        self.hidden.reset(&self.params);
        self.output.reset(&self.params);
        self.input_trace.fill(0.0);
    }

    /// Presents one image for `steps` timesteps from a fresh state and
    /// returns the output spike counts.
    ///
    /// With `label = Some(k)` the error pathway runs and `plasticity` (if
    /// any) is invoked once per layer per step, hidden layer first.
    pub fn present<R, P>(
        &mut self,
        image: &[f32],
        label: Option<usize>,
        steps: usize,
        rng: &mut R,
        mut plasticity: Option<&mut P>,
    ) -> Vec<u32>
    where
        R: Rng + ?Sized,
        P: FnMut(StepContext<'_>) + ?Sized,
    {
        self.reset_state();
        let NetworkShape { hidden: nh, outputs: no, .. } = self.shape;
        let sc = &mut self.scratch;
        sc.hidden_in.resize(nh, 0.0);
        sc.output_in.resize(no, 0.0);
        sc.hidden_err.resize(nh, 0.0);
        sc.target = SpikeVector::zeros(no);
        let mut counts = vec![0u32; no];
        let read_noise = (self.read_noise > 0.0).then(|| Normal::new(0.0f32, self.read_noise).expect("finite std"));

        for t in 0..steps {
            encode_poisson(image, self.input_max_prob, rng, &mut sc.in_spikes).expect("validated image");
            sc.in_active.clear();
            sc.in_active.extend(sc.in_spikes.active().map(|i| i as u32));

            accumulate(&self.hidden_xbar, &sc.in_active, &mut sc.hidden_in, self.hidden_gain, read_noise.as_ref(), rng);
            lif_step(&mut self.hidden, &sc.hidden_in, &self.params, &mut sc.hidden_spikes);
            sc.hidden_active.clear();
            sc.hidden_active.extend(sc.hidden_spikes.active().map(|i| i as u32));

            accumulate(&self.output_xbar, &sc.hidden_active, &mut sc.output_in, self.output_gain, read_noise.as_ref(), rng);
            lif_step(&mut self.output, &sc.output_in, &self.params, &mut sc.output_spikes);
            for k in sc.output_spikes.active() {
                counts[k] += 1;
            }

            let Some(label) = label else { continue };

            target_spikes(label, t, self.target_rate, &mut sc.target);
            let (fp, fn_) = error_spikes(&sc.output_spikes, &sc.target);
            let e_out = error_at_output(&fp, &fn_);
            error_at_hidden(&fp, &fn_, &self.feedback, &mut sc.hidden_err);
            dendrite_step(&mut self.output.dendrite, &e_out, &self.params);
            dendrite_step(&mut self.hidden.dendrite, &sc.hidden_err, &self.params);

            trace_step(&mut self.input_trace, &sc.in_spikes, self.tau_trace, self.params.dt);
            trace_step(&mut self.hidden.trace, &sc.hidden_spikes, self.tau_trace, self.params.dt);
            trace_step(&mut self.output.trace, &sc.output_spikes, self.tau_trace, self.params.dt);

            if let Some(p) = plasticity.as_deref_mut() {
                p(StepContext {
                    layer: 0,
                    pre_active: &sc.in_active,
                    post_current: &self.hidden.current,
                    dendrite: &mut self.hidden.dendrite,
                    crossbar: &mut self.hidden_xbar,
                });
                p(StepContext {
                    layer: 1,
                    pre_active: &sc.hidden_active,
                    post_current: &self.output.current,
                    dendrite: &mut self.output.dendrite,
                    crossbar: &mut self.output_xbar,
                });
            }
        }
        counts
    }

    pub fn traces(&self) -> SampleTrace<'_> {
        SampleTrace { input: &self.input_trace, hidden: &self.hidden.trace, output: &self.output.trace }
    }

    pub fn crossbars(&self) -> [&Crossbar; 2] {
        [&self.hidden_xbar, &self.output_xbar]
    }
}

fn accumulate<R: Rng + ?Sized>(
    xbar: &Crossbar,
    active: &[u32],
    out: &mut [f32],
    gain: f32,
    read_noise: Option<&Normal<f32>>,
    rng: &mut R,
) {
    out.fill(0.0);
    for &i in active {
        let row = xbar.row(i as usize);
        match read_noise {
            None => out.iter_mut().zip(row).for_each(|(o, &w)| *o += w),
            Some(n) => out.iter_mut().zip(row).for_each(|(o, &w)| *o += w + n.sample(rng)),
        }
    }
    if gain != 1.0 {
        out.iter_mut().for_each(|o| *o *= gain);
    }
}
