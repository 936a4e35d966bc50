//! Split-dataset continual learning: task construction, the online
//! domain-incremental training protocol, evaluation and summary metrics.

mod idx;
mod metrics;

pub use idx::{load_idx, parse_images, parse_labels, IdxDataset, IdxPaths, IMAGE_MAGIC, LABEL_MAGIC};
pub use metrics::{mean_std, metrics, AccuracyMatrix, Summary};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::ExperimentConfig;
use crate::device::DeviceLevelTable;
use crate::energy::OpCounters;
use crate::error::{Error, Result};
use crate::plasticity::Engine;
use crate::rng::{self, Stream};
use crate::snn::{Network, StepContext};

/// Ordered class pairs. Within a pair, the first class maps to output 0 and
/// the second to output 1, for every task (one shared head).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSequence {
    pairs: Vec<[u8; 2]>,
}

impl Default for TaskSequence {
    fn default() -> Self {
        Self { pairs: vec![[0, 1], [2, 3], [4, 5], [6, 7], [8, 9]] }
    }
}

impl TaskSequence {
    pub fn new(pairs: Vec<[u8; 2]>) -> Result<Self> {
        if let Some(p) = pairs.iter().find(|p| p[0] == p[1] || p.iter().any(|&c| c > 9)) {
            return Err(Error::Input(format!("invalid class pair {p:?}")));
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[[u8; 2]] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Output neuron for `class` within task `task`.
    pub fn output_for(&self, task: usize, class: u8) -> Option<usize> {
        self.pairs[task].iter().position(|&c| c == class)
    }

    /// Indices of `data` belonging to task `task`, in file order.
    pub fn indices(&self, data: &IdxDataset, task: usize) -> Vec<usize> {
        let pair = self.pairs[task];
        (0..data.len()).filter(|&i| pair.contains(&data.labels[i])).collect()
    }
}

/// Winning output: the larger spike count, ties to output 0.
pub fn predict(counts: &[u32]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

/// Accuracy (%) of `network` on the listed samples of task `task`, with
/// plasticity disabled.
pub fn evaluate<R: Rng + ?Sized>(
    network: &mut Network,
    data: &IdxDataset,
    indices: &[usize],
    tasks: &TaskSequence,
    task: usize,
    t_eval: usize,
    rng: &mut R,
) -> f64 {
    if indices.is_empty() {
        return 0.0;
    }
    let correct = indices
        .iter()
        .filter(|&&i| {
            let target = tasks.output_for(task, data.labels[i]).expect("sample belongs to task");
            let counts = network.present::<_, dyn FnMut(StepContext<'_>)>(data.image(i), None, t_eval, rng, None);
            predict(&counts) == target
        })
        .count();
    100.0 * correct as f64 / indices.len() as f64
}

/// Everything a single continual-learning run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub matrix: AccuracyMatrix,
    pub counters: OpCounters,
    pub train_samples: u64,
    /// Training-set indices in presentation order.
    pub presented: Vec<u32>,
    pub memory_overhead_bytes: usize,
    pub network: Network,
    pub engine: Engine,
}

/// Builds the network and engine for `cfg` from the seed's init stream.
pub fn build(cfg: &ExperimentConfig, seed: u64) -> Result<(Network, Engine, DeviceLevelTable)> {
    cfg.validate()?;
    let table = cfg.device_table()?;
    let mapping = cfg.mapping(&table);
    let mut init = rng::stream(seed, Stream::Init);
    let network = Network::new(cfg.shape(), cfg.network.n_mem, &table, mapping, cfg.network_settings(), &mut init);
    let engine = Engine::new(&cfg.plasticity, &network, &table)?;
    Ok((network, engine, table))
}

/// Trains on each task in turn for one pass over a shuffled (and optionally
/// subsampled) training split, then evaluates every task seen so far.
///
/// Only the decaying ablation is told about task boundaries.
pub fn run_continual(
    train: &IdxDataset,
    test: &IdxDataset,
    tasks: &TaskSequence,
    cfg: &ExperimentConfig,
    seed: u64,
    mut progress: impl FnMut(usize, &[f64]),
) -> Result<RunResult> {
    if train.dim() != 784 || test.dim() != 784 {
        return Err(Error::Input("datasets must hold 28x28 images".into()));
    }
    let (mut network, mut engine, _) = build(cfg, seed)?;
    let mut order_rng = rng::stream(seed, Stream::DataOrder);
    let mut enc_rng = rng::stream(seed, Stream::Encoding);
    let mut prngs = rng::plasticity_rngs(seed);
    let mut counters = OpCounters::new();
    let mut matrix = AccuracyMatrix::new();
    let mut presented = Vec::new();
    let run = &cfg.run;

    let test_sets: Vec<Vec<usize>> = (0..tasks.len())
        .map(|t| {
            let mut idx = tasks.indices(test, t);
            if let Some(limit) = run.eval_limit {
                idx.truncate(limit);
            }
            idx
        })
        .collect();

    for task in 0..tasks.len() {
        if task > 0 {
            if let Some(listener) = engine.task_boundary_listener() {
                listener.on_task_boundary();
            }
        }
        let mut order = tasks.indices(train, task);
        order.shuffle(&mut order_rng);
        let keep = ((order.len() as f64 * run.train_fraction).ceil() as usize).min(order.len());
        order.truncate(keep);

        for &i in &order {
            let target = tasks.output_for(task, train.labels[i]).expect("sample belongs to task");
            engine.begin_sample(&mut prngs);
            let mut hook = |ctx: StepContext<'_>| engine.step(ctx, &mut prngs, &mut counters);
            network.present(train.image(i), Some(target), run.t_train, &mut enc_rng, Some(&mut hook));
            engine.end_sample(&network.traces(), &mut counters);
            presented.push(i as u32);
        }

        let row: Vec<f64> = (0..=task)
            .map(|e| {
                let mut r = rng::eval_stream(seed, task, e);
                evaluate(&mut network, test, &test_sets[e], tasks, e, run.t_eval, &mut r)
            })
            .collect();
        progress(task, &row);
        matrix.push_row(row)?;
    }

    Ok(RunResult {
        seed,
        matrix,
        counters,
        train_samples: presented.len() as u64,
        presented,
        memory_overhead_bytes: engine.memory_overhead_bytes(),
        network,
        engine,
    })
}
