//! Simulator for continual learning in spiking networks whose synapses are
//! quantized, noisy multi-memristor weights, trained online with
//! probabilistic metaplasticity.
//!
//! The crate is organised as:
//! - [`device`]: level tables, devices, arbitration and crossbars;
//! - [`snn`]: LIF dynamics, error neurons, dendrites, traces and the network;
//! - [`plasticity`]: threshold and gradient-accumulation updates, metaplastic
//!   coefficients and ablations;
//! - [`benchmark`]: IDX loading, split tasks, the training protocol, metrics;
//! - [`energy`]: operation counters and energy accounting.

pub mod benchmark;
pub mod config;
pub mod device;
pub mod energy;
pub mod error;
pub mod plasticity;
pub mod rng;
pub mod snn;

pub use benchmark::{run_continual, AccuracyMatrix, IdxDataset, RunResult, Summary, TaskSequence};
pub use config::ExperimentConfig;
pub use device::{Crossbar, DeviceLevelTable, MemristorDevice, MultiMemristorWeight, WeightMapping};
pub use energy::{EnergyCostTable, EnergyReport, OpCounters, OpKind};
pub use error::{Error, Result};
pub use plasticity::{Engine, PlasticityConfig, PlasticityMode};
pub use snn::{Network, NetworkShape, NeuronParams};
