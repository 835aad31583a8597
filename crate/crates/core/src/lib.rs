//! Budget-adaptive activation control for convolutional networks.
//!
//! The crate runs a pre-trained feed-forward CNN while two knobs on each
//! activation layer stay adjustable at runtime:
//!
//! * a threshold `T` for the shifted ReLU (`x - T` above `T`, zero otherwise),
//!   which raises the fraction of zero activations;
//! * a storage precision applied by a simulated cast on the activation output.
//!
//! Around the engine sit the tools that choose those knobs: calibration of a
//! sparsity level into a threshold ([`activation`]), a per-layer sensitivity
//! sweep ([`sensitivity`]), and a memory/latency cost model with a greedy
//! budget planner and an exhaustive oracle ([`planner`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the runtime
//! controller and the command line live in the `adaptact` crate.

#![no_std]

extern crate alloc;

pub mod activation;
mod error;
pub mod graph;
pub mod ops;
pub mod planner;
pub mod sensitivity;
pub mod tensor;

pub use activation::{
    aa_relu, relu, threshold_for_sparsity, CalibrationOptions, CalibrationProfile,
};
pub use error::{Error, Result};
pub use graph::{
    Dataset, LayerDef, LayerKind, LayerRuntimeConfig, LayerSpec, Model, RuntimeConfig, Source,
    WeightRef,
};
pub use planner::{Budget, Candidate, CostReport, Plan};
pub use sensitivity::{SensitivityRecord, SensitivityTable, SweepGrid};
pub use tensor::{Precision, PrecisionKind, QuantParams, Tensor};
