//! File formats, runtime controller and command line for `adaptact-core`.
//!
//! * [`aat`]: `.aat` tensor files and labelled datasets.
//! * [`manifest`]: JSON model manifests and architecture descriptors.
//! * [`report`]: CSV/JSON forms of profiles, tables, plans and sweeps.
//! * [`controller`]: budget traces and atomic configuration swaps.
//! * [`cli`]: the `adaptact` command.

pub mod aat;
pub mod cli;
pub mod controller;
mod error;
pub mod manifest;
pub mod parallel;
pub mod report;

pub use adaptact_core as core;
pub use error::{exit, Error, Result};
