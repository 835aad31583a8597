//! Paths and loaders for the committed fixture.

#![allow(dead_code)]

use std::path::PathBuf;

use adaptact::aat;
use adaptact::core::{Dataset, Model, SensitivityTable};
use adaptact::manifest::load_model;
use adaptact::report::read_sensitivity;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn model() -> Model {
    load_model(fixture("tiny.json")).unwrap()
}

pub fn dataset(name: &str) -> Dataset {
    aat::read_dataset(fixture(&format!("{name}.aat"))).unwrap()
}

/// Sensitivity table committed next to the model, produced by
/// `adaptact sensitivity` with default settings.
pub fn table() -> SensitivityTable {
    read_sensitivity(fixture("tiny.sensitivity.csv")).unwrap()
}
