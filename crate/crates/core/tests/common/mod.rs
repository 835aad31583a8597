//! Random models and sensitivity tables for planner tests.

#![allow(dead_code)]

use adaptact_core::planner::memory_cost;
use adaptact_core::{
    LayerDef, LayerKind, LayerRuntimeConfig, Model, Precision, RuntimeConfig, SensitivityRecord,
    SensitivityTable, SweepGrid,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub const BASELINE_ACCURACY: f64 = 0.9;

/// `dense -> act` blocks with random widths, then a dense head.
pub fn random_model(rng: &mut impl Rng, layers: usize) -> Model {
    let mut defs = Vec::new();
    for i in 0..layers {
        let width = rng.random_range(1..=24);
        defs.push(LayerDef::new(
            format!("fc{i}"),
            LayerKind::Dense {
                out_features: width,
            },
        ));
        defs.push(LayerDef::new(format!("act{i}"), LayerKind::AaRelu));
    }
    defs.push(LayerDef::new("head", LayerKind::Dense { out_features: 3 }));
    let input = rng.random_range(1..=16);
    Model::new("synthetic", vec![input], 3, defs, None).unwrap()
}

/// Grid with at most `max_options + 1` points so each layer has at most
/// `max_options` non-baseline settings.
pub fn random_grid(rng: &mut impl Rng, max_options: usize) -> SweepGrid {
    loop {
        let mut s = vec![0.0f32];
        let mut extra = [0.25f32, 0.5, 0.75, 1.0];
        extra.shuffle(rng);
        s.extend_from_slice(&extra[..rng.random_range(0..=2)]);
        let mut q = vec![Precision::Fp32];
        let mut low = [
            Precision::Fp16,
            Precision::Fp8,
            Precision::Int4,
            Precision::Int2,
        ];
        low.shuffle(rng);
        q.extend_from_slice(&low[..rng.random_range(0..=3)]);
        if s.len() * q.len() <= max_options + 1 {
            return SweepGrid::new(s, q).unwrap();
        }
    }
}

/// Complete table over `grid` with random accuracies, some above baseline.
pub fn random_table(rng: &mut impl Rng, model: &Model, grid: &SweepGrid) -> SensitivityTable {
    let base = memory_cost(model, &RuntimeConfig::baseline())
        .unwrap()
        .total_bytes;
    let ids: Vec<String> = model
        .activation_ids()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut records = Vec::new();
    for id in &ids {
        for &s in grid.sparsity_levels() {
            for &q in grid.precisions() {
                let baseline = s == 0.0 && q == Precision::Fp32;
                let accuracy = if baseline {
                    BASELINE_ACCURACY
                } else if rng.random_bool(0.15) {
                    BASELINE_ACCURACY + rng.random_range(0.0..0.05)
                } else {
                    BASELINE_ACCURACY - rng.random_range(0.0..0.5)
                };
                let cfg = RuntimeConfig::baseline()
                    .with(model, id, LayerRuntimeConfig::new(s, q, s).unwrap())
                    .unwrap();
                let mem = memory_cost(model, &cfg).unwrap().total_bytes;
                records.push(SensitivityRecord {
                    layer_id: id.clone(),
                    sparsity: s,
                    threshold: s,
                    precision: q,
                    accuracy,
                    memory_bytes: mem,
                    memory_saved_bytes: base as i64 - mem as i64,
                });
            }
        }
    }
    SensitivityTable::new(BASELINE_ACCURACY, base, ids, grid.clone(), records).unwrap()
}
