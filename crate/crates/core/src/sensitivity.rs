//! Per-layer sensitivity sweep over sparsity levels and precisions.
//!
//! Each record changes exactly one activation layer and leaves every other
//! layer at baseline, so the table captures isolated effects only.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::activation::{threshold_for_sparsity, CalibrationProfile};
use crate::error::{Error, Result};
use crate::graph::{
    changed_layers, evaluate_accuracy, Dataset, LayerRuntimeConfig, Model, RuntimeConfig,
};
use crate::planner::memory_cost;
use crate::tensor::Precision;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    sparsity_levels: Vec<f32>,
    precisions: Vec<Precision>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            sparsity_levels: alloc::vec![0.0, 0.25, 0.5, 0.75, 1.0],
            precisions: Precision::ALL.to_vec(),
        }
    }
}

impl SweepGrid {
    /// The grid must contain the baseline point `(0, FP32)` and no duplicates.
    pub fn new(sparsity_levels: Vec<f32>, precisions: Vec<Precision>) -> Result<Self> {
        if sparsity_levels.is_empty() || precisions.is_empty() {
            return Err(Error::InvalidArgument("sweep grid is empty".into()));
        }
        for (i, &s) in sparsity_levels.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidArgument(format!(
                    "sparsity level {s} outside [0, 1]"
                )));
            }
            if sparsity_levels[..i].contains(&s) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate sparsity level {s}"
                )));
            }
        }
        for (i, p) in precisions.iter().enumerate() {
            if precisions[..i].contains(p) {
                return Err(Error::InvalidArgument(format!("duplicate precision {p}")));
            }
        }
        if !sparsity_levels.contains(&0.0) {
            return Err(Error::InvalidArgument(
                "sparsity levels must include 0".into(),
            ));
        }
        if !precisions.contains(&Precision::Fp32) {
            return Err(Error::InvalidArgument(
                "precisions must include FP32".into(),
            ));
        }
        Ok(Self {
            sparsity_levels,
            precisions,
        })
    }

    pub fn sparsity_levels(&self) -> &[f32] {
        &self.sparsity_levels
    }

    pub fn precisions(&self) -> &[Precision] {
        &self.precisions
    }

    pub fn points_per_layer(&self) -> usize {
        self.sparsity_levels.len() * self.precisions.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRecord {
    pub layer_id: String,
    pub sparsity: f32,
    /// Calibrated threshold used for `sparsity`.
    pub threshold: f32,
    pub precision: Precision,
    pub accuracy: f64,
    pub memory_bytes: u64,
    /// Baseline memory minus `memory_bytes`.
    pub memory_saved_bytes: i64,
}

impl SensitivityRecord {
    pub fn is_baseline(&self) -> bool {
        self.sparsity == 0.0 && self.precision == Precision::Fp32
    }
}

/// Complete sweep result: one record per layer and grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTable {
    pub baseline_accuracy: f64,
    pub baseline_memory_bytes: u64,
    layer_ids: Vec<String>,
    grid: SweepGrid,
    records: Vec<SensitivityRecord>,
}

impl SensitivityTable {
    /// Checks that `records` holds each `(layer, s, q)` of the grid exactly
    /// once and that every baseline record carries the baseline accuracy.
    pub fn new(
        baseline_accuracy: f64,
        baseline_memory_bytes: u64,
        layer_ids: Vec<String>,
        grid: SweepGrid,
        records: Vec<SensitivityRecord>,
    ) -> Result<Self> {
        if layer_ids.is_empty() {
            return Err(Error::TableMismatch("no layers".into()));
        }
        for (i, id) in layer_ids.iter().enumerate() {
            if layer_ids[..i].contains(id) {
                return Err(Error::TableMismatch(format!("layer {id} listed twice")));
            }
        }
        let expected = layer_ids.len() * grid.points_per_layer();
        if records.len() != expected {
            return Err(Error::TableMismatch(format!(
                "expected {expected} records, found {}",
                records.len()
            )));
        }
        let slots = grid.points_per_layer();
        let mut seen = alloc::vec![false; expected];
        for r in &records {
            let layer = layer_ids
                .iter()
                .position(|id| *id == r.layer_id)
                .ok_or_else(|| Error::TableMismatch(format!("unknown layer {}", r.layer_id)))?;
            let s = grid
                .sparsity_levels
                .iter()
                .position(|&v| v == r.sparsity)
                .ok_or_else(|| {
                    Error::TableMismatch(format!("sparsity {} not in grid", r.sparsity))
                })?;
            let q = grid
                .precisions
                .iter()
                .position(|&p| p == r.precision)
                .ok_or_else(|| {
                    Error::TableMismatch(format!("precision {} not in grid", r.precision))
                })?;
            let slot = layer * slots + s * grid.precisions.len() + q;
            if seen[slot] {
                return Err(Error::TableMismatch(format!(
                    "duplicate record ({}, {}, {})",
                    r.layer_id, r.sparsity, r.precision
                )));
            }
            seen[slot] = true;
            if !(0.0..=1.0).contains(&r.accuracy) {
                return Err(Error::TableMismatch(format!(
                    "accuracy {} outside [0, 1] for layer {}",
                    r.accuracy, r.layer_id
                )));
            }
            if r.is_baseline() && r.accuracy != baseline_accuracy {
                return Err(Error::TableMismatch(format!(
                    "baseline record of {} has accuracy {}, expected {baseline_accuracy}",
                    r.layer_id, r.accuracy
                )));
            }
        }
        Ok(Self {
            baseline_accuracy,
            baseline_memory_bytes,
            layer_ids,
            grid,
            records,
        })
    }

    pub fn layer_ids(&self) -> &[String] {
        &self.layer_ids
    }

    pub fn layer_position(&self, id: &str) -> Option<usize> {
        self.layer_ids.iter().position(|l| l == id)
    }

    pub fn grid(&self) -> &SweepGrid {
        &self.grid
    }

    pub fn records(&self) -> &[SensitivityRecord] {
        &self.records
    }

    pub fn records_for<'a>(
        &'a self,
        layer_id: &'a str,
    ) -> impl Iterator<Item = &'a SensitivityRecord> {
        self.records.iter().filter(move |r| r.layer_id == layer_id)
    }

    pub fn record(
        &self,
        layer_id: &str,
        sparsity: f32,
        precision: Precision,
    ) -> Option<&SensitivityRecord> {
        self.records
            .iter()
            .find(|r| r.layer_id == layer_id && r.sparsity == sparsity && r.precision == precision)
    }

    /// Whether the table was produced for `model`: same activation layers in
    /// the same order.
    pub fn matches_model(&self, model: &Model) -> bool {
        let ids = model.activation_ids();
        ids.len() == self.layer_ids.len() && ids.iter().zip(&self.layer_ids).all(|(a, b)| a == b)
    }
}

/// Baseline accuracy and memory shared by every layer's sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepBaseline {
    pub accuracy: f64,
    pub memory_bytes: u64,
}

impl SweepBaseline {
    pub fn measure(model: &Model, eval: &Dataset) -> Result<Self> {
        let cfg = RuntimeConfig::baseline();
        Ok(Self {
            accuracy: evaluate_accuracy(model, &cfg, eval)?,
            memory_bytes: memory_cost(model, &cfg)?.total_bytes,
        })
    }
}

/// Sweeps one layer over the grid with every other layer frozen at baseline.
pub fn analyze_layer(
    model: &Model,
    eval: &Dataset,
    profile: &CalibrationProfile,
    grid: &SweepGrid,
    baseline: SweepBaseline,
) -> Result<Vec<SensitivityRecord>> {
    let id = profile.layer_id.as_str();
    model.activation_index(id)?;
    let base_cfg = RuntimeConfig::baseline();
    let mut out = Vec::with_capacity(grid.points_per_layer());
    for &s in &grid.sparsity_levels {
        for &q in &grid.precisions {
            let wrap = |source: Error| Error::Sweep {
                layer: id.to_string(),
                sparsity: s,
                precision: q,
                source: Box::new(source),
            };
            let threshold = threshold_for_sparsity(profile, f64::from(s)).map_err(wrap)?;
            let layer_cfg = LayerRuntimeConfig::new(threshold, q, s).map_err(wrap)?;
            let cfg = base_cfg.clone().with(model, id, layer_cfg).map_err(wrap)?;
            let changed = changed_layers(&cfg, &base_cfg);
            if changed.iter().any(|l| *l != id) {
                return Err(wrap(Error::Internal(format!(
                    "sweep changed layers other than {id}: {changed:?}"
                ))));
            }
            let accuracy = if threshold == 0.0 && q == Precision::Fp32 {
                baseline.accuracy
            } else {
                evaluate_accuracy(model, &cfg, eval).map_err(wrap)?
            };
            let memory_bytes = memory_cost(model, &cfg).map_err(wrap)?.total_bytes;
            out.push(SensitivityRecord {
                layer_id: id.to_string(),
                sparsity: s,
                threshold,
                precision: q,
                accuracy,
                memory_bytes,
                memory_saved_bytes: baseline.memory_bytes as i64 - memory_bytes as i64,
            });
        }
    }
    Ok(out)
}

/// Sweeps every activation layer. `profiles` must cover each activation
/// layer of `model`; order does not matter.
pub fn analyze(
    model: &Model,
    eval: &Dataset,
    profiles: &[CalibrationProfile],
    grid: &SweepGrid,
) -> Result<SensitivityTable> {
    let ids = model.activation_ids();
    let ordered = order_profiles(&ids, profiles)?;
    let baseline = SweepBaseline::measure(model, eval)?;
    let mut records = Vec::with_capacity(ids.len() * grid.points_per_layer());
    for p in ordered {
        records.extend(analyze_layer(model, eval, p, grid, baseline)?);
    }
    SensitivityTable::new(
        baseline.accuracy,
        baseline.memory_bytes,
        ids.iter().map(|s| s.to_string()).collect(),
        grid.clone(),
        records,
    )
}

/// Profiles rearranged to follow `ids`.
pub fn order_profiles<'a>(
    ids: &[&str],
    profiles: &'a [CalibrationProfile],
) -> Result<Vec<&'a CalibrationProfile>> {
    ids.iter()
        .map(|id| {
            profiles.iter().find(|p| p.layer_id == *id).ok_or_else(|| {
                Error::InvalidArgument(format!("no calibration profile for layer {id}"))
            })
        })
        .collect()
}
