//! CSV and JSON forms of profiles, histograms, sensitivity tables, plans,
//! cost reports and sweeps.

use std::fs;
use std::path::Path;

use adaptact_core::planner::{Assignment, Budget, Candidate, CostReport, Plan};
use adaptact_core::tensor::{histogram, HistogramBin};
use adaptact_core::{
    CalibrationProfile, LayerKind, Model, Precision, PrecisionKind, SensitivityRecord,
    SensitivityTable, SweepGrid,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points in a serialized profile CDF.
pub const QUANTILE_POINTS: usize = 1001;

pub(crate) mod precision_str {
    use adaptact_core::Precision;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Precision, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(p.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Precision, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.into(),
        source,
    }
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize()
        .map(|row| row.map_err(csv_err(path)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileDto {
    pub layer_id: String,
    /// Nearest-rank quantiles at `0, 0.001, ..., 1`.
    pub quantiles: Vec<f32>,
    pub baseline_zero_fraction: f64,
    pub sample_count: usize,
    /// Values seen before reservoir subsampling.
    pub observed: u64,
}

impl From<&CalibrationProfile> for ProfileDto {
    fn from(p: &CalibrationProfile) -> Self {
        Self {
            layer_id: p.layer_id.clone(),
            quantiles: p.quantile_grid(QUANTILE_POINTS),
            baseline_zero_fraction: p.baseline_zero_fraction,
            sample_count: p.sample_count(),
            observed: p.observed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bin_lo: f32,
    pub bin_hi: f32,
    pub count: u64,
}

impl From<&HistogramBin> for HistogramRow {
    fn from(b: &HistogramBin) -> Self {
        Self {
            bin_lo: b.lo,
            bin_hi: b.hi,
            count: b.count,
        }
    }
}

/// Histogram of a layer's baseline (plain ReLU) outputs over its profile;
/// the first row is the zero bin.
pub fn output_histogram(p: &CalibrationProfile, bins: usize) -> Result<Vec<HistogramRow>> {
    let outputs: Vec<f32> = p
        .samples()
        .iter()
        .map(|&v| adaptact_core::relu(v))
        .collect();
    Ok(histogram(&outputs, bins)?
        .iter()
        .map(HistogramRow::from)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub layer_id: String,
    pub s: f32,
    #[serde(rename = "T")]
    pub threshold: f32,
    #[serde(with = "precision_str")]
    pub q: Precision,
    pub q_bits: u32,
    pub q_kind: String,
    pub accuracy: f64,
    pub memory_bytes: u64,
    pub memory_saved_bytes: i64,
}

fn kind_name(k: PrecisionKind) -> &'static str {
    match k {
        PrecisionKind::Float => "float",
        PrecisionKind::Integer => "integer",
    }
}

impl From<&SensitivityRecord> for SensitivityRow {
    fn from(r: &SensitivityRecord) -> Self {
        Self {
            layer_id: r.layer_id.clone(),
            s: r.sparsity,
            threshold: r.threshold,
            q: r.precision,
            q_bits: r.precision.bits(),
            q_kind: kind_name(r.precision.kind()).into(),
            accuracy: r.accuracy,
            memory_bytes: r.memory_bytes,
            memory_saved_bytes: r.memory_saved_bytes,
        }
    }
}

impl SensitivityRow {
    fn into_record(self) -> SensitivityRecord {
        SensitivityRecord {
            layer_id: self.layer_id,
            sparsity: self.s,
            threshold: self.threshold,
            precision: self.q,
            accuracy: self.accuracy,
            memory_bytes: self.memory_bytes,
            memory_saved_bytes: self.memory_saved_bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTableDto {
    pub baseline_accuracy: f64,
    pub baseline_memory_bytes: u64,
    pub layers: Vec<String>,
    pub sparsity_levels: Vec<f32>,
    pub precisions: Vec<String>,
    pub records: Vec<SensitivityRow>,
}

impl From<&SensitivityTable> for SensitivityTableDto {
    fn from(t: &SensitivityTable) -> Self {
        Self {
            baseline_accuracy: t.baseline_accuracy,
            baseline_memory_bytes: t.baseline_memory_bytes,
            layers: t.layer_ids().to_vec(),
            sparsity_levels: t.grid().sparsity_levels().to_vec(),
            precisions: t
                .grid()
                .precisions()
                .iter()
                .map(|p| p.name().to_string())
                .collect(),
            records: t.records().iter().map(SensitivityRow::from).collect(),
        }
    }
}

impl SensitivityTableDto {
    pub fn into_table(self) -> Result<SensitivityTable> {
        let precisions = self
            .precisions
            .iter()
            .map(|p| p.parse())
            .collect::<adaptact_core::Result<Vec<Precision>>>()?;
        let grid = SweepGrid::new(self.sparsity_levels, precisions)?;
        let records = self
            .records
            .into_iter()
            .map(SensitivityRow::into_record)
            .collect();
        Ok(SensitivityTable::new(
            self.baseline_accuracy,
            self.baseline_memory_bytes,
            self.layers,
            grid,
            records,
        )?)
    }
}

pub fn write_sensitivity_csv(path: impl AsRef<Path>, t: &SensitivityTable) -> Result<()> {
    let rows: Vec<SensitivityRow> = t.records().iter().map(SensitivityRow::from).collect();
    write_csv(path, &rows)
}

/// Rebuilds a table from its CSV form. Layers, levels and precisions keep
/// their order of first appearance; the baseline comes from the `(0, FP32)`
/// rows.
pub fn read_sensitivity_csv(path: impl AsRef<Path>) -> Result<SensitivityTable> {
    let path = path.as_ref();
    let rows: Vec<SensitivityRow> = read_csv(path)?;
    let base = rows
        .iter()
        .find(|r| r.s == 0.0 && r.q == Precision::Fp32)
        .ok_or_else(|| Error::format(path, "no baseline (s = 0, FP32) row"))?;
    let (baseline_accuracy, baseline_memory_bytes) = (base.accuracy, base.memory_bytes);
    let mut layers: Vec<String> = Vec::new();
    let mut levels: Vec<f32> = Vec::new();
    let mut precisions: Vec<Precision> = Vec::new();
    for r in &rows {
        if !layers.contains(&r.layer_id) {
            layers.push(r.layer_id.clone());
        }
        if !levels.contains(&r.s) {
            levels.push(r.s);
        }
        if !precisions.contains(&r.q) {
            precisions.push(r.q);
        }
        if r.q_bits != r.q.bits() {
            return Err(Error::format(
                path,
                format!("row for {} says {} has {} bits", r.layer_id, r.q, r.q_bits),
            ));
        }
    }
    let grid = SweepGrid::new(levels, precisions)?;
    let records = rows.into_iter().map(SensitivityRow::into_record).collect();
    SensitivityTable::new(
        baseline_accuracy,
        baseline_memory_bytes,
        layers,
        grid,
        records,
    )
    .map_err(|e| Error::format(path, e.to_string()))
}

/// Reads a table from `.csv` or `.json`, chosen by extension.
pub fn read_sensitivity(path: impl AsRef<Path>) -> Result<SensitivityTable> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => read_json::<SensitivityTableDto>(path)?
            .into_table()
            .map_err(|e| Error::format(path, e.to_string())),
        _ => read_sensitivity_csv(path),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetDto {
    pub memory_bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<f64>,
}

impl From<&Budget> for BudgetDto {
    fn from(b: &Budget) -> Self {
        Self {
            memory_bytes: b.memory_bytes,
            latency: b.latency,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineDto {
    pub memory_bytes: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentDto {
    pub layer_id: String,
    pub s: f32,
    #[serde(rename = "T")]
    pub threshold: f32,
    #[serde(with = "precision_str")]
    pub precision: Precision,
    pub accuracy_drop: f64,
    pub memory_saved_bytes: i64,
}

impl From<&Assignment> for AssignmentDto {
    fn from(a: &Assignment) -> Self {
        Self {
            layer_id: a.layer_id.clone(),
            s: a.sparsity,
            threshold: a.threshold,
            precision: a.precision,
            accuracy_drop: a.accuracy_drop,
            memory_saved_bytes: a.memory_saved_bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDto {
    pub layer_id: String,
    pub s: f32,
    #[serde(with = "precision_str")]
    pub precision: Precision,
    pub score: f64,
    pub accuracy_drop: f64,
    pub memory_saved_bytes: i64,
}

impl From<&Candidate> for CandidateDto {
    fn from(c: &Candidate) -> Self {
        Self {
            layer_id: c.layer_id.clone(),
            s: c.sparsity,
            precision: c.precision,
            score: c.score,
            accuracy_drop: c.accuracy_drop,
            memory_saved_bytes: c.memory_saved_bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedDto {
    pub memory_bytes: u64,
    pub latency_proxy: f64,
    /// Sum of isolated per-layer drops; an additive estimate.
    pub accuracy_drop_sum: f64,
    pub accuracy_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDto {
    pub budget: BudgetDto,
    pub baseline: BaselineDto,
    pub assignments: Vec<AssignmentDto>,
    pub projected: ProjectedDto,
    /// Accuracy of the whole plan measured on the evaluation set, if requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_accuracy: Option<f64>,
    pub provenance: Vec<CandidateDto>,
}

impl PlanDto {
    pub fn new(plan: &Plan, budget: &Budget, baseline_accuracy: f64) -> Self {
        Self {
            budget: budget.into(),
            baseline: BaselineDto {
                memory_bytes: plan.baseline_memory_bytes,
                accuracy: baseline_accuracy,
            },
            assignments: plan.assignments.iter().map(AssignmentDto::from).collect(),
            projected: ProjectedDto {
                memory_bytes: plan.projected_memory_bytes,
                latency_proxy: plan.projected_latency,
                accuracy_drop_sum: plan.projected_accuracy_drop_sum,
                accuracy_estimate: (baseline_accuracy - plan.projected_accuracy_drop_sum).max(0.0),
            },
            joint_accuracy: None,
            provenance: plan.provenance.iter().map(CandidateDto::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCostRow {
    pub layer_id: String,
    pub kind: String,
    pub output_shape: String,
    pub params: u64,
    pub param_bytes: u64,
    pub output_elements: u64,
    #[serde(with = "precision_str")]
    pub output_precision: Precision,
    pub activation_bytes: u64,
    pub macs: u64,
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostDto {
    pub model: String,
    pub param_bytes: u64,
    pub activation_bytes: u64,
    pub total_bytes: u64,
    pub total_mib: f64,
    pub latency_proxy: f64,
    pub layers: Vec<LayerCostRow>,
}

pub const MIB: f64 = 1024.0 * 1024.0;

impl CostDto {
    pub fn new(model: &Model, cost: &CostReport) -> Self {
        let layers = model
            .layers()
            .iter()
            .zip(&cost.layers)
            .map(|(spec, c)| LayerCostRow {
                layer_id: c.id.clone(),
                kind: spec.kind.name().into(),
                output_shape: spec
                    .output_shape
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join("x"),
                params: c.params,
                param_bytes: c.param_bytes,
                output_elements: c.output_elements,
                output_precision: c.output_precision,
                activation_bytes: c.activation_bytes,
                macs: c.macs,
                latency: c.latency,
            })
            .collect();
        Self {
            model: model.name().into(),
            param_bytes: cost.param_bytes,
            activation_bytes: cost.activation_bytes,
            total_bytes: cost.total_bytes,
            total_mib: cost.total_bytes as f64 / MIB,
            latency_proxy: cost.latency_proxy,
            layers,
        }
    }

    /// Fixed-width layer table for terminals.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<24} {:<16} {:>14} {:>12} {:>12} {:>6} {:>12} {:>14}\n",
            "layer", "kind", "output", "params", "param_B", "prec", "act_B", "macs"
        );
        for l in &self.layers {
            out += &format!(
                "{:<24} {:<16} {:>14} {:>12} {:>12} {:>6} {:>12} {:>14}\n",
                l.layer_id,
                l.kind,
                l.output_shape,
                l.params,
                l.param_bytes,
                l.output_precision.name(),
                l.activation_bytes,
                l.macs
            );
        }
        out += &format!(
            "params {} B, activations {} B, total {} B ({:.2} MiB), latency proxy {:.4e}\n",
            self.param_bytes,
            self.activation_bytes,
            self.total_bytes,
            self.total_mib,
            self.latency_proxy
        );
        out
    }
}

/// Number of layers of each kind, for summaries.
pub fn kind_counts(model: &Model) -> Vec<(&'static str, usize)> {
    let mut out: Vec<(&'static str, usize)> = Vec::new();
    for l in model.layers() {
        let name = l.kind.name();
        match out.iter_mut().find(|(n, _)| *n == name) {
            Some((_, c)) => *c += 1,
            None => out.push((name, 1)),
        }
    }
    out
}

pub fn activation_count(model: &Model) -> usize {
    model
        .layers()
        .iter()
        .filter(|l| l.kind == LayerKind::AaRelu)
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub budget_bytes: u64,
    /// `ok` or `infeasible`.
    pub status: String,
    pub memory_bytes: u64,
    pub latency_proxy: f64,
    pub projected_accuracy: f64,
    /// Empty unless joint evaluation was requested.
    pub joint_accuracy: Option<f64>,
    pub assigned_layers: usize,
}
