//! Memory/latency cost model and budget-constrained selection of per-layer
//! activation settings.
//!
//! Memory is parameters plus every layer output, each counted at the bytes of
//! its storage format (batch 1). Weights are always FP32; activation layers
//! store their output at the configured precision. Zeros are not discounted:
//! sparsity only reduces the latency proxy.
//!
//! The greedy selector walks a rank list of candidates ordered by memory
//! saved per unit of accuracy lost, which is the usual trade-off heuristic
//! for this kind of knapsack. [`brute_force_select`] enumerates every
//! assignment and serves as its test oracle.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::graph::{LayerKind, LayerRuntimeConfig, Model, RuntimeConfig, Source};
use crate::sensitivity::SensitivityTable;
use crate::tensor::Precision;

/// Floor on the accuracy drop in the score denominator.
pub const SCORE_EPSILON: f64 = 1e-4;

/// Largest assignment count [`brute_force_select`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerCost {
    pub id: String,
    pub params: u64,
    pub param_bytes: u64,
    pub output_elements: u64,
    pub output_precision: Precision,
    pub activation_bytes: u64,
    pub macs: u64,
    /// `macs` scaled by the precision and density of the producing activation.
    pub latency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub param_bytes: u64,
    pub activation_bytes: u64,
    pub total_bytes: u64,
    /// Unitless and uncalibrated: MACs weighted by input precision and density.
    pub latency_proxy: f64,
    pub layers: Vec<LayerCost>,
}

/// Activation layer whose values reach `src` unchanged apart from max
/// pooling or flattening, which select or reshape without mixing.
fn producing_activation(model: &Model, mut src: Source) -> Option<usize> {
    let layers = model.layers();
    while let Source::Layer(j) = src {
        let l = &layers[j];
        match l.kind {
            LayerKind::AaRelu => return Some(j),
            LayerKind::MaxPool { .. } | LayerKind::Flatten if l.add.is_none() => src = l.input,
            _ => return None,
        }
    }
    None
}

/// Per-layer costs under `cfg`.
pub fn layer_costs(model: &Model, cfg: &RuntimeConfig) -> Vec<LayerCost> {
    let layers = model.layers();
    layers
        .iter()
        .map(|l| {
            let output_precision = if l.kind.is_activation() {
                cfg.get(&l.id).precision
            } else {
                Precision::Fp32
            };
            let params = l.param_count() as u64;
            let macs = l.macs();
            let factor = match producing_activation(model, l.input) {
                Some(j) => {
                    let a = cfg.get(&layers[j].id);
                    f64::from(a.precision.bits()) / 32.0 * (1.0 - f64::from(a.sparsity))
                }
                None => 1.0,
            };
            LayerCost {
                id: l.id.clone(),
                params,
                param_bytes: Precision::Fp32.storage_bytes(params as usize),
                output_elements: l.output_len() as u64,
                output_precision,
                activation_bytes: output_precision.storage_bytes(l.output_len()),
                macs,
                latency: macs as f64 * factor,
            }
        })
        .collect()
}

/// Memory and latency of `model` configured with `cfg`.
pub fn memory_cost(model: &Model, cfg: &RuntimeConfig) -> Result<CostReport> {
    cfg.validate(model)?;
    let layers = layer_costs(model, cfg);
    let param_bytes = layers.iter().map(|l| l.param_bytes).sum::<u64>();
    let activation_bytes = layers.iter().map(|l| l.activation_bytes).sum::<u64>();
    let latency_proxy = layers.iter().map(|l| l.latency).sum();
    Ok(CostReport {
        param_bytes,
        activation_bytes,
        total_bytes: param_bytes + activation_bytes,
        latency_proxy,
        layers,
    })
}

pub fn latency_proxy(model: &Model, cfg: &RuntimeConfig) -> Result<f64> {
    Ok(memory_cost(model, cfg)?.latency_proxy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub memory_bytes: u64,
    pub latency: Option<f64>,
}

impl Budget {
    pub fn new(memory_bytes: u64, latency: Option<f64>) -> Result<Self> {
        if memory_bytes == 0 {
            return Err(Error::InvalidArgument(
                "memory budget must be positive".into(),
            ));
        }
        if let Some(l) = latency {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "latency budget must be finite and non-negative, got {l}"
                )));
            }
        }
        Ok(Self {
            memory_bytes,
            latency,
        })
    }

    pub fn memory(memory_bytes: u64) -> Result<Self> {
        Self::new(memory_bytes, None)
    }

    fn memory_met(&self, memory: u64) -> bool {
        memory <= self.memory_bytes
    }

    fn latency_met(&self, latency: f64) -> bool {
        self.latency.is_none_or(|b| latency <= b)
    }

    pub fn is_met(&self, cost: &CostReport) -> bool {
        self.memory_met(cost.total_bytes) && self.latency_met(cost.latency_proxy)
    }
}

/// One scored entry of the rank list.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub layer_id: String,
    /// Position of the layer among the table's activation layers.
    pub layer_order: usize,
    pub sparsity: f32,
    pub threshold: f32,
    pub precision: Precision,
    /// Baseline accuracy minus the record's accuracy; negative when the
    /// setting improved accuracy.
    pub accuracy_drop: f64,
    pub memory_saved_bytes: i64,
    pub score: f64,
}

impl Candidate {
    pub fn runtime_config(&self) -> Result<LayerRuntimeConfig> {
        LayerRuntimeConfig::new(self.threshold, self.precision, self.sparsity)
    }
}

fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.accuracy_drop.total_cmp(&b.accuracy_drop))
        .then(a.layer_order.cmp(&b.layer_order))
        .then(b.sparsity.total_cmp(&a.sparsity))
        .then(a.precision.bits().cmp(&b.precision.bits()))
}

/// Scores every non-baseline record that saves memory and sorts them best
/// first: `score = memory_saved / max(accuracy_drop, 1e-4)`.
///
/// Ties go to the smaller drop, then earlier layer, then larger sparsity,
/// then fewer bits.
pub fn build_ranklist(table: &SensitivityTable) -> Result<Vec<Candidate>> {
    if table.records().is_empty() {
        return Err(Error::InvalidArgument("sensitivity table is empty".into()));
    }
    let mut out: Vec<Candidate> = table
        .records()
        .iter()
        .filter(|r| !r.is_baseline() && r.memory_saved_bytes > 0)
        .map(|r| {
            let accuracy_drop = table.baseline_accuracy - r.accuracy;
            Candidate {
                layer_id: r.layer_id.clone(),
                layer_order: table.layer_position(&r.layer_id).unwrap_or(usize::MAX),
                sparsity: r.sparsity,
                threshold: r.threshold,
                precision: r.precision,
                accuracy_drop,
                memory_saved_bytes: r.memory_saved_bytes,
                score: r.memory_saved_bytes as f64 / accuracy_drop.max(SCORE_EPSILON),
            }
        })
        .collect();
    out.sort_by(rank_order);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub layer_id: String,
    pub sparsity: f32,
    pub threshold: f32,
    pub precision: Precision,
    pub accuracy_drop: f64,
    pub memory_saved_bytes: i64,
}

/// Per-layer settings chosen for a budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    /// At most one entry per layer, in layer order.
    pub assignments: Vec<Assignment>,
    pub baseline_memory_bytes: u64,
    pub projected_memory_bytes: u64,
    pub projected_latency: f64,
    /// Sum of per-layer drops measured in isolation, with measured gains
    /// counted as zero; an additive estimate, not a joint measurement.
    pub projected_accuracy_drop_sum: f64,
    /// Accepted candidates in acceptance order. A layer appears more than once
    /// when a later candidate replaced an earlier one.
    pub provenance: Vec<Candidate>,
}

impl Plan {
    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn runtime_config(&self, model: &Model) -> Result<RuntimeConfig> {
        let mut cfg = RuntimeConfig::baseline();
        for a in &self.assignments {
            cfg.set(
                model,
                &a.layer_id,
                LayerRuntimeConfig::new(a.threshold, a.precision, a.sparsity)?,
            )?;
        }
        Ok(cfg)
    }

    fn build(
        model: &Model,
        chosen: &BTreeMap<usize, Candidate>,
        provenance: Vec<Candidate>,
        baseline_memory_bytes: u64,
    ) -> Result<(Plan, CostReport)> {
        let assignments: Vec<Assignment> = chosen
            .values()
            .map(|c| Assignment {
                layer_id: c.layer_id.clone(),
                sparsity: c.sparsity,
                threshold: c.threshold,
                precision: c.precision,
                accuracy_drop: c.accuracy_drop,
                memory_saved_bytes: c.memory_saved_bytes,
            })
            .collect();
        let mut plan = Plan {
            projected_accuracy_drop_sum: assignments
                .iter()
                .map(|a| projected_drop(a.accuracy_drop))
                .sum(),
            assignments,
            baseline_memory_bytes,
            projected_memory_bytes: 0,
            projected_latency: 0.0,
            provenance,
        };
        let cost = memory_cost(model, &plan.runtime_config(model)?)?;
        plan.projected_memory_bytes = cost.total_bytes;
        plan.projected_latency = cost.latency_proxy;
        Ok((plan, cost))
    }
}

/// A layer's contribution to the projected drop. Gains measured in isolation
/// are not credited, so the projection never improves by adding a setting.
pub fn projected_drop(accuracy_drop: f64) -> f64 {
    accuracy_drop.max(0.0)
}

/// Largest saving per layer (ties: smaller drop, then rank order).
fn max_saving_per_layer(ranklist: &[Candidate]) -> BTreeMap<usize, Candidate> {
    let mut best: BTreeMap<usize, Candidate> = BTreeMap::new();
    for c in ranklist {
        let replace = match best.get(&c.layer_order) {
            None => true,
            Some(b) => {
                c.memory_saved_bytes > b.memory_saved_bytes
                    || (c.memory_saved_bytes == b.memory_saved_bytes
                        && c.accuracy_drop < b.accuracy_drop)
            }
        };
        if replace {
            best.insert(c.layer_order, c.clone());
        }
    }
    best
}

/// Plan taking every layer's largest memory saving.
pub fn min_memory_plan(model: &Model, ranklist: &[Candidate]) -> Result<Plan> {
    let baseline = memory_cost(model, &RuntimeConfig::baseline())?;
    let best = max_saving_per_layer(ranklist);
    let provenance = best.values().cloned().collect();
    Ok(Plan::build(model, &best, provenance, baseline.total_bytes)?.0)
}

fn infeasible(model: &Model, ranklist: &[Candidate], budget: &Budget) -> Error {
    match min_memory_plan(model, ranklist) {
        Ok(floor) => Error::Infeasible {
            budget_bytes: budget.memory_bytes,
            best_memory_bytes: floor.projected_memory_bytes,
            latency_budget: budget.latency,
            best_latency: floor.projected_latency,
        },
        Err(e) => e,
    }
}

/// Greedy selection over the rank list.
///
/// Walks the list best first and accepts a candidate when its layer has no
/// setting yet, re-costing the configured model after each acceptance and
/// stopping once the budget holds. If the list runs out first, a second walk
/// lets a candidate replace its layer's setting when it saves strictly more
/// memory (or, once memory fits, lowers latency without breaking the memory
/// budget). The second walk only runs when the first one fails, and it makes
/// the selector reach every layer's largest saving before declaring a budget
/// infeasible.
pub fn greedy_select(model: &Model, ranklist: &[Candidate], budget: &Budget) -> Result<Plan> {
    let baseline = memory_cost(model, &RuntimeConfig::baseline())?;
    let base_bytes = baseline.total_bytes;
    let mut chosen: BTreeMap<usize, Candidate> = BTreeMap::new();
    let mut provenance: Vec<Candidate> = Vec::new();
    if budget.is_met(&baseline) {
        return Ok(Plan::build(model, &chosen, provenance, base_bytes)?.0);
    }

    for c in ranklist {
        if chosen.contains_key(&c.layer_order) {
            continue;
        }
        chosen.insert(c.layer_order, c.clone());
        provenance.push(c.clone());
        let (plan, cost) = Plan::build(model, &chosen, provenance.clone(), base_bytes)?;
        if budget.is_met(&cost) {
            return Ok(plan);
        }
    }

    let mut current = Plan::build(model, &chosen, provenance.clone(), base_bytes)?.1;
    for c in ranklist {
        let Some(cur) = chosen.get(&c.layer_order) else {
            continue;
        };
        let memory_short = !budget.memory_met(current.total_bytes);
        if memory_short && c.memory_saved_bytes <= cur.memory_saved_bytes {
            continue;
        }
        let mut trial = chosen.clone();
        trial.insert(c.layer_order, c.clone());
        let mut trial_prov = provenance.clone();
        trial_prov.push(c.clone());
        let (plan, cost) = Plan::build(model, &trial, trial_prov.clone(), base_bytes)?;
        if !memory_short
            && !(cost.latency_proxy < current.latency_proxy && budget.memory_met(cost.total_bytes))
        {
            continue;
        }
        chosen = trial;
        provenance = trial_prov;
        if budget.is_met(&cost) {
            return Ok(plan);
        }
        current = cost;
    }
    Err(infeasible(model, ranklist, budget))
}

/// Exact minimiser of the projected accuracy drop subject to the budget, over
/// the same candidate universe as [`greedy_select`] (each layer keeps its
/// baseline or takes one rank-list candidate).
///
/// Ties go to lower memory, then to the lexicographically first assignment
/// (layers in order; within a layer baseline first, then table order).
pub fn brute_force_select(
    model: &Model,
    table: &SensitivityTable,
    budget: &Budget,
) -> Result<Plan> {
    let ranklist = build_ranklist(table)?;
    let baseline = memory_cost(model, &RuntimeConfig::baseline())?;

    // options per layer in table order
    let mut options: Vec<Vec<Candidate>> = vec![Vec::new(); table.layer_ids().len()];
    for r in table.records() {
        if let Some(c) = ranklist.iter().find(|c| {
            c.layer_id == r.layer_id && c.sparsity == r.sparsity && c.precision == r.precision
        }) {
            options[c.layer_order].push(c.clone());
        }
    }
    let count = options
        .iter()
        .try_fold(1u128, |acc, o| acc.checked_mul(o.len() as u128 + 1))
        .unwrap_or(u128::MAX);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge(count));
    }

    let base_latency = baseline.latency_proxy;
    let mut latency_delta: Vec<Vec<f64>> = Vec::with_capacity(options.len());
    for opts in &options {
        let mut deltas = Vec::with_capacity(opts.len());
        for c in opts {
            let cfg = RuntimeConfig::baseline().with(model, &c.layer_id, c.runtime_config()?)?;
            deltas.push(latency_proxy(model, &cfg)? - base_latency);
        }
        latency_delta.push(deltas);
    }

    // odometer over choice indices, first layer most significant, so the
    // enumeration is lexicographic and the first optimum found wins ties
    let n = options.len();
    let mut digits = vec![0usize; n];
    let mut best: Option<(f64, u64, Vec<usize>)> = None;
    loop {
        let mut mem = baseline.total_bytes as i128;
        let mut lat = base_latency;
        let mut drop = 0.0f64;
        for (l, &d) in digits.iter().enumerate() {
            if d > 0 {
                let c = &options[l][d - 1];
                mem -= i128::from(c.memory_saved_bytes);
                lat += latency_delta[l][d - 1];
                drop += projected_drop(c.accuracy_drop);
            }
        }
        let mem = mem.max(0) as u64;
        if budget.memory_met(mem) && budget.latency_met(lat) {
            let better = match &best {
                None => true,
                Some((bd, bm, _)) => drop < *bd || (drop == *bd && mem < *bm),
            };
            if better {
                best = Some((drop, mem, digits.clone()));
            }
        }
        // advance
        let mut pos = n;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            if digits[pos] < options[pos].len() {
                digits[pos] += 1;
                digits[pos + 1..].iter_mut().for_each(|d| *d = 0);
                break;
            }
            if pos == 0 {
                pos = usize::MAX;
                break;
            }
        }
        if pos == usize::MAX || n == 0 {
            break;
        }
    }

    let Some((_, _, digits)) = best else {
        return Err(infeasible(model, &ranklist, budget));
    };
    let mut chosen = BTreeMap::new();
    for (l, &d) in digits.iter().enumerate() {
        if d > 0 {
            chosen.insert(l, options[l][d - 1].clone());
        }
    }
    let provenance = chosen.values().cloned().collect();
    Ok(Plan::build(model, &chosen, provenance, baseline.total_bytes)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{LayerDef, LayerKind};
    use crate::sensitivity::{SensitivityRecord, SweepGrid};
    use alloc::string::ToString;

    fn dense_act(n: usize) -> Model {
        // in 4 -> (dense 4 -> act) x n -> dense 4
        let mut defs = Vec::new();
        for i in 0..n {
            defs.push(LayerDef::new(
                format!("fc{i}"),
                LayerKind::Dense { out_features: 4 },
            ));
            defs.push(LayerDef::new(format!("act{i}"), LayerKind::AaRelu));
        }
        defs.push(LayerDef::new("out", LayerKind::Dense { out_features: 4 }));
        Model::new("d", vec![4], 4, defs, None).unwrap()
    }

    #[test]
    fn dense_layer_costs() {
        let defs = vec![
            LayerDef::new("fc", LayerKind::Dense { out_features: 4 }),
            LayerDef::new("act", LayerKind::AaRelu),
        ];
        let m = Model::new("one", vec![4], 4, defs, None).unwrap();
        let base = memory_cost(&m, &RuntimeConfig::baseline()).unwrap();
        // dense: 20 params * 4 + 4 outputs * 4; act: 4 outputs * 4
        assert_eq!(base.param_bytes, 80);
        assert_eq!(
            base.layers[0].param_bytes + base.layers[0].activation_bytes,
            96
        );
        assert_eq!(base.total_bytes, 96 + 16);
        let cfg = RuntimeConfig::baseline()
            .with(
                &m,
                "act",
                LayerRuntimeConfig::new(0.0, Precision::Int2, 0.0).unwrap(),
            )
            .unwrap();
        let int2 = memory_cost(&m, &cfg).unwrap();
        assert_eq!(int2.layers[1].activation_bytes, 1);
        assert_eq!(int2.total_bytes, 96 + 1);
    }

    #[test]
    fn latency_proxy_behaviour() {
        let m = dense_act(2);
        let base = memory_cost(&m, &RuntimeConfig::baseline()).unwrap();
        let macs: u64 = m.layers().iter().map(|l| l.macs()).sum();
        assert_eq!(base.latency_proxy, macs as f64);
        assert_eq!(macs, 3 * 16);
        let cfg = RuntimeConfig::baseline()
            .with(
                &m,
                "act0",
                LayerRuntimeConfig::new(1.0, Precision::Fp32, 1.0).unwrap(),
            )
            .unwrap();
        let c = memory_cost(&m, &cfg).unwrap();
        assert_eq!(c.layers[2].latency, 0.0);
        assert_eq!(c.latency_proxy, 32.0);
        let cfg = RuntimeConfig::baseline()
            .with(
                &m,
                "act1",
                LayerRuntimeConfig::new(0.5, Precision::Fp8, 0.5).unwrap(),
            )
            .unwrap();
        assert_eq!(latency_proxy(&m, &cfg).unwrap(), 32.0 + 16.0 * 0.25 * 0.5);
    }

    fn synthetic_table(m: &Model, accs: &[&[(f32, Precision, f64)]]) -> SensitivityTable {
        let base = memory_cost(m, &RuntimeConfig::baseline())
            .unwrap()
            .total_bytes;
        let ids: Vec<String> = m.activation_ids().iter().map(|s| s.to_string()).collect();
        let mut sparsity: Vec<f32> = Vec::new();
        let mut precisions: Vec<Precision> = Vec::new();
        for layer in accs {
            for &(s, q, _) in layer.iter() {
                if !sparsity.contains(&s) {
                    sparsity.push(s);
                }
                if !precisions.contains(&q) {
                    precisions.push(q);
                }
            }
        }
        let mut records = Vec::new();
        for (id, layer) in ids.iter().zip(accs) {
            for &s in &sparsity {
                for &q in &precisions {
                    let acc = layer
                        .iter()
                        .find(|(ls, lq, _)| *ls == s && *lq == q)
                        .map(|r| r.2)
                        .unwrap_or(if s == 0.0 && q == Precision::Fp32 {
                            0.9
                        } else {
                            0.0
                        });
                    let cfg = RuntimeConfig::baseline()
                        .with(m, id, LayerRuntimeConfig::new(s, q, s).unwrap())
                        .unwrap();
                    let mem = memory_cost(m, &cfg).unwrap().total_bytes;
                    records.push(SensitivityRecord {
                        layer_id: id.clone(),
                        sparsity: s,
                        threshold: s,
                        precision: q,
                        accuracy: acc,
                        memory_bytes: mem,
                        memory_saved_bytes: base as i64 - mem as i64,
                    });
                }
            }
        }
        let grid = SweepGrid::new(sparsity, precisions).unwrap();
        SensitivityTable::new(0.9, base, ids, grid, records).unwrap()
    }

    #[test]
    fn ranklist_prefers_smaller_drop() {
        let m = dense_act(2);
        let t = synthetic_table(
            &m,
            &[
                &[(0.0, Precision::Fp32, 0.9), (0.0, Precision::Fp8, 0.89)],
                &[(0.0, Precision::Fp32, 0.9), (0.0, Precision::Fp8, 0.85)],
            ],
        );
        let r = build_ranklist(&t).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].layer_id, "act0");
        assert!((r[0].accuracy_drop - 0.01).abs() < 1e-12);
        assert!(r[0].score > r[1].score);
    }

    #[test]
    fn improved_accuracy_scores_with_epsilon() {
        let m = dense_act(2);
        let t = synthetic_table(
            &m,
            &[
                &[(0.0, Precision::Fp32, 0.9), (0.0, Precision::Fp16, 0.88)],
                &[(0.0, Precision::Fp32, 0.9), (0.0, Precision::Fp16, 0.92)],
            ],
        );
        let r = build_ranklist(&t).unwrap();
        assert_eq!(r[0].layer_id, "act1");
        assert_eq!(r[0].score, r[0].memory_saved_bytes as f64 / SCORE_EPSILON);
    }

    #[test]
    fn ranklist_drops_baseline_and_zero_saving() {
        let m = dense_act(1);
        let t = synthetic_table(
            &m,
            &[&[
                (0.0, Precision::Fp32, 0.9),
                (0.5, Precision::Fp32, 0.8),
                (0.0, Precision::Int4, 0.88),
                (0.5, Precision::Int4, 0.7),
            ]],
        );
        let r = build_ranklist(&t).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|c| c.precision == Precision::Int4));
    }

    #[test]
    fn greedy_slack_budget_is_empty_plan() {
        let m = dense_act(2);
        let t = synthetic_table(
            &m,
            &[
                &[(0.0, Precision::Fp32, 0.9), (0.0, Precision::Int2, 0.5)],
                &[(0.0, Precision::Fp32, 0.9), (0.0, Precision::Int2, 0.5)],
            ],
        );
        let r = build_ranklist(&t).unwrap();
        let plan =
            greedy_select(&m, &r, &Budget::memory(t.baseline_memory_bytes).unwrap()).unwrap();
        assert!(plan.is_empty());
        assert_eq!(plan.projected_memory_bytes, t.baseline_memory_bytes);
        let oracle =
            brute_force_select(&m, &t, &Budget::memory(t.baseline_memory_bytes).unwrap()).unwrap();
        assert!(oracle.is_empty());
    }

    #[test]
    fn greedy_reports_floor_when_infeasible() {
        let m = dense_act(2);
        let t = synthetic_table(
            &m,
            &[
                &[
                    (0.0, Precision::Fp32, 0.9),
                    (0.0, Precision::Fp16, 0.89),
                    (0.0, Precision::Int2, 0.5),
                ],
                &[
                    (0.0, Precision::Fp32, 0.9),
                    (0.0, Precision::Fp16, 0.89),
                    (0.0, Precision::Int2, 0.5),
                ],
            ],
        );
        let r = build_ranklist(&t).unwrap();
        let floor = t.baseline_memory_bytes - 2 * (16 - 1);
        let err = greedy_select(&m, &r, &Budget::memory(floor - 1).unwrap()).unwrap_err();
        assert!(
            matches!(err, Error::Infeasible { best_memory_bytes, .. } if best_memory_bytes == floor),
            "{err}"
        );
        // exactly the floor is reachable, through the replacement walk
        let plan = greedy_select(&m, &r, &Budget::memory(floor).unwrap()).unwrap();
        assert_eq!(plan.projected_memory_bytes, floor);
        assert!(plan
            .assignments
            .iter()
            .all(|a| a.precision == Precision::Int2));
        let oracle = brute_force_select(&m, &t, &Budget::memory(floor).unwrap()).unwrap();
        assert_eq!(oracle.projected_memory_bytes, floor);
        assert!(brute_force_select(&m, &t, &Budget::memory(floor - 1).unwrap()).is_err());
    }

    #[test]
    fn greedy_stops_as_soon_as_budget_met() {
        let m = dense_act(2);
        let t = synthetic_table(
            &m,
            &[
                &[(0.0, Precision::Fp32, 0.9), (0.0, Precision::Fp8, 0.899)],
                &[(0.0, Precision::Fp32, 0.9), (0.0, Precision::Fp8, 0.89)],
            ],
        );
        let r = build_ranklist(&t).unwrap();
        let budget = Budget::memory(t.baseline_memory_bytes - 12).unwrap();
        let plan = greedy_select(&m, &r, &budget).unwrap();
        assert_eq!(plan.assignments.len(), 1);
        assert_eq!(plan.assignments[0].layer_id, "act0");
        let cfg = plan.runtime_config(&m).unwrap();
        assert_eq!(
            memory_cost(&m, &cfg).unwrap().total_bytes,
            plan.projected_memory_bytes
        );
    }

    #[test]
    fn oracle_single_layer_single_candidate() {
        let m = dense_act(1);
        let t = synthetic_table(
            &m,
            &[&[(0.0, Precision::Fp32, 0.9), (0.0, Precision::Fp16, 0.8)]],
        );
        let budget = Budget::memory(t.baseline_memory_bytes - 1).unwrap();
        let plan = brute_force_select(&m, &t, &budget).unwrap();
        assert_eq!(plan.assignments.len(), 1);
        assert_eq!(plan.assignments[0].precision, Precision::Fp16);
    }

    #[test]
    fn oracle_refuses_large_instances() {
        let m = dense_act(9);
        let layer: &[(f32, Precision, f64)] = &[
            (0.0, Precision::Fp32, 0.9),
            (0.0, Precision::Fp16, 0.8),
            (0.0, Precision::Fp8, 0.8),
            (0.0, Precision::Int4, 0.8),
            (0.0, Precision::Int2, 0.8),
        ];
        let t = synthetic_table(&m, &[layer; 9]);
        let budget = Budget::memory(1).unwrap();
        assert!(
            matches!(brute_force_select(&m, &t, &budget), Err(Error::TooLarge(n)) if n == 5u128.pow(9))
        );
    }

    #[test]
    fn latency_sees_activation_through_pooling() {
        let conv = |c| LayerKind::Conv2d {
            out_channels: c,
            kernel: 3,
            stride: 1,
            padding: 1,
        };
        let defs = vec![
            LayerDef::new("c1", conv(2)),
            LayerDef::new("a1", LayerKind::AaRelu),
            LayerDef::new(
                "p1",
                LayerKind::MaxPool {
                    kernel: 2,
                    stride: 2,
                    padding: 0,
                },
            ),
            LayerDef::new("c2", conv(3)),
            LayerDef::new(
                "gap",
                LayerKind::AvgPool {
                    kernel: 2,
                    stride: 2,
                    padding: 0,
                },
            ),
            LayerDef::new("f", LayerKind::Flatten),
            LayerDef::new("fc", LayerKind::Dense { out_features: 2 }),
        ];
        let m = Model::new("p", vec![1, 4, 4], 2, defs, None).unwrap();
        let base = layer_costs(&m, &RuntimeConfig::baseline());
        let c2_macs = base[3].macs as f64;
        assert_eq!(c2_macs, (3 * 2 * 9 * 2 * 2) as f64);
        let cfg = RuntimeConfig::baseline()
            .with(
                &m,
                "a1",
                LayerRuntimeConfig::new(1.0, Precision::Int4, 1.0).unwrap(),
            )
            .unwrap();
        let costs = layer_costs(&m, &cfg);
        assert_eq!(costs[3].latency, 0.0);
        assert_eq!(costs[0].latency, base[0].latency);
        assert_eq!(costs[6].latency, base[6].latency);
        let cfg = RuntimeConfig::baseline()
            .with(
                &m,
                "a1",
                LayerRuntimeConfig::new(0.1, Precision::Fp8, 0.5).unwrap(),
            )
            .unwrap();
        assert_eq!(layer_costs(&m, &cfg)[3].latency, c2_macs * 0.25 * 0.5);
    }

    #[test]
    fn latency_budget_requires_both() {
        let m = dense_act(1);
        let t = synthetic_table(
            &m,
            &[&[
                (0.0, Precision::Fp32, 0.9),
                (0.0, Precision::Fp16, 0.9),
                (0.5, Precision::Fp16, 0.85),
            ]],
        );
        let r = build_ranklist(&t).unwrap();
        let base = t.baseline_memory_bytes;
        // memory alone is satisfied by FP16; the latency bound needs s = 0.5
        let budget = Budget::new(base, Some(16.0 + 16.0 * 0.5 * 0.5)).unwrap();
        let plan = greedy_select(&m, &r, &budget).unwrap();
        assert_eq!(plan.assignments[0].sparsity, 0.5);
        let oracle = brute_force_select(&m, &t, &budget).unwrap();
        assert_eq!(oracle.assignments[0].sparsity, 0.5);
        assert!(Budget::new(0, None).is_err());
        assert!(Budget::new(1, Some(-1.0)).is_err());
    }
}
