//! Runtime re-planning: budget traces, atomic configuration swaps and the
//! adaptive serving loop.
//!
//! The active configuration is an immutable snapshot behind an `Arc`. Readers
//! clone the `Arc` once per inference and never look at the cell again until
//! the next one, so an inference sees exactly one configuration even while
//! the controller publishes another.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use adaptact_core::graph::argmax;
use adaptact_core::planner::{
    build_ranklist, greedy_select, min_memory_plan, Budget, Candidate, Plan,
};
use adaptact_core::{Dataset, Error as CoreError, Model, RuntimeConfig, SensitivityTable, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::PlanDto;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub generation: u64,
    pub config: RuntimeConfig,
}

/// Single-writer, many-reader holder of the active runtime configuration.
#[derive(Debug)]
pub struct ConfigCell {
    current: RwLock<Arc<Snapshot>>,
    generation: AtomicU64,
}

impl ConfigCell {
    pub fn new(config: RuntimeConfig) -> Self {
        Self {
            current: RwLock::new(Arc::new(Snapshot {
                generation: 0,
                config,
            })),
            generation: AtomicU64::new(0),
        }
    }

    /// The active snapshot; cheap (one `Arc` clone).
    pub fn snapshot(&self) -> Arc<Snapshot> {
        // a poisoned lock still holds a complete snapshot
        Arc::clone(&self.current.read().unwrap_or_else(|e| e.into_inner()))
    }

    /// Installs `config` as one unit and returns its generation.
    pub fn publish(&self, config: RuntimeConfig) -> u64 {
        let mut guard = self.current.write().unwrap_or_else(|e| e.into_inner());
        let generation = self.generation.fetch_add(1, Ordering::SeqCst) + 1;
        *guard = Arc::new(Snapshot { generation, config });
        generation
    }

    pub fn generation(&self) -> u64 {
        self.generation.load(Ordering::SeqCst)
    }
}

/// Output of one inference and the configuration generation it ran under.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub generation: u64,
    pub output: Tensor,
}

/// A shared read-only model plus its swappable configuration.
#[derive(Debug)]
pub struct AdaptiveModel {
    model: Arc<Model>,
    cell: ConfigCell,
}

impl AdaptiveModel {
    pub fn new(model: Arc<Model>) -> Self {
        let cell = ConfigCell::new(model.runtime_config().clone());
        Self { model, cell }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn cell(&self) -> &ConfigCell {
        &self.cell
    }

    pub fn infer(&self, input: &Tensor) -> Result<Inference> {
        let snap = self.cell.snapshot();
        let output = self.model.forward_with(&snap.config, input)?;
        Ok(Inference {
            generation: snap.generation,
            output,
        })
    }

    /// Replaces the whole configuration with `plan`; layers the plan does not
    /// mention go back to baseline. On error nothing changes.
    pub fn swap_config(&self, plan: &Plan) -> Result<u64> {
        let cfg = plan.runtime_config(&self.model)?;
        Ok(self.cell.publish(cfg))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetEvent {
    pub timestamp_ms: u64,
    pub memory_budget_bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_budget: Option<f64>,
}

impl BudgetEvent {
    pub fn budget(&self) -> Result<Budget> {
        Ok(Budget::new(self.memory_budget_bytes, self.latency_budget)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetSignal {
    events: Vec<BudgetEvent>,
}

impl BudgetSignal {
    /// Requires at least one event and strictly increasing timestamps.
    pub fn new(events: Vec<BudgetEvent>) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::Usage("budget signal has no events".into()));
        }
        if let Some(w) = events
            .windows(2)
            .find(|w| w[1].timestamp_ms <= w[0].timestamp_ms)
        {
            return Err(Error::Usage(format!(
                "budget timestamps must increase strictly: {} then {}",
                w[0].timestamp_ms, w[1].timestamp_ms
            )));
        }
        for e in &events {
            e.budget()?;
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[BudgetEvent] {
        &self.events
    }

    /// Parses `timestamp_ms,memory_budget_bytes[,latency_budget]` lines. A
    /// header line and `#` comments are skipped.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut events = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if n == 0 && !line.starts_with(|c: char| c.is_ascii_digit()) {
                continue;
            }
            let bad =
                |what: &str| Error::format(origin, format!("line {}: {what}: {line:?}", n + 1));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if !(2..=3).contains(&fields.len()) {
                return Err(bad("expected 2 or 3 fields"));
            }
            let timestamp_ms = fields[0].parse().map_err(|_| bad("bad timestamp"))?;
            let memory_budget_bytes = fields[1].parse().map_err(|_| bad("bad memory budget"))?;
            let latency_budget = match fields.get(2) {
                Some(v) if !v.is_empty() => Some(v.parse().map_err(|_| bad("bad latency budget"))?),
                _ => None,
            };
            events.push(BudgetEvent {
                timestamp_ms,
                memory_budget_bytes,
                latency_budget,
            });
        }
        Self::new(events)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub event: usize,
    pub timestamp_ms: u64,
    pub memory_budget_bytes: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_budget: Option<f64>,
    /// `ok`, or `infeasible` when the minimum-memory plan was installed.
    pub status: String,
    /// Bytes by which the installed plan exceeds the budget.
    pub shortfall_bytes: u64,
    pub plan: PlanDto,
    pub generation: u64,
    pub replan_micros: u64,
    pub inferences: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerLog {
    pub records: Vec<LogRecord>,
    /// Full passes over a dataset made while the loop ran; always 0.
    pub dataset_passes: u64,
}

impl ControllerLog {
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        for r in &self.records {
            let line = serde_json::to_string(r).map_err(|source| Error::Json {
                path: path.into(),
                source,
            })?;
            writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServeOptions {
    /// Inferences served after each re-plan, cycling through the workload.
    pub inferences_per_event: usize,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            inferences_per_event: 32,
        }
    }
}

/// Plan for one budget from a cached rank list; infeasible budgets fall back
/// to the minimum-memory plan. Returns the plan and the shortfall in bytes.
pub fn replan(
    model: &Model,
    ranklist: &[Candidate],
    budget: &Budget,
) -> Result<(Plan, Option<u64>)> {
    match greedy_select(model, ranklist, budget) {
        Ok(plan) => Ok((plan, None)),
        Err(CoreError::Infeasible { .. }) => {
            let plan = min_memory_plan(model, ranklist)?;
            let short = plan
                .projected_memory_bytes
                .saturating_sub(budget.memory_bytes);
            Ok((plan, Some(short)))
        }
        Err(e) => Err(e.into()),
    }
}

/// Replays `signal`: re-plans from `table` for every event, swaps the plan in
/// and serves part of `workload` under it.
pub fn run_adaptive(
    adaptive: &AdaptiveModel,
    table: &SensitivityTable,
    signal: &BudgetSignal,
    workload: &Dataset,
    opts: ServeOptions,
) -> Result<ControllerLog> {
    let model = adaptive.model();
    if !table.matches_model(model) {
        return Err(CoreError::TableMismatch(format!(
            "table covers layers {:?}, model `{}` has {:?}",
            table.layer_ids(),
            model.name(),
            model.activation_ids()
        ))
        .into());
    }
    if workload.is_empty() && opts.inferences_per_event > 0 {
        return Err(Error::Usage("workload is empty".into()));
    }
    let ranklist = build_ranklist(table)?;
    let passes_before = model.dataset_passes();
    let mut cursor = 0usize;
    let mut records = Vec::with_capacity(signal.events().len());
    for (i, ev) in signal.events().iter().enumerate() {
        let budget = ev.budget()?;
        let start = Instant::now();
        let (plan, shortfall) = replan(model, &ranklist, &budget)?;
        let replan_micros = start.elapsed().as_micros() as u64;
        let generation = adaptive.swap_config(&plan)?;

        let mut correct = 0;
        for _ in 0..opts.inferences_per_event {
            let (x, label) = (&workload.inputs()[cursor], workload.labels()[cursor]);
            cursor = (cursor + 1) % workload.len();
            if argmax(adaptive.infer(x)?.output.data()) == label {
                correct += 1;
            }
        }
        records.push(LogRecord {
            event: i,
            timestamp_ms: ev.timestamp_ms,
            memory_budget_bytes: ev.memory_budget_bytes,
            latency_budget: ev.latency_budget,
            status: if shortfall.is_some() {
                "infeasible"
            } else {
                "ok"
            }
            .into(),
            shortfall_bytes: shortfall.unwrap_or(0),
            plan: PlanDto::new(&plan, &budget, table.baseline_accuracy),
            generation,
            replan_micros,
            inferences: opts.inferences_per_event,
            correct,
        });
    }
    let dataset_passes = model.dataset_passes() - passes_before;
    if dataset_passes != 0 {
        return Err(CoreError::Internal(format!(
            "{dataset_passes} dataset passes during adaptive serving"
        ))
        .into());
    }
    Ok(ControllerLog {
        records,
        dataset_passes,
    })
}
