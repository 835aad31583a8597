//! Command line front end. Every command writes its outputs plus a `run.json`
//! manifest into `--out-dir`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use adaptact_core::activation::{calibrate_all, CalibrationOptions};
use adaptact_core::graph::evaluate_accuracy;
use adaptact_core::planner::{
    brute_force_select, build_ranklist, greedy_select, memory_cost, Budget, Plan,
};
use adaptact_core::{Dataset, Model, Precision, RuntimeConfig, SensitivityTable, SweepGrid};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::aat;
use crate::controller::{replan, run_adaptive, AdaptiveModel, BudgetSignal, ServeOptions};
use crate::error::{Error, Result};
use crate::manifest::load_model;
use crate::parallel::analyze_parallel;
use crate::report::{
    self, output_histogram, CostDto, PlanDto, ProfileDto, SensitivityTableDto, SweepRow,
};

#[derive(Debug, Parser)]
#[command(
    name = "adaptact",
    version,
    about = "Budget-adaptive activation sparsity and precision control"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the cost model's per-layer table and totals.
    Inspect(InspectArgs),
    /// Profile activation inputs and export histograms.
    Calibrate(CalibrateArgs),
    /// Sweep every activation layer over sparsity levels and precisions.
    Sensitivity(SensitivityArgs),
    /// Choose per-layer settings for one budget.
    Plan(PlanArgs),
    /// Plan for a list of budgets and tabulate the trade-off.
    Sweep(SweepArgs),
    /// Replay a budget trace through the runtime controller.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Directory for outputs and the run manifest.
    #[arg(long, default_value = "adaptact-out")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Model manifest or weight-free descriptor.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrationArgs {
    /// Per-layer reservoir size.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_samples: usize,
    /// Profiles with fewer samples are reported as degenerate.
    #[arg(long, default_value_t = 1000)]
    pub min_samples: usize,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Calibration inputs (`.aat`, `[N, ...]`).
    #[arg(long, visible_alias = "dataset")]
    pub calib: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub bins: usize,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labelled evaluation set; labels are read from the sibling `.labels` file.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Calibration inputs; defaults to the evaluation set.
    #[arg(long)]
    pub calib: Option<PathBuf>,
    #[arg(long, default_value = "0,0.25,0.5,0.75,1")]
    pub sparsity_levels: String,
    #[arg(long, default_value = "FP32,FP16,FP8,INT4,INT2")]
    pub precisions: String,
    /// Evaluate on the first N samples only.
    #[arg(long)]
    pub eval_subset: Option<usize>,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct JointEvalArgs {
    /// Measure the accuracy of each whole plan on `--dataset`.
    #[arg(long, requires = "dataset")]
    pub joint_eval: bool,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub eval_subset: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Sensitivity table (`.csv` or `.json`).
    #[arg(long)]
    pub table: PathBuf,
    /// Bytes (`1048576`, `512KiB`, `1.5MiB`) or a share of baseline (`70%`).
    #[arg(long)]
    pub budget: BudgetSpec,
    #[arg(long)]
    pub latency_budget: Option<f64>,
    /// Use exhaustive search instead of the greedy selector.
    #[arg(long)]
    pub exact: bool,
    #[command(flatten)]
    pub eval: JointEvalArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub table: PathBuf,
    /// Comma-separated budgets, same syntax as `plan --budget`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub budget_list: Vec<BudgetSpec>,
    #[command(flatten)]
    pub eval: JointEvalArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub table: PathBuf,
    /// CSV lines `timestamp_ms,memory_budget_bytes[,latency_budget]`.
    #[arg(long)]
    pub trace: PathBuf,
    /// Labelled workload served between budget events.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub inferences_per_event: usize,
    #[command(flatten)]
    pub common: Common,
}

/// A budget in bytes, or as a share of the baseline memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BudgetSpec {
    Bytes(u64),
    Fraction(f64),
}

impl BudgetSpec {
    pub fn resolve(self, baseline_bytes: u64) -> Result<u64> {
        let bytes = match self {
            BudgetSpec::Bytes(b) => b,
            BudgetSpec::Fraction(f) => (baseline_bytes as f64 * f).floor() as u64,
        };
        if bytes == 0 {
            return Err(Error::Usage("budget resolves to 0 bytes".into()));
        }
        Ok(bytes)
    }
}

impl FromStr for BudgetSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let bad = || format!("bad budget `{s}`");
        if let Some(p) = s.strip_suffix('%') {
            let v: f64 = p.trim().parse().map_err(|_| bad())?;
            if !(v.is_finite() && v > 0.0) {
                return Err(bad());
            }
            return Ok(BudgetSpec::Fraction(v / 100.0));
        }
        let units = [
            ("KiB", 1024.0),
            ("MiB", 1024.0 * 1024.0),
            ("GiB", 1024.0 * 1024.0 * 1024.0),
            ("B", 1.0),
        ];
        for (suffix, mult) in units {
            if let Some(num) = s.strip_suffix(suffix) {
                let v: f64 = num.trim().parse().map_err(|_| bad())?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(bad());
                }
                return Ok(BudgetSpec::Bytes((v * mult).floor() as u64));
            }
        }
        s.parse().map(BudgetSpec::Bytes).map_err(|_| bad())
    }
}

/// Record of one invocation, enough to repeat it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub argv: Vec<String>,
    pub inputs: BTreeMap<String, PathBuf>,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
}

/// What a command produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    /// Human-readable summary for stdout.
    pub message: String,
    pub warnings: Vec<String>,
    pub outputs: Vec<PathBuf>,
}

struct Run {
    manifest: RunManifest,
    out_dir: PathBuf,
    outcome: Outcome,
}

impl Run {
    fn new(command: &str, argv: &[String], common: &Common) -> Result<Self> {
        fs::create_dir_all(&common.out_dir).map_err(|e| Error::io(&common.out_dir, e))?;
        Ok(Self {
            manifest: RunManifest {
                command: command.into(),
                tool_version: env!("CARGO_PKG_VERSION").into(),
                argv: argv.to_vec(),
                inputs: BTreeMap::new(),
                parameters: BTreeMap::new(),
                seed: common.seed,
                outputs: Vec::new(),
            },
            out_dir: common.out_dir.clone(),
            outcome: Outcome::default(),
        })
    }

    fn input(&mut self, name: &str, path: &Path) {
        self.manifest.inputs.insert(name.into(), path.to_path_buf());
    }

    fn param(&mut self, name: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.manifest.parameters.insert(name.into(), v);
    }

    fn output(&mut self, name: &str) -> PathBuf {
        let p = self.out_dir.join(name);
        self.manifest.outputs.push(p.clone());
        p
    }

    fn warn(&mut self, w: String) {
        self.outcome.warnings.push(w);
    }

    fn finish(mut self, message: String) -> Result<Outcome> {
        let path = self.out_dir.join("run.json");
        report::write_json(&path, &self.manifest)?;
        self.outcome.outputs = self.manifest.outputs.clone();
        self.outcome.outputs.push(path);
        self.outcome.message = message;
        Ok(self.outcome)
    }
}

fn parse_levels(s: &str) -> Result<Vec<f32>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f32>()
                .map_err(|_| Error::Usage(format!("bad sparsity level `{v}`")))
        })
        .collect()
}

fn parse_precisions(s: &str) -> Result<Vec<Precision>> {
    s.split(',')
        .map(|v| v.parse().map_err(Error::from))
        .collect()
}

fn load_eval(path: &Path, subset: Option<usize>) -> Result<Dataset> {
    let d = aat::read_dataset(path)?;
    Ok(match subset {
        Some(0) => return Err(Error::Usage("--eval-subset must be positive".into())),
        Some(n) => d.subset(n),
        None => d,
    })
}

fn load_table_for(model: &Model, path: &Path) -> Result<SensitivityTable> {
    let table = report::read_sensitivity(path)?;
    if !table.matches_model(model) {
        return Err(Error::format(
            path,
            format!(
                "table covers layers {:?} but model `{}` has {:?}",
                table.layer_ids(),
                model.name(),
                model.activation_ids()
            ),
        ));
    }
    Ok(table)
}

fn calibration_options(a: &CalibrationArgs, seed: u64) -> CalibrationOptions {
    CalibrationOptions {
        max_samples: a.max_samples,
        min_samples: a.min_samples,
        seed,
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run_from_args<I, T>(argv: I) -> Result<Outcome>
where
    I: IntoIterator<Item = T>,
    T: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return Ok(Outcome {
                message: e.to_string(),
                ..Outcome::default()
            });
        }
        Err(e) => return Err(Error::Usage(e.to_string())),
    };
    run(cli, &argv)
}

pub fn run(cli: Cli, argv: &[String]) -> Result<Outcome> {
    match cli.command {
        Command::Inspect(a) => inspect(&a, argv),
        Command::Calibrate(a) => calibrate(&a, argv),
        Command::Sensitivity(a) => sensitivity(&a, argv),
        Command::Plan(a) => plan(&a, argv),
        Command::Sweep(a) => sweep(&a, argv),
        Command::Simulate(a) => simulate(&a, argv),
    }
}

fn inspect(a: &InspectArgs, argv: &[String]) -> Result<Outcome> {
    let mut run = Run::new("inspect", argv, &a.common)?;
    run.input("model", &a.model);
    let model = load_model(&a.model)?;
    let cost = memory_cost(&model, &RuntimeConfig::baseline())?;
    let dto = CostDto::new(&model, &cost);
    report::write_json(run.output("cost.json"), &dto)?;
    report::write_csv(run.output("cost.csv"), &dto.layers)?;
    let kinds = report::kind_counts(&model)
        .iter()
        .map(|(k, n)| format!("{k}={n}"))
        .collect::<Vec<_>>()
        .join(" ");
    let mode = if model.has_weights() {
        "weights"
    } else {
        "descriptor"
    };
    let msg = format!(
        "model {} ({mode}), input {:?}, {} classes, {} layers: {kinds}\n{}",
        model.name(),
        model.input_shape(),
        model.class_count(),
        model.layers().len(),
        dto.render()
    );
    run.finish(msg)
}

fn calibrate(a: &CalibrateArgs, argv: &[String]) -> Result<Outcome> {
    let mut run = Run::new("calibrate", argv, &a.common)?;
    run.input("model", &a.model);
    run.input("calib", &a.calib);
    run.param("bins", a.bins);
    run.param("max_samples", a.calibration.max_samples);
    run.param("min_samples", a.calibration.min_samples);
    let model = load_model(&a.model)?;
    let inputs = aat::read_inputs(&a.calib)?;
    let opts = calibration_options(&a.calibration, a.common.seed);
    let profiles = calibrate_all(&model, &inputs, &opts)?;
    if inputs.len() == 1 {
        run.warn("calibration set has a single input; profiles are not representative".into());
    }
    let mut lines = Vec::new();
    for p in &profiles {
        if p.is_degenerate(opts.min_samples) {
            run.warn(format!(
                "layer {}: only {} samples (< {}), profile is degenerate",
                p.layer_id,
                p.sample_count(),
                opts.min_samples
            ));
        }
        let hist = output_histogram(p, a.bins)?;
        report::write_csv(run.output(&format!("histogram_{}.csv", p.layer_id)), &hist)?;
        lines.push(format!(
            "{:<16} samples {:>8}  relu zeros {:.4}  median {:.4}  max {:.4}",
            p.layer_id,
            p.sample_count(),
            p.baseline_zero_fraction,
            p.quantile(0.5),
            p.max()
        ));
    }
    let dtos: Vec<ProfileDto> = profiles.iter().map(ProfileDto::from).collect();
    report::write_json(run.output("profiles.json"), &dtos)?;
    run.finish(lines.join("\n"))
}

fn sensitivity(a: &SensitivityArgs, argv: &[String]) -> Result<Outcome> {
    let mut run = Run::new("sensitivity", argv, &a.common)?;
    run.input("model", &a.model);
    run.input("dataset", &a.dataset);
    let calib_path = a.calib.clone().unwrap_or_else(|| a.dataset.clone());
    run.input("calib", &calib_path);
    let grid = SweepGrid::new(
        parse_levels(&a.sparsity_levels)?,
        parse_precisions(&a.precisions)?,
    )?;
    run.param("sparsity_levels", grid.sparsity_levels());
    run.param(
        "precisions",
        grid.precisions()
            .iter()
            .map(|p| p.name())
            .collect::<Vec<_>>(),
    );
    run.param("eval_subset", a.eval_subset);
    run.param("max_samples", a.calibration.max_samples);

    let model = load_model(&a.model)?;
    let eval = load_eval(&a.dataset, a.eval_subset)?;
    let calib = aat::read_inputs(&calib_path)?;
    let opts = calibration_options(&a.calibration, a.common.seed);
    let profiles = calibrate_all(&model, &calib, &opts)?;
    for p in profiles
        .iter()
        .filter(|p| p.is_degenerate(opts.min_samples))
    {
        run.warn(format!(
            "layer {}: only {} calibration samples",
            p.layer_id,
            p.sample_count()
        ));
    }
    let table = analyze_parallel(&model, &eval, &profiles, &grid)?;
    report::write_sensitivity_csv(run.output("sensitivity.csv"), &table)?;
    report::write_json(
        run.output("sensitivity.json"),
        &SensitivityTableDto::from(&table),
    )?;
    let dtos: Vec<ProfileDto> = profiles.iter().map(ProfileDto::from).collect();
    report::write_json(run.output("profiles.json"), &dtos)?;
    let msg = format!(
        "{} records over {} layers; baseline accuracy {:.4}, memory {} B",
        table.records().len(),
        table.layer_ids().len(),
        table.baseline_accuracy,
        table.baseline_memory_bytes
    );
    run.finish(msg)
}

fn joint_accuracy(model: &Model, plan: &Plan, eval: Option<&Dataset>) -> Result<Option<f64>> {
    match eval {
        Some(d) => Ok(Some(evaluate_accuracy(
            model,
            &plan.runtime_config(model)?,
            d,
        )?)),
        None => Ok(None),
    }
}

fn joint_eval_set(run: &mut Run, e: &JointEvalArgs) -> Result<Option<Dataset>> {
    run.param("joint_eval", e.joint_eval);
    run.param("eval_subset", e.eval_subset);
    match (&e.dataset, e.joint_eval) {
        (Some(d), true) => {
            run.input("dataset", d);
            Ok(Some(load_eval(d, e.eval_subset)?))
        }
        _ => Ok(None),
    }
}

fn plan(a: &PlanArgs, argv: &[String]) -> Result<Outcome> {
    let mut run = Run::new("plan", argv, &a.common)?;
    run.input("model", &a.model);
    run.input("table", &a.table);
    let model = load_model(&a.model)?;
    let table = load_table_for(&model, &a.table)?;
    let eval = joint_eval_set(&mut run, &a.eval)?;
    let baseline = memory_cost(&model, &RuntimeConfig::baseline())?.total_bytes;
    let budget = Budget::new(a.budget.resolve(baseline)?, a.latency_budget)?;
    run.param("budget_bytes", budget.memory_bytes);
    run.param("latency_budget", budget.latency);
    run.param("selector", if a.exact { "exact" } else { "greedy" });

    let plan = if a.exact {
        brute_force_select(&model, &table, &budget)?
    } else {
        greedy_select(&model, &build_ranklist(&table)?, &budget)?
    };
    let mut dto = PlanDto::new(&plan, &budget, table.baseline_accuracy);
    dto.joint_accuracy = joint_accuracy(&model, &plan, eval.as_ref())?;
    report::write_json(run.output("plan.json"), &dto)?;
    let mut msg = format!(
        "budget {} B: {} layer(s) changed, memory {} -> {} B ({:.1}% saved), estimated accuracy {:.4}",
        budget.memory_bytes,
        plan.assignments.len(),
        baseline,
        plan.projected_memory_bytes,
        100.0 * (1.0 - plan.projected_memory_bytes as f64 / baseline as f64),
        dto.projected.accuracy_estimate
    );
    if let Some(j) = dto.joint_accuracy {
        msg += &format!(", measured {j:.4}");
    }
    for asg in &dto.assignments {
        msg += &format!(
            "\n  {:<16} s={:<5} T={:<10.5} {}",
            asg.layer_id, asg.s, asg.threshold, asg.precision
        );
    }
    run.finish(msg)
}

fn sweep(a: &SweepArgs, argv: &[String]) -> Result<Outcome> {
    let mut run = Run::new("sweep", argv, &a.common)?;
    run.input("model", &a.model);
    run.input("table", &a.table);
    let model = load_model(&a.model)?;
    let table = load_table_for(&model, &a.table)?;
    let eval = joint_eval_set(&mut run, &a.eval)?;
    let baseline = memory_cost(&model, &RuntimeConfig::baseline())?.total_bytes;
    let ranklist = build_ranklist(&table)?;
    let mut rows = Vec::with_capacity(a.budget_list.len());
    for spec in &a.budget_list {
        let budget = Budget::memory(spec.resolve(baseline)?)?;
        let (plan, shortfall) = replan(&model, &ranklist, &budget)?;
        rows.push(SweepRow {
            budget_bytes: budget.memory_bytes,
            status: if shortfall.is_some() {
                "infeasible"
            } else {
                "ok"
            }
            .into(),
            memory_bytes: plan.projected_memory_bytes,
            latency_proxy: plan.projected_latency,
            projected_accuracy: (table.baseline_accuracy - plan.projected_accuracy_drop_sum)
                .max(0.0),
            joint_accuracy: joint_accuracy(&model, &plan, eval.as_ref())?,
            assigned_layers: plan.assignments.len(),
        });
    }
    run.param(
        "budgets",
        rows.iter().map(|r| r.budget_bytes).collect::<Vec<_>>(),
    );
    report::write_csv(run.output("sweep.csv"), &rows)?;
    let mut msg = format!(
        "baseline {baseline} B, accuracy {:.4}",
        table.baseline_accuracy
    );
    for r in &rows {
        msg += &format!(
            "\n  budget {:>10} B  {:<10} memory {:>10} B  latency {:.4e}  est. acc {:.4}",
            r.budget_bytes, r.status, r.memory_bytes, r.latency_proxy, r.projected_accuracy
        );
        if let Some(j) = r.joint_accuracy {
            msg += &format!("  measured {j:.4}");
        }
    }
    run.finish(msg)
}

fn simulate(a: &SimulateArgs, argv: &[String]) -> Result<Outcome> {
    let mut run = Run::new("simulate", argv, &a.common)?;
    run.input("model", &a.model);
    run.input("table", &a.table);
    run.input("trace", &a.trace);
    run.input("dataset", &a.dataset);
    run.param("inferences_per_event", a.inferences_per_event);
    let model = load_model(&a.model)?;
    let table = load_table_for(&model, &a.table)?;
    let signal = BudgetSignal::read(&a.trace)?;
    let workload = aat::read_dataset(&a.dataset)?;
    let adaptive = AdaptiveModel::new(Arc::new(model));
    let opts = ServeOptions {
        inferences_per_event: a.inferences_per_event,
    };
    let log = run_adaptive(&adaptive, &table, &signal, &workload, opts)?;
    log.write_jsonl(run.output("controller.jsonl"))?;
    let mut msg = format!("{} events replayed", log.records.len());
    for r in &log.records {
        if r.status != "ok" {
            run.warn(format!(
                "event {} (t={} ms): budget {} B infeasible, installed minimum-memory plan {} B short",
                r.event, r.timestamp_ms, r.memory_budget_bytes, r.shortfall_bytes
            ));
        }
        msg += &format!(
            "\n  t={:>8} ms  budget {:>10} B  {:<10} memory {:>10} B  served {} ({} correct)  replan {} us",
            r.timestamp_ms,
            r.memory_budget_bytes,
            r.status,
            r.plan.projected.memory_bytes,
            r.inferences,
            r.correct,
            r.replan_micros
        );
    }
    run.finish(msg)
}
