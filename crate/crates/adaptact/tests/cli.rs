mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use adaptact::aat;
use adaptact::cli::RunManifest;
use adaptact::core::Tensor;
use adaptact::exit;
use adaptact::report::{read_json, CostDto, PlanDto};
use common::fixture;

fn adaptact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adaptact"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn inspect_writes_cost_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = adaptact(&[
        "inspect",
        "--model",
        s(&fixture("tiny.json")),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), exit::OK, "{}", stderr(&o));
    let cost: CostDto = read_json(dir.path().join("cost.json")).unwrap();
    assert_eq!(cost.total_bytes, 133_760);
    assert_eq!(cost.layers.len(), 11);
    assert!(dir.path().join("cost.csv").exists());
    let run: RunManifest = read_json(dir.path().join("run.json")).unwrap();
    assert_eq!(run.command, "inspect");
    assert_eq!(run.outputs.len(), 2);
}

#[test]
fn plan_within_budget_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    let (model, table) = (fixture("tiny.json"), fixture("tiny.sensitivity.csv"));
    let args = [
        "plan",
        "--model",
        s(&model),
        "--table",
        s(&table),
        "--budget",
        "75%",
        "--out-dir",
        s(&out),
    ];
    let o = adaptact(&args);
    assert_eq!(code(&o), exit::OK, "{}", stderr(&o));
    let plan: PlanDto = read_json(out.join("plan.json")).unwrap();
    assert_eq!(plan.budget.memory_bytes, 133_760 * 3 / 4);
    assert!(plan.projected.memory_bytes <= plan.budget.memory_bytes);
    assert!(!plan.assignments.is_empty());

    // the recorded argv reproduces the run
    let run: RunManifest = read_json(out.join("run.json")).unwrap();
    let mut argv: Vec<String> = run.argv[1..].to_vec();
    let pos = argv.iter().position(|a| a == "--out-dir").unwrap();
    argv[pos + 1] = dir.path().join("b").to_string_lossy().into_owned();
    let o = adaptact(&argv.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&o), exit::OK);
    assert_eq!(
        fs::read(out.join("plan.json")).unwrap(),
        fs::read(dir.path().join("b/plan.json")).unwrap()
    );

    let exact = adaptact(&[&args[..], &["--exact"]].concat());
    assert_eq!(code(&exact), exit::OK, "{}", stderr(&exact));
}

#[test]
fn infeasible_budget_exits_3_with_floor() {
    let dir = tempfile::tempdir().unwrap();
    let o = adaptact(&[
        "plan",
        "--model",
        s(&fixture("tiny.json")),
        "--table",
        s(&fixture("tiny.sensitivity.csv")),
        "--budget",
        "50000",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), exit::INFEASIBLE);
    assert!(stderr(&o).contains("83840"), "{}", stderr(&o));
}

#[test]
fn invalid_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(code(&adaptact(&[])), exit::INVALID_INPUT);
    assert_eq!(
        code(&adaptact(&[
            "inspect",
            "--model",
            "/nonexistent.json",
            "--out-dir",
            out
        ])),
        exit::INVALID_INPUT
    );

    let mut manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixture("tiny.json")).unwrap()).unwrap();
    manifest["layers"][1]["kind"] = "gelu".into();
    manifest["weights_file"] = s(&fixture("tiny.weights.aat")).into();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, manifest.to_string()).unwrap();
    let o = adaptact(&["inspect", "--model", s(&bad), "--out-dir", out]);
    assert_eq!(code(&o), exit::INVALID_INPUT);
    assert!(stderr(&o).contains("gelu"), "{}", stderr(&o));

    let o = adaptact(&[
        "plan",
        "--model",
        s(&fixture("tiny.json")),
        "--table",
        s(&fixture("tiny.sensitivity.csv")),
        "--budget",
        "lots",
        "--out-dir",
        out,
    ]);
    assert_eq!(code(&o), exit::INVALID_INPUT);
}

#[test]
fn non_finite_inputs_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut data = vec![0.5f32; 32 * 32];
    data[100] = f32::NAN;
    let calib = dir.path().join("nan.aat");
    aat::write_tensor(&calib, &Tensor::new(vec![1, 1, 32, 32], data).unwrap()).unwrap();
    let o = adaptact(&[
        "calibrate",
        "--model",
        s(&fixture("tiny.json")),
        "--calib",
        s(&calib),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), exit::NUMERIC, "{}", stderr(&o));
}

#[test]
fn calibrate_writes_profiles_and_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let o = adaptact(&[
        "calibrate",
        "--model",
        s(&fixture("tiny.json")),
        "--calib",
        s(&fixture("calib.aat")),
        "--bins",
        "16",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), exit::OK, "{}", stderr(&o));
    for id in ["relu1", "relu2", "relu3"] {
        let csv = fs::read_to_string(dir.path().join(format!("histogram_{id}.csv"))).unwrap();
        assert_eq!(csv.lines().next(), Some("bin_lo,bin_hi,count"));
        let total: u64 = csv
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
            .sum();
        let expected = 120
            * [8 * 32 * 32, 16 * 16 * 16, 16 * 8 * 8][id.as_bytes()[4] as usize - b'1' as usize];
        assert_eq!(total, expected as u64);
    }
    let profiles: Vec<serde_json::Value> = read_json(dir.path().join("profiles.json")).unwrap();
    assert_eq!(profiles.len(), 3);
    assert_eq!(profiles[0]["quantiles"].as_array().unwrap().len(), 1001);
}

#[test]
fn single_input_calibration_warns() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.aat");
    let x = aat::read_inputs(fixture("calib.aat")).unwrap().remove(0);
    aat::write_tensor(&one, &x.reshape(vec![1, 1, 32, 32]).unwrap()).unwrap();
    let o = adaptact(&[
        "calibrate",
        "--model",
        s(&fixture("tiny.json")),
        "--calib",
        s(&one),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), exit::OK, "{}", stderr(&o));
    assert!(
        stderr(&o).contains("warning: calibration set has a single input"),
        "{}",
        stderr(&o)
    );
}

/// Each sweep row is the plan the `plan` command gives for that budget.
#[test]
fn sweep_rows_equal_individual_plans() {
    let dir = tempfile::tempdir().unwrap();
    let (model, table) = (fixture("tiny.json"), fixture("tiny.sensitivity.csv"));
    let budgets = ["100%", "90%", "80%", "75%", "70%", "65%"];
    let list = budgets.join(",");
    let o = adaptact(&[
        "sweep",
        "--model",
        s(&model),
        "--table",
        s(&table),
        "--budget-list",
        &list,
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), exit::OK, "{}", stderr(&o));
    let rows: Vec<adaptact::report::SweepRow> =
        adaptact::report::read_csv(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(rows.len(), budgets.len());
    assert_eq!(rows[0].memory_bytes, 133_760);
    assert_eq!(rows[0].assigned_layers, 0);
    for w in rows.windows(2) {
        assert!(w[1].memory_bytes <= w[0].memory_bytes);
    }
    for (b, row) in budgets.iter().zip(&rows) {
        let out = dir.path().join(b.trim_end_matches('%'));
        let o = adaptact(&[
            "plan",
            "--model",
            s(&model),
            "--table",
            s(&table),
            "--budget",
            b,
            "--out-dir",
            s(&out),
        ]);
        assert_eq!(code(&o), exit::OK, "{}", stderr(&o));
        let plan: PlanDto = read_json(out.join("plan.json")).unwrap();
        assert_eq!(plan.projected.memory_bytes, row.memory_bytes);
        assert_eq!(plan.projected.latency_proxy, row.latency_proxy);
        assert_eq!(plan.assignments.len(), row.assigned_layers);
    }
}

#[test]
fn simulate_logs_one_record_per_event() {
    let dir = tempfile::tempdir().unwrap();
    let o = adaptact(&[
        "simulate",
        "--model",
        s(&fixture("tiny.json")),
        "--table",
        s(&fixture("tiny.sensitivity.csv")),
        "--trace",
        s(&fixture("trace.csv")),
        "--dataset",
        s(&fixture("eval.aat")),
        "--inferences-per-event",
        "8",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), exit::OK, "{}", stderr(&o));
    assert!(stderr(&o).contains("infeasible"));
    let log = fs::read_to_string(dir.path().join("controller.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = log
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 5);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r["event"], i);
        assert_eq!(r["inferences"], 8);
    }
}

#[test]
fn sweep_and_sensitivity_on_a_subset() {
    let dir = tempfile::tempdir().unwrap();
    let o = adaptact(&[
        "sensitivity",
        "--model",
        s(&fixture("tiny.json")),
        "--dataset",
        s(&fixture("eval.aat")),
        "--calib",
        s(&fixture("calib.aat")),
        "--sparsity-levels",
        "0,0.5",
        "--precisions",
        "FP32,INT4",
        "--eval-subset",
        "20",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), exit::OK, "{}", stderr(&o));
    let table = dir.path().join("sensitivity.csv");
    assert_eq!(
        fs::read_to_string(&table).unwrap().lines().count(),
        1 + 3 * 4
    );
    let o = adaptact(&[
        "sweep",
        "--model",
        s(&fixture("tiny.json")),
        "--table",
        s(&table),
        "--budget-list",
        "100%,90%,10%",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), exit::OK, "{}", stderr(&o));
    let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let status: Vec<&str> = sweep
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(status, ["ok", "ok", "infeasible"]);
}
