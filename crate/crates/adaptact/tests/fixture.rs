mod common;

use adaptact::aat;
use adaptact::core::activation::{calibrate_all, threshold_for_sparsity, CalibrationOptions};
use adaptact::core::graph::evaluate_accuracy;
use adaptact::core::{aa_relu, RuntimeConfig, Source};
use common::{dataset, fixture, model};
use serde::Deserialize;

#[derive(Deserialize)]
struct GoldenAccuracy {
    eval: f64,
    holdout: f64,
}

#[derive(Deserialize)]
struct GoldenProfile {
    layer_id: String,
    quantiles: Vec<f32>,
    baseline_zero_fraction: f64,
    sample_count: usize,
}

#[test]
fn logits_match_reference_forward() {
    let m = model();
    let eval = dataset("eval");
    let golden = aat::read_tensor(fixture("golden_logits.aat")).unwrap();
    assert_eq!(golden.shape(), &[eval.len(), m.class_count()]);
    let mut worst = 0.0f32;
    for (i, x) in eval.inputs().iter().enumerate() {
        let y = m.forward(x).unwrap();
        let g = &golden.data()[i * m.class_count()..(i + 1) * m.class_count()];
        for (a, b) in y.data().iter().zip(g) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    eprintln!("max scaled logit difference {worst:e}");
    assert!(worst <= 1e-6, "max scaled logit difference {worst}");
}

#[test]
fn accuracy_matches_reference() {
    let m = model();
    let golden: GoldenAccuracy =
        serde_json::from_str(&std::fs::read_to_string(fixture("golden_accuracy.json")).unwrap())
            .unwrap();
    let base = RuntimeConfig::baseline();
    assert_eq!(
        evaluate_accuracy(&m, &base, &dataset("eval")).unwrap(),
        golden.eval
    );
    assert_eq!(
        evaluate_accuracy(&m, &base, &dataset("holdout")).unwrap(),
        golden.holdout
    );
}

#[test]
fn profiles_match_reference() {
    let m = model();
    let golden: Vec<GoldenProfile> =
        serde_json::from_str(&std::fs::read_to_string(fixture("golden_profiles.json")).unwrap())
            .unwrap();
    let calib = dataset("calib");
    let profiles = calibrate_all(&m, calib.inputs(), &CalibrationOptions::default()).unwrap();
    assert_eq!(profiles.len(), golden.len());
    for (p, g) in profiles.iter().zip(&golden) {
        assert_eq!(p.layer_id, g.layer_id);
        assert_eq!(p.sample_count(), g.sample_count);
        assert!((p.baseline_zero_fraction - g.baseline_zero_fraction).abs() <= 1e-4);
        for (a, b) in p.quantile_grid(1001).iter().zip(&g.quantiles) {
            assert!(
                (a - b).abs() <= 1e-5 * b.abs().max(1.0),
                "{}: {a} vs {b}",
                g.layer_id
            );
        }
    }
}

/// Thresholds calibrated on the calibration set, measured on held-out inputs.
#[test]
fn calibration_carries_over_to_holdout() {
    let m = model();
    let profiles = calibrate_all(
        &m,
        dataset("calib").inputs(),
        &CalibrationOptions::default(),
    )
    .unwrap();
    let holdout = dataset("holdout");
    let base = RuntimeConfig::baseline();
    for p in &profiles {
        let idx = m.activation_index(&p.layer_id).unwrap();
        let Source::Layer(src) = m.layers()[idx].input else {
            panic!("activation reads the model input")
        };
        let mut pre = Vec::new();
        for x in holdout.inputs() {
            pre.extend_from_slice(m.forward_trace(&base, x).unwrap()[src].data());
        }
        let frac = |t: f32| {
            pre.iter().filter(|&&v| aa_relu(v, t) == 0.0).count() as f64 / pre.len() as f64
        };
        let z0 = frac(0.0);
        for s in [0.25, 0.5, 0.75] {
            let t = threshold_for_sparsity(p, s).unwrap();
            let additional = (frac(t) - z0) / (1.0 - z0);
            eprintln!("{} s={s} T={t:.5} measured {additional:.4}", p.layer_id);
            assert!(
                (additional - s).abs() <= 0.05,
                "{} s={s}: {additional}",
                p.layer_id
            );
        }
    }
}

#[test]
fn latency_matches_hand_sum() {
    use adaptact::core::planner::latency_proxy;
    use adaptact::core::{LayerRuntimeConfig, Precision};
    let m = model();
    // conv MACs: out_c * in_c * k * k * out_h * out_w; dense: in * out
    let (conv1, conv2, conv3, fc) = (
        8.0 * 9.0 * 32.0 * 32.0,
        16.0 * 8.0 * 9.0 * 16.0 * 16.0,
        16.0 * 16.0 * 9.0 * 8.0 * 8.0,
        16.0 * 8.0,
    );
    let base = latency_proxy(&m, &RuntimeConfig::baseline()).unwrap();
    assert_eq!(base, conv1 + conv2 + conv3 + fc);
    let mut cfg = RuntimeConfig::baseline();
    cfg.set(
        &m,
        "relu1",
        LayerRuntimeConfig::new(0.3, Precision::Fp8, 0.5).unwrap(),
    )
    .unwrap();
    cfg.set(
        &m,
        "relu2",
        LayerRuntimeConfig::new(9.0, Precision::Int2, 1.0).unwrap(),
    )
    .unwrap();
    cfg.set(
        &m,
        "relu3",
        LayerRuntimeConfig::new(1.0, Precision::Int4, 0.25).unwrap(),
    )
    .unwrap();
    // relu3 feeds the dense head only through average pooling, so it does
    // not scale it
    let want = conv1 + conv2 * (8.0 / 32.0) * 0.5 + conv3 * 0.0 + fc;
    assert_eq!(latency_proxy(&m, &cfg).unwrap(), want);
}

#[test]
fn ranklist_matches_independent_sort() {
    use adaptact::core::planner::build_ranklist;
    let t = common::table();
    let ranked = build_ranklist(&t).unwrap();
    let order = |id: &str| t.layer_ids().iter().position(|l| l == id).unwrap();
    let mut mine: Vec<_> = t
        .records()
        .iter()
        .filter(|r| !r.is_baseline() && r.memory_saved_bytes > 0)
        .map(|r| {
            let drop = t.baseline_accuracy - r.accuracy;
            (
                r.memory_saved_bytes as f64 / drop.max(1e-4),
                drop,
                order(&r.layer_id),
                r.sparsity,
                r.precision.bits(),
                r,
            )
        })
        .collect();
    mine.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.1.partial_cmp(&b.1).unwrap())
            .then(a.2.cmp(&b.2))
            .then(b.3.partial_cmp(&a.3).unwrap())
            .then(a.4.cmp(&b.4))
    });
    assert_eq!(ranked.len(), mine.len());
    for (c, m) in ranked.iter().zip(&mine) {
        assert_eq!(
            (c.layer_id.as_str(), c.sparsity, c.precision),
            (m.5.layer_id.as_str(), m.5.sparsity, m.5.precision)
        );
    }
}

/// Tightening the budget one step at a time never lowers the projected drop
/// and never raises memory.
#[test]
fn nested_budgets_on_fixture_table() {
    use adaptact::core::planner::{build_ranklist, greedy_select, min_memory_plan};
    use adaptact::core::Budget;
    let m = model();
    let t = common::table();
    let ranked = build_ranklist(&t).unwrap();
    let floor = min_memory_plan(&m, &ranked).unwrap().projected_memory_bytes;
    let mut prev: Option<(u64, f64)> = None;
    for b in (floor..=t.baseline_memory_bytes).rev().step_by(16) {
        let plan = greedy_select(&m, &ranked, &Budget::memory(b).unwrap()).unwrap();
        let cur = (
            plan.projected_memory_bytes,
            plan.projected_accuracy_drop_sum,
        );
        if let Some((mem, drop)) = prev {
            assert!(cur.0 <= mem, "budget {b}: memory rose");
            assert!(
                cur.1 >= drop,
                "budget {b}: drop fell from {drop} to {}",
                cur.1
            );
        }
        prev = Some(cur);
    }
}
