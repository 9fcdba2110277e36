use std::sync::Arc;

use fallcascade::cascade::{build_cascade, run_dataset, CascadeConfig, CascadeInput, CascadeReport, Layout};
use fallcascade::dataset::{loso_folds, synth_generate, Dataset, Label, SynthSpec};
use fallcascade::distill::{distill_train, takd_pipeline, KdConfig, PipelineSetup, TripleMode};
use fallcascade::edge_threshold::{classify_tc, fit_thresholds, GateRule, TriDecision, WindowPeaks};
use fallcascade::eval::{compare_normalizations, loso_evaluate, ExperimentConfig};
use fallcascade::nn::{train, CrossEntropyObjective, Tier, TierSpec, TieredModel, TrainConfig};
use fallcascade::perfmodel::{cascade_latency, compare_latency, NodeParams, Topology};
use fallcascade::preprocess::{
    extract_features, extract_window, ColumnScaler, MinMax, PlaneConvention, WindowSpec, N_FEATURES,
};
use fallcascade::strategy::TierSpecs;

fn small_tiers() -> TierSpecs {
    TierSpecs {
        student: TierSpec::new(Tier::Student, vec![N_FEATURES, 4, 2]).unwrap(),
        ta: TierSpec::new(Tier::Ta, vec![N_FEATURES, 8, 2]).unwrap(),
        teacher: TierSpec::new(Tier::Teacher, vec![N_FEATURES, 16, 2]).unwrap(),
    }
}

fn features(ds: &Dataset) -> (Vec<Vec<f64>>, Vec<Label>, Vec<WindowPeaks>, Vec<usize>) {
    let windows: Vec<_> = ds.traces.iter().map(|t| extract_window(t, &WindowSpec::default())).collect();
    let raw: Vec<Vec<f64>> = windows.iter().map(|w| extract_features(w, &PlaneConvention::default()).to_vec()).collect();
    let scaler = ColumnScaler::fit(&MinMax, &raw).unwrap();
    (
        raw.iter().map(|r| scaler.transform(r)).collect(),
        windows.iter().map(|w| w.label).collect(),
        windows.iter().map(WindowPeaks::of).collect(),
        windows.iter().map(|w| w.len()).collect(),
    )
}

#[test]
fn lambda_zero_equals_plain_training() {
    let ds = synth_generate(&SynthSpec { n_subjects: 2, falls_per_subject: 10, adls_per_subject: 10, ..Default::default() }).unwrap();
    let (x, y, _, _) = features(&ds);
    let cfg = TrainConfig { epochs: 15, ..Default::default() };
    let teacher = TieredModel::init(TierSpec::teacher(), 1).unwrap();
    let init = TieredModel::init(TierSpec::student(), 2).unwrap();
    let plain = train(init.clone(), &x, &CrossEntropyObjective::new(y.clone()), &cfg).unwrap();
    let kd = KdConfig { lambda: 0.0, ..Default::default() };
    let distilled = distill_train(&teacher, init, &x, &y, &kd, &cfg).unwrap();
    assert_eq!(plain.model.to_checkpoint(), distilled.model.to_checkpoint());
}

#[test]
fn takd_is_deterministic_and_capacity_checked() {
    let ds = synth_generate(&SynthSpec { n_subjects: 2, falls_per_subject: 8, adls_per_subject: 8, ..Default::default() }).unwrap();
    let (x, y, _, _) = features(&ds);
    let t = small_tiers();
    let cfg = TrainConfig { epochs: 10, ..Default::default() };
    for mode in [TripleMode::Sequential, TripleMode::Composite] {
        let kd = KdConfig { triple_mode: mode, ..Default::default() };
        let run = || {
            let setup = PipelineSetup::seeded(t.teacher.clone(), t.ta.clone(), t.student.clone(), &cfg, 5).unwrap();
            takd_pipeline(setup, &x, &y, &kd).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.2.model.to_checkpoint(), b.2.model.to_checkpoint());
        assert_eq!(a.1.epoch_losses, b.1.epoch_losses);
    }
    let swapped = PipelineSetup::seeded(t.student.clone(), t.ta.clone(), t.teacher.clone(), &cfg, 5).unwrap();
    assert!(takd_pipeline(swapped, &x, &y, &KdConfig::default()).is_err());
    let mut same = PipelineSetup::seeded(t.ta.clone(), t.ta.clone(), t.student.clone(), &cfg, 5).unwrap();
    assert!(takd_pipeline(same.clone(), &x, &y, &KdConfig::default()).is_err());
    same.allow_equal_capacity = true;
    assert!(takd_pipeline(same, &x, &y, &KdConfig::default()).is_ok());
}

fn big_run_inputs() -> (Vec<CascadeInput>, TieredModel, TieredModel, fallcascade::edge_threshold::EdgeThresholds) {
    let ds = synth_generate(&SynthSpec { n_subjects: 10, falls_per_subject: 100, adls_per_subject: 100, ..Default::default() }).unwrap();
    assert_eq!(ds.len(), 2000);
    let (x, y, peaks, lens) = features(&ds);
    let windows: Vec<_> = ds.traces.iter().map(|t| extract_window(t, &WindowSpec::default())).collect();
    let th = fit_thresholds(&windows).unwrap();
    let cfg = TrainConfig { epochs: 3, ..Default::default() };
    let obj = CrossEntropyObjective::new(y.clone());
    let student = train(TieredModel::init(TierSpec::student(), 1).unwrap(), &x, &obj, &cfg).unwrap().model;
    let teacher = train(TieredModel::init(small_tiers().teacher, 2).unwrap(), &x, &obj, &cfg).unwrap().model;
    let inputs = x
        .into_iter()
        .zip(y)
        .zip(peaks)
        .zip(lens)
        .map(|(((features, label), peaks), samples)| CascadeInput { label, peaks, features, samples })
        .collect();
    (inputs, student, teacher, th)
}

#[test]
fn cascade_conservation_and_band_monotonicity() {
    let (inputs, student, teacher, th) = big_run_inputs();
    let (student, teacher) = (Arc::new(student), Arc::new(teacher));
    let route = |tq_max: f64, tq_min: f64, layout: Layout| {
        let cfg = CascadeConfig { tq_max, tq_min, ..Default::default() };
        let c = build_cascade(layout, th, student.clone(), Some(student.clone()), teacher.clone(), &cfg).unwrap();
        run_dataset(&c, &inputs).unwrap()
    };
    for layout in [Layout::Dual, Layout::Triple] {
        let (narrow, log) = route(0.6, 0.4, layout);
        let (wide, _) = route(0.9, 0.1, layout);
        for r in [&narrow, &wide] {
            assert_eq!(r.total, 2000);
            assert_eq!(r.layers.iter().map(|l| l.decided()).sum::<u64>(), 2000);
            for w in r.layers.windows(2) {
                assert_eq!(w[1].processed, w[0].processed - w[0].decided());
            }
        }
        for (n, w) in narrow.layers.iter().zip(&wide.layers).skip(1) {
            assert!(w.processed >= n.processed, "{}: {} < {}", n.name, w.processed, n.processed);
        }
        // recount from the per-window log
        for (k, layer) in narrow.layers.iter().enumerate() {
            assert_eq!(layer.decided(), log.iter().filter(|d| d.decided_at == k).count() as u64);
            assert_eq!(layer.processed, log.iter().filter(|d| d.decided_at >= k).count() as u64);
        }
    }
}

#[test]
fn published_row_is_conserved() {
    let layers: [u64; 3] = [1_233_000, 148_400, 47_200];
    assert_eq!(layers.iter().sum::<u64>(), 1_428_600);
}

#[test]
fn gate_is_sound_on_training_splits() {
    let mut printed_errors = 0;
    for spec in [SynthSpec::default(), SynthSpec::separable()] {
        let ds = synth_generate(&SynthSpec { falls_per_subject: 10, adls_per_subject: 10, ..spec }).unwrap();
        for (_, train, _) in loso_folds(&ds).unwrap() {
            let windows: Vec<_> = train.traces.iter().map(|t| extract_window(t, &WindowSpec::default())).collect();
            let th = fit_thresholds(&windows).unwrap();
            for w in &windows {
                let d = classify_tc(w.peak_xyz(), w.peak_hori(), &th, GateRule::AdlBelowFallMinima);
                assert!(!(w.label == Label::Adl && d == TriDecision::Fall));
                assert!(!(w.label == Label::Fall && d == TriDecision::Adl));
                let printed = classify_tc(w.peak_xyz(), w.peak_hori(), &th, GateRule::PrintedEquation);
                assert!(!(w.label == Label::Adl && printed == TriDecision::Fall));
                printed_errors += usize::from(w.label == Label::Fall && printed == TriDecision::Adl);
            }
        }
    }
    // the printed ADL branch sends overlapping falls to ADL
    assert!(printed_errors > 0);
}

fn quick_config() -> ExperimentConfig {
    ExperimentConfig {
        tiers: small_tiers(),
        train: TrainConfig { epochs: 8, ..Default::default() },
        strategies: vec!["no-kd".into(), "dual-kd".into()],
        layouts: vec![Layout::Dual],
        ..Default::default()
    }
}

fn quick_dataset() -> Dataset {
    synth_generate(&SynthSpec { n_subjects: 4, falls_per_subject: 6, adls_per_subject: 9, ..Default::default() }).unwrap()
}

#[test]
fn pooled_accuracy_is_weighted_fold_mean() {
    let out = loso_evaluate(&quick_dataset(), &quick_config(), &Topology::reference()).unwrap();
    for v in &out.report.variants {
        let total: u64 = v.per_fold.iter().map(|f| f.confusion.total()).sum();
        let weighted: f64 = v
            .per_fold
            .iter()
            .map(|f| f.metrics.acc.unwrap() * f.confusion.total() as f64)
            .sum::<f64>()
            / total as f64;
        assert!((weighted - v.pooled.acc.unwrap()).abs() < 1e-12);
    }
}

#[test]
fn latency_reduction_recomputes_from_decision_log() {
    let topo = Topology::reference();
    let out = loso_evaluate(&quick_dataset(), &quick_config(), &topo).unwrap();
    let imp = &out.report.improvements[0];
    let window_len = WindowSpec::default().len(200) as f64;
    let layer_ms = |variant: &str, k: usize, name: &str| {
        let reached = out.decisions.iter().filter(|d| d.variant == variant && d.decided_at >= k).count() as f64;
        let v = reached * window_len;
        let p = topo.layer(name).unwrap().nodes[0].params;
        let p = NodeParams { lambda_gen: v, beta: if k == 0 { 0.0 } else { v }, ..p };
        (p.s * p.b / p.theta + (p.rho * p.s * p.lambda_gen + (1.0 - p.s) * p.lambda_gen + p.beta) / p.phi) * 1e3
    };
    for (k, name) in ["ED", "MEC1", "CC"].iter().enumerate() {
        let a = layer_ms(&imp.baseline, k, name);
        let b = layer_ms(&imp.variant, k, name);
        let delta = &imp.latency.layers[k];
        assert!((delta.a_ms - a).abs() < 1e-9 * a.max(1.0));
        assert!((delta.b_ms - b).abs() < 1e-9 * b.max(1.0));
        if let Some(r) = delta.reduction_pct {
            assert!((r - (a - b) / a * 100.0).abs() < 1e-9);
        }
    }
}

#[test]
fn halved_top_volume_halves_transmission_bound_latency() {
    let mut topo = Topology::reference();
    for l in &mut topo.layers {
        l.nodes[0].params.b = 1e-3;
    }
    let mut a = CascadeReport::empty(["ED", "MEC1", "CC"].map(String::from));
    a.layers[0].processed_samples = 10_000;
    a.layers[1].processed_samples = 4_000;
    a.layers[2].processed_samples = 2_000;
    let mut b = a.clone();
    b.layers[2].processed_samples = 1_000;
    let la = cascade_latency(&a, &topo, 1.0).unwrap();
    let lb = cascade_latency(&b, &topo, 1.0).unwrap();
    let ratio = lb.layers[2].latency_ms / la.layers[2].latency_ms;
    assert!((ratio - 0.5).abs() < 0.005, "{ratio}");
    let c = compare_latency(&la, &lb).unwrap();
    assert!((c.layers[2].reduction_pct.unwrap() - 50.0).abs() < 0.5);
}

#[test]
fn normalization_modes_both_run() {
    let rows = compare_normalizations(&quick_dataset(), &quick_config(), &Topology::reference(), &["minmax".into(), "zscore".into()]).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().filter(|r| r.normalization == "zscore").count(), 2);
    assert!(rows.iter().all(|r| r.acc.is_some_and(|a| (0.0..=1.0).contains(&a))));
}
