//! Training, evaluation, reporting and sweep tests on a tiny architecture.

mod common;
mod oracle;

use std::path::Path;

use common::{fixture, tiny_architecture, tiny_features};
use ncnn::data::{AudioStore, ManifestEntry, Split};
use ncnn::harness::*;
use ncnn::model::{build_cnn, build_ncnn, ArchitectureConfig, Classifier, CombinationRule, ModelKind};
use ncnn::neutrosophic::NsWindow;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arch() -> ArchitectureConfig {
    ArchitectureConfig::load(&tiny_architecture()).unwrap()
}

fn source() -> FeatureSource {
    FeatureSource::new(AudioStore::for_manifest(&fixture().manifest), tiny_features())
}

fn window() -> NsWindow {
    NsWindow::nearest_odd(10, 30)
}

fn entries(split: Split) -> Vec<&'static ManifestEntry> {
    fixture().manifest.split(split).collect()
}

fn test_entries() -> Vec<&'static ManifestEntry> {
    fixture().manifest.entries.iter().filter(|e| !e.split.is_train()).collect()
}

fn ncnn(seed: u64) -> Classifier {
    Classifier::Ncnn(build_ncnn(&arch(), seed, CombinationRule::Product, window()).unwrap())
}

fn hyperparams(iterations: u64, lr: f64) -> Hyperparams {
    Hyperparams {
        batch_size: 8,
        max_iterations: iterations,
        learning_rate: lr,
        lr_decay_every: 1000,
        log_every: 0,
        ..Hyperparams::default()
    }
}

fn experiment(seeds: Vec<u64>, conditions: &[&str]) -> ExperimentConfig {
    ExperimentConfig {
        architecture: tiny_architecture(),
        seeds,
        conditions: conditions.iter().map(|s| s.to_string()).collect(),
        hyperparams: hyperparams(6, 0.05),
        features: tiny_features(),
        ..ExperimentConfig::default()
    }
}

fn ctx() -> EvalContext {
    EvalContext {
        experiment: "test".into(),
        variant: "v".into(),
        train_condition: "clean".into(),
    }
}

fn bits(model: &Classifier) -> Vec<u64> {
    model.params().iter().flat_map(|p| p.values().iter().map(|v| v.to_bits())).collect()
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let mut model = ncnn(3);
    let before = bits(&model);
    let out = train(&mut model, &entries(Split::TrainClean), &source(), &hyperparams(3, 0.0)).unwrap();
    assert_eq!(out.iterations, 3);
    assert_eq!(bits(&model), before);
    assert!(out.log.iter().all(|r| r.loss.is_finite() && r.lr == 0.0));
}

#[test]
fn training_is_reproducible() {
    let run = || {
        let mut model = ncnn(5);
        let out = train(&mut model, &entries(Split::TrainNoisy), &source(), &hyperparams(5, 0.05)).unwrap();
        (bits(&model), out.log_csv())
    };
    let (a, log_a) = run();
    let (b, log_b) = run();
    assert_eq!(a, b);
    assert_eq!(log_a, log_b);
    assert_eq!(log_a.lines().count(), 6);
}

#[test]
fn learning_rate_schedule_steps() {
    let hp = Hyperparams {
        learning_rate: 0.1,
        lr_decay: 0.5,
        lr_decay_every: 10,
        ..Hyperparams::default()
    };
    assert_eq!(hp.lr_at(0), 0.1);
    assert_eq!(hp.lr_at(9), 0.1);
    assert_eq!(hp.lr_at(10), 0.05);
    assert_eq!(hp.lr_at(25), 0.025);
}

#[test]
fn invalid_hyperparameters_are_rejected() {
    let mut model = ncnn(1);
    let data = entries(Split::TrainClean);
    for hp in [
        Hyperparams { batch_size: 0, ..hyperparams(1, 0.01) },
        Hyperparams { max_iterations: 0, ..hyperparams(1, 0.01) },
        Hyperparams { learning_rate: f64::NAN, ..hyperparams(1, 0.01) },
        Hyperparams { lr_decay: 0.0, ..hyperparams(1, 0.01) },
        Hyperparams { target_train_accuracy: 101.0, ..hyperparams(1, 0.01) },
    ] {
        assert!(matches!(train(&mut model, &data, &source(), &hp), Err(HarnessError::Hyperparams(_))));
    }
    assert!(matches!(train(&mut model, &[], &source(), &hyperparams(1, 0.01)), Err(HarnessError::Empty(_))));
}

#[test]
fn zeroed_output_layer_scores_chance() {
    let mut cnn = build_cnn(&arch(), 2).unwrap();
    cnn.zero_output_layer();
    let report = evaluate(&Classifier::Cnn(cnn), &test_entries(), &source(), &ctx()).unwrap();
    // A uniform posterior picks class 0, and every cell holds two utterances per class.
    for row in &report.rows {
        assert_eq!((row.correct, row.n), (2, 22), "{row:?}");
        assert!((row.accuracy() - 100.0 / 11.0).abs() < 1e-12);
    }
}

#[test]
fn report_structure_and_round_trip() {
    let report = evaluate(&ncnn(4), &test_entries(), &source(), &ctx()).unwrap();
    // A: clean + 4×6, B: clean + 4×6, C: clean + 2×6.
    assert_eq!(report.rows.len(), 25 + 25 + 13);
    assert_eq!(report.rows.iter().map(|r| r.n).sum::<usize>(), test_entries().len());
    for r in &report.rows {
        assert!((r.wer() - (100.0 - r.accuracy())).abs() < 1e-12);
    }
    let text = report.to_csv();
    let back = EvalReport::from_csv(&text, Path::new("mem.csv")).unwrap();
    assert_eq!(back.rows, report.rows);
    assert_eq!(back.to_csv(), text);

    let g = &report.groups()[0];
    let noisy: Vec<f64> = report.rows.iter().filter(|r| r.snr_db.is_some()).map(|r| r.accuracy()).collect();
    let overall = report.overall_average(g).unwrap();
    assert!((overall - oracle::kahan_sum(noisy.iter().copied()) / noisy.len() as f64).abs() < 1e-9);
    // The overall mean weights each set by its number of noisy cells.
    let weighted = (24.0 * report.set_average(g, "A").unwrap()
        + 24.0 * report.set_average(g, "B").unwrap()
        + 12.0 * report.set_average(g, "C").unwrap())
        / 60.0;
    assert!((overall - weighted).abs() < 1e-9);
    let by_snr: f64 = [20.0, 15.0, 10.0, 5.0, 0.0, -5.0].iter().map(|s| report.snr_average(g, *s).unwrap()).sum::<f64>() / 6.0;
    assert!((overall - by_snr).abs() < 1e-9);
    let rendered = report.render_text();
    assert!(rendered.contains("overall"));
}

#[test]
fn evaluation_ignores_entry_order() {
    let model = ncnn(6);
    let mut shuffled = test_entries();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(11));
    let a = evaluate(&model, &test_entries(), &source(), &ctx()).unwrap();
    let b = evaluate(&model, &shuffled, &source(), &ctx()).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn evaluation_rejects_training_entries() {
    let r = evaluate(&ncnn(1), &entries(Split::TrainClean), &source(), &ctx());
    assert!(matches!(r, Err(HarnessError::Config(_))));
}

#[test]
fn single_window_sweep_matches_main_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = experiment(vec![2], &["clean"]);
    cfg.models = vec![ModelKind::Ncnn];
    cfg.windows = vec![cfg.window.clone()];
    let main = run_main(&cfg, &fixture().manifest, &source(), &dir.path().join("main")).unwrap();
    let sweep = sweep_window(&cfg, &fixture().manifest, &source(), &dir.path().join("window")).unwrap();
    let cells = |r: &EvalReport| r.rows.iter().map(|r| (r.test_set.clone(), r.noise_type.clone(), r.snr_db, r.correct, r.n)).collect::<Vec<_>>();
    assert_eq!(cells(&main.report), cells(&sweep.report));
    assert_eq!(main.report.meta.checkpoints[0].sha256, sweep.report.meta.checkpoints[0].sha256);
    assert!(sweep.report.rows.iter().all(|r| r.variant == "window=10x30"));
    assert!(dir.path().join("window/logs/window-10x30-clean-s2.csv").exists());
}

#[test]
fn combination_sweep_has_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = experiment(vec![1], &["noisy"]);
    let out = sweep_combination(&cfg, &fixture().manifest, &source(), dir.path()).unwrap();
    let variants: Vec<String> = out.report.groups().iter().map(|g| g.variant.clone()).collect();
    assert_eq!(
        variants,
        ["shared/product", "shared/sum", "shared/maximum", "per-rule/product", "per-rule/sum", "per-rule/maximum"]
    );
    // Shared product and per-rule product are the same checkpoint.
    let cells = |v: &str| out.report.rows.iter().filter(|r| r.variant == v).map(|r| r.correct).collect::<Vec<_>>();
    assert_eq!(cells("shared/product"), cells("per-rule/product"));
    assert_eq!(out.training.len(), 3);
    assert_eq!(out.report.meta.checkpoints.len(), 3);
}

#[test]
fn main_run_writes_checkpoints_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = experiment(vec![1], &["clean"]);
    let out = run_main(&cfg, &fixture().manifest, &source(), dir.path()).unwrap();
    let groups = out.report.groups();
    assert_eq!(groups.len(), 2);
    assert_eq!(groups[0].model, "CNN");
    assert_eq!(groups[1].variant, "product/10x30");
    for rec in &out.report.meta.checkpoints {
        let bytes = std::fs::read(dir.path().join(&rec.path)).unwrap();
        assert_eq!(ncnn::model::sha256_hex(&bytes), rec.sha256);
        assert_eq!(rec.iterations, 6);
    }
    out.report.write(dir.path(), "main").unwrap();
    let back = EvalReport::read_csv(&dir.path().join("main.csv")).unwrap();
    assert_eq!(back.rows, out.report.rows);
}

#[test]
fn bad_experiment_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = experiment(vec![1], &["sideways"]);
    assert!(run_main(&cfg, &fixture().manifest, &source(), dir.path()).is_err());
    cfg.conditions = vec!["clean".into()];
    cfg.window = "ten".into();
    assert!(run_main(&cfg, &fixture().manifest, &source(), dir.path()).is_err());
    cfg.window = "10x30".into();
    cfg.architecture = "desk".into();
    let r = run_main(&cfg, &fixture().manifest, &source(), dir.path());
    assert!(r.is_err());
}

#[test]
fn overfitting_a_small_subset_lowers_the_loss() {
    let subset: Vec<&ManifestEntry> = entries(Split::TrainClean).into_iter().take(16).collect();
    let mut model = ncnn(7);
    let hp = Hyperparams {
        batch_size: 16,
        max_iterations: 200,
        learning_rate: 0.05,
        lr_decay_every: 1000,
        log_every: 0,
        ..Hyperparams::default()
    };
    let out = train(&mut model, &subset, &source(), &hp).unwrap();
    // Mean loss over consecutive 50-iteration windows may never rise by more than 5%.
    let windows: Vec<f64> = out.log.chunks(50).map(|c| c.iter().map(|r| r.loss).sum::<f64>() / c.len() as f64).collect();
    assert_eq!(windows.len(), 4);
    for w in windows.windows(2) {
        assert!(w[1] <= 1.05 * w[0], "{windows:?}");
    }
    assert!(windows[3] < 0.5 * windows[0], "{windows:?}");
}

#[test]
fn early_stop_on_target_accuracy() {
    let subset: Vec<&ManifestEntry> = entries(Split::TrainClean).into_iter().take(4).collect();
    let mut model = ncnn(8);
    let hp = Hyperparams {
        batch_size: 4,
        max_iterations: 400,
        learning_rate: 0.05,
        lr_decay_every: 1000,
        log_every: 5,
        target_train_accuracy: 100.0,
        ..Hyperparams::default()
    };
    let out = train(&mut model, &subset, &source(), &hp).unwrap();
    assert!(out.reached_target);
    assert!(out.iterations < 400);
    assert_eq!(out.log.last().unwrap().train_accuracy, Some(100.0));
    assert_eq!(subset_accuracy(&model, &subset, &source()).unwrap(), 100.0);
}
