//! The experiment matrix: clean-vs-noisy training, window sweep, fusion-rule sweep.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::eval::{evaluate, EvalContext};
use super::report::{CheckpointRecord, EvalReport, ReportMeta};
use super::train::{train, Hyperparams, TrainOutcome};
use super::{FeatureSource, HarnessError, Result};
use crate::data::{FeatureConfig, Manifest, ManifestEntry, Split};
use crate::model::{build_cnn, build_ncnn, save_checkpoint, ArchitectureConfig, Classifier, CombinationRule, ModelKind};
use crate::neutrosophic::NsWindow;

/// Window sizes of the sweep, as `time x frequency` cell counts.
pub const SWEEP_WINDOWS: [&str; 4] = ["20x40", "30x10", "10x30", "30x30"];

/// Parses a `"TxF"` label; even sizes are moved to the next odd size.
pub fn window_label(label: &str) -> Result<NsWindow> {
    let bad = || HarnessError::Config(format!("window label {label:?} is not of the form TxF"));
    let (t, f) = label.split_once('x').ok_or_else(bad)?;
    let t: usize = t.trim().parse().map_err(|_| bad())?;
    let f: usize = f.trim().parse().map_err(|_| bad())?;
    if t == 0 || f == 0 {
        return Err(bad());
    }
    Ok(NsWindow::nearest_odd(t, f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in architecture name or TOML path.
    pub architecture: String,
    pub seeds: Vec<u64>,
    /// Training splits to run: `"clean"` and/or `"noisy"`.
    pub conditions: Vec<String>,
    pub models: Vec<ModelKind>,
    pub rule: CombinationRule,
    /// Indeterminacy window of the main experiment and the rule sweep.
    pub window: String,
    pub windows: Vec<String>,
    pub rules: Vec<CombinationRule>,
    pub hyperparams: Hyperparams,
    pub features: FeatureConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            architecture: "desk".into(),
            seeds: vec![1, 2, 3],
            conditions: vec!["clean".into(), "noisy".into()],
            models: vec![ModelKind::Cnn, ModelKind::Ncnn],
            rule: CombinationRule::Product,
            window: "10x30".into(),
            windows: SWEEP_WINDOWS.iter().map(|s| s.to_string()).collect(),
            rules: CombinationRule::ALL.to_vec(),
            hyperparams: Hyperparams::default(),
            features: FeatureConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        window_label(&self.window)?;
        for w in &self.windows {
            window_label(w)?;
        }
        for c in &self.conditions {
            condition_split(c)?;
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Result<ArchitectureConfig> {
        Ok(ArchitectureConfig::load(&self.architecture)?)
    }
}

pub fn condition_split(condition: &str) -> Result<Split> {
    match condition {
        "clean" => Ok(Split::TrainClean),
        "noisy" => Ok(Split::TrainNoisy),
        other => Err(HarnessError::Config(format!("unknown training condition {other:?}"))),
    }
}

/// Everything an experiment produced; the report's metadata lists the checkpoints.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: EvalReport,
    pub training: Vec<(String, TrainOutcome)>,
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    arch: ArchitectureConfig,
    manifest: &'a Manifest,
    source: &'a FeatureSource,
    out_dir: &'a Path,
    experiment: &'static str,
    output: ExperimentOutput,
}

impl<'a> Runner<'a> {
    fn new(
        experiment: &'static str,
        cfg: &'a ExperimentConfig,
        manifest: &'a Manifest,
        source: &'a FeatureSource,
        out_dir: &'a Path,
    ) -> Result<Self> {
        cfg.validate()?;
        let arch = cfg.architecture()?;
        if arch.class_count != manifest.class_count() {
            return Err(HarnessError::Config(format!(
                "architecture has {} classes, manifest has {}",
                arch.class_count,
                manifest.class_count()
            )));
        }
        for sub in ["checkpoints", "logs"] {
            let d = out_dir.join(sub);
            std::fs::create_dir_all(&d).map_err(|e| HarnessError::io(&d, e))?;
        }
        Ok(Self {
            cfg,
            arch,
            manifest,
            source,
            out_dir,
            experiment,
            output: ExperimentOutput {
                report: EvalReport {
                    rows: Vec::new(),
                    meta: ReportMeta {
                        experiment: experiment.into(),
                        config: serde_json::to_value(cfg).expect("config serialises"),
                        seeds: cfg.seeds.clone(),
                        checkpoints: Vec::new(),
                    },
                },
                training: Vec::new(),
            },
        })
    }

    fn build(&self, kind: ModelKind, seed: u64, rule: CombinationRule, window: NsWindow) -> Result<Classifier> {
        Ok(match kind {
            ModelKind::Cnn => Classifier::Cnn(build_cnn(&self.arch, seed)?),
            ModelKind::Ncnn => Classifier::Ncnn(build_ncnn(&self.arch, seed, rule, window)?),
        })
    }

    fn test_entries(&self) -> Vec<&'a ManifestEntry> {
        self.manifest.entries.iter().filter(|e| !e.split.is_train()).collect()
    }

    /// Trains a fresh model and saves checkpoint plus log under `tag`.
    fn train(&mut self, mut model: Classifier, condition: &str, tag: &str) -> Result<Classifier> {
        let split = condition_split(condition)?;
        let entries: Vec<&ManifestEntry> = self.manifest.split(split).collect();
        let mut hp = self.cfg.hyperparams.clone();
        hp.seed = model.seed();
        log::info!("{}: training {tag} on {} entries", self.experiment, entries.len());
        let outcome = train(&mut model, &entries, self.source, &hp)?;
        let rel = format!("checkpoints/{tag}.ckpt");
        let sha256 = save_checkpoint(&self.out_dir.join(&rel), &model, outcome.iterations)?;
        let log_path = self.out_dir.join(format!("logs/{tag}.csv"));
        std::fs::write(&log_path, outcome.log_csv()).map_err(|e| HarnessError::io(&log_path, e))?;
        self.output.report.meta.checkpoints.push(CheckpointRecord {
            label: tag.into(),
            path: rel,
            sha256,
            iterations: outcome.iterations,
        });
        self.output.training.push((tag.into(), outcome));
        Ok(model)
    }

    fn evaluate(&mut self, model: &Classifier, condition: &str, variant: &str) -> Result<()> {
        let ctx = EvalContext {
            experiment: self.experiment.into(),
            variant: variant.into(),
            train_condition: condition.into(),
        };
        log::info!("{}: evaluating {} {variant} (train={condition})", self.experiment, model.kind().label());
        let r = evaluate(model, &self.test_entries(), self.source, &ctx)?;
        self.output.report.rows.extend(r.rows);
        Ok(())
    }
}

fn with_rule(model: &Classifier, rule: CombinationRule) -> Classifier {
    let mut m = model.clone();
    if let Classifier::Ncnn(n) = &mut m {
        n.rule = rule;
    }
    m
}

/// CNN and NCNN trained on each condition and seed, evaluated on every test set.
pub fn run_main(cfg: &ExperimentConfig, manifest: &Manifest, source: &FeatureSource, out_dir: &Path) -> Result<ExperimentOutput> {
    let mut r = Runner::new("main", cfg, manifest, source, out_dir)?;
    let window = window_label(&cfg.window)?;
    for &seed in &cfg.seeds {
        for cond in &cfg.conditions {
            for &kind in &cfg.models {
                let variant = match kind {
                    ModelKind::Cnn => "spectrogram".to_string(),
                    ModelKind::Ncnn => format!("{}/{}", cfg.rule, cfg.window),
                };
                let tag = format!("main-{}-{cond}-s{seed}", kind.label().to_lowercase());
                let model = r.build(kind, seed, cfg.rule, window)?;
                let model = r.train(model, cond, &tag)?;
                r.evaluate(&model, cond, &variant)?;
            }
        }
    }
    Ok(r.output)
}

/// One NCNN per window size; rows are labelled with the requested size.
pub fn sweep_window(cfg: &ExperimentConfig, manifest: &Manifest, source: &FeatureSource, out_dir: &Path) -> Result<ExperimentOutput> {
    let mut r = Runner::new("window", cfg, manifest, source, out_dir)?;
    for &seed in &cfg.seeds {
        for cond in &cfg.conditions {
            for label in &cfg.windows {
                let window = window_label(label)?;
                let tag = format!("window-{label}-{cond}-s{seed}");
                let model = r.build(ModelKind::Ncnn, seed, cfg.rule, window)?;
                let model = r.train(model, cond, &tag)?;
                r.evaluate(&model, cond, &format!("window={label}"))?;
            }
        }
    }
    Ok(r.output)
}

/// Fusion rules in two modes: `shared/<rule>` swaps the rule of one
/// product-trained checkpoint at evaluation time; `per-rule/<rule>` trains
/// with that rule. The per-rule product model is the shared checkpoint,
/// since its training run would be identical.
pub fn sweep_combination(
    cfg: &ExperimentConfig,
    manifest: &Manifest,
    source: &FeatureSource,
    out_dir: &Path,
) -> Result<ExperimentOutput> {
    let mut r = Runner::new("combination", cfg, manifest, source, out_dir)?;
    let window = window_label(&cfg.window)?;
    for &seed in &cfg.seeds {
        for cond in &cfg.conditions {
            let shared = r.build(ModelKind::Ncnn, seed, CombinationRule::Product, window)?;
            let shared = r.train(shared, cond, &format!("combination-shared-{cond}-s{seed}"))?;
            for &rule in &cfg.rules {
                r.evaluate(&with_rule(&shared, rule), cond, &format!("shared/{rule}"))?;
            }
            for &rule in &cfg.rules {
                let model = if rule == CombinationRule::Product {
                    shared.clone()
                } else {
                    let m = r.build(ModelKind::Ncnn, seed, rule, window)?;
                    r.train(m, cond, &format!("combination-{rule}-{cond}-s{seed}"))?
                };
                r.evaluate(&model, cond, &format!("per-rule/{rule}"))?;
            }
        }
    }
    Ok(r.output)
}
