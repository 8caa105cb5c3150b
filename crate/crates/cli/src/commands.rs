//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use ncnn::data::{
    build_splits, count_cells, generate_corpus, generate_noise_bank, AudioStore, Manifest, ManifestEntry, CLASSES_FILE,
    CLEAN, FAMILIES_FILE, NO_CHANNEL,
};
use ncnn::grid::write_grid_png;
use ncnn::harness::{
    evaluate, run_main, sweep_combination, sweep_window, train as train_model, window_label, CheckpointRecord,
    EvalContext, EvalReport, ExperimentOutput, FeatureSource, ReportMeta,
};
use ncnn::model::{
    build_cnn, build_ncnn, load_checkpoint, save_checkpoint, sha256_hex, shape_report, ArchitectureConfig, Classifier,
};
use ncnn::neutrosophic::{baseline_transform, export_map, proposed_transform, NeutrosophicMap};
use ncnn::signal::{fit_to_grid, read_wav, spectrogram, Spectrogram};

use crate::config::{ConfigError, RunConfig};

fn mkdir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write(path: &Path, body: &str) -> anyhow::Result<()> {
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

pub fn prepare(cfg: &RunConfig) -> anyhow::Result<()> {
    let corpus = cfg.corpus_dir();
    let noise = cfg.noise_dir();
    mkdir(&cfg.output_dir())?;
    if cfg.paths.corpus.is_empty() && !corpus.join(CLASSES_FILE).exists() {
        let n = generate_corpus(&corpus, &cfg.corpus)?;
        log::info!("generated {n} utterances in {}", corpus.display());
    }
    if cfg.paths.noise_bank.is_empty() && !noise.join(FAMILIES_FILE).exists() {
        generate_noise_bank(&noise, &cfg.noise)?;
        log::info!("generated noise bank in {}", noise.display());
    }
    let manifest = build_splits(&corpus, &noise, &cfg.split)?;
    let path = cfg.manifest_path();
    if let Some(parent) = path.parent() {
        mkdir(parent)?;
    }
    let text = manifest.to_tsv()?;
    write(&path, &text)?;
    write(&cfg.output_dir().join("prepare.toml"), &cfg.to_toml())?;
    println!("{:<12} {:<12} {:>6} {:>7}", "split", "noise", "snr", "count");
    for (cell, n) in count_cells(&manifest) {
        println!("{:<12} {:<12} {:>6} {:>7}", cell.split.name(), cell.noise_type, cell.snr, n);
    }
    println!("manifest {} ({} entries) sha256 {}", path.display(), manifest.entries.len(), sha256_hex(text.as_bytes()));
    Ok(())
}

fn load_manifest(cfg: &RunConfig) -> anyhow::Result<Manifest> {
    let path = cfg.manifest_path();
    if !path.exists() {
        return Err(anyhow!(ncnn::data::DataError::MissingPath(path))).context("run `ncnn prepare` first");
    }
    Ok(Manifest::read(&path)?)
}

fn source(cfg: &RunConfig, manifest: &Manifest) -> FeatureSource {
    FeatureSource::new(AudioStore::for_manifest(manifest), cfg.experiment.features)
}

fn transform_one(
    spec: &Spectrogram,
    window_text: &str,
    baseline: bool,
    dir: &Path,
    stem: &str,
) -> anyhow::Result<NeutrosophicMap> {
    let window = window_label(window_text)?;
    let map = if baseline {
        baseline_transform(spec, window)?
    } else {
        proposed_transform(spec, window)?
    };
    spec.write(&dir.join(format!("{stem}.spec.grid")))?;
    write_grid_png(&dir.join(format!("{stem}.spec.png")), &spec.grid, false)?;
    let out = export_map(&map, dir, stem)?;
    println!(
        "{stem}: window {window_text} ({}), spectrogram {}x{}, truth degenerate: {}, indeterminacy degenerate: {}",
        map.window,
        spec.frame_count(),
        spec.bin_count(),
        map.truth_degenerate,
        map.indeterminacy_degenerate
    );
    println!("  wrote {} and {}", out.indeterminacy.display(), out.image.display());
    Ok(map)
}

fn file_stem(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

pub fn transform(
    cfg: &RunConfig,
    input: &str,
    window: Option<&str>,
    baseline: bool,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let dir = out.unwrap_or_else(|| cfg.output_dir().join("transform"));
    mkdir(&dir)?;
    let window = window.unwrap_or(&cfg.experiment.window);
    let features = cfg.experiment.features;
    if input.ends_with(".wav") || Path::new(input).is_file() {
        let clip = read_wav(Path::new(input))?;
        let spec = fit_to_grid(&spectrogram(&clip, &features.stft)?, features.frames, features.bins);
        let stem = file_stem(Path::new(input).file_stem().map_or(input.into(), |s| s.to_string_lossy()).as_ref());
        transform_one(&spec, window, baseline, &dir, &stem)?;
        return Ok(());
    }
    let manifest = load_manifest(cfg)?;
    let entry = manifest
        .entries
        .iter()
        .find(|e| e.utterance_id == input)
        .ok_or_else(|| anyhow!(ncnn::data::DataError::Plan(format!("no manifest entry or WAV file named {input:?}"))))?;
    let store = AudioStore::for_manifest(&manifest);
    let mut variants: Vec<(String, ManifestEntry)> = Vec::new();
    if !entry.is_clean() || entry.channel != NO_CHANNEL {
        let clean = ManifestEntry {
            utterance_id: format!("{}@clean", entry.source_id),
            noise_type: CLEAN.into(),
            snr_db: None,
            noise_path: None,
            noise_offset: 0,
            channel: NO_CHANNEL.into(),
            ..entry.clone()
        };
        variants.push(("clean".into(), clean));
        variants.push(("noisy".into(), entry.clone()));
    } else {
        variants.push(("clean".into(), entry.clone()));
    }
    for (label, e) in variants {
        let spec = store.spectrogram(&e, &features)?;
        transform_one(&spec, window, baseline, &dir, &format!("{}.{label}", file_stem(&entry.source_id)))?;
    }
    Ok(())
}

fn config_error(msg: String) -> anyhow::Error {
    anyhow!(ConfigError(msg))
}

pub fn train(cfg: &RunConfig, model: &str, condition: &str, seed: Option<u64>) -> anyhow::Result<()> {
    let exp = &cfg.experiment;
    exp.validate()?;
    let seed = seed
        .or_else(|| exp.seeds.first().copied())
        .ok_or_else(|| config_error("no seed given".into()))?;
    let arch = exp.architecture()?;
    let manifest = load_manifest(cfg)?;
    let mut classifier = match model {
        "cnn" => Classifier::Cnn(build_cnn(&arch, seed)?),
        _ => Classifier::Ncnn(build_ncnn(&arch, seed, exp.rule, window_label(&exp.window)?)?),
    };
    let split = ncnn::harness::experiment::condition_split(condition)?;
    let entries: Vec<&ManifestEntry> = manifest.split(split).collect();
    let mut hp = exp.hyperparams.clone();
    hp.seed = seed;
    let src = source(cfg, &manifest);
    let outcome = train_model(&mut classifier, &entries, &src, &hp)?;
    let out = cfg.output_dir();
    let tag = format!("train-{model}-{condition}-s{seed}");
    for sub in ["checkpoints", "logs"] {
        mkdir(&out.join(sub))?;
    }
    let ckpt = out.join(format!("checkpoints/{tag}.ckpt"));
    let sha = save_checkpoint(&ckpt, &classifier, outcome.iterations)?;
    write(&out.join(format!("logs/{tag}.csv")), &outcome.log_csv())?;
    let last = outcome.log.last().expect("at least one iteration");
    println!(
        "trained {} for {} iterations on {} entries; final batch loss {:.4}",
        classifier.kind().label(),
        outcome.iterations,
        entries.len(),
        last.loss
    );
    println!("checkpoint {} sha256 {sha}", ckpt.display());
    Ok(())
}

pub fn eval(cfg: &RunConfig, checkpoints: &[PathBuf], train_condition: &str, sets: &str) -> anyhow::Result<()> {
    let manifest = load_manifest(cfg)?;
    let wanted: Vec<&str> = sets.split(',').map(str::trim).collect();
    let entries: Vec<&ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| e.split.test_set().is_some_and(|s| wanted.contains(&s)))
        .collect();
    let src = source(cfg, &manifest);
    let mut report = EvalReport {
        rows: Vec::new(),
        meta: ReportMeta {
            experiment: "eval".into(),
            config: serde_json::to_value(cfg)?,
            seeds: Vec::new(),
            checkpoints: Vec::new(),
        },
    };
    for path in checkpoints {
        let loaded = load_checkpoint(path)?;
        let stem = path.file_stem().map_or("checkpoint".into(), |s| s.to_string_lossy().into_owned());
        let ctx = EvalContext {
            experiment: "eval".into(),
            variant: stem.clone(),
            train_condition: train_condition.into(),
        };
        let r = evaluate(&loaded.model, &entries, &src, &ctx)?;
        report.rows.extend(r.rows);
        if !report.meta.seeds.contains(&loaded.model.seed()) {
            report.meta.seeds.push(loaded.model.seed());
        }
        report.meta.checkpoints.push(CheckpointRecord {
            label: stem,
            path: path.display().to_string(),
            sha256: loaded.digest,
            iterations: loaded.header.iterations,
        });
    }
    let dir = cfg.output_dir().join("reports");
    report.write(&dir, "eval")?;
    print_summary(&report);
    println!("report written to {}", dir.join("eval.csv").display());
    Ok(())
}

fn print_summary(report: &EvalReport) {
    for g in report.groups() {
        let fmt = |v: Option<f64>| v.map_or("-".into(), |a| format!("{a:.2}%"));
        println!(
            "{g}: clean {} | A {} | B {} | C {} | overall {}",
            fmt(report.clean_accuracy(&g, "A")),
            fmt(report.set_average(&g, "A")),
            fmt(report.set_average(&g, "B")),
            fmt(report.set_average(&g, "C")),
            fmt(report.overall_average(&g))
        );
    }
}

pub fn experiment(cfg: &RunConfig, name: &str) -> anyhow::Result<()> {
    let manifest = load_manifest(cfg)?;
    let src = source(cfg, &manifest);
    let out = cfg.output_dir();
    let run: fn(&_, &_, &_, &_) -> ncnn::harness::Result<ExperimentOutput> = match name {
        "main" => run_main,
        "window" => sweep_window,
        _ => sweep_combination,
    };
    let mut result = run(&cfg.experiment, &manifest, &src, &out)?;
    result.report.meta.config = serde_json::to_value(cfg)?;
    let dir = out.join("reports");
    result.report.write(&dir, name)?;
    print_summary(&result.report);
    println!("report written to {}", dir.join(format!("{name}.txt")).display());
    Ok(())
}

pub fn report(csvs: &[PathBuf], out: Option<&Path>) -> anyhow::Result<()> {
    let mut merged = EvalReport::default();
    for p in csvs {
        merged.extend(EvalReport::read_csv(p)?);
    }
    let text = merged.render_text();
    print!("{text}");
    if let Some(o) = out {
        write(o, &text)?;
    }
    Ok(())
}

pub fn shapes(architecture: &str) -> anyhow::Result<()> {
    let cfg = ArchitectureConfig::load(architecture).map_err(|e| config_error(e.to_string()))?;
    let report = shape_report(&cfg).map_err(|e| config_error(e.to_string()))?;
    print!("{report}");
    Ok(())
}
