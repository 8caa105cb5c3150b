//! Speaker-disjoint train/test splits with multi-condition noise assignment.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::channel::CHANNEL_NAME;
use super::manifest::{Manifest, ManifestEntry, Split, CLEAN, NO_CHANNEL};
use super::noise::{NoiseFamilies, FAMILIES_FILE, SET_A, SET_B, SET_C};
use super::{DataError, Result};
use crate::signal::{noise_offset, read_wav, rms};

pub const CLASSES_FILE: &str = "classes.txt";

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitPlan {
    pub seed: u64,
    pub class_count: usize,
    /// Speakers held out for testing; all others train.
    pub test_speakers: usize,
    pub test_snrs: Vec<f64>,
    pub train_snrs: Vec<f64>,
    /// Conditions assigned to each training recording in `train_noisy`.
    pub train_noisy_copies: usize,
    pub set_a: Vec<String>,
    pub set_b: Vec<String>,
    pub set_c: Vec<String>,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self {
            seed: 1,
            class_count: 11,
            test_speakers: 6,
            test_snrs: vec![20.0, 15.0, 10.0, 5.0, 0.0, -5.0],
            train_snrs: vec![20.0, 15.0, 10.0, 5.0],
            train_noisy_copies: 1,
            set_a: strings(&SET_A),
            set_b: strings(&SET_B),
            set_c: strings(&SET_C),
        }
    }
}

/// `(noise_type, snr)` conditions of the multi-condition training split, clean first.
pub fn train_conditions(plan: &SplitPlan) -> Vec<(String, Option<f64>)> {
    let mut out = vec![(CLEAN.to_string(), None)];
    for n in &plan.set_a {
        for s in &plan.train_snrs {
            out.push((n.clone(), Some(*s)));
        }
    }
    out
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DataError::Plan(m.into()));
        if self.class_count < 2 {
            return bad("class_count must be at least 2");
        }
        if self.test_speakers == 0 {
            return bad("test_speakers must be positive");
        }
        if self.train_noisy_copies == 0 || self.train_noisy_copies > 1 + self.set_a.len() * self.train_snrs.len() {
            return bad("train_noisy_copies must be between 1 and the number of training conditions");
        }
        for set in [&self.set_a, &self.set_b, &self.set_c] {
            if set.len() < 2 {
                return bad("each test set needs at least two noise types");
            }
        }
        if self.set_a.iter().any(|a| self.set_b.contains(a)) {
            return bad("sets A and B must use disjoint noise types");
        }
        if self.set_c.iter().any(|c| !self.set_a.contains(c) && !self.set_b.contains(c)) {
            return bad("set C must reuse noise types from A or B");
        }
        if self.test_snrs.is_empty() || self.train_snrs.is_empty() {
            return bad("SNR lists must be non-empty");
        }
        Ok(())
    }

    fn set(&self, split: Split) -> &[String] {
        match split {
            Split::TestA => &self.set_a,
            Split::TestB => &self.set_b,
            Split::TestC => &self.set_c,
            _ => &[],
        }
    }

    /// Expected entry count per `(split, noise_type, snr)` cell.
    pub fn expected_counts(&self, train_recordings: usize, test_recordings: usize) -> BTreeMap<CellCount, usize> {
        let mut out = BTreeMap::new();
        out.insert(CellCount::new(Split::TrainClean, CLEAN, None), train_recordings);
        let conds = train_conditions(self);
        let slots = train_recordings * self.train_noisy_copies;
        for (k, (noise, snr)) in conds.iter().enumerate() {
            let n = slots / conds.len() + usize::from(k < slots % conds.len());
            if n > 0 {
                out.insert(CellCount::new(Split::TrainNoisy, noise, *snr), n);
            }
        }
        for split in Split::TESTS {
            out.insert(CellCount::new(split, CLEAN, None), test_recordings);
            for noise in self.set(split) {
                for s in &self.test_snrs {
                    out.insert(CellCount::new(split, noise, Some(*s)), test_recordings);
                }
            }
        }
        out
    }
}

/// Key of a manifest cell; SNR kept as its decimal string so it can be ordered.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellCount {
    pub split: Split,
    pub noise_type: String,
    pub snr: String,
}

impl CellCount {
    pub fn new(split: Split, noise_type: &str, snr: Option<f64>) -> Self {
        Self {
            split,
            noise_type: noise_type.into(),
            snr: snr.map_or("-".into(), |s| s.to_string()),
        }
    }
}

/// Recounts a manifest by cell.
pub fn count_cells(manifest: &Manifest) -> BTreeMap<CellCount, usize> {
    let mut out = BTreeMap::new();
    for e in &manifest.entries {
        *out.entry(CellCount::new(e.split, &e.noise_type, e.snr_db)).or_insert(0) += 1;
    }
    out
}

/// A clean recording found in the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub source_id: String,
    pub speaker: String,
    pub audio_path: PathBuf,
    pub label: usize,
}

/// Class names from `classes.txt` when present, otherwise sorted sub-directory names.
pub fn corpus_classes(corpus: &Path) -> Result<Vec<String>> {
    if !corpus.is_dir() {
        return Err(DataError::MissingPath(corpus.to_path_buf()));
    }
    let listed = corpus.join(CLASSES_FILE);
    if listed.exists() {
        let text = std::fs::read_to_string(&listed).map_err(|e| DataError::io(&listed, e))?;
        return Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect());
    }
    let mut names = Vec::new();
    for entry in std::fs::read_dir(corpus).map_err(|e| DataError::io(corpus, e))? {
        let entry = entry.map_err(|e| DataError::io(corpus, e))?;
        if entry.path().is_dir() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

/// Every `<class>/<speaker>_<take>.wav`, sorted by class then file name.
pub fn scan_corpus(corpus: &Path, classes: &[String]) -> Result<Vec<Recording>> {
    let mut out = Vec::new();
    for (label, class) in classes.iter().enumerate() {
        let dir = corpus.join(class);
        if !dir.is_dir() {
            return Err(DataError::MissingPath(dir));
        }
        let mut files: Vec<String> = std::fs::read_dir(&dir)
            .map_err(|e| DataError::io(&dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".wav"))
            .collect();
        files.sort();
        for f in files {
            let stem = f.trim_end_matches(".wav");
            let speaker = stem.rsplit_once('_').map_or(stem, |(s, _)| s).to_string();
            out.push(Recording {
                source_id: format!("{class}-{stem}"),
                speaker,
                audio_path: PathBuf::from(class).join(&f),
                label,
            });
        }
    }
    Ok(out)
}

/// Builds the five splits. Test speakers are a seeded sample; each noisy entry
/// gets a seeded crop offset into its noise file.
pub fn build_splits(corpus: &Path, noise_dir: &Path, plan: &SplitPlan) -> Result<Manifest> {
    plan.validate()?;
    let classes = corpus_classes(corpus)?;
    if classes.len() != plan.class_count {
        return Err(DataError::InsufficientClasses {
            found: classes.len(),
            needed: plan.class_count,
        });
    }
    let recordings = scan_corpus(corpus, &classes)?;
    let labels: BTreeSet<usize> = recordings.iter().map(|r| r.label).collect();
    if labels.len() < plan.class_count {
        return Err(DataError::InsufficientClasses {
            found: labels.len(),
            needed: plan.class_count,
        });
    }
    let families_path = noise_dir.join(FAMILIES_FILE);
    if !families_path.exists() {
        return Err(DataError::MissingPath(families_path));
    }
    let families = NoiseFamilies::read(&families_path)?;
    let mut noise_files: BTreeMap<String, (PathBuf, usize)> = BTreeMap::new();
    for (set_name, wanted) in [("A", &plan.set_a), ("B", &plan.set_b), ("C", &plan.set_c)] {
        let available: BTreeMap<&str, &Path> = families.set(set_name).into_iter().collect();
        for name in wanted {
            let file = available.get(name.as_str()).ok_or_else(|| DataError::EmptyFamily {
                set: set_name.into(),
                noise_type: name.clone(),
            })?;
            if noise_files.contains_key(name) {
                continue;
            }
            let clip = read_wav(&noise_dir.join(file))?;
            if rms(clip.samples()) == 0.0 {
                return Err(DataError::EmptyFamily {
                    set: set_name.into(),
                    noise_type: name.clone(),
                });
            }
            noise_files.insert(name.clone(), (file.to_path_buf(), clip.len()));
        }
    }

    let mut speakers: Vec<String> = recordings.iter().map(|r| r.speaker.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if speakers.len() <= plan.test_speakers {
        return Err(DataError::Plan(format!(
            "{} speakers cannot provide {} test speakers and a training set",
            speakers.len(),
            plan.test_speakers
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    speakers.shuffle(&mut rng);
    let test_speakers: BTreeSet<String> = speakers[..plan.test_speakers].iter().cloned().collect();
    let (test, train): (Vec<&Recording>, Vec<&Recording>) =
        recordings.iter().partition(|r| test_speakers.contains(&r.speaker));

    let mut clip_lens: BTreeMap<&Path, usize> = BTreeMap::new();
    for r in &recordings {
        let p = corpus.join(&r.audio_path);
        let len = hound::WavReader::open(&p).map(|w| w.duration() as usize).map_err(|source| {
            crate::signal::SignalError::Decode {
                path: p.clone(),
                source,
            }
        })?;
        clip_lens.insert(r.audio_path.as_path(), len);
    }

    let mut entries = Vec::new();
    let mut push = |rec: &Recording, split: Split, noise: &str, snr: Option<f64>, channel: &str, rng: &mut ChaCha8Rng| -> Result<()> {
        let (noise_path, offset) = match snr {
            None => (None, 0),
            Some(_) => {
                let (file, len) = &noise_files[noise];
                let clean_len = clip_lens[rec.audio_path.as_path()];
                if *len < clean_len {
                    return Err(DataError::Plan(format!(
                        "noise {noise} ({len} samples) is shorter than {} ({clean_len})",
                        rec.source_id
                    )));
                }
                (Some(file.clone()), noise_offset(*len, clean_len, rng))
            }
        };
        let cond = match snr {
            None => CLEAN.to_string(),
            Some(s) => format!("{noise}/{s}"),
        };
        entries.push(ManifestEntry {
            utterance_id: format!("{}@{split}/{cond}", rec.source_id),
            source_id: rec.source_id.clone(),
            audio_path: rec.audio_path.clone(),
            label: rec.label,
            split,
            noise_type: noise.to_string(),
            snr_db: snr,
            noise_path,
            noise_offset: offset,
            channel: channel.to_string(),
        });
        Ok(())
    };

    for rec in &train {
        push(rec, Split::TrainClean, CLEAN, None, NO_CHANNEL, &mut rng)?;
    }
    let conds = train_conditions(plan);
    let mut order: Vec<&Recording> = train.clone();
    order.shuffle(&mut rng);
    for (i, rec) in order.iter().enumerate() {
        for c in 0..plan.train_noisy_copies {
            let (noise, snr) = &conds[(i * plan.train_noisy_copies + c) % conds.len()];
            push(rec, Split::TrainNoisy, noise, *snr, NO_CHANNEL, &mut rng)?;
        }
    }
    for split in Split::TESTS {
        let channel = if split == Split::TestC { CHANNEL_NAME } else { NO_CHANNEL };
        for rec in &test {
            push(rec, split, CLEAN, None, channel, &mut rng)?;
            for noise in plan.set(split) {
                for snr in &plan.test_snrs {
                    push(rec, split, noise, Some(*snr), channel, &mut rng)?;
                }
            }
        }
    }
    Ok(Manifest {
        corpus_dir: corpus.to_path_buf(),
        noise_dir: noise_dir.to_path_buf(),
        classes,
        entries,
    })
}
