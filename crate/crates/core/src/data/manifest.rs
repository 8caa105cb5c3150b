//! Tab-separated utterance manifests.
//!
//! Layout: `#`-prefixed `key=value` preamble lines (corpus and noise-bank
//! roots, class names), one header row, then one entry per line. Audio paths
//! are relative to the corpus root and noise paths to the noise-bank root.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DataError, Result};

pub const CLEAN: &str = "clean";
pub const NO_CHANNEL: &str = "none";
const COLUMNS: [&str; 10] = [
    "utterance_id",
    "source_id",
    "audio_path",
    "label",
    "split",
    "noise_type",
    "snr_db",
    "noise_path",
    "noise_offset",
    "channel",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    #[serde(rename = "train_clean")]
    TrainClean,
    #[serde(rename = "train_noisy")]
    TrainNoisy,
    #[serde(rename = "test_A")]
    TestA,
    #[serde(rename = "test_B")]
    TestB,
    #[serde(rename = "test_C")]
    TestC,
}

impl Split {
    pub const ALL: [Split; 5] = [Split::TrainClean, Split::TrainNoisy, Split::TestA, Split::TestB, Split::TestC];
    pub const TESTS: [Split; 3] = [Split::TestA, Split::TestB, Split::TestC];

    pub fn name(self) -> &'static str {
        match self {
            Split::TrainClean => "train_clean",
            Split::TrainNoisy => "train_noisy",
            Split::TestA => "test_A",
            Split::TestB => "test_B",
            Split::TestC => "test_C",
        }
    }

    /// `"A"`, `"B"` or `"C"` for test splits.
    pub fn test_set(self) -> Option<&'static str> {
        match self {
            Split::TestA => Some("A"),
            Split::TestB => Some("B"),
            Split::TestC => Some("C"),
            _ => None,
        }
    }

    pub fn is_train(self) -> bool {
        matches!(self, Split::TrainClean | Split::TrainNoisy)
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Split::ALL
            .into_iter()
            .find(|sp| sp.name() == s)
            .ok_or_else(|| format!("unknown split {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub utterance_id: String,
    /// Identifies the clean recording; shared by all conditions derived from it.
    pub source_id: String,
    pub audio_path: PathBuf,
    pub label: usize,
    pub split: Split,
    pub noise_type: String,
    pub snr_db: Option<f64>,
    pub noise_path: Option<PathBuf>,
    pub noise_offset: usize,
    pub channel: String,
}

impl ManifestEntry {
    pub fn is_clean(&self) -> bool {
        self.noise_type == CLEAN
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub corpus_dir: PathBuf,
    pub noise_dir: PathBuf,
    pub classes: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

fn check_field(value: &str, what: &str) -> Result<()> {
    if value.is_empty() || value.contains(['\t', '\n', '\r']) {
        return Err(DataError::Plan(format!("{what} {value:?} cannot be stored in a manifest")));
    }
    Ok(())
}

impl Manifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn to_tsv(&self) -> Result<String> {
        let mut out = String::new();
        for (k, p) in [("corpus", &self.corpus_dir), ("noise_bank", &self.noise_dir)] {
            check_field(&p.to_string_lossy(), k)?;
            writeln!(out, "# {k}={}", p.display()).expect("string write");
        }
        for c in &self.classes {
            check_field(c, "class")?;
        }
        writeln!(out, "# classes={}", self.classes.join(",")).expect("string write");
        writeln!(out, "{}", COLUMNS.join("\t")).expect("string write");
        for e in &self.entries {
            for (v, what) in [
                (e.utterance_id.as_str(), "utterance_id"),
                (e.source_id.as_str(), "source_id"),
                (&*e.audio_path.to_string_lossy(), "audio_path"),
                (e.noise_type.as_str(), "noise_type"),
                (e.channel.as_str(), "channel"),
            ] {
                check_field(v, what)?;
            }
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.utterance_id,
                e.source_id,
                e.audio_path.display(),
                e.label,
                e.split,
                e.noise_type,
                e.snr_db.map_or("-".into(), |s| s.to_string()),
                e.noise_path.as_ref().map_or("-".into(), |p| p.display().to_string()),
                e.noise_offset,
                e.channel
            )
            .expect("string write");
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.to_tsv()?;
        std::fs::write(path, text).map_err(|e| DataError::io(path, e))
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, detail: String| DataError::Parse {
            path: origin.to_path_buf(),
            line,
            detail,
        };
        let mut corpus_dir = None;
        let mut noise_dir = None;
        let mut classes = None;
        let mut entries = Vec::new();
        let mut saw_header = false;
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest.split_once('=').ok_or_else(|| err(n, "preamble needs key=value".into()))?;
                match k {
                    "corpus" => corpus_dir = Some(PathBuf::from(v)),
                    "noise_bank" => noise_dir = Some(PathBuf::from(v)),
                    "classes" => classes = Some(v.split(',').map(str::to_string).collect::<Vec<_>>()),
                    _ => return Err(err(n, format!("unknown preamble key {k:?}"))),
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            if !saw_header {
                if line != COLUMNS.join("\t") {
                    return Err(err(n, "unexpected column header".into()));
                }
                saw_header = true;
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != COLUMNS.len() {
                return Err(err(n, format!("expected {} fields, found {}", COLUMNS.len(), f.len())));
            }
            let label: usize = f[3].parse().map_err(|_| err(n, format!("bad label {:?}", f[3])))?;
            let split: Split = f[4].parse().map_err(|e: String| err(n, e))?;
            let snr_db = match f[6] {
                "-" => None,
                s => Some(s.parse::<f64>().map_err(|_| err(n, format!("bad snr {s:?}")))?),
            };
            let noise_path = (f[7] != "-").then(|| PathBuf::from(f[7]));
            let noise_offset = f[8].parse().map_err(|_| err(n, format!("bad offset {:?}", f[8])))?;
            let entry = ManifestEntry {
                utterance_id: f[0].into(),
                source_id: f[1].into(),
                audio_path: f[2].into(),
                label,
                split,
                noise_type: f[5].into(),
                snr_db,
                noise_path,
                noise_offset,
                channel: f[9].into(),
            };
            if (entry.noise_type == CLEAN) != entry.snr_db.is_none() || entry.snr_db.is_some() != entry.noise_path.is_some()
            {
                return Err(err(n, "noise_type, snr_db and noise_path disagree".into()));
            }
            entries.push(entry);
        }
        let classes = classes.ok_or_else(|| err(0, "missing classes preamble".into()))?;
        if let Some(e) = entries.iter().find(|e| e.label >= classes.len()) {
            return Err(err(0, format!("label {} of {} exceeds class count", e.label, e.utterance_id)));
        }
        Ok(Self {
            corpus_dir: corpus_dir.ok_or_else(|| err(0, "missing corpus preamble".into()))?,
            noise_dir: noise_dir.ok_or_else(|| err(0, "missing noise_bank preamble".into()))?,
            classes,
            entries,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        Self::parse(&text, path)
    }
}
