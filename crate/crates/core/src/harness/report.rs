//! Per-cell accuracy reports: CSV, text tables and metadata.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::data::CLEAN;

/// Accuracy of one `(group, test set, noise, SNR)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub experiment: String,
    pub model: String,
    /// Experiment-specific variant label, e.g. a window size or fusion mode.
    pub variant: String,
    pub train_condition: String,
    pub seed: u64,
    pub test_set: String,
    pub noise_type: String,
    /// `None` for clean cells.
    pub snr_db: Option<f64>,
    pub correct: usize,
    pub n: usize,
}

impl EvalRow {
    pub fn accuracy(&self) -> f64 {
        100.0 * self.correct as f64 / self.n as f64
    }

    pub fn wer(&self) -> f64 {
        100.0 - self.accuracy()
    }

    pub fn is_clean(&self) -> bool {
        self.noise_type == CLEAN
    }

    pub fn group(&self) -> GroupKey {
        GroupKey {
            experiment: self.experiment.clone(),
            model: self.model.clone(),
            variant: self.variant.clone(),
            train_condition: self.train_condition.clone(),
            seed: self.seed,
        }
    }
}

/// One trained-and-evaluated configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupKey {
    pub experiment: String,
    pub model: String,
    pub variant: String,
    pub train_condition: String,
    pub seed: u64,
}

impl std::fmt::Display for GroupKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} | {} | {} | train={} | seed={}",
            self.experiment, self.model, self.variant, self.train_condition, self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub label: String,
    /// Relative to the report directory.
    pub path: String,
    pub sha256: String,
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMeta {
    pub experiment: String,
    /// Full experiment configuration as it was run.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub checkpoints: Vec<CheckpointRecord>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub meta: ReportMeta,
}

const CSV_HEADER: [&str; 13] = [
    "experiment",
    "model",
    "variant",
    "train_condition",
    "seed",
    "test_set",
    "noise_type",
    "snr_db",
    "correct",
    "n",
    "accuracy",
    "wer",
    "clean",
];

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn fmt_snr(s: f64) -> String {
    s.to_string()
}

impl EvalReport {
    pub fn extend(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
        self.meta.checkpoints.extend(other.meta.checkpoints);
        for s in other.meta.seeds {
            if !self.meta.seeds.contains(&s) {
                self.meta.seeds.push(s);
            }
        }
    }

    /// Groups in first-appearance order.
    pub fn groups(&self) -> Vec<GroupKey> {
        let mut seen = BTreeSet::new();
        self.rows
            .iter()
            .map(EvalRow::group)
            .filter(|g| seen.insert(g.clone()))
            .collect()
    }

    pub fn group_rows<'a>(&'a self, g: &'a GroupKey) -> impl Iterator<Item = &'a EvalRow> + 'a {
        self.rows.iter().filter(move |r| r.group() == *g)
    }

    /// Mean accuracy over the noisy cells of one test set.
    pub fn set_average(&self, g: &GroupKey, set: &str) -> Option<f64> {
        mean(self.group_rows(g).filter(|r| !r.is_clean() && r.test_set == set).map(EvalRow::accuracy))
    }

    /// Mean accuracy over every noisy cell of the group.
    pub fn overall_average(&self, g: &GroupKey) -> Option<f64> {
        mean(self.group_rows(g).filter(|r| !r.is_clean()).map(EvalRow::accuracy))
    }

    /// Mean accuracy at one SNR over all noise types and test sets.
    pub fn snr_average(&self, g: &GroupKey, snr: f64) -> Option<f64> {
        mean(self.group_rows(g).filter(|r| r.snr_db == Some(snr)).map(EvalRow::accuracy))
    }

    /// Mean accuracy of one noise type of one set over its SNRs.
    pub fn noise_average(&self, g: &GroupKey, set: &str, noise: &str) -> Option<f64> {
        mean(
            self.group_rows(g)
                .filter(|r| !r.is_clean() && r.test_set == set && r.noise_type == noise)
                .map(EvalRow::accuracy),
        )
    }

    pub fn clean_accuracy(&self, g: &GroupKey, set: &str) -> Option<f64> {
        mean(self.group_rows(g).filter(|r| r.is_clean() && r.test_set == set).map(EvalRow::accuracy))
    }

    fn snrs(&self) -> Vec<f64> {
        let mut v: Vec<f64> = Vec::new();
        for r in &self.rows {
            if let Some(s) = r.snr_db {
                if !v.contains(&s) {
                    v.push(s);
                }
            }
        }
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    fn sets(&self, g: &GroupKey) -> Vec<String> {
        let mut v: Vec<String> = Vec::new();
        for r in self.group_rows(g) {
            if !v.contains(&r.test_set) {
                v.push(r.test_set.clone());
            }
        }
        v
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.experiment.clone(),
                r.model.clone(),
                r.variant.clone(),
                r.train_condition.clone(),
                r.seed.to_string(),
                r.test_set.clone(),
                r.noise_type.clone(),
                r.snr_db.map_or(String::new(), fmt_snr),
                r.correct.to_string(),
                r.n.to_string(),
                format!("{:.6}", r.accuracy()),
                format!("{:.6}", r.wer()),
                u8::from(r.is_clean()).to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    /// Parses rows written by [`EvalReport::to_csv`]; metadata is left empty.
    pub fn from_csv(text: &str, origin: &Path) -> Result<Self> {
        let bad = |detail: String| HarnessError::Report {
            path: origin.to_path_buf(),
            detail,
        };
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.iter().collect::<Vec<_>>() != CSV_HEADER {
            return Err(bad("unexpected CSV header".into()));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let num = |k: usize| -> Result<usize> {
                rec[k].parse().map_err(|_| bad(format!("row {}: bad {} {:?}", i + 1, CSV_HEADER[k], &rec[k])))
            };
            let snr_db = match &rec[7] {
                "" => None,
                s => Some(s.parse().map_err(|_| bad(format!("row {}: bad snr_db {s:?}", i + 1)))?),
            };
            let row = EvalRow {
                experiment: rec[0].into(),
                model: rec[1].into(),
                variant: rec[2].into(),
                train_condition: rec[3].into(),
                seed: rec[4].parse().map_err(|_| bad(format!("row {}: bad seed", i + 1)))?,
                test_set: rec[5].into(),
                noise_type: rec[6].into(),
                snr_db,
                correct: num(8)?,
                n: num(9)?,
            };
            if row.n == 0 || row.correct > row.n {
                return Err(bad(format!("row {}: correct/n out of range", i + 1)));
            }
            rows.push(row);
        }
        Ok(Self {
            rows,
            meta: ReportMeta::default(),
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_csv(&text, path)
    }

    /// Per-group cell tables, a per-SNR word-error-rate table and a summary.
    pub fn render_text(&self) -> String {
        let snrs = self.snrs();
        let mut out = String::new();
        let cell = |v: Option<f64>| v.map_or(format!("{:>7}", "-"), |a| format!("{a:>7.2}"));
        let header = |out: &mut String, first: &str| {
            write!(out, "{first:<22}{:>7}", "clean").unwrap();
            for s in &snrs {
                write!(out, "{:>7}", format!("{s}dB")).unwrap();
            }
            writeln!(out, "{:>7}", "avg").unwrap();
        };
        for g in self.groups() {
            writeln!(out, "== {g} ==").unwrap();
            header(&mut out, "set/noise");
            for set in self.sets(&g) {
                let mut noises: Vec<String> = Vec::new();
                for r in self.group_rows(&g).filter(|r| r.test_set == set && !r.is_clean()) {
                    if !noises.contains(&r.noise_type) {
                        noises.push(r.noise_type.clone());
                    }
                }
                for noise in &noises {
                    write!(out, "{:<22}{}", format!("{set}/{noise}"), cell(self.clean_accuracy(&g, &set))).unwrap();
                    for s in &snrs {
                        let a = self
                            .group_rows(&g)
                            .find(|r| r.test_set == set && r.noise_type == *noise && r.snr_db == Some(*s))
                            .map(EvalRow::accuracy);
                        write!(out, "{}", cell(a)).unwrap();
                    }
                    writeln!(out, "{}", cell(self.noise_average(&g, &set, noise))).unwrap();
                }
                writeln!(out, "{:<22}{:>7}{}", format!("{set} average"), "", cell(self.set_average(&g, &set))).unwrap();
            }
            writeln!(out, "{:<22}{:>7}{}", "overall average", "", cell(self.overall_average(&g))).unwrap();
            writeln!(out).unwrap();
        }
        writeln!(out, "== word error rate by SNR (mean over noise types and sets) ==").unwrap();
        write!(out, "{:<60}", "group").unwrap();
        for s in &snrs {
            write!(out, "{:>7}", format!("{s}dB")).unwrap();
        }
        writeln!(out).unwrap();
        for g in self.groups() {
            write!(out, "{:<60}", g.to_string()).unwrap();
            for s in &snrs {
                write!(out, "{}", cell(self.snr_average(&g, *s).map(|a| 100.0 - a))).unwrap();
            }
            writeln!(out).unwrap();
        }
        writeln!(out).unwrap();
        writeln!(out, "== summary: mean accuracy over noisy cells ==").unwrap();
        writeln!(out, "{:<60}{:>7}{:>7}{:>7}{:>9}", "group", "A", "B", "C", "overall").unwrap();
        for g in self.groups() {
            writeln!(
                out,
                "{:<60}{}{}{}  {}",
                g.to_string(),
                cell(self.set_average(&g, "A")),
                cell(self.set_average(&g, "B")),
                cell(self.set_average(&g, "C")),
                cell(self.overall_average(&g))
            )
            .unwrap();
        }
        out
    }

    /// Writes `<stem>.csv`, `<stem>.txt` and `<stem>.meta.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let meta = serde_json::to_string_pretty(&self.meta).expect("meta serialises") + "\n";
        for (ext, body) in [("csv", self.to_csv()), ("txt", self.render_text()), ("meta.json", meta)] {
            let p = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&p, body).map_err(|e| HarnessError::io(&p, e))?;
        }
        Ok(())
    }
}
