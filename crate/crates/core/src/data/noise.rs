//! Synthetic noise bank and its family-mapping file.
//!
//! Every noise type is generated from a seed: coloured noises (white, pink,
//! brown), babble made of overlapping synthetic talkers, and environmental
//! textures assembled from those parts (engine harmonics, rumble, transients,
//! tonal sweeps). The mapping file `families.tsv` lists `set<TAB>noise_type<TAB>file`
//! rows; user-supplied WAVs can be registered by editing it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::synth::{synthesize_word, Voice, WORDS};
use super::{DataError, Result};
use crate::signal::{read_wav, rms, write_wav, AudioClip};

pub const FAMILIES_FILE: &str = "families.tsv";

/// Noise types generated for each test set; C reuses one type from A and one from B.
pub const SET_A: [&str; 4] = ["babble", "car", "subway", "exhibition"];
pub const SET_B: [&str; 4] = ["restaurant", "street", "airport", "station"];
pub const SET_C: [&str; 2] = ["subway", "street"];
/// Generated but not mapped to a test set.
pub const EXTRA: [&str; 2] = ["white", "pink"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseBankSpec {
    pub seconds: f64,
    pub sample_rate: u32,
    pub seed: u64,
    /// Target RMS of every written noise file.
    pub level: f64,
}

impl Default for NoiseBankSpec {
    fn default() -> Self {
        Self {
            seconds: 20.0,
            sample_rate: 8000,
            seed: 77,
            level: 0.1,
        }
    }
}

fn white<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let d = Normal::new(0.0, 1.0).expect("unit normal");
    (0..n).map(|_| d.sample(rng)).collect()
}

/// Kellet's economy pink filter.
fn pink<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    white(n, rng)
        .into_iter()
        .map(|w| {
            b0 = 0.99765 * b0 + w * 0.0990460;
            b1 = 0.96300 * b1 + w * 0.2965164;
            b2 = 0.57000 * b2 + w * 1.0526913;
            b0 + b1 + b2 + w * 0.1848
        })
        .collect()
}

fn brown<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut acc = 0.0;
    white(n, rng)
        .into_iter()
        .map(|w| {
            acc = 0.995 * acc + 0.05 * w;
            acc
        })
        .collect()
}

fn one_pole_lowpass(x: &mut [f64], cutoff: f64, fs: f64) {
    let a = (-2.0 * std::f64::consts::PI * cutoff / fs).exp();
    let mut y = 0.0;
    for v in x.iter_mut() {
        y = (1.0 - a) * *v + a * y;
        *v = y;
    }
}

fn highpass(x: &mut [f64], cutoff: f64, fs: f64) {
    let mut low = x.to_vec();
    one_pole_lowpass(&mut low, cutoff, fs);
    for (v, l) in x.iter_mut().zip(low) {
        *v -= l;
    }
}

fn normalize_rms(x: &mut [f64], level: f64) {
    let r = rms(x);
    if r > 0.0 {
        x.iter_mut().for_each(|v| *v *= level / r);
    }
}

fn add(dst: &mut [f64], src: &[f64], gain: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += gain * s;
    }
}

/// `talkers` overlapping streams of random words from random voices.
fn babble<R: Rng>(n: usize, fs: u32, talkers: usize, rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for _ in 0..talkers {
        let voice = Voice::random(rng);
        let mut stream = Vec::with_capacity(n + fs as usize);
        stream.extend(std::iter::repeat_n(0.0, rng.random_range(0..fs as usize / 2)));
        while stream.len() < n {
            let word = rng.random_range(0..WORDS.len());
            stream.extend(synthesize_word(word, &voice, fs, 0.5, rng));
        }
        add(&mut out, &stream[..n], 1.0);
    }
    out
}

/// Decaying sinusoid bursts at random times.
fn clinks<R: Rng>(n: usize, fs: f64, rate_hz: f64, band: (f64, f64), rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let count = (n as f64 / fs * rate_hz) as usize;
    for _ in 0..count {
        let start = rng.random_range(0..n);
        let f = rng.random_range(band.0..band.1);
        let amp = rng.random_range(0.3..1.0);
        let decay = rng.random_range(0.01..0.05) * fs;
        for (k, slot) in out[start..].iter_mut().take((decay * 5.0) as usize).enumerate() {
            let t = k as f64;
            *slot += amp * (-t / decay).exp() * (2.0 * std::f64::consts::PI * f * t / fs).sin();
        }
    }
    out
}

/// Tone whose frequency drifts linearly across each event.
fn sweeps<R: Rng>(n: usize, fs: f64, events: usize, band: (f64, f64), rng: &mut R) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for _ in 0..events {
        let len = (rng.random_range(0.5..2.0) * fs) as usize;
        let start = rng.random_range(0..n.saturating_sub(len).max(1));
        let (f_a, f_b) = (rng.random_range(band.0..band.1), rng.random_range(band.0..band.1));
        let mut phase = 0.0;
        for (k, slot) in out[start..].iter_mut().take(len).enumerate() {
            let frac = k as f64 / len as f64;
            phase += 2.0 * std::f64::consts::PI * (f_a + (f_b - f_a) * frac) / fs;
            *slot += (std::f64::consts::PI * frac).sin() * phase.sin();
        }
    }
    out
}

/// Slow random amplitude envelope with the given mean period.
fn swell<R: Rng>(n: usize, fs: f64, period_s: f64, depth: f64, rng: &mut R) -> Vec<f64> {
    let phase0: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let phase1: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let m = 0.6 * (std::f64::consts::TAU * t / period_s + phase0).sin()
                + 0.4 * (std::f64::consts::TAU * t / (period_s * 0.37) + phase1).sin();
            1.0 + depth * m
        })
        .collect()
}

/// Samples for one named noise type.
pub fn generate_noise(kind: &str, n: usize, fs: u32, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let fsf = fs as f64;
    let mut x = match kind {
        "white" => white(n, rng),
        "pink" => pink(n, rng),
        "babble" => babble(n, fs, 8, rng),
        "car" => {
            let mut x = brown(n, rng);
            one_pole_lowpass(&mut x, 250.0, fsf);
            normalize_rms(&mut x, 1.0);
            let f0 = rng.random_range(26.0..34.0);
            let mut phase = 0.0;
            let drift = swell(n, fsf, 7.0, 0.08, rng);
            for (i, v) in x.iter_mut().enumerate() {
                phase += std::f64::consts::TAU * f0 * drift[i] / fsf;
                *v += (1..=8).map(|h| (h as f64 * phase).sin() / h as f64).sum::<f64>() * 0.5;
            }
            x
        }
        "subway" => {
            let mut x = brown(n, rng);
            highpass(&mut x, 80.0, fsf);
            one_pole_lowpass(&mut x, 900.0, fsf);
            normalize_rms(&mut x, 1.0);
            let env = swell(n, fsf, 5.0, 0.3, rng);
            x.iter_mut().zip(&env).for_each(|(v, e)| *v *= e);
            let clack = clinks(n, fsf, 1.2, (150.0, 600.0), rng);
            add(&mut x, &clack, 1.5);
            add(&mut x, &sweeps(n, fsf, 3, (1800.0, 2600.0), rng), 0.3);
            x
        }
        "exhibition" => {
            let mut x = babble(n, fs, 16, rng);
            normalize_rms(&mut x, 1.0);
            let mut p = pink(n, rng);
            normalize_rms(&mut p, 0.5);
            add(&mut x, &p, 1.0);
            x
        }
        "restaurant" => {
            let mut x = babble(n, fs, 6, rng);
            normalize_rms(&mut x, 1.0);
            add(&mut x, &clinks(n, fsf, 3.0, (2000.0, 3600.0), rng), 0.8);
            x
        }
        "street" => {
            let mut x = pink(n, rng);
            normalize_rms(&mut x, 0.6);
            let mut cars = brown(n, rng);
            one_pole_lowpass(&mut cars, 600.0, fsf);
            normalize_rms(&mut cars, 1.0);
            let env = swell(n, fsf, 4.0, 0.9, rng);
            for ((v, c), e) in x.iter_mut().zip(&cars).zip(&env) {
                *v += c * e.max(0.0);
            }
            add(&mut x, &clinks(n, fsf, 0.5, (400.0, 1200.0), rng), 0.6);
            x
        }
        "airport" => {
            let mut talk = babble(n, fs, 10, rng);
            one_pole_lowpass(&mut talk, 1200.0, fsf);
            normalize_rms(&mut talk, 1.0);
            let mut roar = pink(n, rng);
            highpass(&mut roar, 700.0, fsf);
            normalize_rms(&mut roar, 0.8);
            let env = swell(n, fsf, 9.0, 0.7, rng);
            for ((v, r), e) in talk.iter_mut().zip(&roar).zip(&env) {
                *v += r * e.max(0.0);
            }
            talk
        }
        "station" => {
            let mut x = brown(n, rng);
            one_pole_lowpass(&mut x, 300.0, fsf);
            normalize_rms(&mut x, 1.0);
            add(&mut x, &sweeps(n, fsf, 6, (2400.0, 3300.0), rng), 0.5);
            let mut voice = babble(n, fs, 1, rng);
            highpass(&mut voice, 300.0, fsf);
            normalize_rms(&mut voice, 0.7);
            add(&mut x, &voice, 1.0);
            x
        }
        other => return Err(DataError::Plan(format!("unknown noise type {other:?}"))),
    };
    highpass(&mut x, 20.0, fsf);
    Ok(x)
}

/// Writes every noise type and the family-mapping file; returns the mapping.
pub fn generate_noise_bank(dir: &Path, spec: &NoiseBankSpec) -> Result<NoiseFamilies> {
    std::fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    let n = (spec.seconds * spec.sample_rate as f64).round() as usize;
    let kinds: Vec<&str> = SET_A.iter().chain(&SET_B).chain(&EXTRA).copied().collect();
    for (i, kind) in kinds.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let mut x = generate_noise(kind, n, spec.sample_rate, &mut rng)?;
        normalize_rms(&mut x, spec.level);
        let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak > 0.99 {
            x.iter_mut().for_each(|v| *v *= 0.99 / peak);
        }
        write_wav(&AudioClip::new(x, spec.sample_rate)?, &dir.join(format!("{kind}.wav")))?;
    }
    let mut families = NoiseFamilies::default();
    for (set, names) in [("A", &SET_A[..]), ("B", &SET_B[..]), ("C", &SET_C[..])] {
        for name in names {
            families.insert(set, name, PathBuf::from(format!("{name}.wav")));
        }
    }
    families.write(&dir.join(FAMILIES_FILE))?;
    Ok(families)
}

/// Noise types per test set, with file paths relative to the bank directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NoiseFamilies {
    sets: BTreeMap<String, BTreeMap<String, PathBuf>>,
}

impl NoiseFamilies {
    pub fn insert(&mut self, set: &str, noise_type: &str, file: PathBuf) {
        self.sets
            .entry(set.to_string())
            .or_default()
            .insert(noise_type.to_string(), file);
    }

    /// Noise types of `set` with their files, sorted by name.
    pub fn set(&self, set: &str) -> Vec<(&str, &Path)> {
        self.sets
            .get(set)
            .map(|m| m.iter().map(|(k, v)| (k.as_str(), v.as_path())).collect())
            .unwrap_or_default()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        let mut out = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [set, noise, file] = fields[..] else {
                return Err(DataError::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    detail: "expected set, noise_type, file".into(),
                });
            };
            out.insert(set, noise, PathBuf::from(file));
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = String::from("# set\tnoise_type\tfile\n");
        for (set, m) in &self.sets {
            for (name, file) in m {
                writeln!(text, "{set}\t{name}\t{}", file.display()).expect("string write");
            }
        }
        std::fs::write(path, text).map_err(|e| DataError::io(path, e))
    }
}

/// Loads every noise file referenced by `families`, keyed by noise type.
pub fn load_noises(dir: &Path, families: &NoiseFamilies) -> Result<BTreeMap<String, AudioClip>> {
    let mut out = BTreeMap::new();
    for set in ["A", "B", "C"] {
        for (name, file) in families.set(set) {
            if !out.contains_key(name) {
                out.insert(name.to_string(), read_wav(&dir.join(file))?);
            }
        }
    }
    Ok(out)
}
