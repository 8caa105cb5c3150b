//! Formant synthesiser for a small isolated-word vocabulary.
//!
//! Each word is a sequence of phone targets (vowel/nasal formants, fricative
//! noise bands, closures and bursts). Voiced sound is an impulse train through
//! a glottal low-pass and a cascade of three resonators; frication is white
//! noise through one resonator. Parameter tracks are box-smoothed so formants
//! glide between targets.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DataError, Result};
use crate::signal::{write_wav, AudioClip};

/// Class names in label order.
pub const WORDS: [&str; 11] = [
    "oh", "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];

#[derive(Debug, Clone, Copy)]
enum Phone {
    Vowel([f64; 3]),
    Nasal([f64; 3]),
    /// Centre, bandwidth, amplitude, voiced.
    Fric(f64, f64, f64, bool),
    Silence,
    Burst(f64),
}

use Phone::*;

const S: Phone = Fric(3600.0, 700.0, 0.55, false);
const Z: Phone = Fric(3500.0, 800.0, 0.35, true);
const F: Phone = Fric(3000.0, 2500.0, 0.22, false);
const V: Phone = Fric(2800.0, 2000.0, 0.18, true);
const TH: Phone = Fric(3200.0, 2000.0, 0.2, false);
const ASP: Phone = Fric(2000.0, 2000.0, 0.25, false);
const N: Phone = Nasal([250.0, 1400.0, 2500.0]);
const R: Phone = Vowel([450.0, 1300.0, 1700.0]);
const AY_A: Phone = Vowel([730.0, 1090.0, 2440.0]);
const AY_I: Phone = Vowel([350.0, 2000.0, 2800.0]);

fn word_phones(word: usize) -> &'static [(Phone, f64)] {
    match word {
        0 => &[(Vowel([500.0, 900.0, 2400.0]), 200.0), (Vowel([350.0, 800.0, 2300.0]), 150.0)],
        1 => &[
            (Z, 100.0),
            (Vowel([300.0, 2200.0, 2900.0]), 100.0),
            (R, 80.0),
            (Vowel([500.0, 900.0, 2400.0]), 150.0),
            (Vowel([350.0, 800.0, 2300.0]), 80.0),
        ],
        2 => &[
            (Vowel([300.0, 700.0, 2200.0]), 70.0),
            (Vowel([640.0, 1190.0, 2390.0]), 160.0),
            (N, 120.0),
        ],
        3 => &[
            (Silence, 40.0),
            (Burst(3000.0), 25.0),
            (ASP, 40.0),
            (Vowel([300.0, 870.0, 2240.0]), 250.0),
        ],
        4 => &[(TH, 120.0), (R, 60.0), (Vowel([270.0, 2290.0, 3010.0]), 230.0)],
        5 => &[(F, 110.0), (Vowel([570.0, 840.0, 2410.0]), 180.0), (R, 110.0)],
        6 => &[(F, 100.0), (AY_A, 130.0), (AY_I, 120.0), (V, 60.0)],
        7 => &[
            (S, 130.0),
            (Vowel([390.0, 1990.0, 2550.0]), 120.0),
            (Silence, 50.0),
            (Burst(1800.0), 25.0),
            (S, 120.0),
        ],
        8 => &[
            (S, 120.0),
            (Vowel([530.0, 1840.0, 2480.0]), 120.0),
            (V, 60.0),
            (Vowel([500.0, 1500.0, 2500.0]), 60.0),
            (N, 110.0),
        ],
        9 => &[
            (Vowel([530.0, 1840.0, 2480.0]), 140.0),
            (Vowel([300.0, 2200.0, 2900.0]), 120.0),
            (Silence, 50.0),
            (Burst(3000.0), 25.0),
            (ASP, 30.0),
        ],
        10 => &[(N, 80.0), (AY_A, 150.0), (AY_I, 100.0), (N, 110.0)],
        _ => panic!("word index {word} out of range"),
    }
}

/// Per-speaker voice parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Voice {
    pub f0: f64,
    pub formant_scale: f64,
    pub rate: f64,
}

impl Voice {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        // Higher-pitched voices get shorter vocal tracts.
        let u: f64 = rng.random();
        Self {
            f0: 95.0 + 135.0 * u + rng.random_range(-10.0..10.0),
            formant_scale: 0.9 + 0.22 * u + rng.random_range(-0.03..0.03),
            rate: rng.random_range(0.85..1.2),
        }
    }
}

/// Two-pole resonator with unity gain at DC.
#[derive(Default)]
struct Resonator {
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn step(&mut self, x: f64, freq: f64, bw: f64, fs: f64) -> f64 {
        let t = 1.0 / fs;
        let c = -(-2.0 * std::f64::consts::PI * bw * t).exp();
        let b = 2.0 * (-std::f64::consts::PI * bw * t).exp() * (2.0 * std::f64::consts::PI * freq * t).cos();
        let a = 1.0 - b - c;
        let y = a * x + b * self.y1 + c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

fn smooth(track: &mut [f64], width: usize) {
    if width < 2 || track.len() < 2 {
        return;
    }
    let n = track.len();
    let half = width / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in track.iter() {
        prefix.push(prefix.last().unwrap() + v);
    }
    for (i, slot) in track.iter_mut().enumerate() {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        *slot = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
    }
}

/// Renders one word; the result is peak-normalised to `peak` and padded with
/// random leading/trailing silence.
pub fn synthesize_word<R: Rng + ?Sized>(word: usize, voice: &Voice, fs: u32, peak: f64, rng: &mut R) -> Vec<f64> {
    let fsf = fs as f64;
    let phones = word_phones(word);
    let mut av = Vec::new();
    let mut an = Vec::new();
    let mut formants: [Vec<f64>; 3] = Default::default();
    let mut fc = Vec::new();
    let mut fbw = Vec::new();
    let mut last = [500.0, 1500.0, 2500.0];
    let mut last_fric = (3000.0, 1500.0);
    for &(phone, ms) in phones {
        let dur = ms / voice.rate * rng.random_range(0.9..1.1);
        let len = (dur * fsf / 1000.0).round().max(1.0) as usize;
        let (v, n, f, fr) = match phone {
            Vowel(f) => (1.0, 0.0, f, last_fric),
            Nasal(f) => (0.45, 0.0, f, last_fric),
            Fric(c, bw, amp, voiced) => (if voiced { 0.3 } else { 0.0 }, amp, last, (c, bw)),
            Silence => (0.0, 0.0, last, last_fric),
            Burst(c) => (0.0, 0.8, last, (c, 1500.0)),
        };
        let f = match phone {
            Vowel(_) | Nasal(_) => f.map(|x| x * voice.formant_scale),
            _ => f,
        };
        last = f;
        last_fric = fr;
        av.extend(std::iter::repeat_n(v, len));
        an.extend(std::iter::repeat_n(n, len));
        for k in 0..3 {
            formants[k].extend(std::iter::repeat_n(f[k], len));
        }
        fc.extend(std::iter::repeat_n(fr.0 * voice.formant_scale.sqrt(), len));
        fbw.extend(std::iter::repeat_n(fr.1, len));
    }
    let glide = (0.025 * fsf) as usize;
    let edge = (0.008 * fsf) as usize;
    for t in formants.iter_mut().chain([&mut fc, &mut fbw]) {
        smooth(t, glide);
    }
    smooth(&mut av, edge);
    smooth(&mut an, edge);

    let total = av.len();
    let white = Normal::new(0.0, 1.0).expect("unit normal");
    let (f0_start, f0_end) = (voice.f0 * rng.random_range(1.05..1.15), voice.f0 * rng.random_range(0.85..0.95));
    let mut phase = 0.0;
    let mut glottal = 0.0;
    let mut tract = [Resonator::default(), Resonator::default(), Resonator::default()];
    let mut fric = Resonator::default();
    let bws = [70.0, 100.0, 160.0];
    let mut out = Vec::with_capacity(total);
    let mut prev_white = 0.0;
    for i in 0..total {
        let f0 = f0_start + (f0_end - f0_start) * i as f64 / total as f64;
        phase += f0 * (1.0 + 0.01 * white.sample(rng)) / fsf;
        let pulse = if phase >= 1.0 {
            phase -= 1.0;
            1.0
        } else {
            0.0
        };
        glottal = 0.92 * glottal + pulse;
        let mut v = glottal * av[i] + 0.02 * white.sample(rng) * av[i];
        for (k, r) in tract.iter_mut().enumerate() {
            v = r.step(v, formants[k][i], bws[k], fsf);
        }
        // Differenced noise removes the resonator's low-frequency shelf.
        let w = white.sample(rng);
        let nz = fric.step(w - prev_white, fc[i], fbw[i], fsf) * an[i] * 2.0;
        prev_white = w;
        out.push(v + nz);
    }
    // Radiation: first difference.
    let mut prev = 0.0;
    for s in out.iter_mut() {
        let cur = *s;
        *s = cur - 0.9 * prev;
        prev = cur;
    }
    let max = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max > 0.0 {
        out.iter_mut().for_each(|v| *v *= peak / max);
    }
    let lead = (rng.random_range(0.06..0.16) * fsf) as usize;
    let tail = (rng.random_range(0.06..0.16) * fsf) as usize;
    let mut clip = vec![0.0; lead];
    clip.extend(out);
    clip.extend(std::iter::repeat_n(0.0, tail));
    // A faint recording-floor hiss keeps silent frames off the log floor.
    for s in clip.iter_mut() {
        *s += 2e-4 * white.sample(rng);
    }
    clip
}

/// Size and seed of a generated corpus.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub speakers: usize,
    pub takes: usize,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            speakers: 24,
            takes: 2,
            sample_rate: 8000,
            seed: 2024,
        }
    }
}

pub fn speaker_name(i: usize) -> String {
    format!("spk{i:03}")
}

/// Writes `<dir>/<word>/<speaker>_<take>.wav` for every speaker, word and take.
pub fn generate_corpus(dir: &Path, spec: &CorpusSpec) -> Result<usize> {
    std::fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    let classes = dir.join(super::split::CLASSES_FILE);
    std::fs::write(&classes, WORDS.join("\n") + "\n").map_err(|e| DataError::io(&classes, e))?;
    let mut count = 0;
    for s in 0..spec.speakers {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(s as u64);
        let voice = Voice::random(&mut rng);
        for (w, word) in WORDS.iter().enumerate() {
            let wdir = dir.join(word);
            std::fs::create_dir_all(&wdir).map_err(|e| DataError::io(&wdir, e))?;
            for take in 0..spec.takes {
                let peak = rng.random_range(0.25..0.6);
                let samples = synthesize_word(w, &voice, spec.sample_rate, peak, &mut rng);
                let clip = AudioClip::new(samples, spec.sample_rate)?;
                write_wav(&clip, &wdir.join(format!("{}_{take}.wav", speaker_name(s))))?;
                count += 1;
            }
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_are_bounded_and_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let voice = Voice {
            f0: 120.0,
            formant_scale: 1.0,
            rate: 1.0,
        };
        let mut lens = Vec::new();
        for w in 0..WORDS.len() {
            let s = synthesize_word(w, &voice, 8000, 0.5, &mut rng);
            assert!(s.iter().all(|v| v.abs() <= 0.51 && v.is_finite()));
            assert!(s.len() > 2400 && s.len() < 10000, "{} {}", WORDS[w], s.len());
            lens.push(s.len());
        }
        assert!(lens.iter().any(|l| *l != lens[0]));
    }

    #[test]
    fn corpus_is_reproducible() {
        let spec = CorpusSpec {
            speakers: 2,
            takes: 1,
            sample_rate: 8000,
            seed: 9,
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert_eq!(generate_corpus(a.path(), &spec).unwrap(), 22);
        generate_corpus(b.path(), &spec).unwrap();
        for w in WORDS {
            let name = format!("{w}/spk001_0.wav");
            assert_eq!(
                std::fs::read(a.path().join(&name)).unwrap(),
                std::fs::read(b.path().join(&name)).unwrap()
            );
        }
    }
}
