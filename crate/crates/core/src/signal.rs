//! Audio ingestion, SNR-controlled noise mixing and log-magnitude spectrograms.

use std::path::{Path, PathBuf};

use rand::Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{self, Grid, HeaderFields};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("audio file not found: {0}")]
    MissingFile(PathBuf),
    #[error("unsupported encoding in {path}: {detail} (expected 16-bit integer PCM)")]
    UnsupportedEncoding { path: PathBuf, detail: String },
    #[error("audio file {0} has no samples")]
    EmptyPayload(PathBuf),
    #[error("cannot decode {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),
    #[error("sample rates differ: clean {clean} Hz, noise {noise} Hz")]
    SampleRateMismatch { clean: u32, noise: u32 },
    #[error("clean signal is silent (RMS {rms:e} < 1e-8)")]
    SilentClean { rms: f64 },
    #[error("noise segment is silent")]
    SilentNoise,
    #[error("noise has {noise} samples from offset, clean needs {clean}")]
    NoiseTooShort { noise: usize, clean: usize },
    #[error("clip of {samples} samples is shorter than one {window}-sample analysis window")]
    TooShort { samples: usize, window: usize },
    #[error("invalid STFT configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Grid(#[from] grid::GridError),
}

pub type Result<T> = std::result::Result<T, SignalError>;

/// Mono audio with amplitudes in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(SignalError::InvalidClip("no samples".into()));
        }
        if sample_rate == 0 {
            return Err(SignalError::InvalidClip("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(SignalError::InvalidClip(format!(
                "sample {i} = {} is not a finite value in [-1, 1]",
                samples[i]
            )));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Reads 16-bit PCM; multi-channel files are averaged down to mono.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    if !path.exists() {
        return Err(SignalError::MissingFile(path.to_path_buf()));
    }
    let reader = hound::WavReader::open(path).map_err(|source| match source {
        hound::Error::Unsupported => SignalError::UnsupportedEncoding {
            path: path.to_path_buf(),
            detail: "format not understood".into(),
        },
        source => SignalError::Decode {
            path: path.to_path_buf(),
            source,
        },
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(SignalError::UnsupportedEncoding {
            path: path.to_path_buf(),
            detail: format!("{:?} with {} bits per sample", spec.sample_format, spec.bits_per_sample),
        });
    }
    let raw: Vec<i16> = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<_, _>>()
        .map_err(|source| SignalError::Decode {
            path: path.to_path_buf(),
            source,
        })?;
    let channels = spec.channels.max(1) as usize;
    if raw.len() < channels {
        return Err(SignalError::EmptyPayload(path.to_path_buf()));
    }
    let samples = raw
        .chunks_exact(channels)
        .map(|frame| frame.iter().map(|&s| s as f64 / 32768.0).sum::<f64>() / channels as f64)
        .collect();
    AudioClip::new(samples, spec.sample_rate)
}

/// Writes mono 16-bit PCM, rounding to the nearest code.
pub fn write_wav(clip: &AudioClip, path: &Path) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wrap = |source| SignalError::Decode {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wrap)?;
    for &s in &clip.samples {
        let code = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(code).map_err(wrap)?;
    }
    writer.finalize().map_err(wrap)
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// `20·log10(rms(signal) / rms(noise))`.
pub fn snr_db(signal: &[f64], noise: &[f64]) -> f64 {
    20.0 * (rms(signal) / rms(noise)).log10()
}

/// Result of [`mix_noise`]; `scaled_noise` is the exact component that was added.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub clip: AudioClip,
    pub scaled_noise: Vec<f64>,
    pub gain: f64,
    /// Output samples clamped to [-1, 1].
    pub clipped: usize,
}

/// Uniform crop offset for a noise recording of `noise_len` samples.
pub fn noise_offset<R: Rng + ?Sized>(noise_len: usize, clean_len: usize, rng: &mut R) -> usize {
    if noise_len <= clean_len {
        0
    } else {
        rng.random_range(0..=noise_len - clean_len)
    }
}

/// Adds `noise[offset..offset + len]` scaled so that the whole-signal SNR is `snr_db`.
pub fn mix_noise(clean: &AudioClip, noise: &AudioClip, snr_db: f64, offset: usize) -> Result<Mixture> {
    if clean.sample_rate != noise.sample_rate {
        return Err(SignalError::SampleRateMismatch {
            clean: clean.sample_rate,
            noise: noise.sample_rate,
        });
    }
    let len = clean.len();
    let available = noise.len().saturating_sub(offset);
    if available < len {
        return Err(SignalError::NoiseTooShort { noise: available, clean: len });
    }
    let clean_rms = rms(&clean.samples);
    if clean_rms < 1e-8 {
        return Err(SignalError::SilentClean { rms: clean_rms });
    }
    let segment = &noise.samples[offset..offset + len];
    let noise_rms = rms(segment);
    if noise_rms == 0.0 {
        return Err(SignalError::SilentNoise);
    }
    let gain = clean_rms / (noise_rms * 10f64.powf(snr_db / 20.0));
    let scaled_noise: Vec<f64> = segment.iter().map(|n| gain * n).collect();
    let mut clipped = 0;
    let mixed = clean
        .samples
        .iter()
        .zip(&scaled_noise)
        .map(|(c, n)| {
            let v = c + n;
            if v.abs() > 1.0 {
                clipped += 1;
            }
            v.clamp(-1.0, 1.0)
        })
        .collect();
    Ok(Mixture {
        clip: AudioClip::new(mixed, clean.sample_rate)?,
        scaled_noise,
        gain,
        clipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowShape {
    Hamming,
    Hann,
    Rectangular,
}

impl WindowShape {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let denom = (n.max(2) - 1) as f64;
        (0..n)
            .map(|i| {
                let phase = 2.0 * std::f64::consts::PI * i as f64 / denom;
                match self {
                    WindowShape::Hamming => 0.54 - 0.46 * phase.cos(),
                    WindowShape::Hann => 0.5 - 0.5 * phase.cos(),
                    WindowShape::Rectangular => 1.0,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StftConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub fft_size: usize,
    pub window: WindowShape,
    pub log_floor: f64,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_ms: 25.0,
            hop_ms: 10.0,
            fft_size: 512,
            window: WindowShape::Hamming,
            log_floor: -8.0,
        }
    }
}

impl StftConfig {
    /// Window and hop lengths in samples at `sample_rate`.
    pub fn frame_geometry(&self, sample_rate: u32) -> Result<(usize, usize)> {
        let to_samples = |ms: f64| (ms * sample_rate as f64 / 1000.0).round() as usize;
        let (win, hop) = (to_samples(self.window_ms), to_samples(self.hop_ms));
        if win == 0 || hop == 0 {
            return Err(SignalError::InvalidConfig("window and hop must span at least one sample".into()));
        }
        if self.hop_ms > self.window_ms {
            return Err(SignalError::InvalidConfig("hop_ms exceeds window_ms".into()));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < win {
            return Err(SignalError::InvalidConfig(format!(
                "fft_size {} must be a power of two of at least {win}",
                self.fft_size
            )));
        }
        if !(self.log_floor.is_finite() && self.log_floor < 0.0) {
            return Err(SignalError::InvalidConfig("log_floor must be finite and negative".into()));
        }
        Ok((win, hop))
    }

    pub fn bin_count(&self) -> usize {
        self.fft_size / 2 + 1
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpecMeta {
    pub utterance_id: String,
    pub noise_type: String,
    pub snr_db: Option<f64>,
}

/// `[frames × bins]` grid of `max(log10 |X|, log_floor)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub grid: Grid,
    pub log_floor: f64,
    pub meta: SpecMeta,
}

impl Spectrogram {
    pub fn frame_count(&self) -> usize {
        self.grid.rows()
    }

    pub fn bin_count(&self) -> usize {
        self.grid.cols()
    }

    pub fn header_fields(&self) -> HeaderFields {
        let mut f = HeaderFields::new();
        f.insert("name".into(), "spectrogram".into());
        f.insert("log_floor".into(), self.log_floor.to_string());
        if !self.meta.utterance_id.is_empty() {
            f.insert("utterance".into(), self.meta.utterance_id.clone());
        }
        if !self.meta.noise_type.is_empty() {
            f.insert("noise".into(), self.meta.noise_type.clone());
        }
        if let Some(snr) = self.meta.snr_db {
            f.insert("snr_db".into(), snr.to_string());
        }
        f
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(grid::write_grid(path, &self.grid, &self.header_fields())?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        Ok(grid::write_grid_csv(path, &self.grid)?)
    }
}

pub fn spectrogram(clip: &AudioClip, cfg: &StftConfig) -> Result<Spectrogram> {
    let (win, hop) = cfg.frame_geometry(clip.sample_rate)?;
    if clip.len() < win {
        return Err(SignalError::TooShort {
            samples: clip.len(),
            window: win,
        });
    }
    let frames = (clip.len() - win) / hop + 1;
    let bins = cfg.bin_count();
    let taper = cfg.window.coefficients(win);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_size);
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut data = Vec::with_capacity(frames * bins);
    for f in 0..frames {
        let start = f * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = if i < win {
                Complex::new(clip.samples[start + i] * taper[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        data.extend(buf[..bins].iter().map(|z| {
            let m = z.norm().log10();
            if m > cfg.log_floor {
                m
            } else {
                cfg.log_floor
            }
        }));
    }
    Ok(Spectrogram {
        grid: Grid::new(frames, bins, data)?,
        log_floor: cfg.log_floor,
        meta: SpecMeta::default(),
    })
}

/// Maps index `i` of the target axis to the source axis, or `None` for padding.
fn center_map(src: usize, dst: usize, i: usize) -> Option<usize> {
    if dst >= src {
        let before = (dst - src) / 2;
        i.checked_sub(before).filter(|&j| j < src)
    } else {
        Some(i + (src - dst) / 2)
    }
}

/// Centre-crops or symmetrically pads frames; keeps the lowest `bins` bins,
/// padding above with `log_floor`.
pub fn fit_to_grid(spec: &Spectrogram, frames: usize, bins: usize) -> Spectrogram {
    let src = &spec.grid;
    let grid = Grid::from_fn(frames, bins, |r, c| match center_map(src.rows(), frames, r) {
        Some(sr) if c < src.cols() => src.get(sr, c),
        _ => spec.log_floor,
    });
    Spectrogram {
        grid,
        log_floor: spec.log_floor,
        meta: spec.meta.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, secs: f64, sr: u32, amp: f64) -> AudioClip {
        let n = (secs * sr as f64) as usize;
        let s = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin())
            .collect();
        AudioClip::new(s, sr).unwrap()
    }

    #[test]
    fn clip_invariants() {
        assert!(AudioClip::new(vec![], 8000).is_err());
        assert!(AudioClip::new(vec![0.1], 0).is_err());
        assert!(AudioClip::new(vec![f64::NAN], 8000).is_err());
        assert!(AudioClip::new(vec![1.5], 8000).is_err());
    }

    #[test]
    fn one_second_frame_count() {
        let clip = tone(440.0, 1.0, 8000, 0.5);
        let s = spectrogram(&clip, &StftConfig::default()).unwrap();
        assert_eq!(s.frame_count(), 98);
        assert_eq!(s.bin_count(), 257);
    }

    #[test]
    fn silence_sits_on_floor() {
        let clip = AudioClip::new(vec![0.0; 4000], 8000).unwrap();
        let s = spectrogram(&clip, &StftConfig::default()).unwrap();
        assert!(s.grid.data().iter().all(|v| *v == -8.0));
    }

    #[test]
    fn too_short() {
        let clip = AudioClip::new(vec![0.1; 150], 8000).unwrap();
        assert!(matches!(
            spectrogram(&clip, &StftConfig::default()),
            Err(SignalError::TooShort { samples: 150, window: 200 })
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = StftConfig::default();
        cfg.fft_size = 128;
        assert!(cfg.frame_geometry(8000).is_err());
        cfg = StftConfig::default();
        cfg.hop_ms = 30.0;
        assert!(cfg.frame_geometry(8000).is_err());
        cfg = StftConfig::default();
        cfg.log_floor = 0.5;
        assert!(cfg.frame_geometry(8000).is_err());
    }

    #[test]
    fn mix_rejects_bad_inputs() {
        let clean = tone(300.0, 0.1, 8000, 0.3);
        let other_rate = AudioClip::new(vec![0.1; 2000], 16000).unwrap();
        assert!(matches!(
            mix_noise(&clean, &other_rate, 0.0, 0),
            Err(SignalError::SampleRateMismatch { .. })
        ));
        let silent = AudioClip::new(vec![0.0; 800], 8000).unwrap();
        let noise = tone(1000.0, 0.5, 8000, 0.2);
        assert!(matches!(mix_noise(&silent, &noise, 0.0, 0), Err(SignalError::SilentClean { .. })));
        assert!(matches!(
            mix_noise(&clean, &noise, 0.0, noise.len() - 10),
            Err(SignalError::NoiseTooShort { .. })
        ));
    }

    #[test]
    fn mix_gain_follows_definition() {
        let clean = tone(300.0, 0.25, 8000, 0.3);
        let noise = tone(1234.0, 0.5, 8000, 0.1);
        for (snr, ratio) in [(0.0, 1.0), (20.0, 0.1)] {
            let m = mix_noise(&clean, &noise, snr, 17).unwrap();
            let got = rms(&m.scaled_noise) / rms(clean.samples());
            assert!((got - ratio).abs() < 1e-12, "{snr}: {got}");
            assert_eq!(m.clip.len(), clean.len());
        }
    }

    #[test]
    fn mix_counts_clipping() {
        let clean = AudioClip::new(vec![0.9; 400], 8000).unwrap();
        let noise = AudioClip::new((0..400).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 }).collect(), 8000).unwrap();
        let m = mix_noise(&clean, &noise, 0.0, 0).unwrap();
        assert_eq!(m.clipped, 200);
        assert!(m.clip.samples().iter().all(|s| s.abs() <= 1.0));
    }

    #[test]
    fn fit_pads_and_crops() {
        let g = Grid::from_fn(98, 257, |r, c| (r * 1000 + c) as f64 * 1e-4);
        let spec = Spectrogram {
            grid: g.clone(),
            log_floor: -8.0,
            meta: SpecMeta::default(),
        };
        let fitted = fit_to_grid(&spec, 128, 128);
        assert_eq!(fitted.grid.dims(), (128, 128));
        for r in 0..15 {
            assert!(fitted.grid.row(r).iter().all(|v| *v == -8.0));
            assert!(fitted.grid.row(127 - r).iter().all(|v| *v == -8.0));
        }
        assert_eq!(fitted.grid.get(15, 0), g.get(0, 0));
        assert_eq!(fitted.grid.get(112, 127), g.get(97, 127));
        let back = fit_to_grid(&fitted, 98, 128);
        assert_eq!(back.grid.row(0), &g.row(0)[..128]);
        assert_eq!(fit_to_grid(&spec, 98, 257), spec);
    }
}
