//! Manifest entry to audio, spectrogram and network inputs.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::channel::{channel_mismatch, CHANNEL_NAME};
use super::manifest::{Manifest, ManifestEntry, NO_CHANNEL};
use super::{DataError, Result};
use crate::model::{indeterminacy_tensor, spectrogram_tensor, ModelInputs};
use crate::neutrosophic::{proposed_transform, NsWindow};
use crate::signal::{fit_to_grid, mix_noise, read_wav, spectrogram, AudioClip, SpecMeta, Spectrogram, StftConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub stft: StftConfig,
    pub frames: usize,
    pub bins: usize,
}

impl Default for FeatureConfig {
    /// 256-point FFT at 8 kHz gives 129 bins; the lowest 128 cover 0 to 3.97 kHz.
    fn default() -> Self {
        Self {
            stft: StftConfig {
                fft_size: 256,
                ..StftConfig::default()
            },
            frames: 128,
            bins: 128,
        }
    }
}

/// Audio of one entry plus the components it was built from.
#[derive(Debug, Clone)]
pub struct RenderedEntry {
    /// What the recogniser hears: mixture, then channel.
    pub audio: AudioClip,
    pub clean: Arc<AudioClip>,
    /// Noise exactly as added, before the channel; `None` for clean entries.
    pub scaled_noise: Option<Vec<f64>>,
    pub clipped: usize,
}

/// Thread-safe cache of decoded clean and noise recordings.
pub struct AudioStore {
    corpus_dir: PathBuf,
    noise_dir: PathBuf,
    cache: Mutex<HashMap<PathBuf, Arc<AudioClip>>>,
}

impl AudioStore {
    pub fn new(corpus_dir: &Path, noise_dir: &Path) -> Self {
        Self {
            corpus_dir: corpus_dir.to_path_buf(),
            noise_dir: noise_dir.to_path_buf(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn for_manifest(manifest: &Manifest) -> Self {
        Self::new(&manifest.corpus_dir, &manifest.noise_dir)
    }

    fn load(&self, path: PathBuf) -> Result<Arc<AudioClip>> {
        if let Some(c) = self.cache.lock().expect("audio cache poisoned").get(&path) {
            return Ok(c.clone());
        }
        let clip = Arc::new(read_wav(&path)?);
        self.cache
            .lock()
            .expect("audio cache poisoned")
            .insert(path, clip.clone());
        Ok(clip)
    }

    pub fn clean(&self, entry: &ManifestEntry) -> Result<Arc<AudioClip>> {
        self.load(self.corpus_dir.join(&entry.audio_path))
    }

    pub fn render(&self, entry: &ManifestEntry) -> Result<RenderedEntry> {
        let clean = self.clean(entry)?;
        let (mixed, scaled_noise, clipped) = match (&entry.noise_path, entry.snr_db) {
            (Some(np), Some(snr)) => {
                let noise = self.load(self.noise_dir.join(np))?;
                let m = mix_noise(&clean, &noise, snr, entry.noise_offset)?;
                (m.clip, Some(m.scaled_noise), m.clipped)
            }
            _ => ((*clean).clone(), None, 0),
        };
        let audio = match entry.channel.as_str() {
            NO_CHANNEL => mixed,
            CHANNEL_NAME => channel_mismatch(&mixed),
            other => return Err(DataError::Plan(format!("unknown channel {other:?} in {}", entry.utterance_id))),
        };
        Ok(RenderedEntry {
            audio,
            clean,
            scaled_noise,
            clipped,
        })
    }

    /// Log-magnitude spectrogram fitted to `frames × bins`, tagged with the entry's metadata.
    pub fn spectrogram(&self, entry: &ManifestEntry, cfg: &FeatureConfig) -> Result<Spectrogram> {
        let audio = self.render(entry)?.audio;
        let mut spec = fit_to_grid(&spectrogram(&audio, &cfg.stft)?, cfg.frames, cfg.bins);
        spec.meta = SpecMeta {
            utterance_id: entry.utterance_id.clone(),
            noise_type: entry.noise_type.clone(),
            snr_db: entry.snr_db,
        };
        Ok(spec)
    }

    pub fn inputs(&self, entry: &ManifestEntry, cfg: &FeatureConfig, window: Option<NsWindow>) -> Result<ModelInputs> {
        model_inputs(&self.spectrogram(entry, cfg)?, window)
    }
}

/// Standardised spectrogram tensor, plus the indeterminacy tensor when `window` is given.
pub fn model_inputs(spec: &Spectrogram, window: Option<NsWindow>) -> Result<ModelInputs> {
    let indeterminacy = match window {
        Some(w) => Some(indeterminacy_tensor(&proposed_transform(spec, w)?)),
        None => None,
    };
    Ok(ModelInputs {
        spectrogram: spectrogram_tensor(spec),
        indeterminacy,
    })
}
