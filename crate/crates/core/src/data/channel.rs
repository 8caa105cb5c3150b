//! Fixed linear channel used for the mismatched-channel test set.

use crate::signal::AudioClip;

/// Impulse response of the mismatch channel.
///
/// `H(ω) = 0.75 − 0.25·e^{−jω}` rises monotonically from 0.5 at DC to 1.0 at
/// Nyquist, a +6 dB high-frequency tilt. The taps' absolute sum is 1, so the
/// output of a clip in [-1, 1] stays in [-1, 1].
pub const CHANNEL_TAPS: [f64; 2] = [0.75, -0.25];

/// Manifest value naming [`CHANNEL_TAPS`]; unfiltered entries use `"none"`.
pub const CHANNEL_NAME: &str = "tilt";

/// Causal FIR filtering with zero initial state; output length equals input length.
pub fn fir(samples: &[f64], taps: &[f64]) -> Vec<f64> {
    (0..samples.len())
        .map(|n| {
            taps.iter()
                .enumerate()
                .filter(|(k, _)| *k <= n)
                .map(|(k, h)| h * samples[n - k])
                .sum()
        })
        .collect()
}

pub fn channel_mismatch(clip: &AudioClip) -> AudioClip {
    let out = fir(clip.samples(), &CHANNEL_TAPS);
    AudioClip::new(out, clip.sample_rate()).expect("unit-gain FIR keeps samples in range")
}

/// Magnitude response in dB at `freq_hz`.
pub fn channel_response_db(freq_hz: f64, sample_rate: u32) -> f64 {
    let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate as f64;
    let (re, im) = CHANNEL_TAPS
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(re, im), (k, h)| (re + h * (k as f64 * w).cos(), im - h * (k as f64 * w).sin()));
    10.0 * (re * re + im * im).log10()
}
