use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::features::MelSpectrogram;
use super::{AudioClip, TARGET_RATE};
use crate::{Error, Result};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Whether the mel bank is fed |X|² or |X|.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectrumScale {
    #[default]
    Power,
    Magnitude,
}

impl SpectrumScale {
    pub(crate) fn code(self) -> u8 {
        match self {
            SpectrumScale::Power => 0,
            SpectrumScale::Magnitude => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SpectrumScale::Power),
            1 => Some(SpectrumScale::Magnitude),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub scale: SpectrumScale,
    /// Values below this are clamped before `log10`.
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            sample_rate: TARGET_RATE,
            n_fft: 512,
            hop: 256,
            n_mels: 96,
            f_min: 0.0,
            f_max: 6000.0,
            scale: SpectrumScale::Power,
            log_floor: 1e-10,
        }
    }
}

impl MelConfig {
    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// `1 + floor((n − n_fft) / hop)` for `n ≥ n_fft`.
    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.n_fft {
            0
        } else {
            1 + (n_samples - self.n_fft) / self.hop
        }
    }
}

/// Unnormalised triangular filters with band edges equally spaced on the
/// mel scale (`n_mels + 2` edge points from `f_min` to `f_max`).
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    n_mels: usize,
    n_bins: usize,
    edges_hz: Vec<f64>,
    weights: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(cfg: &MelConfig) -> Self {
        let n_bins = cfg.n_bins();
        let (lo, hi) = (hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max));
        let n_edges = cfg.n_mels + 2;
        let edges_hz: Vec<f64> = (0..n_edges)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_edges - 1) as f64))
            .collect();
        let bin_hz = cfg.sample_rate as f64 / cfg.n_fft as f64;
        let mut weights = vec![0.0; cfg.n_mels * n_bins];
        for m in 0..cfg.n_mels {
            let (left, center, right) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let w = if f > left && f <= center {
                    (f - left) / (center - left)
                } else if f > center && f < right {
                    (right - f) / (right - center)
                } else {
                    0.0
                };
                weights[m * n_bins + k] = w;
            }
        }
        MelFilterbank {
            n_mels: cfg.n_mels,
            n_bins,
            edges_hz,
            weights,
        }
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// Peak frequency of filter `m`.
    pub fn center_hz(&self, m: usize) -> f64 {
        self.edges_hz[m + 1]
    }

    /// `(lower, upper)` edge frequencies of filter `m`.
    pub fn support_hz(&self, m: usize) -> (f64, f64) {
        (self.edges_hz[m], self.edges_hz[m + 2])
    }

    pub fn apply(&self, spectrum: &[f64], out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate().take(self.n_mels) {
            *o = self.row(m).iter().zip(spectrum).map(|(w, s)| w * s).sum();
        }
    }
}

/// Periodic Hann window.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

struct Stft {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Stft {
    fn new(n_fft: usize) -> Self {
        Stft {
            window: hann(n_fft),
            fft: FftPlanner::new().plan_fft_forward(n_fft),
        }
    }

    /// One-sided `|X_k|²`, unnormalised, for a single frame.
    fn power(&self, frame: &[f32], buf: &mut Vec<Complex<f64>>) -> Vec<f64> {
        buf.clear();
        buf.extend(
            frame
                .iter()
                .zip(&self.window)
                .map(|(&x, &w)| Complex::new(x as f64 * w, 0.0)),
        );
        self.fft.process(buf);
        buf[..self.window.len() / 2 + 1]
            .iter()
            .map(|c| c.norm_sqr())
            .collect()
    }
}

/// One-sided power spectrum `|X_k|²` of every Hann-windowed frame.
pub fn power_spectrum(samples: &[f32], cfg: &MelConfig) -> Vec<Vec<f64>> {
    let stft = Stft::new(cfg.n_fft);
    let mut buf = Vec::with_capacity(cfg.n_fft);
    (0..cfg.n_frames(samples.len()))
        .map(|f| stft.power(&samples[f * cfg.hop..f * cfg.hop + cfg.n_fft], &mut buf))
        .collect()
}

/// Unstandardised `log10` mel spectrogram of a mono clip at the configured
/// rate.
pub fn melspectrogram(clip: &AudioClip, cfg: &MelConfig) -> Result<MelSpectrogram> {
    if clip.channels != 1 || clip.sample_rate != cfg.sample_rate {
        return Err(Error::Invalid(format!(
            "expected mono audio at {} Hz, got {} channel(s) at {} Hz",
            cfg.sample_rate, clip.channels, clip.sample_rate
        )));
    }
    if clip.samples.len() < cfg.n_fft {
        return Err(Error::Invalid(format!(
            "clip has {} samples, need at least {}",
            clip.samples.len(),
            cfg.n_fft
        )));
    }
    let bank = MelFilterbank::new(cfg);
    let n_frames = cfg.n_frames(clip.samples.len());
    let stft = Stft::new(cfg.n_fft);
    let mut buf = Vec::with_capacity(cfg.n_fft);
    let mut mel = vec![0.0; cfg.n_mels];
    let mut values = vec![0f32; cfg.n_mels * n_frames];
    for f in 0..n_frames {
        let mut spec = stft.power(&clip.samples[f * cfg.hop..f * cfg.hop + cfg.n_fft], &mut buf);
        if cfg.scale == SpectrumScale::Magnitude {
            spec.iter_mut().for_each(|p| *p = p.sqrt());
        }
        bank.apply(&spec, &mut mel);
        for (m, &e) in mel.iter().enumerate() {
            values[m * n_frames + f] = e.max(cfg.log_floor).log10() as f32;
        }
    }
    Ok(MelSpectrogram {
        n_mels: cfg.n_mels,
        n_frames,
        values,
        frame_hop: cfg.hop,
        standardized: false,
        degenerate: false,
        scale: cfg.scale,
        source_id: String::new(),
    })
}
