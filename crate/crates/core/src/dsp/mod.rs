//! Audio frontend: WAV input, mono downmix, resampling to 12 kHz,
//! Hann-windowed STFT, 96-band mel projection, log10 scaling and per-track
//! standardisation.

mod features;
mod mel;
mod resample;
mod wav;

pub use features::{featurize_clip, featurize_dir, featurize_wav, FeatureConfig, MelSpectrogram};
pub use mel::{
    hz_to_mel, mel_to_hz, melspectrogram, power_spectrum, MelConfig, MelFilterbank,
    SpectrumScale,
};
pub use resample::{downmix, downmix_resample, Resampler, SUPPORTED_RATES, TARGET_RATE};
pub use wav::{read_wav, write_wav};

/// Interleaved PCM samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    pub channels: u16,
}

impl AudioClip {
    pub fn mono(samples: Vec<f32>, sample_rate: u32) -> Self {
        AudioClip {
            samples,
            sample_rate,
            channels: 1,
        }
    }

    /// Samples per channel.
    pub fn n_frames(&self) -> usize {
        self.samples.len() / self.channels.max(1) as usize
    }

    pub fn duration_secs(&self) -> f64 {
        self.n_frames() as f64 / self.sample_rate as f64
    }
}
