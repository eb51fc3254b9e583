use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::mel::{melspectrogram, MelConfig, SpectrumScale};
use super::{downmix_resample, read_wav, AudioClip};
use crate::binio::*;
use crate::parallel;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"MELS";
const VERSION: u32 = 1;
const DEGENERATE_STD: f64 = 1e-8;

/// Mel-major log-mel feature block (`values[m * n_frames + f]`).
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    pub n_mels: usize,
    pub n_frames: usize,
    pub values: Vec<f32>,
    pub frame_hop: usize,
    pub standardized: bool,
    /// Set by [`standardize`](Self::standardize) for constant input.
    pub degenerate: bool,
    pub scale: SpectrumScale,
    pub source_id: String,
}

impl MelSpectrogram {
    pub fn from_values(n_mels: usize, n_frames: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != n_mels * n_frames {
            return Err(Error::Shape(format!(
                "{} values for {n_mels}×{n_frames}",
                values.len()
            )));
        }
        Ok(MelSpectrogram {
            n_mels,
            n_frames,
            values,
            frame_hop: 256,
            standardized: false,
            degenerate: false,
            scale: SpectrumScale::Power,
            source_id: String::new(),
        })
    }

    pub fn get(&self, mel: usize, frame: usize) -> f32 {
        self.values[mel * self.n_frames + frame]
    }

    /// Whole-matrix mean and population standard deviation.
    pub fn mean_std(&self) -> (f64, f64) {
        let n = self.values.len() as f64;
        let mean = self.values.iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = self
            .values
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / n;
        (mean, var.sqrt())
    }

    /// Zero-mean, unit-variance over the whole matrix. Constant input maps to
    /// all zeros and sets the degenerate flag.
    pub fn standardize(&self) -> MelSpectrogram {
        let (mean, std) = self.mean_std();
        let degenerate = std < DEGENERATE_STD;
        let values = if degenerate {
            vec![0.0; self.values.len()]
        } else {
            self.values
                .iter()
                .map(|&v| ((v as f64 - mean) / std) as f32)
                .collect()
        };
        MelSpectrogram {
            values,
            standardized: true,
            degenerate,
            ..self.clone()
        }
    }

    /// Centre-crops or zero-pads along time to `target` frames. When the
    /// excess or deficit is odd, the extra frame goes on the right.
    pub fn fit_length(&self, target: usize) -> MelSpectrogram {
        let f = self.n_frames;
        let mut values = vec![0f32; self.n_mels * target];
        if f >= target {
            let start = (f - target) / 2;
            for m in 0..self.n_mels {
                values[m * target..(m + 1) * target]
                    .copy_from_slice(&self.values[m * f + start..m * f + start + target]);
            }
        } else {
            let left = (target - f) / 2;
            for m in 0..self.n_mels {
                values[m * target + left..m * target + left + f]
                    .copy_from_slice(&self.values[m * f..(m + 1) * f]);
            }
        }
        MelSpectrogram {
            n_frames: target,
            values,
            ..self.clone()
        }
    }

    /// `MELS`, version u32, n_mels u32, n_frames u32, hop u32, flags u8
    /// (bit 0 standardised, bit 1 degenerate), scale u8, f32 values.
    pub fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        write_u32(w, VERSION)?;
        write_u32(w, self.n_mels as u32)?;
        write_u32(w, self.n_frames as u32)?;
        write_u32(w, self.frame_hop as u32)?;
        write_u8(w, u8::from(self.standardized) | (u8::from(self.degenerate) << 1))?;
        write_u8(w, self.scale.code())?;
        let mut bytes = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)
    }

    pub fn read(r: &mut impl Read) -> std::io::Result<Self> {
        read_magic(r, MAGIC)?;
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("unsupported MELS version {version}"),
            ));
        }
        let n_mels = read_u32(r)? as usize;
        let n_frames = read_u32(r)? as usize;
        let frame_hop = read_u32(r)? as usize;
        let flags = read_u8(r)?;
        let scale = SpectrumScale::from_code(read_u8(r)?).ok_or_else(|| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, "unknown spectrum scale")
        })?;
        let mut bytes = vec![0u8; n_mels * n_frames * 4];
        r.read_exact(&mut bytes)?;
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let mut m = MelSpectrogram::from_values(n_mels, n_frames, values)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
        m.frame_hop = frame_hop;
        m.standardized = flags & 1 != 0;
        m.degenerate = flags & 2 != 0;
        m.scale = scale;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut m = MelSpectrogram::read(&mut bytes.as_slice())
            .map_err(|e| Error::format(path, e.to_string()))?;
        m.source_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(m)
    }
}

/// Full per-track feature pipeline settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub mel: MelConfig,
    /// Crop/pad target; `None` keeps the natural length.
    pub target_frames: Option<usize>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            mel: MelConfig::default(),
            target_frames: Some(1360),
        }
    }
}

/// Downmix, resample, log-mel, standardise, and fit to length.
pub fn featurize_clip(clip: &AudioClip, cfg: &FeatureConfig) -> Result<MelSpectrogram> {
    let mono = downmix_resample(clip)?;
    let spec = melspectrogram(&mono, &cfg.mel)?.standardize();
    Ok(match cfg.target_frames {
        Some(t) => spec.fit_length(t),
        None => spec,
    })
}

pub fn featurize_wav(path: &Path, cfg: &FeatureConfig) -> Result<MelSpectrogram> {
    let mut spec = featurize_clip(&read_wav(path)?, cfg)?;
    spec.source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(spec)
}

/// Featurises every `*.wav` in `audio_dir` into `<out_dir>/<track_id>.mels`,
/// in parallel. Returns per-file outcomes in sorted file-name order.
pub fn featurize_dir(
    audio_dir: &Path,
    out_dir: &Path,
    cfg: &FeatureConfig,
) -> Result<Vec<(PathBuf, Result<PathBuf>)>> {
    let mut wavs: Vec<PathBuf> = std::fs::read_dir(audio_dir)
        .map_err(|e| Error::io(audio_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .is_some_and(|x| x.eq_ignore_ascii_case("wav"))
        })
        .collect();
    wavs.sort();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    Ok(parallel::map_slice(&wavs, |p| {
        let outcome = featurize_wav(p, cfg).and_then(|spec| {
            let out = out_dir.join(format!("{}.mels", spec.source_id));
            spec.save(&out)?;
            Ok(out)
        });
        (p.clone(), outcome)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n_mels: usize, n_frames: usize) -> MelSpectrogram {
        let values = (0..n_mels * n_frames).map(|i| (i % 17) as f32 * 0.3 - 2.0).collect();
        MelSpectrogram::from_values(n_mels, n_frames, values).unwrap()
    }

    #[test]
    fn standardized_moments() {
        let s = ramp(96, 40).standardize();
        let (mean, std) = s.mean_std();
        assert!(mean.abs() < 1e-5);
        assert!((std - 1.0).abs() < 1e-4);
        assert!(s.standardized && !s.degenerate);
    }

    #[test]
    fn constant_input_is_degenerate() {
        let c = MelSpectrogram::from_values(4, 4, vec![-3.0; 16]).unwrap().standardize();
        assert!(c.degenerate);
        assert!(c.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standardize_twice_is_identity() {
        let once = ramp(8, 30).standardize();
        let twice = once.standardize();
        for (a, b) in once.values.iter().zip(&twice.values) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn fit_length_rules() {
        let s = ramp(2, 10);
        assert_eq!(s.fit_length(10), s);
        let c = s.fit_length(8);
        assert_eq!(c.get(0, 0), s.get(0, 1));
        assert_eq!(c.get(1, 7), s.get(1, 8));
        let p = s.fit_length(13);
        assert_eq!(p.get(0, 0), 0.0);
        assert_eq!(p.get(0, 1), s.get(0, 0));
        assert_eq!(p.get(1, 10), s.get(1, 9));
        assert_eq!((p.get(1, 11), p.get(1, 12)), (0.0, 0.0));
        // odd excess: one frame off the left, two off the right
        let c3 = s.fit_length(7);
        assert_eq!(c3.get(0, 0), s.get(0, 1));
        assert_eq!(c3.get(0, 6), s.get(0, 7));
    }

    #[test]
    fn file_round_trip() {
        let s = ramp(3, 5).standardize();
        let mut buf = Vec::new();
        s.write(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"MELS");
        assert_eq!(buf.len(), 4 + 4 + 4 + 4 + 4 + 1 + 1 + 15 * 4);
        let back = MelSpectrogram::read(&mut buf.as_slice()).unwrap();
        assert_eq!(back.values, s.values);
        assert!(back.standardized);
    }
}
