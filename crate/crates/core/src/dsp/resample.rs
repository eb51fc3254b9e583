use super::AudioClip;
use crate::{Error, Result};

pub const TARGET_RATE: u32 = 12_000;
pub const SUPPORTED_RATES: [u32; 7] = [8_000, 11_025, 12_000, 16_000, 22_050, 44_100, 48_000];

const KAISER_BETA: f64 = 8.6;
const ZERO_CROSSINGS: f64 = 64.0;

/// Averages channels into one.
pub fn downmix(clip: &AudioClip) -> AudioClip {
    if clip.channels <= 1 {
        return clip.clone();
    }
    let c = clip.channels as usize;
    let samples = clip
        .samples
        .chunks_exact(c)
        .map(|f| (f.iter().map(|&s| s as f64).sum::<f64>() / c as f64) as f32)
        .collect();
    AudioClip::mono(samples, clip.sample_rate)
}

/// Downmixes to mono and resamples to 12 kHz. A 12 kHz mono clip is
/// returned unchanged.
pub fn downmix_resample(clip: &AudioClip) -> Result<AudioClip> {
    if !SUPPORTED_RATES.contains(&clip.sample_rate) {
        return Err(Error::UnsupportedRate(clip.sample_rate));
    }
    let mono = downmix(clip);
    if mono.sample_rate == TARGET_RATE {
        return Ok(mono);
    }
    let r = Resampler::new(mono.sample_rate, TARGET_RATE);
    let out = r.process(&mono.samples);
    Ok(AudioClip::mono(out, TARGET_RATE))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Modified Bessel function of the first kind, order zero.
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel
/// (β = 8.6, 64 zero crossings each side).
///
/// Output sample `n` sits at input position `n·down/up`; its fractional part
/// selects one of `up` precomputed phase filters. Each phase is normalised to
/// unit DC gain. Samples outside the input are treated as zero.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    half_width: usize,
    phases: Vec<Vec<f64>>,
}

impl Resampler {
    pub fn new(from_rate: u32, to_rate: u32) -> Self {
        let g = gcd(from_rate as u64, to_rate as u64);
        let up = (to_rate as u64 / g) as usize;
        let down = (from_rate as u64 / g) as usize;
        // cutoff relative to the input Nyquist frequency
        let cutoff = (up as f64 / down as f64).min(1.0);
        let reach = ZERO_CROSSINGS / cutoff;
        let half_width = reach.ceil() as usize;
        let i0_beta = bessel_i0(KAISER_BETA);
        let phases = (0..up)
            .map(|p| {
                let frac = p as f64 / up as f64;
                let mut taps: Vec<f64> = (0..=2 * half_width)
                    .map(|i| {
                        let k = i as f64 - half_width as f64;
                        let tau = frac - k;
                        let u = tau / reach;
                        if u.abs() > 1.0 {
                            0.0
                        } else {
                            let w = bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / i0_beta;
                            cutoff * sinc(cutoff * tau) * w
                        }
                    })
                    .collect();
                let sum: f64 = taps.iter().sum();
                taps.iter_mut().for_each(|t| *t /= sum);
                taps
            })
            .collect();
        Resampler {
            up,
            down,
            half_width,
            phases,
        }
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        (input_len * self.up).div_ceil(self.down)
    }

    pub fn process(&self, input: &[f32]) -> Vec<f32> {
        let n_out = self.output_len(input.len());
        let h = self.half_width as isize;
        let len = input.len() as isize;
        (0..n_out)
            .map(|n| {
                let pos = n * self.down;
                let base = (pos / self.up) as isize;
                let taps = &self.phases[pos % self.up];
                let lo = (base - h).max(0);
                let hi = (base + h).min(len - 1);
                let mut acc = 0.0f64;
                for j in lo..=hi {
                    acc += input[j as usize] as f64 * taps[(j - base + h) as usize];
                }
                acc as f32
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passthrough_is_bit_identical() {
        let clip = AudioClip::mono(vec![0.1, -0.3, 0.7, 0.25], TARGET_RATE);
        assert_eq!(downmix_resample(&clip).unwrap(), clip);
    }

    #[test]
    fn unsupported_rate() {
        let clip = AudioClip::mono(vec![0.0; 10], 32_000);
        assert!(matches!(downmix_resample(&clip), Err(Error::UnsupportedRate(32_000))));
    }

    #[test]
    fn downmix_averages_channels() {
        let clip = AudioClip {
            samples: vec![1.0, 0.0, 0.5, 0.5],
            sample_rate: 12_000,
            channels: 2,
        };
        let m = downmix_resample(&clip).unwrap();
        assert_eq!(m.samples, [0.5, 0.5]);
        assert_eq!(m.channels, 1);
    }

    #[test]
    fn ratios_reduce() {
        assert_eq!(Resampler::new(44_100, 12_000).ratio(), (40, 147));
        assert_eq!(Resampler::new(8_000, 12_000).ratio(), (3, 2));
        assert_eq!(Resampler::new(48_000, 12_000).output_len(48_000), 12_000);
    }

    #[test]
    fn dc_is_preserved_in_the_interior() {
        for rate in [8_000, 11_025, 16_000, 22_050, 44_100, 48_000] {
            let clip = AudioClip::mono(vec![0.5; rate as usize / 2], rate);
            let out = downmix_resample(&clip).unwrap();
            let n = out.samples.len();
            for &s in &out.samples[n / 4..3 * n / 4] {
                assert!((s - 0.5).abs() < 1e-3, "rate {rate}: {s}");
            }
        }
    }

    #[test]
    fn bessel_reference_values() {
        assert!((bessel_i0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i0(8.6) - 750.461_159_563_165_9).abs() / 750.46 < 1e-12);
    }
}
