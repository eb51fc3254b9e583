use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::parallel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    /// Two-sided coverage, e.g. 0.95.
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_resamples: 2000,
            level: 0.95,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn with_seed(seed: u64) -> Self {
        BootstrapConfig {
            seed,
            ..Default::default()
        }
    }
}

/// Percentile interval together with the statistic on the original sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
    pub point: f64,
    /// Resamples on which the statistic was undefined.
    pub n_undefined: usize,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    /// Widens the interval, if needed, so that it contains the point estimate.
    pub fn enclosing_point(self) -> Interval {
        Interval {
            low: self.low.min(self.point),
            high: self.high.max(self.point),
            ..self
        }
    }
}

/// Quantile of sorted data by linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval for `statistic`.
///
/// Each resample draws records with replacement; when `strata` is given,
/// records are resampled within each stratum so stratum sizes are preserved.
/// Resample `i` uses its own generator stream derived from `(seed, i)`, which
/// makes the result independent of evaluation order and thread count.
/// Resamples where `statistic` returns `None` are excluded; more than half
/// undefined is an error.
pub fn bootstrap_ci<T, F>(
    records: &[T],
    statistic: F,
    strata: Option<&[usize]>,
    config: &BootstrapConfig,
) -> Result<Interval>
where
    T: Clone + Sync + Send,
    F: Fn(&[T]) -> Option<f64> + Sync + Send,
{
    if records.len() < 2 {
        return Err(Error::Invalid(format!(
            "bootstrap needs at least 2 records, got {}",
            records.len()
        )));
    }
    if config.n_resamples == 0 || !(0.0..1.0).contains(&config.level) {
        return Err(Error::Invalid(format!(
            "bad bootstrap configuration {config:?}"
        )));
    }
    let groups: Vec<Vec<usize>> = match strata {
        Some(keys) => {
            if keys.len() != records.len() {
                return Err(Error::Shape(format!(
                    "{} strata keys for {} records",
                    keys.len(),
                    records.len()
                )));
            }
            let mut distinct: Vec<usize> = keys.to_vec();
            distinct.sort_unstable();
            distinct.dedup();
            distinct
                .iter()
                .map(|&k| (0..keys.len()).filter(|&i| keys[i] == k).collect())
                .collect()
        }
        None => vec![(0..records.len()).collect()],
    };
    let point = statistic(records)
        .ok_or_else(|| Error::Undefined("statistic undefined on the original sample".into()))?;

    let stats: Vec<Option<f64>> = parallel::map_range(config.n_resamples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);
        let mut sample = Vec::with_capacity(records.len());
        for g in &groups {
            for _ in 0..g.len() {
                sample.push(records[g[rng.random_range(0..g.len())]].clone());
            }
        }
        statistic(&sample)
    });
    let mut values: Vec<f64> = stats.iter().filter_map(|&s| s).collect();
    let n_undefined = config.n_resamples - values.len();
    if 2 * n_undefined > config.n_resamples {
        return Err(Error::Undefined(format!(
            "statistic undefined on {n_undefined} of {} resamples",
            config.n_resamples
        )));
    }
    values.sort_by(f64::total_cmp);
    let alpha = (1.0 - config.level) / 2.0;
    Ok(Interval {
        low: percentile(&values, alpha),
        high: percentile(&values, 1.0 - alpha),
        point,
        n_undefined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(x: &[f64]) -> Option<f64> {
        Some(x.iter().sum::<f64>() / x.len() as f64)
    }

    #[test]
    fn constant_records_have_zero_width() {
        let ci = bootstrap_ci(&[0.25; 20], mean, None, &BootstrapConfig::default()).unwrap();
        assert_eq!(ci.width(), 0.0);
        assert_eq!(ci.point, 0.25);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let data: Vec<f64> = (0..50).map(|i| (i * 7 % 13) as f64).collect();
        let cfg = BootstrapConfig::with_seed(11);
        let a = bootstrap_ci(&data, mean, None, &cfg).unwrap();
        let b = bootstrap_ci(&data, mean, None, &cfg).unwrap();
        assert_eq!(a.low.to_bits(), b.low.to_bits());
        assert_eq!(a.high.to_bits(), b.high.to_bits());
        let c = bootstrap_ci(&data, mean, None, &BootstrapConfig::with_seed(12)).unwrap();
        assert_ne!((a.low, a.high), (c.low, c.high));
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert_eq!(percentile(&v, 0.125), 1.5);
        assert_eq!(percentile(&v, 1.0), 5.0);
    }

    #[test]
    fn stratified_resamples_preserve_stratum_sizes() {
        // statistic = fraction of stratum-1 records, which stratification fixes
        let recs: Vec<usize> = (0..30).map(|i| usize::from(i < 10)).collect();
        let frac = |s: &[usize]| Some(s.iter().sum::<usize>() as f64 / s.len() as f64);
        let ci = bootstrap_ci(&recs, frac, Some(&recs), &BootstrapConfig::default()).unwrap();
        assert_eq!(ci.width(), 0.0);
        let free = bootstrap_ci(&recs, frac, None, &BootstrapConfig::default()).unwrap();
        assert!(free.width() > 0.0);
    }

    #[test]
    fn mostly_undefined_is_an_error() {
        // defined only on the original ordering, which resampling never reproduces
        let recs: Vec<usize> = (0..30).collect();
        let stat = |s: &[usize]| (s == recs.as_slice()).then_some(0.0);
        assert!(matches!(
            bootstrap_ci(&recs, stat, None, &BootstrapConfig::default()),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn too_few_records() {
        assert!(bootstrap_ci(&[1.0], mean, None, &BootstrapConfig::default()).is_err());
    }
}
