use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::parallel;
use crate::tagdata::{LabelMatrix, TagVocabulary};
use crate::{Error, Result};

/// Forward corruption rates for one tag, applied to true labels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TagNoise {
    /// Probability that a true positive is recorded as absent.
    pub drop_rate: f64,
    /// Probability that a true negative is recorded as present.
    pub spurious_rate: f64,
}

/// Per-tag forward noise model plus the seed that drives it.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub rates: Vec<TagNoise>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn uniform(n_tags: usize, noise: TagNoise, seed: u64) -> Self {
        NoiseSpec {
            rates: vec![noise; n_tags],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.rates.iter().enumerate() {
            if !(0.0..=1.0).contains(&r.drop_rate) || !(0.0..=1.0).contains(&r.spurious_rate) {
                return Err(Error::Invalid(format!("noise rates for tag {i} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Parses the plain-text spec: `seed, <u64>` (or `seed = <u64>`) and one
    /// `tag, drop_rate, spurious_rate` line per tag. Unlisted tags are
    /// noiseless; `#` starts a comment line.
    pub fn parse(text: &str, vocab: &TagVocabulary) -> Result<Self> {
        let mut spec = NoiseSpec::uniform(vocab.len(), TagNoise::default(), 0);
        let mut seen_seed = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: "noise spec".into(),
                line: i + 1,
                message,
            };
            if let Some(rest) = line.strip_prefix("seed") {
                let v = rest.trim_start().trim_start_matches([',', '=']).trim();
                if let Ok(seed) = v.parse::<u64>() {
                    spec.seed = seed;
                    seen_seed = true;
                    continue;
                }
            }
            // tag names may contain commas, so split from the right
            let mut parts = line.rsplitn(3, ',');
            let (Some(spurious), Some(drop), Some(tag)) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(err(format!("expected `tag, drop_rate, spurious_rate`: `{line}`")));
            };
            let parse_rate = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| err(format!("bad rate `{}`", s.trim())))
            };
            let id = vocab
                .id(tag.trim())
                .ok_or_else(|| err(format!("unknown tag `{}`", tag.trim())))?;
            spec.rates[id] = TagNoise {
                drop_rate: parse_rate(drop)?,
                spurious_rate: parse_rate(spurious)?,
            };
        }
        if !seen_seed {
            log::warn!("noise spec has no seed line; using seed 0");
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Realised corruption per tag.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InjectionReport {
    pub dropped: Vec<u64>,
    pub added: Vec<u64>,
}

impl InjectionReport {
    pub fn total_flips(&self) -> u64 {
        self.dropped.iter().sum::<u64>() + self.added.iter().sum::<u64>()
    }
}

/// Corrupts `clean` (taken as true labels) with independent per-cell flips.
///
/// Track `t` draws one uniform per tag from its own generator stream
/// `(seed, t)`, so the output does not depend on thread count. Splits are
/// carried over unchanged; rows may become empty.
pub fn inject_noise(clean: &LabelMatrix, spec: &NoiseSpec) -> Result<(LabelMatrix, InjectionReport)> {
    let k = clean.n_tags();
    if spec.rates.len() != k {
        return Err(Error::Shape(format!(
            "noise spec covers {} tags, matrix has {k}",
            spec.rates.len()
        )));
    }
    spec.validate()?;
    let per_track = parallel::map_range(clean.n_tracks(), |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(t as u64);
        let row = clean.row(t);
        let mut out = Vec::with_capacity(row.len());
        let mut flips: Vec<(usize, bool)> = Vec::new();
        for (tag, r) in spec.rates.iter().enumerate() {
            let u: f64 = rng.random();
            let positive = row.binary_search(&(tag as u32)).is_ok();
            if positive {
                if u < r.drop_rate {
                    flips.push((tag, false));
                } else {
                    out.push(tag);
                }
            } else if u < r.spurious_rate {
                out.push(tag);
                flips.push((tag, true));
            }
        }
        (out, flips)
    });
    let mut report = InjectionReport {
        dropped: vec![0; k],
        added: vec![0; k],
    };
    let mut rows = Vec::with_capacity(per_track.len());
    for (row, flips) in per_track {
        for (tag, added) in flips {
            if added {
                report.added[tag] += 1;
            } else {
                report.dropped[tag] += 1;
            }
        }
        rows.push(row);
    }
    log::info!(
        "noise injection: {} dropped, {} added",
        report.dropped.iter().sum::<u64>(),
        report.added.iter().sum::<u64>()
    );
    Ok((clean.with_rows(rows)?, report))
}

/// Error rates `(p+, p−)` an annotation audit would observe on labels
/// corrupted by the forward model, for a tag of true prevalence `prevalence`.
///
/// `p+` is the share of recorded positives that are truly negative,
/// `p−` the share of recorded negatives that are truly positive.
pub fn observed_error_rates(prevalence: f64, noise: TagNoise) -> (f64, f64) {
    let (pi, d, s) = (prevalence, noise.drop_rate, noise.spurious_rate);
    let rec_pos_true = pi * (1.0 - d);
    let rec_pos_false = (1.0 - pi) * s;
    let rec_neg_true = pi * d;
    let rec_neg_false = (1.0 - pi) * (1.0 - s);
    let p_pos = if rec_pos_true + rec_pos_false > 0.0 {
        rec_pos_false / (rec_pos_true + rec_pos_false)
    } else {
        0.0
    };
    let p_neg = if rec_neg_true + rec_neg_false > 0.0 {
        rec_neg_true / (rec_neg_true + rec_neg_false)
    } else {
        0.0
    };
    (p_pos, p_neg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagdata::Split;

    fn dense(n: usize, k: usize) -> LabelMatrix {
        let vocab = TagVocabulary::new((0..k).map(|i| format!("g{i}")).collect()).unwrap();
        let ids = (0..n).map(|i| format!("t{i}")).collect();
        let rows = (0..n).map(|i| (0..k).filter(|g| (i + g) % 3 != 0).collect()).collect();
        LabelMatrix::from_rows(ids, vocab, rows).unwrap()
    }

    #[test]
    fn zero_rates_are_identity() {
        let m = dense(50, 4);
        let (out, rep) = inject_noise(&m, &NoiseSpec::uniform(4, TagNoise::default(), 3)).unwrap();
        assert_eq!(out, m);
        assert_eq!(rep.total_flips(), 0);
    }

    #[test]
    fn full_drop_empties_column() {
        let m = dense(50, 3);
        let mut spec = NoiseSpec::uniform(3, TagNoise::default(), 1);
        spec.rates[1].drop_rate = 1.0;
        let (out, rep) = inject_noise(&m, &spec).unwrap();
        assert_eq!(out.column_counts()[1], 0);
        assert_eq!(rep.dropped[1], m.column_counts()[1]);
        assert_eq!(out.column_counts()[0], m.column_counts()[0]);
    }

    #[test]
    fn splits_survive_injection() {
        let m = dense(4, 2)
            .with_splits(vec![Split::Train, Split::Valid, Split::Test, Split::None])
            .unwrap();
        let (out, _) = inject_noise(&m, &NoiseSpec::uniform(2, TagNoise { drop_rate: 0.5, spurious_rate: 0.5 }, 9)).unwrap();
        assert_eq!(out.splits(), m.splits());
    }

    #[test]
    fn parse_spec_file() {
        let vocab = TagVocabulary::new(vec!["rock".into(), "a, b".into()]).unwrap();
        let spec = NoiseSpec::parse("# demo\nseed, 42\nrock, 0.3, 0.01\na, b, 0.5, 0\n", &vocab).unwrap();
        assert_eq!(spec.seed, 42);
        assert_eq!(spec.rates[0], TagNoise { drop_rate: 0.3, spurious_rate: 0.01 });
        assert_eq!(spec.rates[1].drop_rate, 0.5);
        assert!(NoiseSpec::parse("rock, 1.5, 0\n", &vocab).is_err());
        assert!(NoiseSpec::parse("jazz, 0.1, 0\n", &vocab).is_err());
        assert!(NoiseSpec::parse("rock, 0.1\n", &vocab).is_err());
        assert_eq!(NoiseSpec::parse("seed = 7\n", &vocab).unwrap().seed, 7);
    }

    #[test]
    fn observed_rates_limits() {
        let (pp, pn) = observed_error_rates(0.2, TagNoise::default());
        assert_eq!((pp, pn), (0.0, 0.0));
        let (pp, pn) = observed_error_rates(0.5, TagNoise { drop_rate: 0.5, spurious_rate: 0.0 });
        assert_eq!(pp, 0.0);
        assert!((pn - 1.0 / 3.0).abs() < 1e-12);
    }
}
