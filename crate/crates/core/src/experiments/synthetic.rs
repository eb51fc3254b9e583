use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dsp::MelSpectrogram;
use crate::parallel;
use crate::tagdata::{LabelMatrix, Split, TagVocabulary};
use crate::{Error, Result};

/// A Gaussian bump over mel bins marking one tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagTemplate {
    /// Centre mel bin (fractional allowed).
    pub center: f64,
    /// Standard deviation in bins.
    pub bandwidth: f64,
    /// Peak amplitude before standardisation, relative to unit-variance noise
    /// scaled by `noise_level`.
    pub energy: f64,
}

/// Generator settings for a mel-domain synthetic tagging dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub tag_names: Vec<String>,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub templates: Vec<TagTemplate>,
    pub priors: Vec<f64>,
    /// `(a, b, w)`: when `a` is active, `b` is switched on with probability
    /// `w`. Applied in list order.
    pub coactivation: Vec<(usize, usize, f64)>,
    pub n_mels: usize,
    pub frames: usize,
    pub noise_level: f64,
    /// Per-tag share of true positives removed from the observed labels.
    pub drop_rates: Vec<f64>,
    pub spurious_rate: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn n_tags(&self) -> usize {
        self.tag_names.len()
    }

    pub fn n_tracks(&self) -> usize {
        self.n_train + self.n_valid + self.n_test
    }

    /// Tags spread evenly across the mel axis with identical shape, so that
    /// they are equally hard to detect.
    pub fn evenly_spaced(n_tags: usize, n_mels: usize, bandwidth: f64, energy: f64) -> Vec<TagTemplate> {
        let step = n_mels as f64 / n_tags as f64;
        (0..n_tags)
            .map(|j| TagTemplate {
                center: step * (j as f64 + 0.5),
                bandwidth,
                energy,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_tags();
        if k == 0 {
            return Err(Error::Invalid("synthetic spec needs at least one tag".into()));
        }
        for (what, len) in [
            ("templates", self.templates.len()),
            ("priors", self.priors.len()),
            ("drop rates", self.drop_rates.len()),
        ] {
            if len != k {
                return Err(Error::Invalid(format!("{len} {what} for {k} tags")));
            }
        }
        if self.n_mels == 0 || self.frames == 0 {
            return Err(Error::Invalid("spectrogram size must be positive".into()));
        }
        for t in &self.templates {
            if !(0.0..self.n_mels as f64).contains(&t.center) || !(t.bandwidth > 0.0) || !t.energy.is_finite() {
                return Err(Error::Invalid(format!("template {t:?} outside {} mel bins", self.n_mels)));
            }
        }
        if self.priors.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Invalid("priors must lie in [0, 1]".into()));
        }
        if self.priors.iter().all(|&p| p == 0.0) {
            return Err(Error::Invalid("all priors are zero; no track could carry a tag".into()));
        }
        if self.drop_rates.iter().any(|d| !(0.0..1.0).contains(d)) || !(0.0..1.0).contains(&self.spurious_rate) {
            return Err(Error::Invalid("noise rates must lie in [0, 1)".into()));
        }
        for &(a, b, w) in &self.coactivation {
            if a >= k || b >= k || a == b || !(0.0..=1.0).contains(&w) {
                return Err(Error::Invalid(format!("bad co-activation ({a}, {b}, {w})")));
            }
        }
        if !(self.noise_level >= 0.0) {
            return Err(Error::Invalid("noise level must be non-negative".into()));
        }
        if self.n_tracks() == 0 {
            return Err(Error::Invalid("no tracks requested".into()));
        }
        Ok(())
    }

    fn split_of(&self, t: usize) -> Split {
        if t < self.n_train {
            Split::Train
        } else if t < self.n_train + self.n_valid {
            Split::Valid
        } else {
            Split::Test
        }
    }
}

/// Clean labels and standardised features, one spectrogram per track.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub labels: LabelMatrix,
    pub features: Vec<MelSpectrogram>,
}

fn draw_tags(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = spec.n_tags();
    let mut active: Vec<bool> = spec.priors.iter().map(|&p| rng.random::<f64>() < p).collect();
    for &(a, b, w) in &spec.coactivation {
        let u: f64 = rng.random();
        if active[a] && u < w {
            active[b] = true;
        }
    }
    if !active.iter().any(|&a| a) {
        // every track carries at least one tag, chosen in proportion to the priors
        let total: f64 = spec.priors.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = k - 1;
        for (j, &p) in spec.priors.iter().enumerate() {
            if u < p {
                pick = j;
                break;
            }
            u -= p;
        }
        active[pick] = true;
    }
    (0..k).filter(|&j| active[j]).collect()
}

fn render(spec: &SyntheticSpec, tags: &[usize], rng: &mut ChaCha8Rng, id: String) -> Result<MelSpectrogram> {
    let (m, f) = (spec.n_mels, spec.frames);
    let mut values = vec![0f32; m * f];
    for &j in tags {
        let t = spec.templates[j];
        // per-track loudness of the tag
        let gain = t.energy * rng.random_range(0.5..1.5);
        for bin in 0..m {
            let z = (bin as f64 - t.center) / t.bandwidth;
            let amp = (gain * (-0.5 * z * z).exp()) as f32;
            if amp.abs() < 1e-6 {
                continue;
            }
            values[bin * f..(bin + 1) * f].iter_mut().for_each(|v| *v += amp);
        }
    }
    for v in values.iter_mut() {
        let n: f64 = StandardNormal.sample(rng);
        *v += (spec.noise_level * n) as f32;
    }
    let mut s = MelSpectrogram::from_values(m, f, values)?.standardize();
    s.source_id = id;
    Ok(s)
}

/// Samples tag sets from the priors plus co-activation and renders each
/// track as the sum of its tag templates plus Gaussian noise, standardised.
/// Track `t` uses generator stream `t` of the seed, so the output is the
/// same for any thread count.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let vocab = TagVocabulary::new(spec.tag_names.clone())?;
    let n = spec.n_tracks();
    let width = n.to_string().len().max(4);
    let ids: Vec<String> = (0..n).map(|t| format!("syn{t:0width$}")).collect();
    let per_track = parallel::map_range(n, |t| -> Result<(Vec<usize>, MelSpectrogram)> {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(t as u64);
        let tags = draw_tags(spec, &mut rng);
        let feat = render(spec, &tags, &mut rng, ids[t].clone())?;
        Ok((tags, feat))
    });
    let mut rows = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n);
    for r in per_track {
        let (tags, feat) = r?;
        rows.push(tags);
        features.push(feat);
    }
    let labels = LabelMatrix::from_rows(ids, vocab, rows)?.with_splits((0..n).map(|t| spec.split_of(t)).collect())?;
    Ok(SyntheticData { labels, features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cooccur::compute_nco;
    use crate::tagdata::SplitFilter;

    fn spec(k: usize) -> SyntheticSpec {
        SyntheticSpec {
            tag_names: (0..k).map(|j| format!("tag{j}")).collect(),
            n_train: 20,
            n_valid: 5,
            n_test: 5,
            templates: SyntheticSpec::evenly_spaced(k, 16, 1.5, 3.0),
            priors: vec![0.3; k],
            coactivation: vec![],
            n_mels: 16,
            frames: 8,
            noise_level: 1.0,
            drop_rates: vec![0.0; k],
            spurious_rate: 0.0,
            seed: 5,
        }
    }

    #[test]
    fn certain_tag_marks_every_track() {
        let mut s = spec(1);
        s.priors = vec![1.0];
        s.noise_level = 0.1;
        let d = generate_synthetic(&s).unwrap();
        assert_eq!(d.labels.column_counts(), vec![30]);
        let c = s.templates[0].center.round() as usize;
        for f in &d.features {
            // template band stands above the far end of the spectrum
            let band: f32 = (0..8).map(|t| f.get(c, t)).sum();
            let edge: f32 = (0..8).map(|t| f.get(15, t)).sum();
            assert!(band > edge + 8.0, "{band} vs {edge}");
        }
    }

    #[test]
    fn splits_follow_counts() {
        let d = generate_synthetic(&spec(3)).unwrap();
        assert_eq!(d.labels.split_counts(), [0, 20, 5, 5]);
        assert!(d.labels.rows().iter().all(|r| !r.is_empty()));
    }

    #[test]
    fn same_seed_same_data() {
        let a = generate_synthetic(&spec(3)).unwrap();
        let b = generate_synthetic(&spec(3)).unwrap();
        assert_eq!(a, b);
        let mut s = spec(3);
        s.seed = 6;
        assert_ne!(generate_synthetic(&s).unwrap(), a);
    }

    #[test]
    fn all_zero_priors_rejected() {
        let mut s = spec(2);
        s.priors = vec![0.0, 0.0];
        assert!(generate_synthetic(&s).is_err());
    }

    #[test]
    fn coactivation_raises_cooccurrence() {
        let mut last = -1.0;
        for w in [0.0, 0.4, 0.8] {
            let mut s = spec(2);
            s.n_train = 2000;
            s.n_valid = 0;
            s.n_test = 0;
            s.frames = 1;
            s.coactivation = vec![(0, 1, w)];
            let d = generate_synthetic(&s).unwrap();
            let c = compute_nco(&d.labels, SplitFilter::All).unwrap().get(0, 1).unwrap();
            assert!(c > last, "C(0,1) = {c} at weight {w}");
            last = c;
        }
    }
}
