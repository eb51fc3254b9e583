use super::bootstrap::{bootstrap_ci, BootstrapConfig, Interval};
use crate::tagdata::{AnnotationSet, LabelMatrix, SubsetKind};
use crate::{Error, Result};

/// Confusion counts with annotation verdicts as truth and groundtruth labels
/// as predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    /// groundtruth positive, verdict positive
    pub tp: u64,
    /// groundtruth positive, verdict negative
    pub fp: u64,
    /// groundtruth negative, verdict positive
    pub fn_: u64,
    /// groundtruth negative, verdict negative
    pub tn: u64,
}

impl ConfusionCounts {
    /// Tallies `(groundtruth, verdict)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = ConfusionCounts::default();
        for (gt, verdict) in pairs {
            match (gt, verdict) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    /// Counts for `tag` over judged records; skipped verdicts are excluded
    /// and their number returned alongside.
    pub fn from_annotations(
        matrix: &LabelMatrix,
        annotations: &AnnotationSet,
        tag: usize,
    ) -> Result<(Self, usize)> {
        let (pairs, skipped) = judged_pairs(matrix, annotations, tag)?;
        Ok((ConfusionCounts::from_pairs(pairs), skipped))
    }

    pub fn n_gt_pos(&self) -> u64 {
        self.tp + self.fp
    }

    pub fn n_gt_neg(&self) -> u64 {
        self.fn_ + self.tn
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    /// Recall of the groundtruth, i.e. tagability.
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn judged_pairs(
    matrix: &LabelMatrix,
    annotations: &AnnotationSet,
    tag: usize,
) -> Result<(Vec<(bool, bool)>, usize)> {
    let (judged, skipped) = annotations.judged(tag);
    if skipped > 0 {
        log::warn!(
            "{skipped} skipped verdict(s) for `{}` excluded from estimation",
            matrix.vocab().tag(tag)
        );
    }
    let pairs = judged
        .into_iter()
        .map(|r| {
            let t = matrix
                .track_position(&r.track_id)
                .ok_or_else(|| Error::UnknownTrack(r.track_id.clone()))?;
            let verdict = r.verdict.and_then(|v| v.is_positive()).unwrap_or(false);
            Ok((matrix.contains(t, tag), verdict))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((pairs, skipped))
}

/// Error rates of the groundtruth labels for one tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseRates {
    pub tag: usize,
    /// Fraction of groundtruth-positive items judged negative.
    pub p_pos: f64,
    /// Fraction of groundtruth-negative items judged positive.
    pub p_neg: f64,
    pub n_pos_sampled: u64,
    pub n_neg_sampled: u64,
    pub pos_errors: u64,
    pub neg_errors: u64,
}

impl NoiseRates {
    pub fn from_counts(tag: usize, c: &ConfusionCounts) -> Result<Self> {
        NoiseRates::from_error_counts(tag, c.fp, c.n_gt_pos(), c.fn_, c.n_gt_neg())
    }

    pub fn from_error_counts(
        tag: usize,
        pos_errors: u64,
        n_pos_sampled: u64,
        neg_errors: u64,
        n_neg_sampled: u64,
    ) -> Result<Self> {
        if n_pos_sampled == 0 || n_neg_sampled == 0 {
            return Err(Error::Invalid(format!(
                "need judged items in both classes (positive {n_pos_sampled}, negative {n_neg_sampled})"
            )));
        }
        if pos_errors > n_pos_sampled || neg_errors > n_neg_sampled {
            return Err(Error::Invalid("error count exceeds sample size".into()));
        }
        Ok(NoiseRates {
            tag,
            p_pos: pos_errors as f64 / n_pos_sampled as f64,
            p_neg: neg_errors as f64 / n_neg_sampled as f64,
            n_pos_sampled,
            n_neg_sampled,
            pos_errors,
            neg_errors,
        })
    }

    /// The confusion counts these rates were measured from.
    pub fn counts(&self) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.n_pos_sampled - self.pos_errors,
            fp: self.pos_errors,
            fn_: self.neg_errors,
            tn: self.n_neg_sampled - self.neg_errors,
        }
    }
}

pub fn estimate_noise_rates(
    matrix: &LabelMatrix,
    annotations: &AnnotationSet,
    tag: usize,
) -> Result<NoiseRates> {
    let (counts, _) = ConfusionCounts::from_annotations(matrix, annotations, tag)?;
    NoiseRates::from_counts(tag, &counts)
}

/// Groundtruth precision and recall on an annotated sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundtruthQuality {
    pub tag: usize,
    pub counts: ConfusionCounts,
    pub precision: Interval,
    /// `None` when no annotated item was judged positive.
    pub recall: Option<Interval>,
}

pub fn groundtruth_quality(
    matrix: &LabelMatrix,
    annotations: &AnnotationSet,
    tag: usize,
    bootstrap: &BootstrapConfig,
) -> Result<GroundtruthQuality> {
    let (pairs, _) = judged_pairs(matrix, annotations, tag)?;
    let stratify = annotations.subset_kind == SubsetKind::Balanced;
    quality_from_pairs(tag, &pairs, stratify, bootstrap)
}

/// As [`groundtruth_quality`], from raw `(groundtruth, verdict)` pairs.
pub(crate) fn quality_from_pairs(
    tag: usize,
    pairs: &[(bool, bool)],
    stratify: bool,
    bootstrap: &BootstrapConfig,
) -> Result<GroundtruthQuality> {
    let counts = ConfusionCounts::from_pairs(pairs.iter().copied());
    NoiseRates::from_counts(tag, &counts)?;
    let strata: Vec<usize> = pairs.iter().map(|&(gt, _)| usize::from(gt)).collect();
    let strata = stratify.then_some(strata.as_slice());
    let precision = bootstrap_ci(
        pairs,
        |s| ConfusionCounts::from_pairs(s.iter().copied()).precision(),
        strata,
        bootstrap,
    )?
    .enclosing_point();
    let recall = match counts.recall() {
        None => {
            log::warn!("recall undefined: no annotated item was judged positive");
            None
        }
        Some(_) => Some(
            bootstrap_ci(
                pairs,
                |s| ConfusionCounts::from_pairs(s.iter().copied()).recall(),
                strata,
                bootstrap,
            )?
            .enclosing_point(),
        ),
    };
    Ok(GroundtruthQuality {
        tag,
        counts,
        precision,
        recall,
    })
}

/// Corrected positive count `N+(1 − p+) + (T − N+)p−`.
///
/// Evaluated as one exact integer ratio over the sampled counts in `rates`,
/// with a single final division.
pub fn corrected_count(n_plus: u64, total: u64, rates: &NoiseRates) -> f64 {
    let np = rates.n_pos_sampled as u128;
    let nn = rates.n_neg_sampled as u128;
    let kept = np - rates.pos_errors as u128;
    let num = n_plus as u128 * kept * nn + (total - n_plus) as u128 * rates.neg_errors as u128 * np;
    num as f64 / (np * nn) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrevalenceEstimate {
    pub tag: usize,
    /// Groundtruth occurrence count `N+`.
    pub n_plus: u64,
    /// Total item count `T`.
    pub total: u64,
    pub estimate: Interval,
}

impl PrevalenceEstimate {
    /// Estimated count as a fraction of all items.
    pub fn fraction(&self) -> f64 {
        self.estimate.point / self.total as f64
    }
}

/// Corrected count with a percentile interval obtained by resampling the
/// annotated records within each groundtruth class and re-evaluating the
/// correction per resample.
pub fn estimate_prevalence(
    n_plus: u64,
    total: u64,
    rates: &NoiseRates,
    bootstrap: &BootstrapConfig,
) -> Result<PrevalenceEstimate> {
    if n_plus > total {
        return Err(Error::Invalid(format!(
            "occurrence count {n_plus} exceeds total {total}"
        )));
    }
    let pairs: Vec<(bool, bool)> = rates_to_pairs(rates);
    let strata: Vec<usize> = pairs.iter().map(|&(gt, _)| usize::from(gt)).collect();
    let tag = rates.tag;
    let estimate = bootstrap_ci(
        &pairs,
        |s| {
            let c = ConfusionCounts::from_pairs(s.iter().copied());
            NoiseRates::from_counts(tag, &c)
                .ok()
                .map(|r| corrected_count(n_plus, total, &r))
        },
        Some(&strata),
        bootstrap,
    )?
    .enclosing_point();
    Ok(PrevalenceEstimate {
        tag,
        n_plus,
        total,
        estimate,
    })
}

fn rates_to_pairs(r: &NoiseRates) -> Vec<(bool, bool)> {
    let c = r.counts();
    let mut v = Vec::with_capacity((r.n_pos_sampled + r.n_neg_sampled) as usize);
    v.extend(std::iter::repeat_n((true, true), c.tp as usize));
    v.extend(std::iter::repeat_n((true, false), c.fp as usize));
    v.extend(std::iter::repeat_n((false, true), c.fn_ as usize));
    v.extend(std::iter::repeat_n((false, false), c.tn as usize));
    v
}

/// One audited tag of the bundled reference audit: 50 groundtruth-positive
/// and 50 groundtruth-negative tracks re-annotated per tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceTag {
    pub name: &'static str,
    pub n_plus: u64,
    pub pos_errors: u64,
    pub neg_errors: u64,
    pub n_per_class: u64,
}

/// Item count of the reference dataset.
pub const REFERENCE_TOTAL: u64 = 242_842;

pub const REFERENCE_TAGS: [ReferenceTag; 4] = [
    ReferenceTag { name: "instrumental", n_plus: 8_424, pos_errors: 3, neg_errors: 6, n_per_class: 50 },
    ReferenceTag { name: "female vocalists", n_plus: 17_840, pos_errors: 2, neg_errors: 12, n_per_class: 50 },
    ReferenceTag { name: "male vocalists", n_plus: 3_026, pos_errors: 1, neg_errors: 32, n_per_class: 50 },
    ReferenceTag { name: "guitar", n_plus: 3_311, pos_errors: 1, neg_errors: 35, n_per_class: 50 },
];

impl ReferenceTag {
    pub fn rates(&self, tag: usize) -> NoiseRates {
        NoiseRates::from_error_counts(
            tag,
            self.pos_errors,
            self.n_per_class,
            self.neg_errors,
            self.n_per_class,
        )
        .expect("reference counts are valid")
    }

    /// `(groundtruth, verdict)` pairs reconstructing the balanced audit.
    pub fn pairs(&self) -> Vec<(bool, bool)> {
        rates_to_pairs(&self.rates(0))
    }

    pub fn quality(&self, tag: usize, bootstrap: &BootstrapConfig) -> Result<GroundtruthQuality> {
        quality_from_pairs(tag, &self.pairs(), true, bootstrap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagdata::{AnnotationRecord, TagVocabulary, Verdict};

    /// 50 gt-positive and 50 gt-negative tracks for tag 0 with given
    /// disagreement counts.
    fn audit(pos_err: usize, neg_err: usize) -> (LabelMatrix, AnnotationSet) {
        let vocab = TagVocabulary::new(vec!["x".into(), "other".into()]).unwrap();
        let ids: Vec<String> = (0..100).map(|i| format!("t{i}")).collect();
        let rows = (0..100).map(|i| if i < 50 { vec![0] } else { vec![1] }).collect();
        let m = LabelMatrix::from_rows(ids.clone(), vocab, rows).unwrap();
        let records = (0..100)
            .map(|i| {
                let gt = i < 50;
                let flip = if gt { i < pos_err } else { i - 50 < neg_err };
                AnnotationRecord {
                    track_id: ids[i].clone(),
                    tag: 0,
                    verdict: Some(if gt ^ flip { Verdict::Positive } else { Verdict::Negative }),
                    annotator: "a".into(),
                }
            })
            .collect();
        (
            m,
            AnnotationSet {
                records,
                subset_kind: SubsetKind::Balanced,
            },
        )
    }

    #[test]
    fn instrumental_rates() {
        let (m, a) = audit(3, 6);
        let r = estimate_noise_rates(&m, &a, 0).unwrap();
        assert_eq!((r.p_pos, r.p_neg), (0.06, 0.12));
    }

    #[test]
    fn agreement_and_inversion_extremes() {
        let (m, a) = audit(0, 0);
        let r = estimate_noise_rates(&m, &a, 0).unwrap();
        assert_eq!((r.p_pos, r.p_neg), (0.0, 0.0));
        let (m, a) = audit(50, 50);
        let r = estimate_noise_rates(&m, &a, 0).unwrap();
        assert_eq!((r.p_pos, r.p_neg), (1.0, 1.0));
    }

    #[test]
    fn missing_class_is_an_error() {
        let (m, mut a) = audit(0, 0);
        a.records.retain(|r| r.track_id.len() == 2); // t0..t9, all gt-positive
        assert!(estimate_noise_rates(&m, &a, 0).is_err());
    }

    #[test]
    fn quality_from_audit() {
        let (m, a) = audit(3, 6);
        let q = groundtruth_quality(&m, &a, 0, &BootstrapConfig::with_seed(1)).unwrap();
        assert_eq!(q.precision.point, 0.94);
        assert_eq!(q.recall.unwrap().point, 47.0 / 53.0);
        assert!(q.precision.low <= 0.94 && 0.94 <= q.precision.high);
    }

    #[test]
    fn perfect_agreement_has_degenerate_intervals() {
        let (m, a) = audit(0, 0);
        let q = groundtruth_quality(&m, &a, 0, &BootstrapConfig::with_seed(1)).unwrap();
        assert_eq!(q.precision.point, 1.0);
        assert_eq!(q.precision.width(), 0.0);
        let r = q.recall.unwrap();
        assert_eq!((r.point, r.width()), (1.0, 0.0));
    }

    #[test]
    fn recall_undefined_without_positive_verdicts() {
        let (m, a) = audit(50, 0);
        let q = groundtruth_quality(&m, &a, 0, &BootstrapConfig::with_seed(1)).unwrap();
        assert!(q.recall.is_none());
        assert_eq!(q.precision.point, 0.0);
    }

    #[test]
    fn correction_matches_reference_rows() {
        let r = REFERENCE_TAGS[0].rates(0);
        assert!((corrected_count(8_424, REFERENCE_TOTAL, &r) - 36_048.72).abs() < 1e-9);
        let g = REFERENCE_TAGS[3].rates(0);
        assert!((corrected_count(3_311, REFERENCE_TOTAL, &g) - 170_916.48).abs() < 1e-9);
    }

    #[test]
    fn noiseless_correction_is_identity() {
        let r = NoiseRates::from_error_counts(0, 0, 50, 0, 50).unwrap();
        assert_eq!(corrected_count(1234, 10_000, &r), 1234.0);
        let p = estimate_prevalence(1234, 10_000, &r, &BootstrapConfig::default()).unwrap();
        assert_eq!(p.estimate.point, 1234.0);
        assert_eq!(p.estimate.width(), 0.0);
    }

    #[test]
    fn prevalence_interval_contains_point() {
        let r = REFERENCE_TAGS[1].rates(1);
        let p = estimate_prevalence(17_840, REFERENCE_TOTAL, &r, &BootstrapConfig::with_seed(5))
            .unwrap();
        assert!(p.estimate.low < p.estimate.point && p.estimate.point < p.estimate.high);
        assert!(estimate_prevalence(10, 5, &r, &BootstrapConfig::default()).is_err());
    }
}
