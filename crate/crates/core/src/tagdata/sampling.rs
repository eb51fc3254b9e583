use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AnnotationRecord, AnnotationSet, LabelMatrix, SplitFilter, SubsetKind};
use crate::{Error, Result};

/// Draws `n_per_class` groundtruth-positive and `n_per_class`
/// groundtruth-negative tracks for `tag` from `split`, uniformly without
/// replacement. The combined record list is shuffled so the annotator does
/// not see the class boundary.
pub fn sample_balanced_subset(
    matrix: &LabelMatrix,
    tag: usize,
    n_per_class: usize,
    split: SplitFilter,
    seed: u64,
) -> Result<AnnotationSet> {
    if tag >= matrix.n_tags() {
        return Err(Error::Invalid(format!("tag id {tag} out of range")));
    }
    let (pos, neg): (Vec<usize>, Vec<usize>) = matrix
        .tracks_in(split)
        .into_iter()
        .partition(|&t| matrix.contains(t, tag));
    if pos.len() < n_per_class {
        return Err(Error::Insufficient {
            class: "positive",
            available: pos.len(),
            required: n_per_class,
        });
    }
    if neg.len() < n_per_class {
        return Err(Error::Insufficient {
            class: "negative",
            available: neg.len(),
            required: n_per_class,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = index::sample(&mut rng, pos.len(), n_per_class)
        .into_iter()
        .map(|i| pos[i])
        .collect();
    chosen.extend(
        index::sample(&mut rng, neg.len(), n_per_class)
            .into_iter()
            .map(|i| neg[i]),
    );
    chosen.shuffle(&mut rng);
    Ok(AnnotationSet {
        records: chosen.into_iter().map(|t| pending(matrix, t, tag)).collect(),
        subset_kind: SubsetKind::Balanced,
    })
}

/// Draws `n` tracks uniformly without replacement from `split` and creates
/// one pending record per (track, tag) for each of `tags`.
pub fn sample_random_subset(
    matrix: &LabelMatrix,
    tags: &[usize],
    n: usize,
    split: SplitFilter,
    seed: u64,
) -> Result<AnnotationSet> {
    if let Some(&bad) = tags.iter().find(|&&t| t >= matrix.n_tags()) {
        return Err(Error::Invalid(format!("tag id {bad} out of range")));
    }
    let pool = matrix.tracks_in(split);
    if pool.len() < n {
        return Err(Error::Insufficient {
            class: "split",
            available: pool.len(),
            required: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = index::sample(&mut rng, pool.len(), n)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    chosen.shuffle(&mut rng);
    let records = chosen
        .into_iter()
        .flat_map(|t| tags.iter().map(move |&g| (t, g)))
        .map(|(t, g)| pending(matrix, t, g))
        .collect();
    Ok(AnnotationSet {
        records,
        subset_kind: SubsetKind::Random,
    })
}

fn pending(matrix: &LabelMatrix, track: usize, tag: usize) -> AnnotationRecord {
    AnnotationRecord {
        track_id: matrix.track_id(track).to_string(),
        tag,
        verdict: None,
        annotator: String::new(),
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagdata::{Split, TagVocabulary};
    use std::collections::HashSet;

    /// `n_pos` tracks carry tag 0, the rest carry tag 1; all in train.
    fn skewed(n_pos: usize, n_neg: usize) -> LabelMatrix {
        let vocab = TagVocabulary::new(vec!["x".into(), "y".into()]).unwrap();
        let n = n_pos + n_neg;
        let ids = (0..n).map(|i| format!("t{i}")).collect();
        let rows = (0..n)
            .map(|i| if i < n_pos { vec![0] } else { vec![1] })
            .collect();
        LabelMatrix::from_rows(ids, vocab, rows)
            .unwrap()
            .with_splits(vec![Split::Train; n])
            .unwrap()
    }

    #[test]
    fn balanced_has_exact_class_counts() {
        let m = skewed(60, 10_000);
        let s = sample_balanced_subset(&m, 0, 50, Split::Train.into(), 7).unwrap();
        assert_eq!(s.records.len(), 100);
        let pos = s
            .records
            .iter()
            .filter(|r| m.contains(m.track_position(&r.track_id).unwrap(), 0))
            .count();
        assert_eq!(pos, 50);
        let unique: HashSet<_> = s.records.iter().map(|r| &r.track_id).collect();
        assert_eq!(unique.len(), 100);
        assert!(s.records.iter().all(|r| r.verdict.is_none()));
    }

    #[test]
    fn balanced_is_deterministic() {
        let m = skewed(60, 500);
        let a = sample_balanced_subset(&m, 0, 50, Split::Train.into(), 3).unwrap();
        let b = sample_balanced_subset(&m, 0, 50, Split::Train.into(), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn balanced_reports_deficit() {
        let m = skewed(40, 500);
        let err = sample_balanced_subset(&m, 0, 50, Split::Train.into(), 3).unwrap_err();
        assert_eq!(err.to_string(), "insufficient positive items (40 < 50)");
    }

    #[test]
    fn balanced_respects_split() {
        let m = skewed(60, 500);
        assert!(sample_balanced_subset(&m, 0, 1, Split::Test.into(), 3).is_err());
    }

    #[test]
    fn random_full_split_is_a_permutation() {
        let m = skewed(10, 20);
        let s = sample_random_subset(&m, &[0], 30, SplitFilter::All, 1).unwrap();
        let ids: HashSet<_> = s.records.iter().map(|r| r.track_id.clone()).collect();
        assert_eq!(ids.len(), 30);
        assert!(sample_random_subset(&m, &[0], 31, SplitFilter::All, 1).is_err());
    }

    #[test]
    fn random_one_record_per_tag() {
        let m = skewed(10, 20);
        let s = sample_random_subset(&m, &[0, 1], 5, SplitFilter::All, 1).unwrap();
        assert_eq!(s.records.len(), 10);
        assert_eq!(s.subset_kind, SubsetKind::Random);
    }

    /// Two independent draws of n from N share n²/N tracks on average
    /// (hypergeometric mean); check the Monte-Carlo mean over 100 seed pairs.
    #[test]
    fn seed_change_overlap_is_hypergeometric() {
        let m = skewed(0, 1000);
        let (n, big_n) = (100usize, 1000usize);
        let mut total = 0usize;
        for seed in 0..100u64 {
            let a = sample_random_subset(&m, &[1], n, SplitFilter::All, 2 * seed).unwrap();
            let b = sample_random_subset(&m, &[1], n, SplitFilter::All, 2 * seed + 1).unwrap();
            let sa: HashSet<_> = a.records.iter().map(|r| &r.track_id).collect();
            total += b.records.iter().filter(|r| sa.contains(&r.track_id)).count();
        }
        let mean = total as f64 / 100.0;
        let expect = (n * n) as f64 / big_n as f64;
        let nf = n as f64;
        let nn = big_n as f64;
        let var = nf * (nf / nn) * ((nn - nf) / nn) * ((nn - nf) / (nn - 1.0));
        let se = (var / 100.0).sqrt();
        assert!((mean - expect).abs() < 4.0 * se, "mean {mean} vs {expect}");
    }
}
