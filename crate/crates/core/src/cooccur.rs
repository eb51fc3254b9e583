//! Normalised tag co-occurrence `C(i, j) = #(y_i ∧ y_j) / #y_i`.
//!
//! Joint counts are accumulated as integers over blocks of tracks and summed
//! exactly; the single division happens when the matrix is assembled.

use std::io::Write;

use crate::parallel;
use crate::tagdata::{LabelMatrix, SplitFilter, TagVocabulary};
use crate::{Error, Result};

const TRACK_BLOCK: usize = 4096;

/// K×K conditional co-occurrence rates.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceMatrix {
    vocab: TagVocabulary,
    counts: Vec<u64>,
    joint: Vec<u64>,
    values: Vec<f64>,
}

/// One unordered tag pair with its ranking score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagPair {
    pub i: usize,
    pub j: usize,
    pub score: f64,
}

impl CooccurrenceMatrix {
    pub fn n_tags(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab(&self) -> &TagVocabulary {
        &self.vocab
    }

    /// Occurrence count `#y_i` within the chosen split.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Joint count `#(y_i ∧ y_j)`.
    pub fn joint(&self, i: usize, j: usize) -> u64 {
        self.joint[i * self.n_tags() + j]
    }

    /// A row is undefined when its tag never occurs in the chosen split.
    pub fn is_defined(&self, i: usize) -> bool {
        self.counts[i] > 0
    }

    /// `C(i, j)`, or `None` when row `i` is undefined.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.is_defined(i).then(|| self.values[i * self.n_tags() + j])
    }

    /// `max(C(i, j), C(j, i))` with undefined entries read as 0.
    pub fn pair_score(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
            .unwrap_or(0.0)
            .max(self.get(j, i).unwrap_or(0.0))
    }

    /// Restriction to a subset of tags, in the given order.
    pub fn restrict(&self, tags: &[usize]) -> Result<CooccurrenceMatrix> {
        let k = self.n_tags();
        if let Some(&bad) = tags.iter().find(|&&t| t >= k) {
            return Err(Error::Invalid(format!("tag id {bad} out of range")));
        }
        let vocab = TagVocabulary::new(tags.iter().map(|&t| self.vocab.tag(t).to_string()).collect())?;
        let counts: Vec<u64> = tags.iter().map(|&t| self.counts[t]).collect();
        let joint: Vec<u64> = tags
            .iter()
            .flat_map(|&a| tags.iter().map(move |&b| (a, b)))
            .map(|(a, b)| self.joint[a * k + b])
            .collect();
        Ok(assemble(vocab, counts, joint))
    }

    /// CSV: a header row of tag names, then one row of `C` values per tag at
    /// six decimals. Undefined rows are written as `nan`.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", self.vocab.tags().join(","))?;
        for i in 0..self.n_tags() {
            let row: Vec<String> = (0..self.n_tags())
                .map(|j| match self.get(i, j) {
                    Some(v) => format!("{v:.6}"),
                    None => "nan".to_string(),
                })
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn assemble(vocab: TagVocabulary, counts: Vec<u64>, joint: Vec<u64>) -> CooccurrenceMatrix {
    let k = vocab.len();
    let mut values = vec![0.0; k * k];
    for i in 0..k {
        if counts[i] == 0 {
            continue;
        }
        for j in 0..k {
            values[i * k + j] = joint[i * k + j] as f64 / counts[i] as f64;
        }
    }
    CooccurrenceMatrix {
        vocab,
        counts,
        joint,
        values,
    }
}

/// Computes the normalised co-occurrence matrix over the tracks in `split`.
pub fn compute_nco(matrix: &LabelMatrix, split: SplitFilter) -> Result<CooccurrenceMatrix> {
    let tracks = matrix.tracks_in(split);
    if tracks.is_empty() {
        return Err(Error::Invalid(format!("split `{split}` contains no tracks")));
    }
    let k = matrix.n_tags();
    let blocks: Vec<&[usize]> = tracks.chunks(TRACK_BLOCK).collect();
    let partials = parallel::map_slice(&blocks, |block| {
        let mut joint = vec![0u64; k * k];
        for &t in block.iter() {
            let row = matrix.row(t);
            for &a in row {
                let base = a as usize * k;
                for &b in row {
                    joint[base + b as usize] += 1;
                }
            }
        }
        joint
    });
    let mut joint = vec![0u64; k * k];
    for p in partials {
        for (acc, v) in joint.iter_mut().zip(p) {
            *acc += v;
        }
    }
    let counts: Vec<u64> = (0..k).map(|i| joint[i * k + i]).collect();
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            log::warn!(
                "tag `{}` has no occurrences in split `{split}`; its row is undefined",
                matrix.vocab().tag(i)
            );
        }
    }
    Ok(assemble(matrix.vocab().clone(), counts, joint))
}

/// Ranks every unordered pair `i < j` by `score(i, j)` descending; ties keep
/// `(i, j)` index order. Returns at most `k` pairs.
pub(crate) fn rank_pairs(n: usize, k: usize, score: impl Fn(usize, usize) -> f64) -> Vec<TagPair> {
    let mut pairs: Vec<TagPair> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| TagPair {
            i,
            j,
            score: score(i, j),
        })
        .collect();
    pairs.sort_by(|a, b| b.score.total_cmp(&a.score).then((a.i, a.j).cmp(&(b.i, b.j))));
    pairs.truncate(k);
    pairs
}

/// Top `k` unordered pairs by `max(C(i, j), C(j, i))`.
pub fn top_pairs(nco: &CooccurrenceMatrix, k: usize) -> Vec<TagPair> {
    rank_pairs(nco.n_tags(), k, |i, j| nco.pair_score(i, j))
}

/// Pair list as TSV (`tag_i<TAB>tag_j<TAB>score`).
pub fn write_pairs_tsv(
    w: &mut impl Write,
    vocab: &TagVocabulary,
    pairs: &[TagPair],
) -> std::io::Result<()> {
    for p in pairs {
        writeln!(w, "{}\t{}\t{:.6}", vocab.tag(p.i), vocab.tag(p.j), p.score)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagdata::{ingest_edges, Split};

    #[test]
    fn hand_counted_pair() {
        let m = ingest_edges("t1\tA\nt1\tB\nt2\tA\n".as_bytes(), "mem", 2).unwrap();
        let c = compute_nco(&m, SplitFilter::All).unwrap();
        let (a, b) = (m.vocab().id("A").unwrap(), m.vocab().id("B").unwrap());
        assert_eq!(c.get(a, b), Some(0.5));
        assert_eq!(c.get(b, a), Some(1.0));
        assert_eq!(c.get(a, a), Some(1.0));
        assert_eq!(c.get(b, b), Some(1.0));
    }

    #[test]
    fn empty_split_is_an_error() {
        let m = ingest_edges("t1\tA\n".as_bytes(), "mem", 1).unwrap();
        assert!(compute_nco(&m, Split::Test.into()).is_err());
    }

    #[test]
    fn zero_count_rows_are_flagged() {
        let m = ingest_edges("t1\tA\nt2\tB\nt3\tA\n".as_bytes(), "mem", 2)
            .unwrap()
            .with_splits(vec![Split::Train, Split::Test, Split::Train])
            .unwrap();
        let c = compute_nco(&m, Split::Train.into()).unwrap();
        let b = m.vocab().id("B").unwrap();
        assert!(!c.is_defined(b));
        assert_eq!(c.get(b, 0), None);
        let mut csv = Vec::new();
        c.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().contains("nan"));
    }

    #[test]
    fn no_cooccurrence_ranks_by_index() {
        let m = ingest_edges("t1\tA\nt2\tB\nt3\tC\n".as_bytes(), "mem", 3).unwrap();
        let c = compute_nco(&m, SplitFilter::All).unwrap();
        let p = top_pairs(&c, 3);
        assert!(p.iter().all(|p| p.score == 0.0));
        assert_eq!(
            p.iter().map(|p| (p.i, p.j)).collect::<Vec<_>>(),
            [(0, 1), (0, 2), (1, 2)]
        );
    }

    #[test]
    fn toy_scores_sort_descending() {
        let scores = [[1.0, 0.9, 0.1], [0.2, 1.0, 0.4], [0.05, 0.3, 1.0]];
        let p = rank_pairs(3, 3, |i, j| f64::max(scores[i][j], scores[j][i]));
        assert_eq!(
            p.iter().map(|p| (p.i, p.j)).collect::<Vec<_>>(),
            [(0, 1), (1, 2), (0, 2)]
        );
    }

    #[test]
    fn restrict_keeps_values() {
        let m = ingest_edges("t1\tA\nt1\tB\nt2\tA\nt3\tC\n".as_bytes(), "mem", 3).unwrap();
        let c = compute_nco(&m, SplitFilter::All).unwrap();
        let a = m.vocab().id("A").unwrap();
        let b = m.vocab().id("B").unwrap();
        let r = c.restrict(&[b, a]).unwrap();
        assert_eq!(r.vocab().tags(), ["B", "A"]);
        assert_eq!(r.get(0, 1), c.get(b, a));
        assert_eq!(r.get(1, 0), c.get(a, b));
    }
}
