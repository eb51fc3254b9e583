//! AUC-ROC per tag, macro aggregation, and correlation statistics.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;

use crate::noise::{bootstrap_ci, BootstrapConfig, Interval};
use crate::parallel;
use crate::tagdata::{AnnotationSet, LabelMatrix};
use crate::{Error, Result};

/// Area under the ROC curve via the Mann–Whitney statistic with midranks.
///
/// Ranks are kept doubled so they stay integral; the result is
/// `(2U) / (2·n_pos·n_neg)`, i.e. `(#{pos > neg} + ½·#{ties}) / (n_pos·n_neg)`
/// with a single rounding.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined(format!(
            "AUC needs both classes ({n_pos} positive, {n_neg} negative)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j share the midrank (i+1+j)/2
        let doubled = (i + 1 + j) as u128;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k]).count() as u128;
        rank_sum2 += doubled * pos_in_group;
        i = j;
    }
    let u2 = rank_sum2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2 * n_pos * n_neg) as f64)
}

/// Where the reference labels came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceSource {
    Groundtruth,
    Annotation,
}

impl ReferenceSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceSource::Groundtruth => "groundtruth",
            ReferenceSource::Annotation => "annotation",
        }
    }
}

impl fmt::Display for ReferenceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub enum Reference<'a> {
    Groundtruth(&'a LabelMatrix),
    /// Annotation verdicts; tag ids and track ids resolve through the matrix.
    /// With several annotators on one cell the majority verdict is used and
    /// a tied cell is left out.
    Annotation(&'a AnnotationSet, &'a LabelMatrix),
}

impl Reference<'_> {
    fn matrix(&self) -> &LabelMatrix {
        match self {
            Reference::Groundtruth(m) | Reference::Annotation(_, m) => m,
        }
    }

    pub fn source(&self) -> ReferenceSource {
        match self {
            Reference::Groundtruth(_) => ReferenceSource::Groundtruth,
            Reference::Annotation(..) => ReferenceSource::Annotation,
        }
    }
}

/// Model outputs: one row per track, one column per vocabulary tag.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub track_ids: Vec<String>,
    pub n_tags: usize,
    pub values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(track_ids: Vec<String>, n_tags: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != track_ids.len() * n_tags {
            return Err(Error::Shape(format!(
                "{} scores for {} tracks × {n_tags} tags",
                values.len(),
                track_ids.len()
            )));
        }
        Ok(ScoreMatrix {
            track_ids,
            n_tags,
            values,
        })
    }

    pub fn n_tracks(&self) -> usize {
        self.track_ids.len()
    }

    pub fn column(&self, tag: usize) -> Vec<f64> {
        (0..self.n_tracks())
            .map(|t| self.values[t * self.n_tags + tag])
            .collect()
    }

    /// Rows restricted to `rows`, in that order.
    pub fn select(&self, rows: &[usize]) -> ScoreMatrix {
        ScoreMatrix {
            track_ids: rows.iter().map(|&r| self.track_ids[r].clone()).collect(),
            n_tags: self.n_tags,
            values: rows
                .iter()
                .flat_map(|&r| self.values[r * self.n_tags..(r + 1) * self.n_tags].iter().copied())
                .collect(),
        }
    }

    /// CSV with a `track_id` column followed by one column per tag.
    pub fn write_csv(&self, w: &mut impl Write, tags: &[String]) -> std::io::Result<()> {
        write!(w, "track_id")?;
        for t in tags {
            write!(w, ",{t}")?;
        }
        writeln!(w)?;
        for (i, id) in self.track_ids.iter().enumerate() {
            write!(w, "{id}")?;
            for v in &self.values[i * self.n_tags..(i + 1) * self.n_tags] {
                write!(w, ",{v:.6}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str, source: &str) -> Result<(Self, Vec<String>)> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Invalid(format!("{source}: empty score file")))?;
        let tags: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (ln, line) in lines {
            let mut cols = line.split(',');
            ids.push(cols.next().unwrap_or_default().to_string());
            let row: Vec<f64> = cols
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    path: source.into(),
                    line: ln + 1,
                    message: e.to_string(),
                })?;
            if row.len() != tags.len() {
                return Err(Error::Parse {
                    path: source.into(),
                    line: ln + 1,
                    message: format!("expected {} scores, found {}", tags.len(), row.len()),
                });
            }
            values.extend(row);
        }
        let n = tags.len();
        Ok((ScoreMatrix::new(ids, n, values)?, tags))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagAuc {
    pub tag: usize,
    pub name: String,
    pub n_pos: usize,
    pub n_neg: usize,
    /// `None` when the reference holds a single class.
    pub auc: Option<f64>,
    pub ci: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub tags: Vec<TagAuc>,
    /// Unweighted mean over tags with a defined AUC.
    pub macro_auc: Option<f64>,
    pub source: ReferenceSource,
}

impl EvalReport {
    pub fn n_defined(&self) -> usize {
        self.tags.iter().filter(|t| t.auc.is_some()).count()
    }

    pub fn tag_auc(&self, tag: usize) -> Option<f64> {
        self.tags.iter().find(|t| t.tag == tag).and_then(|t| t.auc)
    }

    /// Mean AUC over `tags` (all defined), or `None` if any is undefined.
    pub fn mean_over(&self, tags: &[usize]) -> Option<f64> {
        let vals: Option<Vec<f64>> = tags.iter().map(|&t| self.tag_auc(t)).collect();
        let vals = vals?;
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Columns `tag,n_pos,n_neg,auc,ci_low,ci_high,defined`, then a
    /// `(macro)` row and a `(reference)` row.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "tag,n_pos,n_neg,auc,ci_low,ci_high,defined")?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for t in &self.tags {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                t.name,
                t.n_pos,
                t.n_neg,
                opt(t.auc),
                opt(t.ci.map(|c| c.low)),
                opt(t.ci.map(|c| c.high)),
                t.auc.is_some()
            )?;
        }
        writeln!(
            w,
            "(macro),,,{},,,{}",
            opt(self.macro_auc),
            self.macro_auc.is_some()
        )?;
        writeln!(w, "(reference),,,,,,{}", self.source)
    }
}

/// Reference labels for one tag over the score rows; `None` where the
/// reference gives no verdict.
fn reference_column(
    reference: &Reference<'_>,
    scores: &ScoreMatrix,
    tag: usize,
    votes: Option<&HashMap<(&str, usize), (u32, u32)>>,
) -> Result<Vec<Option<bool>>> {
    match reference {
        Reference::Groundtruth(m) => scores
            .track_ids
            .iter()
            .map(|id| {
                let t = m
                    .track_position(id)
                    .ok_or_else(|| Error::UnknownTrack(id.clone()))?;
                Ok(Some(m.contains(t, tag)))
            })
            .collect(),
        Reference::Annotation(..) => {
            let votes = votes.expect("annotation votes");
            Ok(scores
                .track_ids
                .iter()
                .map(|id| {
                    let &(pos, neg) = votes.get(&(id.as_str(), tag))?;
                    match pos.cmp(&neg) {
                        std::cmp::Ordering::Greater => Some(true),
                        std::cmp::Ordering::Less => Some(false),
                        std::cmp::Ordering::Equal => None,
                    }
                })
                .collect())
        }
    }
}

/// Per-tag AUC of `scores` against `reference` for the requested tags.
///
/// With an annotation reference, every requested (track, tag) cell must have
/// at least one record; skipped verdicts are allowed and leave the cell out.
/// With `ci`, each defined AUC gets a class-stratified bootstrap interval.
pub fn evaluate(
    scores: &ScoreMatrix,
    reference: &Reference<'_>,
    tags: &[usize],
    ci: Option<&BootstrapConfig>,
) -> Result<EvalReport> {
    let matrix = reference.matrix();
    if scores.n_tags != matrix.n_tags() {
        return Err(Error::Shape(format!(
            "scores have {} columns, vocabulary has {} tags",
            scores.n_tags,
            matrix.n_tags()
        )));
    }
    if let Some(&bad) = tags.iter().find(|&&t| t >= matrix.n_tags()) {
        return Err(Error::Invalid(format!("tag id {bad} out of range")));
    }

    let votes = if let Reference::Annotation(ann, _) = reference {
        let mut votes: HashMap<(&str, usize), (u32, u32)> = HashMap::new();
        let mut covered: HashSet<(&str, usize)> = HashSet::new();
        for r in &ann.records {
            if r.verdict.is_some() {
                covered.insert((r.track_id.as_str(), r.tag));
            }
            match r.verdict.and_then(|v| v.is_positive()) {
                Some(true) => votes.entry((&r.track_id, r.tag)).or_default().0 += 1,
                Some(false) => votes.entry((&r.track_id, r.tag)).or_default().1 += 1,
                None => {}
            }
        }
        let mut missing = Vec::new();
        for &tag in tags {
            for id in &scores.track_ids {
                if !covered.contains(&(id.as_str(), tag)) {
                    missing.push(format!("({id}, {})", matrix.vocab().tag(tag)));
                }
            }
        }
        if !missing.is_empty() {
            let n = missing.len();
            missing.truncate(20);
            let more = if n > 20 { format!(" and {} more", n - 20) } else { String::new() };
            return Err(Error::MissingCells(format!("{}{more}", missing.join(", "))));
        }
        Some(votes)
    } else {
        None
    };

    let columns: Vec<Vec<Option<bool>>> = tags
        .iter()
        .map(|&t| reference_column(reference, scores, t, votes.as_ref()))
        .collect::<Result<_>>()?;

    let per_tag = parallel::map_range(tags.len(), |k| -> Result<TagAuc> {
        let tag = tags[k];
        let (mut s, mut l) = (Vec::new(), Vec::new());
        for (row, lab) in columns[k].iter().enumerate() {
            if let Some(lab) = *lab {
                s.push(scores.values[row * scores.n_tags + tag]);
                l.push(lab);
            }
        }
        let n_pos = l.iter().filter(|&&v| v).count();
        let n_neg = l.len() - n_pos;
        let value = match auc(&s, &l) {
            Ok(v) => Some(v),
            Err(Error::Undefined(_)) => None,
            Err(e) => return Err(e),
        };
        let interval = match (value, ci) {
            (Some(_), Some(cfg)) => {
                let pairs: Vec<(f64, bool)> = s.into_iter().zip(l).collect();
                let strata: Vec<usize> = pairs.iter().map(|p| p.1 as usize).collect();
                let stat = |rs: &[(f64, bool)]| {
                    let (sc, lb): (Vec<f64>, Vec<bool>) = rs.iter().copied().unzip();
                    auc(&sc, &lb).ok()
                };
                Some(bootstrap_ci(&pairs, stat, Some(&strata), cfg)?.enclosing_point())
            }
            _ => None,
        };
        Ok(TagAuc {
            tag,
            name: matrix.vocab().tag(tag).to_string(),
            n_pos,
            n_neg,
            auc: value,
            ci: interval,
        })
    });
    let tags: Vec<TagAuc> = per_tag.into_iter().collect::<Result<_>>()?;
    let defined: Vec<f64> = tags.iter().filter_map(|t| t.auc).collect();
    let macro_auc = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(EvalReport {
        tags,
        macro_auc,
        source: reference.source(),
    })
}

/// Macro AUC of a flat `n × k` score block against a flat label block,
/// over the columns where both classes occur.
pub fn macro_auc(scores: &[f64], labels: &[bool], k: usize) -> Option<f64> {
    let n = scores.len() / k.max(1);
    let vals: Vec<f64> = (0..k)
        .filter_map(|j| {
            let s: Vec<f64> = (0..n).map(|i| scores[i * k + j]).collect();
            let l: Vec<bool> = (0..n).map(|i| labels[i * k + j]).collect();
            auc(&s, &l).ok()
        })
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("series lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::Invalid(format!("correlation needs at least 3 pairs, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input".into()));
    }
    Ok(())
}

/// Product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties sharing their mean rank.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation of midranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&midranks(x), &midranks(y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationReport {
    pub pearson: f64,
    pub spearman: f64,
    pub n: usize,
    pub label_x: String,
    pub label_y: String,
}

impl CorrelationReport {
    pub fn compute(x: &[f64], y: &[f64], label_x: &str, label_y: &str) -> Result<Self> {
        Ok(CorrelationReport {
            pearson: pearson(x, y)?,
            spearman: spearman(x, y)?,
            n: x.len(),
            label_x: label_x.to_string(),
            label_y: label_y.to_string(),
        })
    }
}

impl fmt::Display for CorrelationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} vs {}: r={:.4} rho={:.4} n={}",
            self.label_x, self.label_y, self.pearson, self.spearman, self.n
        )
    }
}

/// How each run's evaluation is reduced to one number before correlating.
#[derive(Debug, Clone, PartialEq)]
pub enum Aggregation {
    Macro,
    /// Mean AUC over the listed tags.
    TagMean(Vec<usize>),
}

impl Aggregation {
    pub fn apply(&self, report: &EvalReport) -> Option<f64> {
        match self {
            Aggregation::Macro => report.macro_auc,
            Aggregation::TagMean(tags) => report.mean_over(tags),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Aggregation::Macro => "macro".into(),
            Aggregation::TagMean(t) => format!("mean over {} tags", t.len()),
        }
    }
}

/// Pearson/Spearman between the summary scores of matched runs evaluated
/// against two references; the labels record the aggregation used.
pub fn reliability_pair(
    runs_a: &[EvalReport],
    runs_b: &[EvalReport],
    aggregation: &Aggregation,
) -> Result<CorrelationReport> {
    if runs_a.len() != runs_b.len() {
        return Err(Error::Shape(format!(
            "{} runs against {} runs",
            runs_a.len(),
            runs_b.len()
        )));
    }
    let summarise = |runs: &[EvalReport]| -> Result<Vec<f64>> {
        runs.iter()
            .map(|r| {
                aggregation
                    .apply(r)
                    .ok_or_else(|| Error::Undefined(format!("{} AUC of a run", aggregation.describe())))
            })
            .collect()
    };
    let (a, b) = (summarise(runs_a)?, summarise(runs_b)?);
    let label = |r: &EvalReport| format!("{} ({})", r.source, aggregation.describe());
    CorrelationReport::compute(
        &a,
        &b,
        &runs_a.first().map(label).unwrap_or_default(),
        &runs_b.first().map(label).unwrap_or_default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagdata::{AnnotationRecord, TagVocabulary, Verdict};

    fn brute(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut num, mut den) = (0u64, 0u64);
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    den += 2;
                    num += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        std::cmp::Ordering::Greater => 2,
                        std::cmp::Ordering::Equal => 1,
                        std::cmp::Ordering::Less => 0,
                    };
                }
            }
        }
        num as f64 / den as f64
    }

    #[test]
    fn auc_small_example() {
        let s = [0.1, 0.4, 0.35, 0.8];
        let l = [false, false, true, true];
        assert_eq!(auc(&s, &l).unwrap(), 0.75);
        assert_eq!(brute(&s, &l), 0.75);
    }

    #[test]
    fn auc_extremes() {
        assert_eq!(auc(&[0.1, 0.2, 0.9], &[false, false, true]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 5], &[true, false, true, false, false]).unwrap(), 0.5);
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::Undefined(_))));
        assert!(matches!(auc(&[0.1, 0.2], &[false, false]), Err(Error::Undefined(_))));
    }

    #[test]
    fn auc_with_ties_matches_brute_force() {
        let s = [1.0, 1.0, 2.0, 2.0, 2.0, 3.0, 0.0, 3.0];
        let l = [true, false, true, false, false, true, false, false];
        assert_eq!(auc(&s, &l).unwrap(), brute(&s, &l));
    }

    #[test]
    fn pearson_and_spearman_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[9.0, 7.0, 2.0, -1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[2.0, 1.0, 4.0, 3.0]).unwrap() - 0.6).abs() < 1e-12);
        assert!(matches!(pearson(&x, &[1.0; 4]), Err(Error::Undefined(_))));
        assert!(pearson(&x[..2], &y[..2]).is_err());
    }

    #[test]
    fn midranks_share_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    fn fixture() -> LabelMatrix {
        let vocab = TagVocabulary::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let ids: Vec<String> = (0..6).map(|i| format!("t{i}")).collect();
        let rows = vec![vec![0], vec![0], vec![0, 1], vec![], vec![1], vec![]];
        LabelMatrix::from_rows(ids, vocab, rows).unwrap()
    }

    #[test]
    fn groundtruth_evaluation_flags_absent_tags() {
        let m = fixture();
        let ids = m.track_ids().to_vec();
        let mut values = Vec::new();
        for t in 0..6 {
            for j in 0..3 {
                values.push(if m.contains(t, j) { 0.9 } else { 0.1 });
            }
        }
        let scores = ScoreMatrix::new(ids, 3, values).unwrap();
        let r = evaluate(&scores, &Reference::Groundtruth(&m), &[0, 1, 2], None).unwrap();
        assert_eq!(r.tags[0].auc, Some(1.0));
        assert_eq!(r.tags[1].auc, Some(1.0));
        assert_eq!(r.tags[2].auc, None);
        assert_eq!(r.macro_auc, Some(1.0));
        assert_eq!((r.tags[0].n_pos, r.tags[0].n_neg), (3, 3));
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.contains("c,0,6,,,,false"));
        assert!(csv.ends_with("(reference),,,,,,groundtruth\n"));
    }

    #[test]
    fn annotation_reference_requires_every_cell() {
        let m = fixture();
        let rec = |t: &str, v| AnnotationRecord {
            track_id: t.into(),
            tag: 0,
            verdict: Some(v),
            annotator: String::new(),
        };
        let ann = AnnotationSet {
            records: vec![rec("t0", Verdict::Positive), rec("t3", Verdict::Negative), rec("t4", Verdict::Skip)],
            ..Default::default()
        };
        let scores = ScoreMatrix::new(vec!["t0".into(), "t3".into(), "t4".into()], 3, vec![0.8, 0., 0., 0.2, 0., 0., 0.5, 0., 0.]).unwrap();
        let r = evaluate(&scores, &Reference::Annotation(&ann, &m), &[0], None).unwrap();
        assert_eq!(r.tags[0].auc, Some(1.0));
        assert_eq!(r.tags[0].n_pos + r.tags[0].n_neg, 2);
        assert_eq!(r.source, ReferenceSource::Annotation);
        match evaluate(&scores, &Reference::Annotation(&ann, &m), &[0, 1], None) {
            Err(Error::MissingCells(msg)) => assert!(msg.contains("(t0, b)")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reliability_of_identical_and_opposite_runs() {
        let mk = |v: f64| EvalReport {
            tags: vec![],
            macro_auc: Some(v),
            source: ReferenceSource::Groundtruth,
        };
        let a: Vec<_> = [0.6, 0.7, 0.8, 0.75].iter().map(|&v| mk(v)).collect();
        let b: Vec<_> = [0.6, 0.7, 0.8, 0.75].iter().map(|&v| mk(1.0 - v)).collect();
        let same = reliability_pair(&a, &a, &Aggregation::Macro).unwrap();
        assert!((same.pearson - 1.0).abs() < 1e-12);
        let opp = reliability_pair(&a, &b, &Aggregation::Macro).unwrap();
        assert!((opp.pearson + 1.0).abs() < 1e-12);
        assert!(reliability_pair(&a, &a[..3], &Aggregation::Macro).is_err());
    }

    #[test]
    fn score_csv_round_trip() {
        let s = ScoreMatrix::new(vec!["x".into(), "y".into()], 2, vec![0.25, 0.5, 0.125, 1.0]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf, &["a".into(), "b".into()]).unwrap();
        let (back, tags) = ScoreMatrix::read_csv(std::str::from_utf8(&buf).unwrap(), "mem").unwrap();
        assert_eq!(back, s);
        assert_eq!(tags, vec!["a", "b"]);
    }
}
