use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use super::LabelMatrix;
use crate::{Error, Result};

/// An annotator's judgement on one (track, tag) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Negative,
    Positive,
    /// Annotator declined to judge; excluded from rate estimation.
    Skip,
}

impl Verdict {
    pub fn token(self) -> &'static str {
        match self {
            Verdict::Negative => "0",
            Verdict::Positive => "1",
            Verdict::Skip => "skip",
        }
    }

    pub fn is_positive(self) -> Option<bool> {
        match self {
            Verdict::Negative => Some(false),
            Verdict::Positive => Some(true),
            Verdict::Skip => None,
        }
    }
}

/// How the annotated tracks were drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubsetKind {
    /// Equal numbers of groundtruth-positive and -negative tracks per tag.
    Balanced,
    #[default]
    Random,
}

impl fmt::Display for SubsetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubsetKind::Balanced => "balanced",
            SubsetKind::Random => "random",
        })
    }
}

impl FromStr for SubsetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(SubsetKind::Balanced),
            "random" => Ok(SubsetKind::Random),
            o => Err(Error::Invalid(format!("unknown subset kind `{o}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub track_id: String,
    pub tag: usize,
    /// `None` while pending.
    pub verdict: Option<Verdict>,
    pub annotator: String,
}

/// Re-annotation records for a subset of tracks.
///
/// TSV layout is `track_id<TAB>tag<TAB>verdict<TAB>annotator`, where the
/// verdict is `0`, `1`, `skip`, or `-` for a pending cell and an empty
/// annotator is written as `-`. An optional first line `# subset=<kind>`
/// records how the subset was drawn.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotationSet {
    pub records: Vec<AnnotationRecord>,
    pub subset_kind: SubsetKind,
}

impl AnnotationSet {
    /// Checks that tracks exist and that no (track, tag, annotator) repeats.
    pub fn validate(&self, matrix: &LabelMatrix) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if matrix.track_position(&r.track_id).is_none() {
                return Err(Error::UnknownTrack(r.track_id.clone()));
            }
            if r.tag >= matrix.n_tags() {
                return Err(Error::Invalid(format!("tag id {} out of range", r.tag)));
            }
            if !seen.insert((&r.track_id, r.tag, &r.annotator)) {
                return Err(Error::Invalid(format!(
                    "duplicate verdict for ({}, {}, {})",
                    r.track_id,
                    matrix.vocab().tag(r.tag),
                    r.annotator
                )));
            }
        }
        Ok(())
    }

    /// Records for `tag` that carry a 0/1 verdict, plus the number skipped.
    pub fn judged(&self, tag: usize) -> (Vec<&AnnotationRecord>, usize) {
        let mut skipped = 0;
        let judged = self
            .records
            .iter()
            .filter(|r| r.tag == tag)
            .filter(|r| match r.verdict {
                Some(Verdict::Skip) => {
                    skipped += 1;
                    false
                }
                Some(_) => true,
                None => false,
            })
            .collect();
        (judged, skipped)
    }

    pub fn pending(&self) -> usize {
        self.records.iter().filter(|r| r.verdict.is_none()).count()
    }

    pub fn write_tsv(&self, w: &mut impl Write, matrix: &LabelMatrix) -> std::io::Result<()> {
        writeln!(w, "# subset={}", self.subset_kind)?;
        for r in &self.records {
            let verdict = r.verdict.map_or("-", Verdict::token);
            let annotator = if r.annotator.is_empty() { "-" } else { &r.annotator };
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                r.track_id,
                matrix.vocab().tag(r.tag),
                verdict,
                annotator
            )?;
        }
        Ok(())
    }

    pub fn read_tsv(reader: impl BufRead, source: &str, matrix: &LabelMatrix) -> Result<Self> {
        let mut set = AnnotationSet::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(kind) = comment.trim().strip_prefix("subset=") {
                    set.subset_kind = kind.trim().parse()?;
                }
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: source.to_string(),
                line: i + 1,
                message,
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(parse_err(format!("expected 4 columns, got {}", f.len())));
            }
            let tag = matrix
                .vocab()
                .id(f[1])
                .ok_or_else(|| parse_err(format!("unknown tag `{}`", f[1])))?;
            let verdict = match f[2] {
                "0" => Some(Verdict::Negative),
                "1" => Some(Verdict::Positive),
                "skip" => Some(Verdict::Skip),
                "-" => None,
                o => return Err(parse_err(format!("bad verdict `{o}`"))),
            };
            set.records.push(AnnotationRecord {
                track_id: f[0].to_string(),
                tag,
                verdict,
                annotator: if f[3] == "-" { String::new() } else { f[3].to_string() },
            });
        }
        set.validate(matrix)?;
        Ok(set)
    }

    pub fn load(path: &Path, matrix: &LabelMatrix) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        AnnotationSet::read_tsv(
            std::io::BufReader::new(f),
            &path.display().to_string(),
            matrix,
        )
    }

    pub fn save(&self, path: &Path, matrix: &LabelMatrix) -> Result<()> {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf, matrix)
            .expect("writing to a Vec cannot fail");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagdata::ingest_edges;

    fn matrix() -> LabelMatrix {
        ingest_edges("a\trock\nb\tpop\nb\trock\n".as_bytes(), "mem", 2).unwrap()
    }

    #[test]
    fn tsv_round_trip() {
        let m = matrix();
        let set = AnnotationSet {
            subset_kind: SubsetKind::Balanced,
            records: vec![
                AnnotationRecord {
                    track_id: "a".into(),
                    tag: 1,
                    verdict: Some(Verdict::Positive),
                    annotator: "kc".into(),
                },
                AnnotationRecord {
                    track_id: "b".into(),
                    tag: 0,
                    verdict: None,
                    annotator: String::new(),
                },
            ],
        };
        let mut buf = Vec::new();
        set.write_tsv(&mut buf, &m).unwrap();
        let back = AnnotationSet::read_tsv(buf.as_slice(), "mem", &m).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn duplicate_verdicts_rejected() {
        let m = matrix();
        let tsv = "a\trock\t1\tx\na\trock\t0\tx\n";
        assert!(AnnotationSet::read_tsv(tsv.as_bytes(), "mem", &m).is_err());
        let ok = "a\trock\t1\tx\na\trock\t0\ty\n";
        assert!(AnnotationSet::read_tsv(ok.as_bytes(), "mem", &m).is_ok());
    }

    #[test]
    fn unknown_track_rejected() {
        let m = matrix();
        let tsv = "zz\trock\t1\tx\n";
        assert!(matches!(
            AnnotationSet::read_tsv(tsv.as_bytes(), "mem", &m),
            Err(Error::UnknownTrack(_))
        ));
    }

    #[test]
    fn skips_are_counted_separately() {
        let m = matrix();
        let tsv = "a\trock\t1\tx\nb\trock\tskip\tx\nb\tpop\t-\tx\n";
        let set = AnnotationSet::read_tsv(tsv.as_bytes(), "mem", &m).unwrap();
        let (judged, skipped) = set.judged(0);
        assert_eq!((judged.len(), skipped), (1, 1));
        assert_eq!(set.pending(), 1);
    }
}
