use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use super::{LabelMatrix, Split, TagVocabulary};
use crate::{Error, Result};

/// Reads a `track_id<TAB>tag` edge list and keeps the `top_n` most popular
/// tags. Duplicate lines collapse; tracks left without tags are dropped.
/// Track order is order of first appearance.
pub fn ingest_edge_list(path: &Path, top_n: usize) -> Result<LabelMatrix> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_edges(std::io::BufReader::new(f), &path.display().to_string(), top_n)
}

pub fn ingest_edges(reader: impl BufRead, source: &str, top_n: usize) -> Result<LabelMatrix> {
    let mut track_ids: Vec<String> = Vec::new();
    let mut track_pos: HashMap<String, usize> = HashMap::new();
    let mut tag_names: Vec<String> = Vec::new();
    let mut tag_pos: HashMap<String, usize> = HashMap::new();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::Parse {
                path: source.to_string(),
                line: i + 1,
                message: format!("expected `track_id<TAB>tag`, got {} column(s)", fields.len()),
            });
        }
        let t = intern(&mut track_ids, &mut track_pos, fields[0]);
        let g = intern(&mut tag_names, &mut tag_pos, fields[1]);
        if seen.insert((t, g)) {
            edges.push((t, g));
        }
    }

    let mut counts = vec![0u64; tag_names.len()];
    for &(_, g) in &edges {
        counts[g] += 1;
    }
    let (vocab, _) = TagVocabulary::from_counts(
        tag_names.iter().map(String::as_str).zip(counts.iter().copied()),
        top_n,
    )?;
    let remap: Vec<Option<usize>> = tag_names.iter().map(|t| vocab.id(t)).collect();

    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); track_ids.len()];
    for &(t, g) in &edges {
        if let Some(id) = remap[g] {
            rows[t].push(id);
        }
    }
    let (kept_ids, kept_rows): (Vec<String>, Vec<Vec<usize>>) = track_ids
        .into_iter()
        .zip(rows)
        .filter(|(_, r)| !r.is_empty())
        .unzip();
    LabelMatrix::from_rows(kept_ids, vocab, kept_rows)
}

fn intern(names: &mut Vec<String>, pos: &mut HashMap<String, usize>, s: &str) -> usize {
    if let Some(&i) = pos.get(s) {
        return i;
    }
    names.push(s.to_string());
    pos.insert(s.to_string(), names.len() - 1);
    names.len() - 1
}

/// Outcome of applying a split file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitReport {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub unassigned: usize,
    /// Track ids listed in the split file but absent from the matrix.
    pub skipped: Vec<String>,
}

/// Parses `track_id<TAB>{train|valid|test}` lines.
pub fn read_splits(reader: impl BufRead, source: &str) -> Result<Vec<(String, Split)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: source.to_string(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(parse_err(format!(
                "expected `track_id<TAB>split`, got {} column(s)",
                fields.len()
            )));
        }
        let split = match fields[1] {
            "train" => Split::Train,
            "valid" => Split::Valid,
            "test" => Split::Test,
            other => return Err(parse_err(format!("unknown split token `{other}`"))),
        };
        out.push((fields[0].to_string(), split));
    }
    Ok(out)
}

/// Assigns splits from a split file. Unlisted tracks become [`Split::None`];
/// listed tracks missing from the matrix are skipped with a warning.
pub fn assign_splits(matrix: LabelMatrix, path: &Path) -> Result<(LabelMatrix, SplitReport)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let entries = read_splits(std::io::BufReader::new(f), &path.display().to_string())?;
    apply_splits(matrix, &entries)
}

pub(crate) fn apply_splits(
    matrix: LabelMatrix,
    entries: &[(String, Split)],
) -> Result<(LabelMatrix, SplitReport)> {
    let mut split = vec![Split::None; matrix.n_tracks()];
    let mut report = SplitReport::default();
    for (id, s) in entries {
        match matrix.track_position(id) {
            Some(t) => {
                if split[t] != Split::None && split[t] != *s {
                    return Err(Error::Invalid(format!(
                        "track `{id}` assigned to both {} and {s}",
                        split[t]
                    )));
                }
                split[t] = *s;
            }
            None => {
                log::debug!("split file lists unknown track `{id}`; skipped");
                report.skipped.push(id.clone());
            }
        }
    }
    if let Some(first) = report.skipped.first() {
        log::warn!(
            "split file lists {} track(s) missing from the labels (first: `{first}`); skipped",
            report.skipped.len()
        );
    }
    let m = matrix.with_splits(split)?;
    let [none, train, valid, test] = m.split_counts();
    report.train = train;
    report.valid = valid;
    report.test = test;
    report.unassigned = none;
    Ok((m, report))
}
