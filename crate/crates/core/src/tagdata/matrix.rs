use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{Split, SplitFilter, TagVocabulary};
use crate::binio::*;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"TAGM";
const VERSION: u32 = 1;

/// Sparse binary track × tag matrix in CSR form, with per-track splits.
///
/// Row `t` lists the (sorted, unique) tag ids applied to track `t`. Ingested
/// matrices have at least one tag per track; matrices produced by noise
/// injection may contain empty rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    track_ids: Vec<String>,
    track_index: HashMap<String, usize>,
    vocab: TagVocabulary,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    split: Vec<Split>,
}

impl LabelMatrix {
    /// Builds a matrix from per-track tag id lists. Rows are sorted and
    /// deduplicated; every track starts in [`Split::None`].
    pub fn from_rows(
        track_ids: Vec<String>,
        vocab: TagVocabulary,
        rows: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if track_ids.len() != rows.len() {
            return Err(Error::Shape(format!(
                "{} track ids but {} rows",
                track_ids.len(),
                rows.len()
            )));
        }
        let mut track_index = HashMap::with_capacity(track_ids.len());
        for (i, id) in track_ids.iter().enumerate() {
            if track_index.insert(id.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate track id `{id}`")));
            }
        }
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            if let Some(&bad) = row.iter().find(|&&t| t >= vocab.len()) {
                return Err(Error::Invalid(format!(
                    "tag id {bad} out of range for {} tags",
                    vocab.len()
                )));
            }
            indices.extend(row.into_iter().map(|t| t as u32));
            indptr.push(indices.len());
        }
        let split = vec![Split::None; track_ids.len()];
        Ok(LabelMatrix {
            track_ids,
            track_index,
            vocab,
            indptr,
            indices,
            split,
        })
    }

    pub fn n_tracks(&self) -> usize {
        self.track_ids.len()
    }

    pub fn n_tags(&self) -> usize {
        self.vocab.len()
    }

    /// Number of positive entries.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn vocab(&self) -> &TagVocabulary {
        &self.vocab
    }

    pub fn track_ids(&self) -> &[String] {
        &self.track_ids
    }

    pub fn track_id(&self, track: usize) -> &str {
        &self.track_ids[track]
    }

    pub fn track_position(&self, id: &str) -> Option<usize> {
        self.track_index.get(id).copied()
    }

    /// Tag ids applied to `track`, ascending.
    pub fn row(&self, track: usize) -> &[u32] {
        &self.indices[self.indptr[track]..self.indptr[track + 1]]
    }

    pub fn contains(&self, track: usize, tag: usize) -> bool {
        self.row(track).binary_search(&(tag as u32)).is_ok()
    }

    pub fn split_of(&self, track: usize) -> Split {
        self.split[track]
    }

    pub fn splits(&self) -> &[Split] {
        &self.split
    }

    /// Tracks accepted by `filter`, in matrix order.
    pub fn tracks_in(&self, filter: SplitFilter) -> Vec<usize> {
        (0..self.n_tracks())
            .filter(|&t| filter.accepts(self.split[t]))
            .collect()
    }

    /// Occurrence count `#y_i` of every tag over the whole matrix.
    pub fn column_counts(&self) -> Vec<u64> {
        self.column_counts_in(SplitFilter::All)
    }

    pub fn column_counts_in(&self, filter: SplitFilter) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_tags()];
        for t in 0..self.n_tracks() {
            if filter.accepts(self.split[t]) {
                for &tag in self.row(t) {
                    counts[tag as usize] += 1;
                }
            }
        }
        counts
    }

    /// Dense 0/1 column for `tag` over `tracks`.
    pub fn column(&self, tag: usize, tracks: &[usize]) -> Vec<bool> {
        tracks.iter().map(|&t| self.contains(t, tag)).collect()
    }

    /// Counts per split in the order none, train, valid, test.
    pub fn split_counts(&self) -> [usize; 4] {
        let mut c = [0usize; 4];
        for s in &self.split {
            c[s.code() as usize] += 1;
        }
        c
    }

    /// Replaces the split assignment; tag data is untouched.
    pub fn with_splits(mut self, split: Vec<Split>) -> Result<Self> {
        if split.len() != self.n_tracks() {
            return Err(Error::Shape(format!(
                "{} split entries for {} tracks",
                split.len(),
                self.n_tracks()
            )));
        }
        self.split = split;
        Ok(self)
    }

    /// Same tracks, vocabulary and splits with new rows.
    pub fn with_rows(&self, rows: Vec<Vec<usize>>) -> Result<Self> {
        let m = LabelMatrix::from_rows(self.track_ids.clone(), self.vocab.clone(), rows)?;
        m.with_splits(self.split.clone())
    }

    /// Rows as owned tag-id lists.
    pub fn rows(&self) -> Vec<Vec<usize>> {
        (0..self.n_tracks())
            .map(|t| self.row(t).iter().map(|&x| x as usize).collect())
            .collect()
    }

    /// Writes the groundtruth edge list (`track_id<TAB>tag`), tracks in matrix
    /// order and tags in vocabulary order.
    pub fn write_edge_list(&self, w: &mut impl Write) -> std::io::Result<()> {
        for t in 0..self.n_tracks() {
            for &tag in self.row(t) {
                writeln!(w, "{}\t{}", self.track_ids[t], self.vocab.tag(tag as usize))?;
            }
        }
        Ok(())
    }

    /// Writes the split file (`track_id<TAB>split`) for tracks with a split.
    pub fn write_split_file(&self, w: &mut impl Write) -> std::io::Result<()> {
        for (id, s) in self.track_ids.iter().zip(&self.split) {
            if *s != Split::None {
                writeln!(w, "{id}\t{s}")?;
            }
        }
        Ok(())
    }

    pub fn write_binary(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        write_u32(w, VERSION)?;
        write_u32(w, self.vocab.len() as u32)?;
        for t in self.vocab.tags() {
            write_str(w, t)?;
        }
        write_u32(w, self.n_tracks() as u32)?;
        for id in &self.track_ids {
            write_str(w, id)?;
        }
        write_u64(w, self.indices.len() as u64)?;
        for &p in &self.indptr {
            write_u64(w, p as u64)?;
        }
        for &i in &self.indices {
            write_u32(w, i)?;
        }
        w.write_all(&self.split.iter().map(|s| s.code()).collect::<Vec<_>>())
    }

    pub fn read_binary(r: &mut impl Read) -> std::io::Result<Self> {
        use std::io::{Error as IoError, ErrorKind};
        let bad = |m: String| IoError::new(ErrorKind::InvalidData, m);
        read_magic(r, MAGIC)?;
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(bad(format!("unsupported TAGM version {version}")));
        }
        let n_tags = read_u32(r)? as usize;
        let tags = (0..n_tags)
            .map(|_| read_str(r, 1 << 16))
            .collect::<std::io::Result<Vec<_>>>()?;
        let vocab = TagVocabulary::new(tags).map_err(|e| bad(e.to_string()))?;
        let n_tracks = read_u32(r)? as usize;
        let track_ids = (0..n_tracks)
            .map(|_| read_str(r, 1 << 16))
            .collect::<std::io::Result<Vec<_>>>()?;
        let nnz = read_u64(r)? as usize;
        let mut indptr = Vec::with_capacity(n_tracks + 1);
        for _ in 0..=n_tracks {
            indptr.push(read_u64(r)? as usize);
        }
        if indptr[0] != 0 || indptr[n_tracks] != nnz || indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(bad("corrupt CSR row pointers".into()));
        }
        let mut indices = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            indices.push(read_u32(r)?);
        }
        let rows = (0..n_tracks)
            .map(|t| indices[indptr[t]..indptr[t + 1]].iter().map(|&x| x as usize).collect())
            .collect();
        let mut codes = vec![0u8; n_tracks];
        r.read_exact(&mut codes)?;
        let split = codes
            .into_iter()
            .map(|c| Split::from_code(c).ok_or_else(|| bad(format!("bad split code {c}"))))
            .collect::<std::io::Result<Vec<_>>>()?;
        let m = LabelMatrix::from_rows(track_ids, vocab, rows).map_err(|e| bad(e.to_string()))?;
        m.with_splits(split).map_err(|e| bad(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_binary(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        LabelMatrix::read_binary(&mut std::io::BufReader::new(f)).map_err(|e| {
            if e.kind() == std::io::ErrorKind::InvalidData {
                Error::format(path, e.to_string())
            } else {
                Error::io(path, e)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LabelMatrix {
        let vocab = TagVocabulary::new(vec!["rock".into(), "pop".into()]).unwrap();
        LabelMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vocab,
            vec![vec![1, 0, 1], vec![0]],
        )
        .unwrap()
        .with_splits(vec![Split::Train, Split::Test])
        .unwrap()
    }

    #[test]
    fn rows_are_sorted_and_unique() {
        let m = toy();
        assert_eq!(m.row(0), [0, 1]);
        assert_eq!(m.column_counts(), [2, 1]);
        assert_eq!(m.column_counts_in(SplitFilter::Only(Split::Test)), [1, 0]);
        assert!(m.contains(0, 1) && !m.contains(1, 1));
    }

    #[test]
    fn binary_round_trip() {
        let m = toy();
        let mut buf = Vec::new();
        m.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"TAGM");
        let back = LabelMatrix::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back, m);
        let mut again = Vec::new();
        back.write_binary(&mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let mut buf = Vec::new();
        toy().write_binary(&mut buf).unwrap();
        buf.truncate(buf.len() - 1);
        assert!(LabelMatrix::read_binary(&mut buf.as_slice()).is_err());
        assert!(LabelMatrix::read_binary(&mut &b"NOPE"[..]).is_err());
    }

    #[test]
    fn out_of_range_tag_rejected() {
        let vocab = TagVocabulary::new(vec!["x".into()]).unwrap();
        assert!(LabelMatrix::from_rows(vec!["a".into()], vocab, vec![vec![1]]).is_err());
    }
}
