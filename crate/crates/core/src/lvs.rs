//! Label-vector similarity `S = WᵀW` and its comparison with co-occurrence.

use std::io::{self, Read, Write};
use std::path::Path;

use crate::binio::*;
use crate::cooccur::{rank_pairs, CooccurrenceMatrix, TagPair};
use crate::eval::{pearson, spearman, CorrelationReport};
use crate::{Error, Result};

/// Columns of the final dense layer, one per tag.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVectorMatrix {
    pub dim: usize,
    pub tags: Vec<String>,
    /// `dim × n_tags`, row-major.
    pub values: Vec<f64>,
    /// Identifies the model the vectors were taken from.
    pub source: String,
}

impl LabelVectorMatrix {
    pub fn new(dim: usize, tags: Vec<String>, values: Vec<f64>, source: &str) -> Result<Self> {
        if values.len() != dim * tags.len() {
            return Err(Error::Shape(format!(
                "{} values for a {dim}×{} matrix",
                values.len(),
                tags.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("label vectors".into()));
        }
        Ok(LabelVectorMatrix {
            dim,
            tags,
            values,
            source: source.to_string(),
        })
    }

    pub fn n_tags(&self) -> usize {
        self.tags.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let k = self.n_tags();
        (0..self.dim).map(|r| self.values[r * k + j]).collect()
    }
}

/// Symmetric tag-by-tag similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub tags: Vec<String>,
    pub values: Vec<f64>,
    /// Cosine-normalised rather than raw dot products.
    pub cosine: bool,
}

impl SimilarityMatrix {
    pub fn n_tags(&self) -> usize {
        self.tags.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_tags() + j]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Off-diagonal pairs `i < j` with a negative similarity.
    pub fn negative_pairs(&self) -> usize {
        let k = self.n_tags();
        (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j) < 0.0)
            .count()
    }

    /// Values ×100 with one decimal, tag names as header and first column.
    pub fn write_csv(&self, w: &mut impl Write) -> io::Result<()> {
        write!(w, "tag")?;
        for t in &self.tags {
            write!(w, ",{t}")?;
        }
        writeln!(w)?;
        for (i, t) in self.tags.iter().enumerate() {
            write!(w, "{t}")?;
            for j in 0..self.n_tags() {
                write!(w, ",{:.1}", 100.0 * self.get(i, j))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// `LVSM`, version u32, cosine u8, tag count u32, tag names, f64 values.
    pub fn write_binary(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(b"LVSM")?;
        write_u32(w, 1)?;
        write_u8(w, self.cosine as u8)?;
        write_u32(w, self.n_tags() as u32)?;
        for t in &self.tags {
            write_str(w, t)?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> io::Result<Self> {
        read_magic(r, b"LVSM")?;
        let version = read_u32(r)?;
        if version != 1 {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("unsupported similarity version {version}"),
            ));
        }
        let cosine = read_u8(r)? != 0;
        let k = read_u32(r)? as usize;
        let tags = (0..k).map(|_| read_str(r, 4096)).collect::<io::Result<Vec<_>>>()?;
        let values = (0..k * k).map(|_| read_f64(r)).collect::<io::Result<Vec<_>>>()?;
        Ok(SimilarityMatrix {
            tags,
            values,
            cosine,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_binary(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        SimilarityMatrix::read_binary(&mut &bytes[..]).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Gram matrix of the label vectors. Only `j ≥ i` is computed; the lower
/// triangle is mirrored, so the result is exactly symmetric.
pub fn compute_lvs(vectors: &LabelVectorMatrix) -> Result<SimilarityMatrix> {
    if vectors.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("label vectors".into()));
    }
    let k = vectors.n_tags();
    let cols: Vec<Vec<f64>> = (0..k).map(|j| vectors.column(j)).collect();
    let mut values = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let d: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            values[i * k + j] = d;
            values[j * k + i] = d;
        }
    }
    Ok(SimilarityMatrix {
        tags: vectors.tags.clone(),
        values,
        cosine: false,
    })
}

/// Cosine variant: `S(i, j) / (‖w_i‖·‖w_j‖)`. A zero vector is an error.
pub fn compute_cosine_lvs(vectors: &LabelVectorMatrix) -> Result<SimilarityMatrix> {
    let mut s = compute_lvs(vectors)?;
    let k = s.n_tags();
    let norms: Vec<f64> = (0..k).map(|i| s.get(i, i).sqrt()).collect();
    if let Some(z) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::Undefined(format!("label vector of `{}` is zero", s.tags[z])));
    }
    for i in 0..k {
        for j in 0..k {
            s.values[i * k + j] /= norms[i] * norms[j];
        }
    }
    s.cosine = true;
    Ok(s)
}

/// Top `k` off-diagonal pairs by similarity, ties in index order.
pub fn rank_lvs_pairs(sim: &SimilarityMatrix, k: usize) -> Result<Vec<TagPair>> {
    let n = sim.n_tags();
    let max = n * n.saturating_sub(1) / 2;
    if k > max {
        return Err(Error::Invalid(format!("asked for {k} pairs, only {max} exist")));
    }
    Ok(rank_pairs(n, k, |i, j| sim.get(i, j)))
}

/// Pairs ranked highly by LVS but lowly by co-occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DivergenceThreshold {
    /// LVS rank at or above which (1 = most similar) a pair qualifies.
    pub max_lvs_rank: usize,
    /// NCO rank at or below which a pair qualifies.
    pub min_nco_rank: usize,
}

impl Default for DivergenceThreshold {
    fn default() -> Self {
        DivergenceThreshold {
            max_lvs_rank: 20,
            min_nco_rank: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub i: usize,
    pub j: usize,
    /// 1-based ranks.
    pub lvs_rank: usize,
    pub nco_rank: usize,
    pub lvs_score: f64,
    pub nco_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LvsNcoComparison {
    /// `pearson` is taken over the two ordinal pair rankings, `spearman`
    /// over the raw scores.
    pub correlation: CorrelationReport,
    pub divergences: Vec<Divergence>,
    pub negative_pairs: usize,
    pub n_pairs: usize,
}

/// Correlation of the LVS and NCO rankings over all off-diagonal pairs; NCO
/// pairs are scored by `max(C(i, j), C(j, i))`.
pub fn compare_lvs_nco(
    sim: &SimilarityMatrix,
    nco: &CooccurrenceMatrix,
    threshold: DivergenceThreshold,
) -> Result<LvsNcoComparison> {
    if sim.tags.as_slice() != nco.vocab().tags() {
        return Err(Error::Invalid(
            "similarity and co-occurrence vocabularies differ".into(),
        ));
    }
    let k = sim.n_tags();
    let n_pairs = k * k.saturating_sub(1) / 2;
    let lvs_order = rank_pairs(k, n_pairs, |i, j| sim.get(i, j));
    let nco_order = rank_pairs(k, n_pairs, |i, j| nco.pair_score(i, j));
    let slot = |i: usize, j: usize| i * k + j;
    let mut lvs_rank = vec![0usize; k * k];
    let mut nco_rank = vec![0usize; k * k];
    for (r, p) in lvs_order.iter().enumerate() {
        lvs_rank[slot(p.i, p.j)] = r + 1;
    }
    for (r, p) in nco_order.iter().enumerate() {
        nco_rank[slot(p.i, p.j)] = r + 1;
    }
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let rl: Vec<f64> = pairs.iter().map(|&(i, j)| lvs_rank[slot(i, j)] as f64).collect();
    let rn: Vec<f64> = pairs.iter().map(|&(i, j)| nco_rank[slot(i, j)] as f64).collect();
    let sl: Vec<f64> = pairs.iter().map(|&(i, j)| sim.get(i, j)).collect();
    let sn: Vec<f64> = pairs.iter().map(|&(i, j)| nco.pair_score(i, j)).collect();
    let correlation = CorrelationReport {
        pearson: pearson(&rl, &rn)?,
        spearman: spearman(&sl, &sn)?,
        n: pairs.len(),
        label_x: if sim.cosine { "lvs-cosine".into() } else { "lvs".into() },
        label_y: "nco".into(),
    };
    let divergences = lvs_order
        .iter()
        .enumerate()
        .take(threshold.max_lvs_rank)
        .filter_map(|(r, p)| {
            let nr = nco_rank[slot(p.i, p.j)];
            (nr >= threshold.min_nco_rank).then(|| Divergence {
                i: p.i,
                j: p.j,
                lvs_rank: r + 1,
                nco_rank: nr,
                lvs_score: p.score,
                nco_score: nco.pair_score(p.i, p.j),
            })
        })
        .collect();
    Ok(LvsNcoComparison {
        correlation,
        divergences,
        negative_pairs: sim.negative_pairs(),
        n_pairs,
    })
}

/// `tag_i<TAB>tag_j<TAB>lvs_rank<TAB>nco_rank<TAB>lvs<TAB>nco`
pub fn write_divergences_tsv(w: &mut impl Write, tags: &[String], divs: &[Divergence]) -> io::Result<()> {
    writeln!(w, "tag_i\ttag_j\tlvs_rank\tnco_rank\tlvs\tnco")?;
    for d in divs {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}",
            tags[d.i], tags[d.j], d.lvs_rank, d.nco_rank, d.lvs_score, d.nco_score
        )?;
    }
    Ok(())
}
