//! Slow, obviously-correct reference implementations and random instance
//! generators shared by the property and acceptance suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tagnoise::tagdata::{LabelMatrix, TagVocabulary};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Counts every positive/negative pair: a win scores 2, a tie 1.
pub fn brute_force_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut pairs) = (0u64, 0u64);
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1;
            num += if scores[i] > scores[j] {
                2
            } else if scores[i] == scores[j] {
                1
            } else {
                0
            };
        }
    }
    num as f64 / (2 * pairs) as f64
}

/// Scores drawn from a small integer grid so that ties are common, and labels
/// with both classes present.
pub fn random_auc_instance(r: &mut ChaCha8Rng, max_n: usize) -> (Vec<f64>, Vec<bool>) {
    let n = r.random_range(2..=max_n);
    let levels = r.random_range(2..=20);
    let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64 / levels as f64).collect();
    let mut labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.4)).collect();
    labels[0] = true;
    labels[1] = false;
    (scores, labels)
}

/// `#(y_i ∧ y_j)` by looping over tracks and every tag pair.
pub fn brute_force_joint(rows: &[Vec<usize>], k: usize) -> Vec<u64> {
    let mut joint = vec![0u64; k * k];
    for row in rows {
        for i in 0..k {
            for j in 0..k {
                if row.contains(&i) && row.contains(&j) {
                    joint[i * k + j] += 1;
                }
            }
        }
    }
    joint
}

pub fn random_rows(r: &mut ChaCha8Rng, n: usize, k: usize, density: f64) -> Vec<Vec<usize>> {
    (0..n).map(|_| (0..k).filter(|_| r.random_bool(density)).collect()).collect()
}

pub fn matrix(rows: Vec<Vec<usize>>, k: usize) -> LabelMatrix {
    let vocab = TagVocabulary::new((0..k).map(|j| format!("t{j}")).collect()).unwrap();
    let ids = (0..rows.len()).map(|t| format!("tr{t}")).collect();
    LabelMatrix::from_rows(ids, vocab, rows).unwrap()
}

/// `S(i, j) = Σ_r W(r, i)·W(r, j)` entry by entry, W row-major `dim × k`.
pub fn naive_gram(w: &[f64], dim: usize, k: usize) -> Vec<f64> {
    let mut s = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let mut acc = 0.0;
            for r in 0..dim {
                acc += w[r * k + i] * w[r * k + j];
            }
            s[i * k + j] = acc;
        }
    }
    s
}

pub fn random_matrix(r: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| r.random_range(-1.0..1.0)).collect()
}
