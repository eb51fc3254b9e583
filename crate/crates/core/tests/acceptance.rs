//! Acceptance criteria. Every test prints one `PASS`/`FAIL` line to stderr
//! (uncaptured, so it shows in a normal `cargo test` run) before asserting.

mod support;

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use support::gradcheck::{max_relative_errors, FLOOR};
use support::oracles::*;
use tagnoise::cooccur::compute_nco;
use tagnoise::eval::auc;
use tagnoise::experiments::{run_noise_sweep, ExperimentConfig};
use tagnoise::lvs::{compute_lvs, LabelVectorMatrix};
use tagnoise::noise::{bootstrap_ci, corrected_count, BootstrapConfig, REFERENCE_TAGS, REFERENCE_TOTAL};
use tagnoise::tagdata::SplitFilter;

fn verdict(id: &str, what: &str, ok: bool, detail: &str, elapsed: Duration) {
    let line = format!(
        "\nacceptance {id:<3} {:<4} {what} ({:.2} s): {detail}\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {id} failed: {detail}");
}

fn estimates() -> Vec<f64> {
    REFERENCE_TAGS
        .iter()
        .enumerate()
        .map(|(j, t)| corrected_count(t.n_plus, REFERENCE_TOTAL, &t.rates(j)))
        .collect()
}

#[test]
fn criterion_1a_corrected_counts() {
    let start = Instant::now();
    let got = estimates();
    let elapsed = start.elapsed();
    // Published groundtruth counts and error rates, plugged straight into
    // N+(1 - p+) + (T - N+)p- in floating point.
    let total = 242_842.0;
    let published = [(8_424.0, 0.06, 0.12), (17_840.0, 0.04, 0.24), (3_026.0, 0.02, 0.64), (3_311.0, 0.02, 0.70)];
    let expected = published.map(|(n, pp, pn)| n * (1.0 - pp) + (total - n) * pn);
    let table = [36_048.0, 71_127.0, 156_448.0, 170_916.0];
    let exact = got.iter().zip(expected).all(|(g, e)| (g - e).abs() < 0.01);
    let rounded = got.iter().zip(table).all(|(g, t)| (g - t).abs() <= 1.0);
    let detail = format!("estimates {got:.2?}");
    verdict("1a", "corrected counts", exact && rounded && elapsed < Duration::from_secs(1), &detail, elapsed);
}

#[test]
fn criterion_1b_corrected_percentages() {
    let start = Instant::now();
    let got: Vec<f64> = estimates().iter().map(|e| 100.0 * e / REFERENCE_TOTAL as f64).collect();
    let elapsed = start.elapsed();
    let expected = [14.9, 29.3, 64.4, 70.4];
    let misses: Vec<String> = REFERENCE_TAGS
        .iter()
        .zip(got.iter().zip(expected))
        .filter(|(_, (g, e))| (*g - e).abs() > 0.05)
        .map(|(t, (g, e))| format!("{}: {g:.3}% vs {e}%", t.name))
        .collect();
    let detail = if misses.is_empty() {
        format!("percentages {got:.3?}")
    } else {
        format!("percentages {got:.3?}; outside ±0.05: {}", misses.join(", "))
    };
    verdict("1b", "corrected percentages", misses.is_empty() && elapsed < Duration::from_secs(1), &detail, elapsed);
}

#[test]
fn criterion_2_precision_recall() {
    let start = Instant::now();
    let expected = [(94.0, 88.7), (96.0, 80.0), (98.0, 60.5), (98.0, 58.3)];
    let mut ok = true;
    let mut got = Vec::new();
    for (j, (t, (ep, er))) in REFERENCE_TAGS.iter().zip(expected).enumerate() {
        let c = t.rates(j).counts();
        let (p, r) = (100.0 * c.precision().unwrap(), 100.0 * c.recall().unwrap());
        ok &= (p - ep).abs() <= 0.05 && (r - er).abs() <= 0.05;
        got.push(format!("{} {p:.2}/{r:.2}", t.name));
    }
    verdict("2", "groundtruth precision/recall", ok, &got.join(", "), start.elapsed());
}

#[test]
fn criterion_3_auc_oracle() {
    let start = Instant::now();
    let mut r = rng(3);
    let mut mismatches = 0;
    for _ in 0..500 {
        let (scores, labels) = random_auc_instance(&mut r, 200);
        if auc(&scores, &labels).unwrap() != brute_force_auc(&scores, &labels) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    let detail = format!("{mismatches} of 500 instances differ from pair counting");
    verdict("3", "AUC equals brute force", mismatches == 0 && elapsed < Duration::from_secs(10), &detail, elapsed);
}

#[test]
fn criterion_4_gradient_check() {
    let start = Instant::now();
    let errors = max_relative_errors(FLOOR);
    let elapsed = start.elapsed();
    let (name, worst, _) = errors.iter().cloned().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let ok = errors.len() == 10 && worst <= 1e-5 && elapsed < Duration::from_secs(120);
    let detail = format!("{} tensors, worst relative error {worst:.2e} ({name})", errors.len());
    verdict("4", "gradient check", ok, &detail, elapsed);
}

#[test]
fn criterion_5_nco_oracle() {
    let start = Instant::now();
    let mut r = rng(5);
    let mut failures = Vec::new();
    for case in 0..200 {
        let k = r.random_range(1..=8);
        let n = r.random_range(1..=50);
        let density = r.random_range(0.05..0.8);
        let rows = random_rows(&mut r, n, k, density);
        let joint = brute_force_joint(&rows, k);
        let nco = compute_nco(&matrix(rows, k), SplitFilter::All).unwrap();
        let counts = nco.counts();
        for i in 0..k {
            if counts[i] > 0 && nco.get(i, i) != Some(1.0) {
                failures.push(format!("case {case}: C({i},{i}) != 1"));
            }
            for j in 0..k {
                let expected = (counts[i] > 0).then(|| joint[i * k + j] as f64 / joint[i * k + i] as f64);
                if nco.joint(i, j) != joint[i * k + j] || nco.get(i, j) != expected {
                    failures.push(format!("case {case}: ({i},{j}) differs from joint counting"));
                }
                if let (Some(a), Some(b)) = (nco.get(i, j), nco.get(j, i)) {
                    let (x, y) = (a * counts[i] as f64, b * counts[j] as f64);
                    if (x - y).abs() > 2.0 * f64::EPSILON * x.abs().max(y.abs()) {
                        failures.push(format!("case {case}: consistency ({i},{j}) {x} vs {y}"));
                    }
                }
            }
        }
    }
    let detail = match failures.first() {
        None => "200 instances agree exactly".to_string(),
        Some(f) => format!("{} failures, first: {f}", failures.len()),
    };
    verdict("5", "co-occurrence equals brute force", failures.is_empty(), &detail, start.elapsed());
}

#[test]
fn criterion_6_gram_spectrum() {
    let start = Instant::now();
    let (dim, k) = (32, 50);
    let names: Vec<String> = (0..k).map(|j| format!("t{j}")).collect();
    let mut r = rng(6);
    let (mut worst_min, mut worst_33rd) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut symmetric = true;
    for _ in 0..100 {
        let w = random_matrix(&mut r, dim * k);
        let s = compute_lvs(&LabelVectorMatrix::new(dim, names.clone(), w, "random").unwrap()).unwrap();
        symmetric &= (0..k).all(|i| (0..k).all(|j| s.get(i, j) == s.get(j, i)));
        let norm = s.frobenius_norm();
        let mut eig: Vec<f64> = DMatrix::from_row_slice(k, k, &s.values).symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        worst_min = worst_min.min(eig[k - 1] / norm);
        worst_33rd = worst_33rd.max(eig[dim] / norm);
    }
    let ok = symmetric && worst_min >= -1e-6 && worst_33rd <= 1e-6;
    let detail = format!("symmetric {symmetric}, min λ/‖S‖ {worst_min:.2e}, λ33/‖S‖ {worst_33rd:.2e}");
    verdict("6", "similarity Gram properties", ok, &detail, start.elapsed());
}

#[test]
fn criterion_7_bootstrap_coverage() {
    let start = Instant::now();
    let p = 0.3;
    let mut r = rng(7);
    let mut covered = 0;
    for trial in 0..200u64 {
        let sample: Vec<f64> = (0..100).map(|_| if r.random_bool(p) { 1.0 } else { 0.0 }).collect();
        let ci = bootstrap_ci(
            &sample,
            |s| Some(s.iter().sum::<f64>() / s.len() as f64),
            None,
            &BootstrapConfig::with_seed(trial),
        )
        .unwrap();
        if ci.low <= p && p <= ci.high {
            covered += 1;
        }
    }
    let elapsed = start.elapsed();
    let ok = covered >= 180 && elapsed < Duration::from_secs(30);
    verdict("7", "bootstrap coverage", ok, &format!("{covered} of 200 intervals cover p"), elapsed);
}

#[test]
fn criterion_8_noise_sweep() {
    let start = Instant::now();
    let result = run_noise_sweep(&ExperimentConfig::preset("sweep8").unwrap()).unwrap();
    let elapsed = start.elapsed();
    let rho = result.spearman_tagability_clean;
    let r = result.pearson_clean_noisy;
    let ok = rho.is_some_and(|v| v >= 0.6) && r.is_some_and(|v| v >= 0.8) && elapsed <= Duration::from_secs(900);
    let detail = format!(
        "spearman(tagability, AUC clean) {rho:.3?}, pearson(AUC clean, AUC noisy) {r:.3?}, macro AUC clean {:.3?}, seed {}",
        result.macro_auc_clean,
        result.config.seed()
    );
    verdict("8", "noise-effect sweep", ok, &detail, elapsed);
}

#[test]
fn criterion_9_separable_learnability() {
    let start = Instant::now();
    let config = ExperimentConfig::preset("separable").unwrap();
    assert!(config.synthetic.drop_rates.iter().all(|&d| d == 0.0) && config.synthetic.spurious_rate == 0.0);
    let result = run_noise_sweep(&config).unwrap();
    let best = result
        .log
        .iter()
        .filter(|e| e.epoch <= 20)
        .filter_map(|e| e.valid_auc.map(|a| (e.epoch, a)))
        .fold(None, |best: Option<(usize, f64)>, e| match best {
            Some(b) if b.1 >= e.1 => Some(b),
            _ => Some(e),
        });
    let ok = best.is_some_and(|(_, a)| a >= 0.99);
    let detail = match best {
        Some((epoch, a)) => format!("best validation AUC {a:.4} at epoch {epoch}"),
        None => "no validation AUC recorded".into(),
    };
    verdict("9", "separable preset learnability", ok, &detail, start.elapsed());
}
