use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::sweep::ExperimentResult;
use crate::convnet::{standard_metadata, write_checkpoint, write_training_log};
use crate::{Error, Result};

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Grouped vertical bars, one group per tag.
fn bar_chart(title: &str, header: &str, labels: &[String], series: &[(&str, &str, Vec<Option<f64>>)]) -> String {
    let (w, h, left, bottom, top) = (80.0 * labels.len() as f64 + 120.0, 360.0, 60.0, 60.0, 40.0);
    let plot_h = h - bottom - top;
    let group = 80.0;
    let bar = (group - 16.0) / series.len() as f64;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, "<!--\n{header}-->");
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    for tick in 0..=5 {
        let v = tick as f64 / 5.0;
        let y = top + plot_h * (1.0 - v);
        let _ = writeln!(s, r##"<line x1="{left}" x2="{}" y1="{y}" y2="{y}" stroke="#ddd"/>"##, w - 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v:.1}</text>"#, left - 6.0, y + 4.0);
    }
    for (g, label) in labels.iter().enumerate() {
        let x0 = left + 8.0 + group * g as f64;
        for (k, (_, colour, vals)) in series.iter().enumerate() {
            if let Some(v) = vals[g] {
                let bh = plot_h * v.clamp(0.0, 1.0);
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{colour}"/>"#,
                    x0 + bar * k as f64,
                    top + plot_h - bh,
                    bar - 2.0,
                    bh
                );
            }
        }
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, x0 + (group - 16.0) / 2.0, h - bottom + 16.0, escape(label));
    }
    for (k, (name, colour, _)) in series.iter().enumerate() {
        let y = h - 20.0;
        let x = left + 140.0 * k as f64;
        let _ = writeln!(s, r#"<rect x="{x}" y="{}" width="12" height="12" fill="{colour}"/>"#, y - 10.0);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, x + 16.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

/// Square heatmap; values mapped linearly from `lo` (white) to `hi` (dark).
fn heatmap(title: &str, header: &str, labels: &[String], value: impl Fn(usize, usize) -> Option<f64>) -> String {
    let k = labels.len();
    let cell = 28.0;
    let margin = 90.0;
    let size = margin + cell * k as f64 + 20.0;
    let vals: Vec<f64> = (0..k).flat_map(|i| (0..k).filter_map(|j| value(i, j)).collect::<Vec<_>>().into_iter()).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(lo + 1e-12);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{}" font-family="sans-serif" font-size="10">"#, size + 20.0);
    let _ = writeln!(s, "<!--\n{header}-->");
    let _ = writeln!(s, r#"<text x="{}" y="16" text-anchor="middle" font-size="14">{}</text>"#, size / 2.0, escape(title));
    for (i, l) in labels.iter().enumerate() {
        let y = margin + cell * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, margin - 4.0, y + cell * 0.6, escape(l));
        let x = margin + cell * i as f64 + cell / 2.0;
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="start" transform="rotate(-60 {x:.1} {})">{}</text>"#, margin - 4.0, margin - 4.0, escape(l));
        for j in 0..k {
            let x = margin + cell * j as f64;
            let fill = match value(i, j) {
                Some(v) => {
                    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
                    let c = (255.0 * (1.0 - 0.85 * t)).round() as u8;
                    format!("rgb({c},{c},255)")
                }
                None => "#ccc".into(),
            };
            let _ = writeln!(s, r#"<rect x="{x:.1}" y="{y:.1}" width="{cell}" height="{cell}" fill="{fill}" stroke="white"/>"#);
            if let Some(v) = value(i, j) {
                let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="8">{:.0}</text>"#, x + cell / 2.0, y + cell * 0.6, 100.0 * v);
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the results directory:
///
/// * `config.txt` canonical experiment configuration
/// * `result.csv` one row per tag, correlations in the comment header
/// * `training_log.csv` per-epoch losses and validation AUC
/// * `nco.csv` co-occurrence of the noisy training labels
/// * `lvs.csv` label-vector similarity ×100
/// * `charts/tagability_auc.svg`, `charts/nco.svg`, `charts/lvs.svg`
/// * `checkpoint.ccnn` trained parameters
///
/// Every text file starts with `#` provenance lines (tool, command, seed,
/// config hash); the checkpoint carries them as metadata. Nothing is written
/// when the result is empty.
pub fn write_report(result: &ExperimentResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if result.tags.is_empty() {
        return Err(Error::Invalid("empty experiment result; nothing written".into()));
    }
    let header = result.provenance.comment_header("#");
    let svg_header: String = result.provenance.fields().iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    let names = result.tag_names();

    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    files.push(("config.txt".into(), format!("{header}{}", result.config.to_text()).into_bytes()));

    let mut csv = header.clone();
    let _ = writeln!(csv, "# spearman_tagability_auc_clean={}", opt(result.spearman_tagability_clean));
    let _ = writeln!(csv, "# spearman_tagability_auc_noisy={}", opt(result.spearman_tagability_noisy));
    let _ = writeln!(csv, "# pearson_auc_clean_auc_noisy={}", opt(result.pearson_clean_noisy));
    let _ = writeln!(csv, "# macro_auc_clean={}", opt(result.macro_auc_clean));
    let _ = writeln!(csv, "# macro_auc_noisy={}", opt(result.macro_auc_noisy));
    let _ = writeln!(csv, "# stop={}", result.stop);
    if let Some(c) = &result.lvs_vs_nco {
        let _ = writeln!(csv, "# lvs_nco_rank_pearson={:.6}", c.correlation.pearson);
        let _ = writeln!(csv, "# lvs_negative_pairs={}", c.negative_pairs);
    }
    csv.push_str("tag,drop_rate,n_test_pos,dropped,tagability,auc_clean,auc_noisy\n");
    for t in &result.tags {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            t.name,
            t.drop_rate,
            t.n_test_pos,
            result.injection.dropped[t.tag],
            opt(t.tagability),
            opt(t.auc_clean),
            opt(t.auc_noisy)
        );
    }
    files.push(("result.csv".into(), csv.into_bytes()));

    let mut log = header.clone().into_bytes();
    write_training_log(&mut log, &result.log).expect("writing to memory");
    files.push(("training_log.csv".into(), log));

    let mut nco = header.clone().into_bytes();
    result.nco.write_csv(&mut nco).expect("writing to memory");
    files.push(("nco.csv".into(), nco));

    let mut lvs = header.clone().into_bytes();
    result.lvs.write_csv(&mut lvs).expect("writing to memory");
    files.push(("lvs.csv".into(), lvs));

    let bars = bar_chart(
        "Tagability and AUC per tag",
        &svg_header,
        &names,
        &[
            ("tagability", "#e377c2", result.tags.iter().map(|t| t.tagability).collect()),
            ("AUC vs clean", "#1f77b4", result.tags.iter().map(|t| t.auc_clean).collect()),
            ("AUC vs noisy", "#ff7f0e", result.tags.iter().map(|t| t.auc_noisy).collect()),
        ],
    );
    files.push(("charts/tagability_auc.svg".into(), bars.into_bytes()));
    let nco_map = heatmap("Normalised co-occurrence (training labels)", &svg_header, &names, |i, j| result.nco.get(i, j));
    files.push(("charts/nco.svg".into(), nco_map.into_bytes()));
    let diag_max = (0..result.lvs.n_tags()).map(|i| result.lvs.get(i, i)).fold(0.0, f64::max).max(1e-12);
    let lvs_map = heatmap("Label vector similarity (scaled by largest norm²)", &svg_header, &names, |i, j| {
        Some(result.lvs.get(i, j) / diag_max)
    });
    files.push(("charts/lvs.svg".into(), lvs_map.into_bytes()));

    let mut extra: Vec<(&str, String)> = result.provenance.fields();
    extra.push(("stop", result.stop.to_string()));
    let meta = standard_metadata::<f32>(&names, &extra);
    let mut ckpt = Vec::new();
    write_checkpoint(&mut ckpt, &result.params, &meta).expect("writing to memory");
    files.push(("checkpoint.ccnn".into(), ckpt));

    std::fs::create_dir_all(out_dir.join("charts")).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::with_capacity(files.len());
    for (rel, bytes) in files {
        let path = out_dir.join(rel);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
