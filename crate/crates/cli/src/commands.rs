use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use tagnoise::convnet::{
    load_checkpoint, predict, save_checkpoint, standard_metadata, train, write_training_log, ArchSpec,
    Dataset, Precision, TrainConfig,
};
use tagnoise::cooccur::{compute_nco, top_pairs};
use tagnoise::dsp::{featurize_dir, FeatureConfig, MelConfig, MelSpectrogram, SpectrumScale};
use tagnoise::eval::{evaluate, CorrelationReport, EvalReport, Reference, ScoreMatrix};
use tagnoise::experiments::{run_noise_sweep, write_report, ExperimentConfig};
use tagnoise::lvs::{compare_lvs_nco, compute_cosine_lvs, compute_lvs, rank_lvs_pairs, DivergenceThreshold};
use tagnoise::noise::{
    corrected_count, estimate_prevalence, groundtruth_quality, inject_noise, BootstrapConfig, ConfusionCounts,
    Interval, NoiseRates, NoiseSpec, TagNoise, REFERENCE_TAGS, REFERENCE_TOTAL,
};
use tagnoise::provenance::Provenance;
use tagnoise::tagdata::{
    assign_splits, ingest_edge_list, sample_balanced_subset, sample_random_subset, AnnotationSet, LabelMatrix,
    SplitFilter,
};

use crate::annotate::{journal_path, read_journal, replay, Outcome, Session};
use crate::table::{fmt_opt, split_line, Format, Table};
use crate::{AuditCmd, Cli, Cmd, Global};

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

/// The `--seed` value, or a fresh one that is announced so the run can be
/// repeated.
fn seed_or_generate(g: &Global) -> u64 {
    g.seed.unwrap_or_else(|| {
        let s = rand::random::<u64>() >> 16;
        eprintln!("no --seed given; using --seed {s}");
        s
    })
}

fn provenance(seed: Option<u64>) -> Provenance {
    Provenance::new(command_line(), seed)
}

fn load_labels(path: &Path) -> Result<LabelMatrix> {
    LabelMatrix::load(path).with_context(|| format!("loading label matrix {}", path.display()))
}

fn split_filter(s: &str) -> Result<SplitFilter> {
    Ok(s.parse()?)
}

fn tag_ids(matrix: &LabelMatrix, names: &[String]) -> Result<Vec<usize>> {
    Ok(names.iter().map(|n| matrix.vocab().require(n)).collect::<tagnoise::Result<_>>()?)
}

fn save_binary(path: &Path, prov: &Provenance, save: impl FnOnce(&Path) -> tagnoise::Result<()>) -> Result<()> {
    save(path)?;
    prov.write_sidecar(path)?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Cmd::Ingest(a) => ingest(g, a),
        Cmd::Audit(c) => audit(g, c),
        Cmd::Annotate(a) => annotate(g, a),
        Cmd::Estimate(a) => estimate(g, a),
        Cmd::InjectNoise(a) => inject(g, a),
        Cmd::Featurize(a) => featurize(g, a),
        Cmd::Train(a) => train_cmd(g, a),
        Cmd::Evaluate(a) => evaluate_cmd(g, a),
        Cmd::Correlate(a) => correlate(g, a),
        Cmd::Lvs(a) => lvs(g, a),
        Cmd::Experiment(a) => experiment(g, a),
        Cmd::Report(a) => report(g, a),
    }
}

fn ingest(g: &Global, a: &crate::IngestArgs) -> Result<()> {
    let mut m = ingest_edge_list(&a.edges, a.top_n)?;
    if let Some(s) = &a.splits {
        let (with, rep) = assign_splits(m, s)?;
        m = with;
        eprintln!(
            "splits: {} train, {} valid, {} test, {} unassigned, {} unknown ids skipped",
            rep.train,
            rep.valid,
            rep.test,
            rep.unassigned,
            rep.skipped.len()
        );
    }
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("labels.tlm"));
    save_binary(&out, &provenance(None), |p| m.save(p))?;
    println!("{} tracks, {} tags, {} labels -> {}", m.n_tracks(), m.n_tags(), m.nnz(), out.display());
    Ok(())
}

fn audit(g: &Global, c: &AuditCmd) -> Result<()> {
    match c {
        AuditCmd::Cooccur { labels, tags } => {
            let m = load_labels(&labels.labels)?;
            let mut nco = compute_nco(&m, split_filter(&labels.split)?)?;
            if !tags.is_empty() {
                nco = nco.restrict(&tag_ids(&m, tags)?)?;
            }
            let names = nco.vocab().tags().to_vec();
            let mut t = Table::new(std::iter::once("tag".to_string()).chain(names.iter().cloned()));
            for (i, name) in names.iter().enumerate() {
                let mut row = vec![name.clone()];
                row.extend((0..names.len()).map(|j| nco.get(i, j).map_or("nan".into(), |v| format!("{v:.6}"))));
                t.push(row);
            }
            t.emit(g.out.as_deref(), g.format, &provenance(None).comment_header("#"))
        }
        AuditCmd::TopPairs { labels, k } => {
            let m = load_labels(&labels.labels)?;
            let nco = compute_nco(&m, split_filter(&labels.split)?)?;
            let max = m.n_tags() * m.n_tags().saturating_sub(1) / 2;
            ensure!(*k <= max, "asked for {k} pairs but only {max} exist");
            let mut t = Table::new(["tag_i", "tag_j", "score"]);
            for p in top_pairs(&nco, *k) {
                t.push(vec![m.vocab().tag(p.i).into(), m.vocab().tag(p.j).into(), format!("{:.6}", p.score)]);
            }
            t.emit(g.out.as_deref(), g.format, &provenance(None).comment_header("#"))
        }
        AuditCmd::Sample { labels, balanced, per_class, random, tags } => {
            let m = load_labels(&labels.labels)?;
            let split = split_filter(&labels.split)?;
            let seed = seed_or_generate(g);
            let set = match (balanced, random) {
                (Some(tag), None) => sample_balanced_subset(&m, m.vocab().require(tag)?, *per_class, split, seed)?,
                (None, Some(n)) => sample_random_subset(&m, &tag_ids(&m, tags)?, *n, split, seed)?,
                _ => bail!("give either --balanced <tag> or --random <n> --tags <tags>"),
            };
            let out = g.out.clone().unwrap_or_else(|| PathBuf::from("subset.tsv"));
            save_binary(&out, &provenance(Some(seed)), |p| set.save(p, &m))?;
            println!("{} records -> {}", set.records.len(), out.display());
            Ok(())
        }
    }
}

fn annotate(g: &Global, a: &crate::AnnotateArgs) -> Result<()> {
    let m = load_labels(&a.labels)?;
    let mut set = AnnotationSet::load(&a.subset, &m)?;
    let journal = journal_path(&a.subset);
    let resumed = replay(&mut set, &m, &read_journal(&journal)?);
    if resumed > 0 {
        eprintln!("resuming: {resumed} answers restored from {}", journal.display());
    }
    let annotator = a
        .annotator
        .clone()
        .or_else(|| std::env::var("USER").ok())
        .unwrap_or_else(|| "annotator".into());
    let session = Session {
        matrix: &m,
        journal: journal.clone(),
        annotator,
        audio_dir: a.audio_dir.clone(),
        player: std::env::var("TAGNOISE_PLAYER").ok().filter(|s| !s.trim().is_empty()),
    };
    if a.audio_dir.is_some() && session.player.is_none() {
        eprintln!("TAGNOISE_PLAYER is not set; audio paths are shown but not played");
    }
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let outcome = session.run(&mut set, &mut stdin.lock(), &mut stdout.lock())?;
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("annotations.tsv"));
    save_binary(&out, &provenance(None), |p| set.save(p, &m))?;
    match outcome {
        Outcome::Complete => println!("all {} records judged -> {}", set.records.len(), out.display()),
        Outcome::Quit { pending } => println!(
            "stopped with {pending} pending; progress is in {} - rerun the same command to resume",
            journal.display()
        ),
    }
    Ok(())
}

fn pct(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

fn interval_cells(i: Option<&Interval>, scale: f64, decimals: usize) -> [String; 2] {
    [
        fmt_opt(i.map(|i| scale * i.low), decimals),
        fmt_opt(i.map(|i| scale * i.high), decimals),
    ]
}

fn estimate(g: &Global, a: &crate::EstimateArgs) -> Result<()> {
    let seed = a.ci.then(|| seed_or_generate(g));
    let boot = BootstrapConfig {
        n_resamples: a.resamples,
        level: 0.95,
        seed: seed.unwrap_or(0),
    };
    let mut header: Vec<&str> = vec![
        "tag", "p_pos_pct", "p_neg_pct", "precision_pct", "recall_pct", "n_plus", "n_plus_pct", "estimate", "estimate_pct",
    ];
    if a.ci {
        header.extend(["precision_low", "precision_high", "recall_low", "recall_high", "estimate_low", "estimate_high"]);
    }
    let mut t = Table::new(header);
    let mut row = |name: &str, rates: &NoiseRates, counts: &ConfusionCounts, n_plus: u64, total: u64, ci: Option<[Option<Interval>; 3]>| {
        let est = corrected_count(n_plus, total, rates);
        let mut r = vec![
            name.to_string(),
            pct(rates.p_pos),
            pct(rates.p_neg),
            fmt_opt(counts.precision().map(|v| 100.0 * v), 1),
            fmt_opt(counts.recall().map(|v| 100.0 * v), 1),
            n_plus.to_string(),
            pct(n_plus as f64 / total as f64),
            format!("{est:.2}"),
            pct(est / total as f64),
        ];
        if let Some([p, rc, e]) = ci {
            r.extend(interval_cells(p.as_ref(), 100.0, 1));
            r.extend(interval_cells(rc.as_ref(), 100.0, 1));
            r.extend(interval_cells(e.as_ref(), 1.0, 2));
        }
        t.push(r);
    };

    if a.table2 {
        for (j, rt) in REFERENCE_TAGS.iter().enumerate() {
            let rates = rt.rates(j);
            let ci = match a.ci {
                true => {
                    let q = rt.quality(j, &boot)?;
                    let e = estimate_prevalence(rt.n_plus, REFERENCE_TOTAL, &rates, &boot)?;
                    Some([Some(q.precision), q.recall, Some(e.estimate)])
                }
                false => None,
            };
            row(rt.name, &rates, &rates.counts(), rt.n_plus, REFERENCE_TOTAL, ci);
        }
    } else {
        let labels = a.labels.as_ref().expect("clap requires --labels");
        let m = load_labels(labels)?;
        let set = AnnotationSet::load(a.annotations.as_ref().expect("clap requires --annotations"), &m)?;
        let tags = if a.tags.is_empty() {
            let mut ids: Vec<usize> = set.records.iter().map(|r| r.tag).collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        } else {
            tag_ids(&m, &a.tags)?
        };
        ensure!(!tags.is_empty(), "the annotation file has no records");
        let pending = set.pending();
        if pending > 0 {
            log::warn!("{pending} records are still pending and are ignored");
        }
        let counts_all = m.column_counts();
        for &tag in &tags {
            let name = m.vocab().tag(tag);
            let (counts, skipped) = ConfusionCounts::from_annotations(&m, &set, tag)?;
            if skipped > 0 {
                log::warn!("tag `{name}`: {skipped} skipped verdicts excluded");
            }
            let rates = NoiseRates::from_counts(tag, &counts).with_context(|| format!("tag `{name}`"))?;
            let n_plus = counts_all[tag];
            let ci = match a.ci {
                true => {
                    let q = groundtruth_quality(&m, &set, tag, &boot)?;
                    let e = estimate_prevalence(n_plus, m.n_tracks() as u64, &rates, &boot)?;
                    Some([Some(q.precision), q.recall, Some(e.estimate)])
                }
                false => None,
            };
            row(name, &rates, &counts, n_plus, m.n_tracks() as u64, ci);
        }
    }
    t.emit(g.out.as_deref(), g.format, &provenance(seed).comment_header("#"))
}

fn inject(g: &Global, a: &crate::InjectArgs) -> Result<()> {
    let m = load_labels(&a.labels)?;
    let (spec, seed) = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let has_seed = text.lines().any(|l| l.split([',', '=']).next().is_some_and(|k| k.trim() == "seed"));
            let mut spec = NoiseSpec::parse(&text, m.vocab())?;
            if g.seed.is_some() || !has_seed {
                spec.seed = seed_or_generate(g);
            }
            let s = spec.seed;
            (spec, s)
        }
        None => {
            let noise = TagNoise {
                drop_rate: a.drop.unwrap_or(0.0),
                spurious_rate: a.spurious.unwrap_or(0.0),
            };
            ensure!(a.drop.is_some() || a.spurious.is_some(), "give --spec, or --drop and/or --spurious");
            let s = seed_or_generate(g);
            (NoiseSpec::uniform(m.n_tags(), noise, s), s)
        }
    };
    let (noisy, report) = inject_noise(&m, &spec)?;
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("noisy.tlm"));
    save_binary(&out, &provenance(Some(seed)), |p| noisy.save(p))?;
    let mut t = Table::new(["tag", "drop_rate", "spurious_rate", "dropped", "added"]);
    for j in 0..m.n_tags() {
        let r = spec.rates[j];
        t.push(vec![
            m.vocab().tag(j).into(),
            r.drop_rate.to_string(),
            r.spurious_rate.to_string(),
            report.dropped[j].to_string(),
            report.added[j].to_string(),
        ]);
    }
    t.emit(None, g.format, &provenance(Some(seed)).comment_header("#"))?;
    eprintln!("{} flips -> {}", report.total_flips(), out.display());
    Ok(())
}

fn featurize(g: &Global, a: &crate::FeaturizeArgs) -> Result<()> {
    let scale = match a.scale.as_str() {
        "power" => SpectrumScale::Power,
        "magnitude" => SpectrumScale::Magnitude,
        o => bail!("unknown spectrum scale `{o}` (power or magnitude)"),
    };
    let cfg = FeatureConfig {
        mel: MelConfig {
            n_fft: a.n_fft,
            hop: a.hop,
            n_mels: a.n_mels,
            f_max: a.f_max,
            scale,
            ..MelConfig::default()
        },
        target_frames: (a.frames > 0).then_some(a.frames),
    };
    ensure!(cfg.mel.n_fft >= 2 && cfg.mel.hop > 0 && cfg.mel.n_mels > 0, "bad frame or mel settings");
    ensure!(
        a.f_max > 0.0 && a.f_max <= cfg.mel.sample_rate as f64 / 2.0,
        "--f-max must lie in (0, {}]",
        cfg.mel.sample_rate / 2
    );
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("features"));
    let prov = provenance(None);
    let results = featurize_dir(&a.audio_dir, &out, &cfg)?;
    let mut failed = 0;
    for (wav, r) in &results {
        match r {
            Ok(p) => {
                prov.write_sidecar(p)?;
            }
            Err(e) => {
                failed += 1;
                eprintln!("{}: {e}", wav.display());
            }
        }
    }
    println!("{} of {} files featurized -> {}", results.len() - failed, results.len(), out.display());
    ensure!(failed == 0, "{failed} file(s) failed");
    Ok(())
}

/// Every `.mels` file in `dir` whose stem names a track of `labels`.
fn load_features(dir: &Path, labels: &LabelMatrix) -> Result<Vec<MelSpectrogram>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mels"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    let mut unknown = 0;
    for p in paths {
        let f = MelSpectrogram::load(&p)?;
        if labels.track_position(&f.source_id).is_some() {
            out.push(f);
        } else {
            unknown += 1;
        }
    }
    if unknown > 0 {
        log::warn!("{unknown} feature files name tracks missing from the labels");
    }
    ensure!(!out.is_empty(), "no feature file in {} matches a labelled track", dir.display());
    Ok(out)
}

fn subset_by_split(features: &[MelSpectrogram], labels: &LabelMatrix, split: SplitFilter) -> Vec<MelSpectrogram> {
    features
        .iter()
        .filter(|f| labels.track_position(&f.source_id).is_some_and(|t| split.accepts(labels.split_of(t))))
        .cloned()
        .collect()
}

fn train_cmd(g: &Global, a: &crate::TrainArgs) -> Result<()> {
    let m = load_labels(&a.labels)?;
    let feats = load_features(&a.features, &m)?;
    let k = m.n_tags();
    let mut arch = match a.arch.as_str() {
        "compact" => ArchSpec { n_outputs: k, ..ArchSpec::compact() },
        "small" => ArchSpec::small(k),
        "tiny" => ArchSpec::tiny(k),
        o => bail!("unknown architecture `{o}` (compact, small or tiny)"),
    };
    arch.input = (1, feats[0].n_mels, feats[0].n_frames);
    arch.validate()?;
    let seed = seed_or_generate(g);
    let cfg = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch_size,
        max_epochs: a.epochs,
        patience: a.patience,
        seed,
        precision: a.precision.parse::<Precision>()?,
        ..TrainConfig::default()
    };
    let tr = subset_by_split(&feats, &m, "train".parse()?);
    let va = subset_by_split(&feats, &m, "valid".parse()?);
    ensure!(!tr.is_empty() && !va.is_empty(), "need featurized tracks in both the train and valid splits");
    let train_set = Dataset::from_features(&tr, &m, &arch)?;
    let valid_set = Dataset::from_features(&va, &m, &arch)?;
    eprintln!("training on {} tracks, validating on {}", train_set.len(), valid_set.len());
    let outcome = train(&arch, &cfg, &train_set, &valid_set)?;

    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("model.ccnn"));
    let prov = provenance(Some(seed));
    let mut extra = prov.fields();
    extra.push(("stop", outcome.stop.to_string()));
    extra.push(("best_epoch", outcome.best_epoch.map_or("none".into(), |e| e.to_string())));
    let meta = standard_metadata::<f32>(m.vocab().tags(), &extra);
    save_checkpoint(&out, &outcome.params, &meta)?;
    prov.write_sidecar(&out)?;
    let mut log_path = out.as_os_str().to_owned();
    log_path.push(".log.csv");
    let mut buf = prov.comment_header("#").into_bytes();
    write_training_log(&mut buf, &outcome.log)?;
    std::fs::write(&log_path, buf).with_context(|| format!("writing {}", Path::new(&log_path).display()))?;
    let last = outcome.log.last();
    println!(
        "stopped ({}) after {} epochs; best epoch {:?}; last validation AUC {} -> {}",
        outcome.stop,
        outcome.log.len(),
        outcome.best_epoch,
        fmt_opt(last.and_then(|e| e.valid_auc), 4),
        out.display()
    );
    ensure!(outcome.stop != tagnoise::convnet::StopReason::Diverged, "training diverged; the checkpoint holds the last finite parameters");
    Ok(())
}

fn eval_table(r: &EvalReport, ci: bool) -> Table {
    let mut header = vec!["tag", "n_pos", "n_neg", "auc"];
    if ci {
        header.extend(["ci_low", "ci_high"]);
    }
    let mut t = Table::new(header);
    for a in &r.tags {
        let mut row = vec![a.name.clone(), a.n_pos.to_string(), a.n_neg.to_string(), fmt_opt(a.auc, 6)];
        if ci {
            row.extend(interval_cells(a.ci.as_ref(), 1.0, 6));
        }
        t.push(row);
    }
    let mut row = vec!["(macro)".to_string(), String::new(), String::new(), fmt_opt(r.macro_auc, 6)];
    if ci {
        row.extend([String::new(), String::new()]);
    }
    t.push(row);
    t
}

fn evaluate_cmd(g: &Global, a: &crate::EvaluateArgs) -> Result<()> {
    let m = load_labels(&a.labels)?;
    let split = split_filter(&a.split)?;
    let scores = match (&a.model, &a.scores) {
        (Some(model), None) => {
            let ckpt = load_checkpoint::<f32>(model)?;
            if let Some(tags) = ckpt.tags() {
                ensure!(tags.as_slice() == m.vocab().tags(), "the model was trained on a different tag vocabulary");
            }
            let dir = a.features.as_ref().ok_or_else(|| anyhow!("--model needs --features"))?;
            let feats = subset_by_split(&load_features(dir, &m)?, &m, split);
            ensure!(!feats.is_empty(), "no featurized tracks in split `{split}`");
            let data = Dataset::from_features(&feats, &m, &ckpt.params.arch)?;
            let probs = predict(&ckpt.params, &data, 64)?;
            let s = ScoreMatrix::new(data.ids.clone(), m.n_tags(), probs.iter().map(|&p| p as f64).collect())?;
            if let Some(path) = &a.save_scores {
                let mut buf = provenance(None).comment_header("#").into_bytes();
                s.write_csv(&mut buf, m.vocab().tags())?;
                std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
            }
            s
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let (s, tags) = ScoreMatrix::read_csv(&text, &path.display().to_string())?;
            ensure!(tags.as_slice() == m.vocab().tags(), "score columns do not match the label vocabulary");
            let rows: Vec<usize> = (0..s.n_tracks())
                .filter(|&i| m.track_position(&s.track_ids[i]).is_some_and(|t| split.accepts(m.split_of(t))))
                .collect();
            s.select(&rows)
        }
        _ => bail!("give exactly one of --model or --scores"),
    };
    let tags = if a.tags.is_empty() { (0..m.n_tags()).collect() } else { tag_ids(&m, &a.tags)? };
    let seed = a.ci.then(|| seed_or_generate(g));
    let boot = seed.map(|s| BootstrapConfig {
        n_resamples: a.resamples,
        level: 0.95,
        seed: s,
    });
    let annotations = a.annotations.as_ref().map(|p| AnnotationSet::load(p, &m)).transpose()?;
    let reference = match &annotations {
        Some(set) => Reference::Annotation(set, &m),
        None => Reference::Groundtruth(&m),
    };
    let report = evaluate(&scores, &reference, &tags, boot.as_ref())?;
    let mut header = provenance(seed).comment_header("#");
    header.push_str(&format!("# reference={}\n", report.source));
    eval_table(&report, a.ci).emit(g.out.as_deref(), g.format, &header)
}

/// Per-tag AUCs and the macro row of an `evaluate` output.
fn read_eval(path: &Path) -> Result<(Vec<(String, Option<f64>)>, Option<f64>)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| anyhow!("{}: empty file", path.display()))?;
    let format = if header.contains('\t') { Format::Tsv } else { Format::Csv };
    let cols = split_line(header, format);
    let auc_col = cols
        .iter()
        .position(|c| c == "auc")
        .ok_or_else(|| anyhow!("{}: no `auc` column", path.display()))?;
    let mut tags = Vec::new();
    let mut macro_auc = None;
    for line in lines {
        let f = split_line(line, format);
        let v = f.get(auc_col).filter(|s| !s.is_empty()).map(|s| s.parse::<f64>()).transpose()?;
        match f[0].as_str() {
            "(macro)" => macro_auc = v,
            _ => tags.push((f[0].clone(), v)),
        }
    }
    Ok((tags, macro_auc))
}

fn correlate(g: &Global, a: &crate::CorrelateArgs) -> Result<()> {
    let report = if a.pair.len() == 2 {
        let (x, _) = read_eval(&a.pair[0])?;
        let (y, _) = read_eval(&a.pair[1])?;
        let ym: HashMap<&str, Option<f64>> = y.iter().map(|(t, v)| (t.as_str(), *v)).collect();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (tag, v) in &x {
            if let (Some(a), Some(Some(b))) = (v, ym.get(tag.as_str())) {
                xs.push(*a);
                ys.push(*b);
            }
        }
        CorrelationReport::compute(&xs, &ys, &a.pair[0].display().to_string(), &a.pair[1].display().to_string())?
    } else {
        ensure!(!a.runs_a.is_empty(), "give two evaluation files, or --runs-a and --runs-b");
        ensure!(a.runs_a.len() == a.runs_b.len(), "--runs-a and --runs-b need the same number of files");
        let summary = |path: &PathBuf| -> Result<f64> {
            let (tags, macro_auc) = read_eval(path)?;
            let v = match a.aggregate.as_str() {
                "macro" => macro_auc,
                list => {
                    let wanted: Vec<&str> = list.split(',').map(str::trim).collect();
                    let vals: Option<Vec<f64>> = wanted
                        .iter()
                        .map(|w| tags.iter().find(|(t, _)| t == w).and_then(|(_, v)| *v))
                        .collect();
                    vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
                }
            };
            v.ok_or_else(|| anyhow!("{}: summary AUC undefined", path.display()))
        };
        let xs = a.runs_a.iter().map(summary).collect::<Result<Vec<_>>>()?;
        let ys = a.runs_b.iter().map(summary).collect::<Result<Vec<_>>>()?;
        let label = format!("runs ({})", a.aggregate);
        CorrelationReport::compute(&xs, &ys, &format!("{label} a"), &format!("{label} b"))?
    };
    let mut t = Table::new(["x", "y", "n", "pearson", "spearman"]);
    t.push(vec![
        report.label_x.clone(),
        report.label_y.clone(),
        report.n.to_string(),
        format!("{:.6}", report.pearson),
        format!("{:.6}", report.spearman),
    ]);
    t.emit(g.out.as_deref(), g.format, &provenance(None).comment_header("#"))
}

fn lvs(g: &Global, a: &crate::LvsArgs) -> Result<()> {
    let ckpt = load_checkpoint::<f32>(&a.model)?;
    let tags = ckpt
        .tags()
        .unwrap_or_else(|| (0..ckpt.params.arch.n_outputs).map(|j| format!("tag{j}")).collect());
    let vectors = tagnoise::convnet::extract_label_vectors(&ckpt.params, &tags, &ckpt.id)?;
    let sim = if a.cosine { compute_cosine_lvs(&vectors)? } else { compute_lvs(&vectors)? };
    let prov = provenance(None);
    let header = prov.comment_header("#");

    let mut matrix = Table::new(std::iter::once("tag".to_string()).chain(tags.iter().cloned()));
    for (i, name) in tags.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend((0..tags.len()).map(|j| format!("{:.6}", sim.get(i, j))));
        matrix.push(row);
    }
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("lvs.csv"));
    matrix.emit(Some(&out), g.format, &header)?;

    let n_pairs = tags.len() * tags.len().saturating_sub(1) / 2;
    let mut pairs = Table::new(["rank", "tag_i", "tag_j", "similarity"]);
    for (r, p) in rank_lvs_pairs(&sim, a.top.min(n_pairs))?.iter().enumerate() {
        pairs.push(vec![(r + 1).to_string(), tags[p.i].clone(), tags[p.j].clone(), format!("{:.6}", p.score)]);
    }
    pairs.emit(None, g.format, "")?;
    eprintln!("{} of {n_pairs} pairs have negative similarity; matrix -> {}", sim.negative_pairs(), out.display());

    if let Some(labels) = &a.labels {
        let m = load_labels(labels)?;
        let nco = compute_nco(&m, split_filter(&a.split)?)?;
        let threshold = DivergenceThreshold {
            max_lvs_rank: a.max_lvs_rank,
            min_nco_rank: a.min_nco_rank,
        };
        let cmp = compare_lvs_nco(&sim, &nco, threshold)?;
        println!();
        println!(
            "rank correlation with co-occurrence over {} pairs: pearson {:.4}, spearman {:.4}",
            cmp.n_pairs, cmp.correlation.pearson, cmp.correlation.spearman
        );
        let mut d = Table::new(["tag_i", "tag_j", "lvs_rank", "nco_rank", "lvs", "nco"]);
        for v in &cmp.divergences {
            d.push(vec![
                tags[v.i].clone(),
                tags[v.j].clone(),
                v.lvs_rank.to_string(),
                v.nco_rank.to_string(),
                format!("{:.6}", v.lvs_score),
                format!("{:.6}", v.nco_score),
            ]);
        }
        d.emit(None, g.format, "")?;
    }
    Ok(())
}

fn experiment(g: &Global, a: &crate::ExperimentArgs) -> Result<()> {
    let mut cfg = match (&a.preset, &a.config) {
        (Some(p), None) => ExperimentConfig::preset(p)
            .with_context(|| format!("presets: {}", ExperimentConfig::preset_names().join(", ")))?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        _ => bail!("give exactly one of --preset or --config"),
    };
    if let Some(seed) = g.seed {
        cfg.synthetic.seed = seed;
        cfg.train.seed = seed.wrapping_add(2);
    }
    if a.print_config {
        print!("{}", cfg.to_text());
        return Ok(());
    }
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    eprintln!("running synthetic sweep (seed {}) -> {}", cfg.seed(), out.display());
    let mut result = run_noise_sweep(&cfg)?;
    result.provenance.command_line = command_line();
    let files = write_report(&result, &out)?;
    let mut t = Table::new(["tag", "drop_rate", "tagability", "auc_clean", "auc_noisy"]);
    for r in &result.tags {
        t.push(vec![
            r.name.clone(),
            r.drop_rate.to_string(),
            fmt_opt(r.tagability, 4),
            fmt_opt(r.auc_clean, 4),
            fmt_opt(r.auc_noisy, 4),
        ]);
    }
    t.emit(None, g.format, "")?;
    println!(
        "spearman(tagability, AUC clean) {}; pearson(AUC clean, AUC noisy) {}; {} files written",
        fmt_opt(result.spearman_tagability_clean, 4),
        fmt_opt(result.pearson_clean_noisy, 4),
        files.len()
    );
    Ok(())
}

const REPORT_FILES: [&str; 9] = [
    "config.txt",
    "result.csv",
    "training_log.csv",
    "nco.csv",
    "lvs.csv",
    "charts/tagability_auc.svg",
    "charts/nco.svg",
    "charts/lvs.svg",
    "checkpoint.ccnn",
];

fn report(g: &Global, a: &crate::ReportArgs) -> Result<()> {
    let missing: Vec<&str> = REPORT_FILES.iter().copied().filter(|f| !a.dir.join(f).exists()).collect();
    let path = a.dir.join("result.csv");
    let f = std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let mut comments = Vec::new();
    let mut t: Option<Table> = None;
    for line in std::io::BufReader::new(f).lines() {
        let line = line?;
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
            continue;
        }
        let cells = split_line(&line, Format::Csv);
        match t.as_mut() {
            None => t = Some(Table::new(cells)),
            Some(t) => t.push(cells),
        }
    }
    let t = t.ok_or_else(|| anyhow!("{}: no table", path.display()))?;
    let mut out = std::io::stdout().lock();
    for c in &comments {
        writeln!(out, "{c}")?;
    }
    writeln!(out)?;
    t.write(&mut out, g.format, "")?;
    ensure!(missing.is_empty(), "results directory is incomplete; missing {}", missing.join(", "));
    Ok(())
}
