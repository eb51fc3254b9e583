use super::config::ExperimentConfig;
use super::synthetic::generate_synthetic;
use crate::convnet::{extract_label_vectors, predict, train, Dataset, EpochLog, ModelParams, StopReason};
use crate::cooccur::{compute_nco, CooccurrenceMatrix};
use crate::eval::{evaluate, pearson, spearman, Reference, ScoreMatrix};
use crate::lvs::{compare_lvs_nco, compute_lvs, DivergenceThreshold, LvsNcoComparison, SimilarityMatrix};
use crate::noise::{inject_noise, ConfusionCounts, InjectionReport, NoiseSpec, TagNoise};
use crate::provenance::Provenance;
use crate::tagdata::{LabelMatrix, Split};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TagResult {
    pub tag: usize,
    pub name: String,
    pub drop_rate: f64,
    /// Clean positives among test tracks.
    pub n_test_pos: usize,
    /// Recall of the noisy test labels against the clean ones.
    pub tagability: Option<f64>,
    pub auc_clean: Option<f64>,
    pub auc_noisy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub tags: Vec<TagResult>,
    pub spearman_tagability_clean: Option<f64>,
    pub spearman_tagability_noisy: Option<f64>,
    pub pearson_clean_noisy: Option<f64>,
    pub macro_auc_clean: Option<f64>,
    pub macro_auc_noisy: Option<f64>,
    pub injection: InjectionReport,
    pub log: Vec<EpochLog>,
    pub stop: StopReason,
    pub params: ModelParams<f32>,
    /// Co-occurrence of the noisy training labels the model was fit to.
    pub nco: CooccurrenceMatrix,
    pub lvs: SimilarityMatrix,
    pub lvs_vs_nco: Option<LvsNcoComparison>,
    pub provenance: Provenance,
}

impl ExperimentResult {
    pub fn tag_names(&self) -> Vec<String> {
        self.tags.iter().map(|t| t.name.clone()).collect()
    }
}

/// Cells where `noisy` differs from `clean` must be ones the noise model can
/// flip, and their per-tag counts must equal what injection reported.
fn check_contamination(clean: &LabelMatrix, noisy: &LabelMatrix, noise: &[TagNoise], report: &InjectionReport) -> Result<()> {
    let k = clean.n_tags();
    let (mut dropped, mut added) = (vec![0u64; k], vec![0u64; k]);
    for t in 0..clean.n_tracks() {
        if clean.track_id(t) != noisy.track_id(t) || clean.split_of(t) != noisy.split_of(t) {
            return Err(Error::Invalid(format!("track {t} changed identity or split under injection")));
        }
        for (j, n) in noise.iter().enumerate() {
            match (clean.contains(t, j), noisy.contains(t, j)) {
                (true, false) if n.drop_rate > 0.0 => dropped[j] += 1,
                (false, true) if n.spurious_rate > 0.0 => added[j] += 1,
                (a, b) if a != b => {
                    return Err(Error::Invalid(format!(
                        "label ({}, {}) changed although its noise rate is zero",
                        clean.track_id(t),
                        clean.vocab().tag(j)
                    )))
                }
                _ => {}
            }
        }
    }
    if dropped != report.dropped || added != report.added {
        return Err(Error::Invalid("label differences disagree with the injection report".into()));
    }
    Ok(())
}

fn dataset_for(rows: &[usize], data: &[crate::dsp::MelSpectrogram], labels: &LabelMatrix, cfg: &ExperimentConfig) -> Result<Dataset> {
    let feats: Vec<_> = rows.iter().map(|&t| data[t].clone()).collect();
    Dataset::from_features(&feats, labels, &cfg.arch)
}

/// Generates the synthetic set, corrupts its labels with the per-tag drop
/// schedule, trains on the noisy train/valid labels, and scores the test
/// split against both the clean and the noisy labels.
///
/// Injection covers every split so that noisy test labels exist; the clean
/// matrix is never modified, and a contamination check confirms that the two
/// differ only in cells the noise model was allowed to flip.
pub fn run_noise_sweep(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let spec = &config.synthetic;
    let k = spec.n_tags();
    let data = generate_synthetic(spec)?;
    let clean = &data.labels;

    let noise: Vec<TagNoise> = spec
        .drop_rates
        .iter()
        .map(|&d| TagNoise {
            drop_rate: d,
            spurious_rate: spec.spurious_rate,
        })
        .collect();
    let noise_spec = NoiseSpec {
        rates: noise.clone(),
        seed: config.noise_seed(),
    };
    let (noisy, injection) = inject_noise(clean, &noise_spec)?;
    check_contamination(clean, &noisy, &noise, &injection)?;

    let train_rows = noisy.tracks_in(Split::Train.into());
    let valid_rows = noisy.tracks_in(Split::Valid.into());
    let test_rows = noisy.tracks_in(Split::Test.into());
    if train_rows.is_empty() || valid_rows.is_empty() || test_rows.is_empty() {
        return Err(Error::Invalid("the sweep needs train, valid and test tracks".into()));
    }
    let train_set = dataset_for(&train_rows, &data.features, &noisy, config)?;
    let valid_set = dataset_for(&valid_rows, &data.features, &noisy, config)?;
    let test_set = dataset_for(&test_rows, &data.features, clean, config)?;

    let outcome = train(&config.arch, &config.train, &train_set, &valid_set)?;
    if outcome.stop == StopReason::Diverged {
        return Err(Error::NonFinite("training diverged".into()));
    }
    let probs = predict(&outcome.params, &test_set, 64)?;
    let scores = ScoreMatrix::new(
        test_set.ids.clone(),
        k,
        probs.iter().map(|&p| p as f64).collect(),
    )?;
    let all: Vec<usize> = (0..k).collect();
    let vs_clean = evaluate(&scores, &Reference::Groundtruth(clean), &all, None)?;
    let vs_noisy = evaluate(&scores, &Reference::Groundtruth(&noisy), &all, None)?;

    let tags: Vec<TagResult> = (0..k)
        .map(|j| {
            let counts = ConfusionCounts::from_pairs(
                test_rows.iter().map(|&t| (noisy.contains(t, j), clean.contains(t, j))),
            );
            TagResult {
                tag: j,
                name: spec.tag_names[j].clone(),
                drop_rate: spec.drop_rates[j],
                n_test_pos: test_rows.iter().filter(|&&t| clean.contains(t, j)).count(),
                tagability: counts.recall(),
                auc_clean: vs_clean.tag_auc(j),
                auc_noisy: vs_noisy.tag_auc(j),
            }
        })
        .collect();

    let complete: Vec<&TagResult> = tags
        .iter()
        .filter(|t| t.tagability.is_some() && t.auc_clean.is_some() && t.auc_noisy.is_some())
        .collect();
    let col = |f: fn(&TagResult) -> Option<f64>| complete.iter().map(|t| f(t).unwrap()).collect::<Vec<f64>>();
    let (tg, ac, an) = (col(|t| t.tagability), col(|t| t.auc_clean), col(|t| t.auc_noisy));

    let nco = compute_nco(&noisy, Split::Train.into())?;
    let vectors = extract_label_vectors(&outcome.params, &spec.tag_names, "experiment")?;
    let lvs = compute_lvs(&vectors)?;
    let lvs_vs_nco = compare_lvs_nco(&lvs, &nco, DivergenceThreshold::default()).ok();

    Ok(ExperimentResult {
        config: config.clone(),
        spearman_tagability_clean: spearman(&tg, &ac).ok(),
        spearman_tagability_noisy: spearman(&tg, &an).ok(),
        pearson_clean_noisy: pearson(&ac, &an).ok(),
        macro_auc_clean: vs_clean.macro_auc,
        macro_auc_noisy: vs_noisy.macro_auc,
        tags,
        injection,
        log: outcome.log,
        stop: outcome.stop,
        params: outcome.params,
        nco,
        lvs,
        lvs_vs_nco,
        provenance: Provenance::new("", Some(config.seed())).with_config_hash(config.config_hash()),
    })
}
