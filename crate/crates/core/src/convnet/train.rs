use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::ArchSpec;
use super::network::{backward, bce_with_logits, forward, update_running_stats, Mode};
use super::params::{Adam, ModelParams};
use super::scalar::Scalar;
use crate::dsp::MelSpectrogram;
use crate::eval::macro_auc;
use crate::tagdata::LabelMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            o => Err(Error::Invalid(format!("unknown precision `{o}`"))),
        }
    }
}

/// Adam hyper-parameters and the training schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-loss improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 16,
            max_epochs: 50,
            patience: 5,
            seed: 0,
            precision: Precision::F32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 {
            return Err(Error::Invalid("batch size and patience must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0)
            || !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.epsilon > 0.0)
        {
            return Err(Error::Invalid(format!("bad optimiser settings {self:?}")));
        }
        Ok(())
    }
}

/// Inputs and binary targets, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    /// `n × (c·h·w)`
    pub inputs: Vec<f32>,
    /// `n × n_outputs`, 0 or 1
    pub targets: Vec<f32>,
    pub sample_len: usize,
    pub n_outputs: usize,
}

impl Dataset {
    pub fn new(ids: Vec<String>, inputs: Vec<f32>, targets: Vec<f32>, sample_len: usize, n_outputs: usize) -> Result<Self> {
        let n = ids.len();
        if inputs.len() != n * sample_len || targets.len() != n * n_outputs {
            return Err(Error::Shape(format!(
                "{n} samples need {} inputs and {} targets, got {} and {}",
                n * sample_len,
                n * n_outputs,
                inputs.len(),
                targets.len()
            )));
        }
        Ok(Dataset {
            ids,
            inputs,
            targets,
            sample_len,
            n_outputs,
        })
    }

    /// Pairs each spectrogram with the label row of the track named by its
    /// `source_id`.
    pub fn from_features(features: &[MelSpectrogram], labels: &LabelMatrix, arch: &ArchSpec) -> Result<Self> {
        let (c, h, w) = arch.input;
        if c != 1 {
            return Err(Error::Shape("spectrogram input needs a single channel".into()));
        }
        if labels.n_tags() != arch.n_outputs {
            return Err(Error::Shape(format!(
                "{} tags for {} outputs",
                labels.n_tags(),
                arch.n_outputs
            )));
        }
        let k = arch.n_outputs;
        let mut inputs = Vec::with_capacity(features.len() * h * w);
        let mut targets = Vec::with_capacity(features.len() * k);
        let mut ids = Vec::with_capacity(features.len());
        for f in features {
            if (f.n_mels, f.n_frames) != (h, w) {
                return Err(Error::Shape(format!(
                    "{}: spectrogram is {}×{}, network expects {h}×{w}",
                    f.source_id, f.n_mels, f.n_frames
                )));
            }
            let t = labels
                .track_position(&f.source_id)
                .ok_or_else(|| Error::UnknownTrack(f.source_id.clone()))?;
            inputs.extend_from_slice(&f.values);
            targets.extend((0..k).map(|j| if labels.contains(t, j) { 1.0 } else { 0.0 }));
            ids.push(f.source_id.clone());
        }
        Dataset::new(ids, inputs, targets, h * w, k)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let (s, k) = (self.sample_len, self.n_outputs);
        Dataset {
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            inputs: rows.iter().flat_map(|&r| self.inputs[r * s..(r + 1) * s].iter().copied()).collect(),
            targets: rows.iter().flat_map(|&r| self.targets[r * k..(r + 1) * k].iter().copied()).collect(),
            sample_len: s,
            n_outputs: k,
        }
    }

    fn gather<T: Scalar>(&self, rows: &[usize]) -> (Vec<T>, Vec<T>) {
        let (s, k) = (self.sample_len, self.n_outputs);
        let x = rows
            .iter()
            .flat_map(|&r| self.inputs[r * s..(r + 1) * s].iter().map(|&v| T::of(v as f64)))
            .collect();
        let y = rows
            .iter()
            .flat_map(|&r| self.targets[r * k..(r + 1) * k].iter().map(|&v| T::of(v as f64)))
            .collect();
        (x, y)
    }

    pub fn target_flags(&self) -> Vec<bool> {
        self.targets.iter().map(|&v| v > 0.5).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
    /// Macro AUC over validation tags that have both classes.
    pub valid_auc: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
    /// A non-finite loss or activation; the returned parameters are the best
    /// finite ones seen before it.
    Diverged,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxEpochs => "max-epochs",
            StopReason::EarlyStop => "early-stop",
            StopReason::Diverged => "diverged",
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation loss.
    pub params: ModelParams<f32>,
    pub best_epoch: Option<usize>,
    pub log: Vec<EpochLog>,
    pub stop: StopReason,
}

/// Writes `epoch,train_loss,valid_loss,valid_auc,wall_seconds`.
pub fn write_training_log(w: &mut impl Write, log: &[EpochLog]) -> std::io::Result<()> {
    writeln!(w, "epoch,train_loss,valid_loss,valid_auc,wall_seconds")?;
    for e in log {
        writeln!(
            w,
            "{},{:.8},{:.8},{},{:.3}",
            e.epoch,
            e.train_loss,
            e.valid_loss,
            e.valid_auc.map(|a| format!("{a:.8}")).unwrap_or_default(),
            e.wall_seconds
        )?;
    }
    Ok(())
}

/// Eval-mode probabilities for every sample, `n × n_outputs`.
pub fn predict<T: Scalar>(params: &ModelParams<T>, data: &Dataset, batch_size: usize) -> Result<Vec<f32>> {
    check_dataset(&params.arch, data)?;
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut out = Vec::with_capacity(data.len() * data.n_outputs);
    for rows in idx.chunks(batch_size.max(1)) {
        let (x, _) = data.gather::<T>(rows);
        let f = forward(params, &x, rows.len(), Mode::Eval)?;
        out.extend(f.probs.iter().map(|p| p.as_f64() as f32));
    }
    Ok(out)
}

fn check_dataset(arch: &ArchSpec, data: &Dataset) -> Result<()> {
    let (c, h, w) = arch.input;
    if data.sample_len != c * h * w || data.n_outputs != arch.n_outputs {
        return Err(Error::Shape(format!(
            "dataset samples are {} values with {} targets, network takes {} with {}",
            data.sample_len,
            data.n_outputs,
            c * h * w,
            arch.n_outputs
        )));
    }
    Ok(())
}

fn valid_metrics<T: Scalar>(params: &ModelParams<T>, data: &Dataset, batch: usize) -> Result<(f64, Option<f64>)> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    let mut probs = Vec::with_capacity(data.len() * data.n_outputs);
    for rows in idx.chunks(batch.max(1)) {
        let (x, y) = data.gather::<T>(rows);
        let f = forward(params, &x, rows.len(), Mode::Eval)?;
        total += bce_with_logits(&f.logits, &y) * rows.len() as f64;
        probs.extend(f.probs.iter().map(|p| p.as_f64()));
    }
    let loss = total / data.len() as f64;
    Ok((loss, macro_auc(&probs, &data.target_flags(), data.n_outputs)))
}

/// Mini-batch Adam on binary cross-entropy with early stopping on the
/// validation loss. Batches are reshuffled every epoch from `config.seed`;
/// initial weights are He-uniform draws from the same seed.
pub fn train(arch: &ArchSpec, config: &TrainConfig, train_set: &Dataset, valid_set: &Dataset) -> Result<TrainOutcome> {
    match config.precision {
        Precision::F32 => train_as::<f32>(arch, config, train_set, valid_set),
        Precision::F64 => train_as::<f64>(arch, config, train_set, valid_set),
    }
}

fn train_as<T: Scalar>(arch: &ArchSpec, config: &TrainConfig, train_set: &Dataset, valid_set: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    check_dataset(arch, train_set)?;
    check_dataset(arch, valid_set)?;
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(Error::Invalid("training and validation sets must be non-empty".into()));
    }
    let mut params = ModelParams::<T>::he_uniform(arch, config.seed)?;
    let mut opt = Adam::new(&params, config.learning_rate, config.beta1, config.beta2, config.epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut best: Option<(f64, usize, ModelParams<T>)> = None;
    let mut since_best = 0;
    let mut log = Vec::new();
    let mut stop = StopReason::MaxEpochs;
    let start = Instant::now();

    'epochs: for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for rows in order.chunks(config.batch_size) {
            let (x, y) = train_set.gather::<T>(rows);
            let f = match forward(&params, &x, rows.len(), Mode::Train) {
                Ok(f) => f,
                Err(Error::NonFinite(where_)) => {
                    log::warn!("epoch {epoch}: non-finite activation in {where_}");
                    stop = StopReason::Diverged;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            let loss = bce_with_logits(&f.logits, &y);
            if !loss.is_finite() {
                log::warn!("epoch {epoch}: non-finite training loss");
                stop = StopReason::Diverged;
                break 'epochs;
            }
            total += loss * rows.len() as f64;
            let grads = backward(&params, &f, &y)?;
            if grads.iter().flatten().any(|g| !g.is_finite()) {
                log::warn!("epoch {epoch}: non-finite gradient");
                stop = StopReason::Diverged;
                break 'epochs;
            }
            opt.update(&mut params, &grads);
            update_running_stats(&mut params, &f);
        }
        let (valid_loss, valid_auc) = match valid_metrics(&params, valid_set, config.batch_size.max(32)) {
            Ok(m) if m.0.is_finite() => m,
            Ok(_) | Err(Error::NonFinite(_)) => {
                log::warn!("epoch {epoch}: non-finite validation loss");
                stop = StopReason::Diverged;
                break 'epochs;
            }
            Err(e) => return Err(e),
        };
        let entry = EpochLog {
            epoch,
            train_loss: total / train_set.len() as f64,
            valid_loss,
            valid_auc,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: train {:.5} valid {:.5} auc {}",
            entry.train_loss,
            entry.valid_loss,
            valid_auc.map(|a| format!("{a:.4}")).unwrap_or_else(|| "-".into())
        );
        log.push(entry);
        if best.as_ref().is_none_or(|(l, _, _)| valid_loss < *l) {
            best = Some((valid_loss, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stop = StopReason::EarlyStop;
                break;
            }
        }
    }

    let (best_epoch, params) = match best {
        Some((_, e, p)) => (Some(e), p),
        // diverged inside the first epoch: fall back to the initial draw
        None => (None, ModelParams::<T>::he_uniform(arch, config.seed)?),
    };
    Ok(TrainOutcome {
        params: params.cast(),
        best_epoch,
        log,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two tags lighting up disjoint halves of an 8×8 patch.
    fn separable(n: usize, seed: u64) -> Dataset {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..n {
            let a = rng.random_bool(0.5);
            let b = rng.random_bool(0.5);
            for r in 0..8 {
                for _ in 0..8 {
                    let on = (r < 4 && a) || (r >= 4 && b);
                    inputs.push(if on { 1.0 } else { 0.0 } + rng.random_range(-0.3..0.3));
                }
            }
            targets.push(a as u8 as f32);
            targets.push(b as u8 as f32);
        }
        Dataset::new((0..n).map(|i| i.to_string()).collect(), inputs, targets, 64, 2).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_trainables() {
        let arch = ArchSpec::tiny(2);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 3,
            seed: 4,
            ..Default::default()
        };
        let out = train(&arch, &cfg, &separable(40, 1), &separable(20, 2)).unwrap();
        let init = ModelParams::<f32>::he_uniform(&arch, 4).unwrap();
        assert_eq!(out.params.trainable(), init.trainable());
    }

    #[test]
    fn separable_set_is_learned() {
        let arch = ArchSpec::tiny(2);
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            max_epochs: 20,
            seed: 7,
            ..Default::default()
        };
        let out = train(&arch, &cfg, &separable(200, 1), &separable(60, 2)).unwrap();
        let best = out.log.iter().filter_map(|e| e.valid_auc).fold(0.0, f64::max);
        assert!(best >= 0.99, "{:?}", out.log);
    }

    #[test]
    fn log_csv_has_header() {
        let mut buf = Vec::new();
        let log = [EpochLog {
            epoch: 1,
            train_loss: 0.5,
            valid_loss: 0.25,
            valid_auc: None,
            wall_seconds: 1.0,
        }];
        write_training_log(&mut buf, &log).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "epoch,train_loss,valid_loss,valid_auc,wall_seconds\n1,0.50000000,0.25000000,,1.000\n"
        );
    }

    #[test]
    fn mismatched_dataset_is_rejected() {
        let arch = ArchSpec::tiny(3);
        let d = separable(4, 1);
        assert!(matches!(
            train(&arch, &TrainConfig::default(), &d, &d),
            Err(Error::Shape(_))
        ));
    }
}
