use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::synthetic::{SyntheticSpec, TagTemplate};
use crate::convnet::{ArchSpec, BlockSpec, TrainConfig};
use crate::provenance::config_hash;
use crate::{Error, Result};

/// Everything a sweep needs: data generator, network, and training schedule.
///
/// The master `seed` drives data generation; noise injection and training
/// use `seed + 1` and `seed + 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub synthetic: SyntheticSpec,
    pub arch: ArchSpec,
    pub train: TrainConfig,
}

const KEYS: &[&str] = &[
    "seed",
    "tags",
    "n_tags",
    "n_train",
    "n_valid",
    "n_test",
    "n_mels",
    "frames",
    "noise_level",
    "priors",
    "centers",
    "bandwidths",
    "energies",
    "drop_rates",
    "spurious_rate",
    "coactivation",
    "arch",
    "blocks",
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon",
    "batch_size",
    "max_epochs",
    "patience",
    "precision",
];

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e| Error::Invalid(format!("`{key}`: cannot parse `{v}`: {e}")))
}

/// Comma-separated reals; a single value is repeated `k` times.
fn parse_list(key: &str, v: &str, k: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = v
        .split(',')
        .map(|s| parse_num(key, s))
        .collect::<Result<_>>()?;
    match vals.len() {
        1 => Ok(vec![vals[0]; k]),
        n if n == k => Ok(vals),
        n => Err(Error::Invalid(format!("`{key}` lists {n} values for {k} tags"))),
    }
}

fn join(v: impl IntoIterator<Item = impl ToString>) -> String {
    v.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_pair(key: &str, s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once('x')
        .ok_or_else(|| Error::Invalid(format!("`{key}`: expected AxB, got `{s}`")))?;
    Ok((parse_num(key, a)?, parse_num(key, b)?))
}

/// `channels/kh x kw/ph x pw` per block, comma-separated.
fn parse_blocks(v: &str) -> Result<Vec<BlockSpec>> {
    v.split(',')
        .map(|b| {
            let parts: Vec<&str> = b.trim().split('/').collect();
            if parts.len() != 3 {
                return Err(Error::Invalid(format!("`blocks`: expected C/KxK/PxP, got `{b}`")));
            }
            Ok(BlockSpec {
                channels: parse_num("blocks", parts[0])?,
                kernel: parse_pair("blocks", parts[1])?,
                pool: parse_pair("blocks", parts[2])?,
            })
        })
        .collect()
}

fn preset_blocks(name: &str, k: usize) -> Result<Vec<BlockSpec>> {
    match name {
        "small" => Ok(ArchSpec::small(k).blocks),
        "tiny" => Ok(ArchSpec::tiny(k).blocks),
        "compact" => Ok(ArchSpec::compact().blocks),
        o => Err(Error::Invalid(format!("unknown arch preset `{o}` (small, tiny, compact)"))),
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unknown keys are
    /// errors. Missing keys take the defaults of the `sweep8` preset.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("line {}: expected key = value", ln + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::Invalid(format!("line {}: unknown key `{k}`", ln + 1)));
            }
            if kv.insert(k, v).is_some() {
                return Err(Error::Invalid(format!("line {}: `{k}` given twice", ln + 1)));
            }
        }
        let base = ExperimentConfig::preset("sweep8")?;
        let get = |k: &str| kv.get(k).copied();

        let tag_names: Vec<String> = match (get("tags"), get("n_tags")) {
            (Some(t), _) => t.split(',').map(|s| s.trim().to_string()).collect(),
            (None, Some(n)) => default_names(parse_num("n_tags", n)?),
            (None, None) => base.synthetic.tag_names.clone(),
        };
        let k = tag_names.len();
        if let Some(n) = get("n_tags") {
            if parse_num::<usize>("n_tags", n)? != k {
                return Err(Error::Invalid("`n_tags` disagrees with `tags`".into()));
            }
        }
        let b = &base.synthetic;
        let n_mels = get("n_mels").map_or(Ok(b.n_mels), |v| parse_num("n_mels", v))?;
        let list = |key: &str, default: f64| -> Result<Vec<f64>> {
            get(key).map_or(Ok(vec![default; k]), |v| parse_list(key, v, k))
        };
        let even = SyntheticSpec::evenly_spaced(k, n_mels, b.templates[0].bandwidth, b.templates[0].energy);
        let centers = match get("centers") {
            Some(v) => parse_list("centers", v, k)?,
            None => even.iter().map(|t| t.center).collect(),
        };
        let bandwidths = list("bandwidths", b.templates[0].bandwidth)?;
        let energies = list("energies", b.templates[0].energy)?;
        let coactivation = match get("coactivation") {
            None | Some("") | Some("none") => vec![],
            Some(v) => v
                .split(',')
                .map(|t| {
                    let p: Vec<&str> = t.trim().split(':').collect();
                    if p.len() != 3 {
                        return Err(Error::Invalid(format!("`coactivation`: expected a:b:w, got `{t}`")));
                    }
                    Ok((
                        parse_num("coactivation", p[0])?,
                        parse_num("coactivation", p[1])?,
                        parse_num("coactivation", p[2])?,
                    ))
                })
                .collect::<Result<_>>()?,
        };
        let seed = get("seed").map_or(Ok(b.seed), |v| parse_num("seed", v))?;
        let synthetic = SyntheticSpec {
            n_train: get("n_train").map_or(Ok(b.n_train), |v| parse_num("n_train", v))?,
            n_valid: get("n_valid").map_or(Ok(b.n_valid), |v| parse_num("n_valid", v))?,
            n_test: get("n_test").map_or(Ok(b.n_test), |v| parse_num("n_test", v))?,
            templates: (0..k)
                .map(|j| TagTemplate {
                    center: centers[j],
                    bandwidth: bandwidths[j],
                    energy: energies[j],
                })
                .collect(),
            priors: list("priors", b.priors[0])?,
            coactivation,
            n_mels,
            frames: get("frames").map_or(Ok(b.frames), |v| parse_num("frames", v))?,
            noise_level: get("noise_level").map_or(Ok(b.noise_level), |v| parse_num("noise_level", v))?,
            drop_rates: list("drop_rates", 0.0)?,
            spurious_rate: get("spurious_rate").map_or(Ok(0.0), |v| parse_num("spurious_rate", v))?,
            tag_names,
            seed,
        };
        let blocks = match (get("blocks"), get("arch")) {
            (Some(v), _) => parse_blocks(v)?,
            (None, Some(name)) => preset_blocks(name, k)?,
            (None, None) => base.arch.blocks.clone(),
        };
        let arch = ArchSpec {
            input: (1, synthetic.n_mels, synthetic.frames),
            blocks,
            n_outputs: k,
        };
        let t = &base.train;
        let train = TrainConfig {
            learning_rate: get("learning_rate").map_or(Ok(t.learning_rate), |v| parse_num("learning_rate", v))?,
            beta1: get("beta1").map_or(Ok(t.beta1), |v| parse_num("beta1", v))?,
            beta2: get("beta2").map_or(Ok(t.beta2), |v| parse_num("beta2", v))?,
            epsilon: get("epsilon").map_or(Ok(t.epsilon), |v| parse_num("epsilon", v))?,
            batch_size: get("batch_size").map_or(Ok(t.batch_size), |v| parse_num("batch_size", v))?,
            max_epochs: get("max_epochs").map_or(Ok(t.max_epochs), |v| parse_num("max_epochs", v))?,
            patience: get("patience").map_or(Ok(t.patience), |v| parse_num("patience", v))?,
            precision: get("precision").map_or(Ok(t.precision), |v| v.parse())?,
            seed: seed.wrapping_add(2),
        };
        let cfg = ExperimentConfig { synthetic, arch, train };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.synthetic.validate()?;
        self.arch.validate()?;
        self.train.validate()?;
        if self.arch.input != (1, self.synthetic.n_mels, self.synthetic.frames) {
            return Err(Error::Shape("network input must match the synthetic spectrogram size".into()));
        }
        if self.arch.n_outputs != self.synthetic.n_tags() {
            return Err(Error::Shape("network outputs must match the tag count".into()));
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text())` reproduces the config exactly.
    pub fn to_text(&self) -> String {
        let s = &self.synthetic;
        let t = &self.train;
        let mut out = String::new();
        let _ = writeln!(out, "# synthetic data");
        let _ = writeln!(out, "seed = {}", s.seed);
        let _ = writeln!(out, "tags = {}", s.tag_names.join(","));
        let _ = writeln!(out, "n_train = {}", s.n_train);
        let _ = writeln!(out, "n_valid = {}", s.n_valid);
        let _ = writeln!(out, "n_test = {}", s.n_test);
        let _ = writeln!(out, "n_mels = {}", s.n_mels);
        let _ = writeln!(out, "frames = {}", s.frames);
        let _ = writeln!(out, "noise_level = {}", s.noise_level);
        let _ = writeln!(out, "priors = {}", join(&s.priors));
        let _ = writeln!(out, "centers = {}", join(s.templates.iter().map(|t| t.center)));
        let _ = writeln!(out, "bandwidths = {}", join(s.templates.iter().map(|t| t.bandwidth)));
        let _ = writeln!(out, "energies = {}", join(s.templates.iter().map(|t| t.energy)));
        let _ = writeln!(out, "drop_rates = {}", join(&s.drop_rates));
        let _ = writeln!(out, "spurious_rate = {}", s.spurious_rate);
        let co = if s.coactivation.is_empty() {
            "none".to_string()
        } else {
            join(s.coactivation.iter().map(|(a, b, w)| format!("{a}:{b}:{w}")))
        };
        let _ = writeln!(out, "coactivation = {co}");
        let _ = writeln!(out, "# network");
        let blocks = join(self.arch.blocks.iter().map(|b| {
            format!("{}/{}x{}/{}x{}", b.channels, b.kernel.0, b.kernel.1, b.pool.0, b.pool.1)
        }));
        let _ = writeln!(out, "blocks = {blocks}");
        let _ = writeln!(out, "# training");
        let _ = writeln!(out, "learning_rate = {}", t.learning_rate);
        let _ = writeln!(out, "beta1 = {}", t.beta1);
        let _ = writeln!(out, "beta2 = {}", t.beta2);
        let _ = writeln!(out, "epsilon = {}", t.epsilon);
        let _ = writeln!(out, "batch_size = {}", t.batch_size);
        let _ = writeln!(out, "max_epochs = {}", t.max_epochs);
        let _ = writeln!(out, "patience = {}", t.patience);
        let _ = writeln!(out, "precision = {}", t.precision);
        out
    }

    pub fn config_hash(&self) -> String {
        config_hash(&self.to_text())
    }

    pub fn seed(&self) -> u64 {
        self.synthetic.seed
    }

    pub fn noise_seed(&self) -> u64 {
        self.synthetic.seed.wrapping_add(1)
    }

    pub fn preset_names() -> &'static [&'static str] {
        &["sweep8", "separable"]
    }

    /// `sweep8`: eight equally hard tags with drop rates 0, 0.1, …, 0.7.
    /// `separable`: two noiseless tags in disjoint mel bands.
    pub fn preset(name: &str) -> Result<Self> {
        let seed = 2024;
        let cfg = match name {
            "sweep8" => {
                let k = 8;
                let synthetic = SyntheticSpec {
                    tag_names: default_names(k),
                    n_train: 1200,
                    n_valid: 300,
                    n_test: 600,
                    templates: SyntheticSpec::evenly_spaced(k, 96, 3.0, 0.6),
                    priors: vec![0.2; k],
                    coactivation: vec![(0, 1, 0.3), (2, 3, 0.3), (4, 5, 0.3), (6, 7, 0.3)],
                    n_mels: 96,
                    frames: 128,
                    noise_level: 1.0,
                    drop_rates: (0..k).map(|j| j as f64 / 10.0).collect(),
                    spurious_rate: 0.0,
                    seed,
                };
                ExperimentConfig {
                    arch: ArchSpec {
                        input: (1, 96, 128),
                        ..ArchSpec::small(k)
                    },
                    train: TrainConfig {
                        max_epochs: 30,
                        seed: seed + 2,
                        ..TrainConfig::default()
                    },
                    synthetic,
                }
            }
            "separable" => {
                let k = 2;
                let synthetic = SyntheticSpec {
                    tag_names: vec!["low".into(), "high".into()],
                    n_train: 600,
                    n_valid: 80,
                    n_test: 80,
                    templates: vec![
                        TagTemplate {
                            center: 20.0,
                            bandwidth: 4.0,
                            energy: 4.0,
                        },
                        TagTemplate {
                            center: 72.0,
                            bandwidth: 4.0,
                            energy: 4.0,
                        },
                    ],
                    priors: vec![0.5; k],
                    coactivation: vec![],
                    n_mels: 96,
                    frames: 128,
                    noise_level: 1.0,
                    drop_rates: vec![0.0; k],
                    spurious_rate: 0.0,
                    seed,
                };
                ExperimentConfig {
                    arch: ArchSpec {
                        input: (1, 96, 128),
                        ..ArchSpec::small(k)
                    },
                    train: TrainConfig {
                        max_epochs: 20,
                        seed: seed + 2,
                        ..TrainConfig::default()
                    },
                    synthetic,
                }
            }
            o => {
                return Err(Error::Invalid(format!(
                    "unknown preset `{o}` (available: {})",
                    Self::preset_names().join(", ")
                )))
            }
        };
        Ok(cfg)
    }
}

fn default_names(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("tag{j}")).collect()
}
