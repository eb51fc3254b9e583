use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::ArchSpec;
use super::scalar::Scalar;
use crate::{Error, Result};

/// Trainable tensors and running statistics of one conv block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<T> {
    /// `out × in × kh × kw`
    pub kernel: Vec<T>,
    pub bias: Vec<T>,
    pub gain: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

/// Every tensor of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub arch: ArchSpec,
    pub blocks: Vec<BlockParams<T>>,
    /// Label vectors: `embedding_dim × n_outputs`, row-major, so column `j`
    /// is the vector of output `j`.
    pub dense_weight: Vec<T>,
    pub dense_bias: Vec<T>,
}

/// Gradients of the trainable tensors, in [`ModelParams::trainable`] order.
pub type Gradients<T> = Vec<Vec<T>>;

impl<T: Scalar> ModelParams<T> {
    /// All-zero weights with identity batchnorm (gain 1, running var 1).
    pub fn zeros(arch: &ArchSpec) -> Result<Self> {
        arch.validate()?;
        let mut in_ch = arch.input.0;
        let blocks = arch
            .blocks
            .iter()
            .map(|b| {
                let p = BlockParams {
                    kernel: vec![T::zero(); b.channels * in_ch * b.kernel.0 * b.kernel.1],
                    bias: vec![T::zero(); b.channels],
                    gain: vec![T::one(); b.channels],
                    beta: vec![T::zero(); b.channels],
                    running_mean: vec![T::zero(); b.channels],
                    running_var: vec![T::one(); b.channels],
                };
                in_ch = b.channels;
                p
            })
            .collect();
        Ok(ModelParams {
            arch: arch.clone(),
            blocks,
            dense_weight: vec![T::zero(); arch.embedding_dim() * arch.n_outputs],
            dense_bias: vec![T::zero(); arch.n_outputs],
        })
    }

    /// He-uniform weights (`U(±√(6 / fan_in))`), zero biases, identity
    /// batchnorm.
    pub fn he_uniform(arch: &ArchSpec, seed: u64) -> Result<Self> {
        let mut p = ModelParams::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_ch = arch.input.0;
        for (b, spec) in p.blocks.iter_mut().zip(&arch.blocks) {
            let limit = (6.0 / (in_ch * spec.kernel.0 * spec.kernel.1) as f64).sqrt();
            b.kernel
                .iter_mut()
                .for_each(|k| *k = T::of(rng.random_range(-limit..limit)));
            in_ch = spec.channels;
        }
        let limit = (6.0 / arch.embedding_dim() as f64).sqrt();
        p.dense_weight
            .iter_mut()
            .for_each(|w| *w = T::of(rng.random_range(-limit..limit)));
        Ok(p)
    }

    pub fn trainable_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for i in 0..self.blocks.len() {
            for t in ["conv.weight", "conv.bias", "bn.gain", "bn.bias"] {
                names.push(format!("block{i}.{t}"));
            }
        }
        names.push("dense.weight".into());
        names.push("dense.bias".into());
        names
    }

    pub fn trainable(&self) -> Vec<&[T]> {
        let mut v: Vec<&[T]> = Vec::new();
        for b in &self.blocks {
            v.extend([&b.kernel[..], &b.bias[..], &b.gain[..], &b.beta[..]]);
        }
        v.push(&self.dense_weight);
        v.push(&self.dense_bias);
        v
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut v: Vec<&mut Vec<T>> = Vec::new();
        for b in &mut self.blocks {
            v.push(&mut b.kernel);
            v.push(&mut b.bias);
            v.push(&mut b.gain);
            v.push(&mut b.beta);
        }
        v.push(&mut self.dense_weight);
        v.push(&mut self.dense_bias);
        v
    }

    /// Named tensors with their dimensions, running statistics included.
    pub fn named_tensors(&self) -> Vec<(String, Vec<usize>, &[T])> {
        let mut out = Vec::new();
        let mut in_ch = self.arch.input.0;
        for (i, (b, s)) in self.blocks.iter().zip(&self.arch.blocks).enumerate() {
            let c = s.channels;
            out.push((format!("block{i}.conv.weight"), vec![c, in_ch, s.kernel.0, s.kernel.1], &b.kernel[..]));
            out.push((format!("block{i}.conv.bias"), vec![c], &b.bias[..]));
            out.push((format!("block{i}.bn.gain"), vec![c], &b.gain[..]));
            out.push((format!("block{i}.bn.bias"), vec![c], &b.beta[..]));
            out.push((format!("block{i}.bn.running_mean"), vec![c], &b.running_mean[..]));
            out.push((format!("block{i}.bn.running_var"), vec![c], &b.running_var[..]));
            in_ch = c;
        }
        out.push((
            "dense.weight".into(),
            vec![self.arch.embedding_dim(), self.arch.n_outputs],
            &self.dense_weight[..],
        ));
        out.push(("dense.bias".into(), vec![self.arch.n_outputs], &self.dense_bias[..]));
        out
    }

    pub(crate) fn tensor_mut(&mut self, name: &str) -> Option<&mut Vec<T>> {
        if let Some(rest) = name.strip_prefix("dense.") {
            return match rest {
                "weight" => Some(&mut self.dense_weight),
                "bias" => Some(&mut self.dense_bias),
                _ => None,
            };
        }
        let rest = name.strip_prefix("block")?;
        let (idx, field) = rest.split_once('.')?;
        let b = self.blocks.get_mut(idx.parse::<usize>().ok()?)?;
        match field {
            "conv.weight" => Some(&mut b.kernel),
            "conv.bias" => Some(&mut b.bias),
            "bn.gain" => Some(&mut b.gain),
            "bn.bias" => Some(&mut b.beta),
            "bn.running_mean" => Some(&mut b.running_mean),
            "bn.running_var" => Some(&mut b.running_var),
            _ => None,
        }
    }

    /// Finite values everywhere and strictly positive running variances.
    pub fn validate(&self) -> Result<()> {
        for (name, _, t) in self.named_tensors() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.running_var.iter().any(|&v| v <= T::zero()) {
                return Err(Error::Invalid(format!("block {i}: running variance must be positive")));
            }
        }
        Ok(())
    }

    /// Converts every tensor to another precision.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::of(x.as_f64())).collect::<Vec<U>>();
        ModelParams {
            arch: self.arch.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockParams {
                    kernel: c(&b.kernel),
                    bias: c(&b.bias),
                    gain: c(&b.gain),
                    beta: c(&b.beta),
                    running_mean: c(&b.running_mean),
                    running_var: c(&b.running_var),
                })
                .collect(),
            dense_weight: c(&self.dense_weight),
            dense_bias: c(&self.dense_bias),
        }
    }
}

/// Adam optimiser state.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ModelParams<T>, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros: Vec<Vec<T>> = params
            .trainable()
            .iter()
            .map(|t| vec![T::zero(); t.len()])
            .collect();
        Adam {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn update(&mut self, params: &mut ModelParams<T>, grads: &Gradients<T>) {
        self.step += 1;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let step_size = T::of(self.learning_rate * bc2.sqrt() / bc1);
        let eps = T::of(self.epsilon * bc2.sqrt());
        for (((p, g), m), v) in params
            .trainable_mut()
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                p[i] = p[i] - step_size * m[i] / (v[i].sqrt() + eps);
            }
        }
    }
}
