use super::params::{Gradients, ModelParams};
use super::scalar::Scalar;
use crate::parallel;
use crate::{Error, Result};

pub const BN_EPSILON: f64 = 1e-5;
/// Weight of the previous running statistic in each update.
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batchnorm uses batch statistics; intermediates are cached for backward.
    Train,
    /// Batchnorm uses running statistics; nothing is cached or mutated.
    Eval,
}

struct BlockCache<T> {
    input: Vec<T>,
    xhat: Vec<T>,
    inv_std: Vec<T>,
    /// Flat position inside the `h × w` plane of each pooled maximum.
    argmax: Vec<u32>,
}

struct Cache<T> {
    blocks: Vec<BlockCache<T>>,
    embedding: Vec<T>,
    global_argmax: Vec<u32>,
}

/// Result of a forward pass over `n` samples.
pub struct ForwardPass<T> {
    pub n: usize,
    /// `n × n_outputs`
    pub logits: Vec<T>,
    pub probs: Vec<T>,
    /// Per block `(batch mean, unbiased batch variance)`; empty in eval mode.
    pub batch_stats: Vec<(Vec<T>, Vec<T>)>,
    cache: Option<Cache<T>>,
}

impl<T: Scalar> ForwardPass<T> {
    /// The pooled representation that feeds the dense layer (`n × dim`);
    /// only kept in train mode.
    pub fn embedding(&self) -> Option<&[T]> {
        self.cache.as_ref().map(|c| &c.embedding[..])
    }
}

fn elu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        x.exp() - T::one()
    }
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Zero-padded ("same") stride-1 convolution of one sample.
#[allow(clippy::too_many_arguments)]
fn conv_sample<T: Scalar>(
    input: &[T],
    cin: usize,
    h: usize,
    w: usize,
    kernel: &[T],
    bias: &[T],
    cout: usize,
    (kh, kw): (usize, usize),
) -> Vec<T> {
    let plane = h * w;
    let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
    let mut out = vec![T::zero(); cout * plane];
    for co in 0..cout {
        let op = &mut out[co * plane..(co + 1) * plane];
        op.iter_mut().for_each(|v| *v = bias[co]);
        for ci in 0..cin {
            let ip = &input[ci * plane..(ci + 1) * plane];
            for ky in 0..kh {
                let dy = ky as isize - ph;
                let (y0, y1) = valid_range(h, dy);
                for kx in 0..kw {
                    let dx = kx as isize - pw;
                    let (x0, x1) = valid_range(w, dx);
                    let k = kernel[((co * cin + ci) * kh + ky) * kw + kx];
                    for y in y0..y1 {
                        let src = ((y as isize + dy) as usize) * w;
                        let orow = &mut op[y * w..(y + 1) * w];
                        for x in x0..x1 {
                            orow[x] = orow[x] + k * ip[src + (x as isize + dx) as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Output positions `p` with `0 <= p + shift < len`.
fn valid_range(len: usize, shift: isize) -> (usize, usize) {
    let lo = (-shift).max(0) as usize;
    let hi = (len as isize - shift).clamp(0, len as isize) as usize;
    (lo.min(hi), hi)
}

/// Runs the network on `n` samples laid out as `n × c × h × w`.
pub fn forward<T: Scalar>(
    params: &ModelParams<T>,
    input: &[T],
    n: usize,
    mode: Mode,
) -> Result<ForwardPass<T>> {
    let arch = &params.arch;
    let shapes = arch.shapes();
    let (c0, h0, w0) = arch.input;
    if n == 0 || input.len() != n * c0 * h0 * w0 {
        return Err(Error::Shape(format!(
            "expected {n} samples of {c0}×{h0}×{w0} ({} values), got {}",
            n * c0 * h0 * w0,
            input.len()
        )));
    }
    let train = mode == Mode::Train;
    let mut caches = Vec::new();
    let mut batch_stats = Vec::new();
    let mut x = input.to_vec();
    for (bi, (spec, bp)) in arch.blocks.iter().zip(&params.blocks).enumerate() {
        let (cin, h, w) = shapes[bi];
        let (c, ho, wo) = shapes[bi + 1];
        let plane = h * w;
        let z: Vec<T> = parallel::map_range(n, |s| {
            conv_sample(
                &x[s * cin * plane..(s + 1) * cin * plane],
                cin,
                h,
                w,
                &bp.kernel,
                &bp.bias,
                c,
                spec.kernel,
            )
        })
        .concat();

        let eps = T::of(BN_EPSILON);
        let (shift, inv_std): (Vec<T>, Vec<T>) = if train {
            let m = (n * plane) as f64;
            let mut means = Vec::with_capacity(c);
            let mut vars = Vec::with_capacity(c);
            for ch in 0..c {
                let vals = || (0..n).flat_map(|s| z[(s * c + ch) * plane..(s * c + ch + 1) * plane].iter());
                let mean = vals().map(|v| v.as_f64()).sum::<f64>() / m;
                let var = vals().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / m;
                means.push(mean);
                vars.push(var);
            }
            let unbiased = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
            batch_stats.push((
                means.iter().map(|&v| T::of(v)).collect(),
                vars.iter().map(|&v| T::of(v * unbiased)).collect(),
            ));
            (
                means.iter().map(|&v| T::of(v)).collect(),
                vars.iter().map(|&v| T::one() / (T::of(v) + eps).sqrt()).collect(),
            )
        } else {
            (
                bp.running_mean.clone(),
                bp.running_var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect(),
            )
        };

        let (ph, pw) = spec.pool;
        let mut xhat = if train { vec![T::zero(); z.len()] } else { Vec::new() };
        let mut pooled = vec![T::zero(); n * c * ho * wo];
        let mut argmax = vec![0u32; if train { pooled.len() } else { 0 }];
        let mut act = vec![T::zero(); plane];
        for s in 0..n {
            for ch in 0..c {
                let off = (s * c + ch) * plane;
                for i in 0..plane {
                    let xh = (z[off + i] - shift[ch]) * inv_std[ch];
                    if train {
                        xhat[off + i] = xh;
                    }
                    act[i] = elu(bp.gain[ch] * xh + bp.beta[ch]);
                }
                let poff = (s * c + ch) * ho * wo;
                for py in 0..ho {
                    for px in 0..wo {
                        let mut best = T::neg_infinity();
                        let mut at = 0usize;
                        for y in py * ph..((py + 1) * ph).min(h) {
                            for xx in px * pw..((px + 1) * pw).min(w) {
                                let v = act[y * w + xx];
                                if v > best {
                                    best = v;
                                    at = y * w + xx;
                                }
                            }
                        }
                        pooled[poff + py * wo + px] = best;
                        if train {
                            argmax[poff + py * wo + px] = at as u32;
                        }
                    }
                }
            }
        }
        if pooled.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("block {bi}")));
        }
        if train {
            caches.push(BlockCache {
                input: std::mem::take(&mut x),
                xhat,
                inv_std,
                argmax,
            });
        }
        x = pooled;
    }

    let (c, h, w) = *shapes.last().expect("at least one block");
    let plane = h * w;
    let mut embedding = vec![T::zero(); n * c];
    let mut global_argmax = vec![0u32; n * c];
    for s in 0..n {
        for ch in 0..c {
            let p = &x[(s * c + ch) * plane..(s * c + ch + 1) * plane];
            let mut at = 0;
            for (i, &v) in p.iter().enumerate() {
                if v > p[at] {
                    at = i;
                }
            }
            embedding[s * c + ch] = p[at];
            global_argmax[s * c + ch] = at as u32;
        }
    }

    let k = arch.n_outputs;
    let mut logits = vec![T::zero(); n * k];
    for s in 0..n {
        for j in 0..k {
            let mut acc = params.dense_bias[j];
            for ch in 0..c {
                acc = acc + embedding[s * c + ch] * params.dense_weight[ch * k + j];
            }
            logits[s * k + j] = acc;
        }
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("dense layer".into()));
    }
    // keep probabilities strictly inside (0, 1) even where sigmoid rounds
    let lo = T::epsilon();
    let hi = T::one() - T::epsilon();
    let probs = logits.iter().map(|&z| sigmoid(z).max(lo).min(hi)).collect();
    Ok(ForwardPass {
        n,
        logits,
        probs,
        batch_stats,
        cache: train.then_some(Cache {
            blocks: caches,
            embedding,
            global_argmax,
        }),
    })
}

/// Mean binary cross-entropy over batch and outputs, evaluated from logits
/// as `max(z, 0) − z·y + ln(1 + e^{−|z|})`.
pub fn bce_with_logits<T: Scalar>(logits: &[T], targets: &[T]) -> f64 {
    assert_eq!(logits.len(), targets.len());
    let total: f64 = logits
        .iter()
        .zip(targets)
        .map(|(&z, &y)| {
            let (z, y) = (z.as_f64(), y.as_f64());
            z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
        })
        .sum();
    total / logits.len() as f64
}

/// Moves running statistics toward the batch statistics of a train pass.
pub fn update_running_stats<T: Scalar>(params: &mut ModelParams<T>, fwd: &ForwardPass<T>) {
    let mom = T::of(BN_MOMENTUM);
    let rest = T::one() - mom;
    for (bp, (mean, var)) in params.blocks.iter_mut().zip(&fwd.batch_stats) {
        for i in 0..mean.len() {
            bp.running_mean[i] = mom * bp.running_mean[i] + rest * mean[i];
            bp.running_var[i] = mom * bp.running_var[i] + rest * var[i];
        }
    }
}

/// Analytic gradients of [`bce_with_logits`] for every trainable tensor,
/// batchnorm gain and bias included, back through the batch statistics.
pub fn backward<T: Scalar>(
    params: &ModelParams<T>,
    fwd: &ForwardPass<T>,
    targets: &[T],
) -> Result<Gradients<T>> {
    let cache = fwd
        .cache
        .as_ref()
        .ok_or_else(|| Error::Invalid("backward needs a train-mode forward pass".into()))?;
    let arch = &params.arch;
    let n = fwd.n;
    let k = arch.n_outputs;
    if targets.len() != n * k {
        return Err(Error::Shape(format!(
            "expected {} targets, got {}",
            n * k,
            targets.len()
        )));
    }
    let shapes = arch.shapes();
    let c_last = arch.embedding_dim();
    let scale = T::of(1.0 / (n * k) as f64);
    let dlogits: Vec<T> = fwd
        .logits
        .iter()
        .zip(targets)
        .map(|(&z, &y)| (sigmoid(z) - y) * scale)
        .collect();

    let mut d_dense_w = vec![T::zero(); c_last * k];
    let mut d_dense_b = vec![T::zero(); k];
    let mut d_emb = vec![T::zero(); n * c_last];
    for s in 0..n {
        for j in 0..k {
            let g = dlogits[s * k + j];
            d_dense_b[j] = d_dense_b[j] + g;
            for ch in 0..c_last {
                d_dense_w[ch * k + j] = d_dense_w[ch * k + j] + cache.embedding[s * c_last + ch] * g;
                d_emb[s * c_last + ch] = d_emb[s * c_last + ch] + params.dense_weight[ch * k + j] * g;
            }
        }
    }

    let (_, hl, wl) = shapes[arch.blocks.len()];
    let mut d_out = vec![T::zero(); n * c_last * hl * wl];
    for i in 0..n * c_last {
        d_out[i * hl * wl + cache.global_argmax[i] as usize] = d_emb[i];
    }

    let mut block_grads: Vec<[Vec<T>; 4]> = Vec::with_capacity(arch.blocks.len());
    for bi in (0..arch.blocks.len()).rev() {
        let spec = &arch.blocks[bi];
        let bp = &params.blocks[bi];
        let bc = &cache.blocks[bi];
        let (cin, h, w) = shapes[bi];
        let (c, ho, wo) = shapes[bi + 1];
        let plane = h * w;
        let m = T::of((n * plane) as f64);

        // unpool, then ELU
        let mut dy = vec![T::zero(); n * c * plane];
        for sc in 0..n * c {
            for p in 0..ho * wo {
                let at = sc * plane + bc.argmax[sc * ho * wo + p] as usize;
                let yv = bp.gain[sc % c] * bc.xhat[at] + bp.beta[sc % c];
                let slope = if yv > T::zero() { T::one() } else { yv.exp() };
                dy[at] = dy[at] + d_out[sc * ho * wo + p] * slope;
            }
        }

        // batchnorm through batch statistics
        let mut d_gain = vec![T::zero(); c];
        let mut d_beta = vec![T::zero(); c];
        let mut dz = vec![T::zero(); n * c * plane];
        for ch in 0..c {
            let (mut sum_dxh, mut sum_dxh_xh) = (T::zero(), T::zero());
            for s in 0..n {
                let off = (s * c + ch) * plane;
                for i in off..off + plane {
                    d_gain[ch] = d_gain[ch] + dy[i] * bc.xhat[i];
                    d_beta[ch] = d_beta[ch] + dy[i];
                    let dxh = dy[i] * bp.gain[ch];
                    sum_dxh = sum_dxh + dxh;
                    sum_dxh_xh = sum_dxh_xh + dxh * bc.xhat[i];
                }
            }
            let f = bc.inv_std[ch] / m;
            for s in 0..n {
                let off = (s * c + ch) * plane;
                for i in off..off + plane {
                    let dxh = dy[i] * bp.gain[ch];
                    dz[i] = f * (m * dxh - sum_dxh - bc.xhat[i] * sum_dxh_xh);
                }
            }
        }

        // convolution: per-sample partials reduced in sample order
        let need_input_grad = bi > 0;
        let (kh, kw) = spec.kernel;
        let per_sample = parallel::map_range(n, |s| {
            conv_backward_sample(
                &bc.input[s * cin * plane..(s + 1) * cin * plane],
                &dz[s * c * plane..(s + 1) * c * plane],
                &bp.kernel,
                cin,
                c,
                h,
                w,
                (kh, kw),
                need_input_grad,
            )
        });
        let mut d_kernel = vec![T::zero(); bp.kernel.len()];
        let mut d_bias = vec![T::zero(); c];
        let mut d_in = Vec::with_capacity(if need_input_grad { n * cin * plane } else { 0 });
        for (dk, db, di) in per_sample {
            for (a, b) in d_kernel.iter_mut().zip(dk) {
                *a = *a + b;
            }
            for (a, b) in d_bias.iter_mut().zip(db) {
                *a = *a + b;
            }
            d_in.extend(di);
        }
        block_grads.push([d_kernel, d_bias, d_gain, d_beta]);
        d_out = d_in;
    }

    let mut grads: Gradients<T> = Vec::with_capacity(4 * arch.blocks.len() + 2);
    for g in block_grads.into_iter().rev() {
        grads.extend(g);
    }
    grads.push(d_dense_w);
    grads.push(d_dense_b);
    Ok(grads)
}

type ConvGrads<T> = (Vec<T>, Vec<T>, Vec<T>);

#[allow(clippy::too_many_arguments)]
fn conv_backward_sample<T: Scalar>(
    input: &[T],
    dz: &[T],
    kernel: &[T],
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    (kh, kw): (usize, usize),
    need_input_grad: bool,
) -> ConvGrads<T> {
    let plane = h * w;
    let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
    let mut dk = vec![T::zero(); kernel.len()];
    let mut db = vec![T::zero(); cout];
    let mut di = vec![T::zero(); if need_input_grad { cin * plane } else { 0 }];
    for co in 0..cout {
        let gp = &dz[co * plane..(co + 1) * plane];
        db[co] = gp.iter().copied().sum();
        for ci in 0..cin {
            let ip = &input[ci * plane..(ci + 1) * plane];
            for ky in 0..kh {
                let dy = ky as isize - ph;
                let (y0, y1) = valid_range(h, dy);
                for kx in 0..kw {
                    let dx = kx as isize - pw;
                    let (x0, x1) = valid_range(w, dx);
                    let ki = ((co * cin + ci) * kh + ky) * kw + kx;
                    let mut acc = T::zero();
                    for y in y0..y1 {
                        let src = ((y as isize + dy) as usize) * w;
                        for x in x0..x1 {
                            acc = acc + gp[y * w + x] * ip[src + (x as isize + dx) as usize];
                        }
                    }
                    dk[ki] = acc;
                    if need_input_grad {
                        let kv = kernel[ki];
                        let dp = &mut di[ci * plane..(ci + 1) * plane];
                        for y in y0..y1 {
                            let src = ((y as isize + dy) as usize) * w;
                            for x in x0..x1 {
                                let t = src + (x as isize + dx) as usize;
                                dp[t] = dp[t] + kv * gp[y * w + x];
                            }
                        }
                    }
                }
            }
        }
    }
    (dk, db, di)
}
