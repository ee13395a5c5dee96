//! Layer primitives with forward and backward passes, and the loss.
//!
//! Sequence activations are `T×C` tensors (time by channel). Backward
//! functions take whatever the forward saved and the upstream gradient,
//! and return exact analytic gradients.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

pub const BCE_EPSILON: f64 = 1e-7;

/// Largest `f64` strictly below 1.
const ONE_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;

pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    // Saturates to exactly 0 or 1 in f64 beyond |x| ≈ 37; keep it open.
    s.clamp(f64::MIN_POSITIVE, ONE_BELOW)
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Softplus,
    Sigmoid,
}

impl Activation {
    pub fn forward(self, x: &Tensor) -> Tensor {
        match self {
            Activation::Relu => x.map(relu),
            Activation::Softplus => x.map(softplus),
            Activation::Sigmoid => x.map(sigmoid),
        }
    }

    /// Gradient w.r.t. the pre-activation `input`; `output` is what forward returned.
    pub fn backward(self, input: &Tensor, output: &Tensor, grad: &Tensor) -> Result<Tensor> {
        grad.expect_shape(input.shape())?;
        output.expect_shape(input.shape())?;
        let data = match self {
            Activation::Relu => input
                .data()
                .iter()
                .zip(grad.data())
                .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                .collect(),
            Activation::Softplus => input
                .data()
                .iter()
                .zip(grad.data())
                .map(|(&x, &g)| g * sigmoid(x))
                .collect(),
            Activation::Sigmoid => output
                .data()
                .iter()
                .zip(grad.data())
                .map(|(&y, &g)| g * y * (1.0 - y))
                .collect(),
        };
        Tensor::new(input.shape().to_vec(), data)
    }
}

/// Row `i` of the output is row `ids[i]` of the `V×E` table.
pub fn embedding_forward(ids: &[u32], table: &Tensor) -> Result<Tensor> {
    let (vocab, dim) = table.dims2()?;
    if ids.is_empty() {
        return Err(Error::shape("empty id sequence"));
    }
    let mut out = Vec::with_capacity(ids.len() * dim);
    for &id in ids {
        if id as usize >= vocab {
            return Err(Error::TokenOutOfRange { id, vocab_size: vocab });
        }
        out.extend_from_slice(table.row(id as usize));
    }
    Tensor::matrix(ids.len(), dim, out)
}

/// Scatter-add upstream rows into `grad_table`.
pub fn embedding_backward(ids: &[u32], grad_out: &Tensor, grad_table: &mut Tensor) -> Result<()> {
    let (vocab, dim) = grad_table.dims2()?;
    grad_out.expect_shape(&[ids.len(), dim])?;
    for (i, &id) in ids.iter().enumerate() {
        if id as usize >= vocab {
            return Err(Error::TokenOutOfRange { id, vocab_size: vocab });
        }
        let dst = &mut grad_table.data_mut()[id as usize * dim..(id as usize + 1) * dim];
        for (d, g) in dst.iter_mut().zip(grad_out.row(i)) {
            *d += g;
        }
    }
    Ok(())
}

/// Per-element scale applied by dropout: `0` or `1/(1-p)`, all ones at inference.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(Vec<f64>);

impl DropoutMask {
    pub fn scales(&self) -> &[f64] {
        &self.0
    }
}

/// Inverted dropout. Each element is kept with probability `1-p`.
pub fn dropout(x: &Tensor, p: f64, training: bool, seed: u64) -> Result<(Tensor, DropoutMask)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::invalid(format!("dropout rate must be in [0, 1), got {p}")));
    }
    if !training || p == 0.0 {
        return Ok((x.clone(), DropoutMask(vec![1.0; x.len()])));
    }
    let keep_scale = 1.0 / (1.0 - p);
    let mut rng = SplitMix64::new(seed);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng.next_f64() >= p { keep_scale } else { 0.0 })
        .collect();
    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Ok((Tensor::new(x.shape().to_vec(), data)?, DropoutMask(mask)))
}

pub fn dropout_backward(mask: &DropoutMask, grad: &Tensor) -> Result<Tensor> {
    if mask.0.len() != grad.len() {
        return Err(Error::shape("dropout mask does not match gradient"));
    }
    let data = grad.data().iter().zip(&mask.0).map(|(g, m)| g * m).collect();
    Tensor::new(grad.shape().to_vec(), data)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for lane in 0..8 {
            acc[lane] += x[lane] * y[lane];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn conv_dims(x: &Tensor, kernels: &Tensor) -> Result<(usize, usize, usize, usize)> {
    let (t, c_in) = x.dims2()?;
    let (f, k, kc) = match kernels.shape()[..] {
        [f, k, c] => (f, k, c),
        _ => {
            return Err(Error::shape(format!(
                "kernels must be F×K×C, got {:?}",
                kernels.shape()
            )))
        }
    };
    if kc != c_in {
        return Err(Error::shape(format!("kernel channels {kc} != input channels {c_in}")));
    }
    if t < k {
        return Err(Error::shape(format!("sequence length {t} shorter than kernel {k}")));
    }
    Ok((t, c_in, f, k))
}

/// Valid 1-D convolution: `out[t,f] = bias[f] + Σ_{k,c} x[t+k,c]·kernels[f,k,c]`.
pub fn conv1d_forward(x: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (t, c, f, k) = conv_dims(x, kernels)?;
    bias.expect_shape(&[f])?;
    let t_out = t - k + 1;
    let kc = k * c;
    let (xs, ws, bs) = (x.data(), kernels.data(), bias.data());
    let mut out = Vec::with_capacity(t_out * f);
    for step in 0..t_out {
        // The K input rows under the window are contiguous in row-major order.
        let window = &xs[step * c..step * c + kc];
        for filter in 0..f {
            out.push(bs[filter] + dot(window, &ws[filter * kc..(filter + 1) * kc]));
        }
    }
    Tensor::matrix(t_out, f, out)
}

#[derive(Debug, Clone)]
pub struct Conv1dGrads {
    pub input: Tensor,
    pub kernels: Tensor,
    pub bias: Tensor,
}

pub fn conv1d_backward(x: &Tensor, kernels: &Tensor, grad_out: &Tensor) -> Result<Conv1dGrads> {
    let (t, c, f, k) = conv_dims(x, kernels)?;
    let t_out = t - k + 1;
    grad_out.expect_shape(&[t_out, f])?;
    let kc = k * c;
    let (xs, ws, gs) = (x.data(), kernels.data(), grad_out.data());
    let mut gx = vec![0.0; t * c];
    let mut gw = vec![0.0; f * kc];
    let mut gb = vec![0.0; f];
    for step in 0..t_out {
        let window = &xs[step * c..step * c + kc];
        for filter in 0..f {
            let g = gs[step * f + filter];
            if g == 0.0 {
                continue;
            }
            gb[filter] += g;
            axpy(g, window, &mut gw[filter * kc..(filter + 1) * kc]);
            axpy(g, &ws[filter * kc..(filter + 1) * kc], &mut gx[step * c..step * c + kc]);
        }
    }
    Ok(Conv1dGrads {
        input: Tensor::matrix(t, c, gx)?,
        kernels: Tensor::new(vec![f, k, c], gw)?,
        bias: Tensor::vector(gb)?,
    })
}

/// Flat input index of the winner for every output element.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolCache {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl PoolCache {
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// Non-overlapping windows of `pool` rows with stride `pool`; a trailing
/// remainder shorter than `pool` is dropped. Ties go to the earliest row.
pub fn maxpool1d(x: &Tensor, pool: usize) -> Result<(Tensor, PoolCache)> {
    if pool < 1 {
        return Err(Error::invalid("pool size must be at least 1"));
    }
    let (t, f) = x.dims2()?;
    if t < pool {
        return Err(Error::shape(format!("sequence length {t} shorter than pool {pool}")));
    }
    let t_out = t / pool;
    let xs = x.data();
    let mut out = Vec::with_capacity(t_out * f);
    let mut argmax = Vec::with_capacity(t_out * f);
    for w in 0..t_out {
        for ch in 0..f {
            let mut best = (w * pool) * f + ch;
            for j in 1..pool {
                let idx = (w * pool + j) * f + ch;
                if xs[idx] > xs[best] {
                    best = idx;
                }
            }
            out.push(xs[best]);
            argmax.push(best);
        }
    }
    Ok((
        Tensor::matrix(t_out, f, out)?,
        PoolCache {
            input_shape: vec![t, f],
            argmax,
        },
    ))
}

/// Per-channel maximum over the whole sequence.
pub fn global_maxpool(x: &Tensor) -> Result<(Tensor, PoolCache)> {
    let (t, f) = x.dims2()?;
    let (pooled, cache) = maxpool1d(x, t)?;
    debug_assert_eq!(pooled.len(), f);
    Ok((Tensor::vector(pooled.into_data())?, cache))
}

/// Route each upstream gradient to its cached winner.
pub fn pool_backward(cache: &PoolCache, grad_out: &Tensor) -> Result<Tensor> {
    if grad_out.len() != cache.argmax.len() {
        return Err(Error::shape("pool gradient does not match cache"));
    }
    let mut gx = Tensor::zeros(&cache.input_shape);
    let dst = gx.data_mut();
    for (&idx, &g) in cache.argmax.iter().zip(grad_out.data()) {
        dst[idx] += g;
    }
    Ok(gx)
}

/// `y = W·x + b` with `W` of shape `out×in`.
pub fn dense_forward(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (n_out, n_in) = weights.dims2()?;
    x.expect_shape(&[n_in])?;
    bias.expect_shape(&[n_out])?;
    let out = (0..n_out)
        .map(|o| bias.data()[o] + dot(weights.row(o), x.data()))
        .collect();
    Tensor::vector(out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn dense_backward(x: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<DenseGrads> {
    let (n_out, n_in) = weights.dims2()?;
    x.expect_shape(&[n_in])?;
    grad_out.expect_shape(&[n_out])?;
    let mut gx = vec![0.0; n_in];
    let mut gw = vec![0.0; n_out * n_in];
    for (o, &g) in grad_out.data().iter().enumerate() {
        axpy(g, x.data(), &mut gw[o * n_in..(o + 1) * n_in]);
        axpy(g, weights.row(o), &mut gx);
    }
    Ok(DenseGrads {
        input: Tensor::vector(gx)?,
        weights: Tensor::matrix(n_out, n_in, gw)?,
        bias: grad_out.clone(),
    })
}

/// Mean binary cross-entropy over every element, with `p` clipped to `[ε, 1-ε]`.
pub fn bce_loss(p: &Tensor, y: &Tensor) -> Result<f64> {
    y.expect_shape(p.shape())?;
    let sum: f64 = p
        .data()
        .iter()
        .zip(y.data())
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / p.len() as f64)
}

/// Gradient of [`bce_loss`] w.r.t. the logits feeding a sigmoid: `(p - y) / n`.
pub fn bce_sigmoid_grad(p: &Tensor, y: &Tensor) -> Result<Tensor> {
    y.expect_shape(p.shape())?;
    let n = p.len() as f64;
    let data = p.data().iter().zip(y.data()).map(|(p, y)| (p - y) / n).collect();
    Tensor::new(p.shape().to_vec(), data)
}
