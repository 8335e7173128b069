use rand::Rng;
use serde::{Deserialize, Serialize};

use super::arch::{Activation, Architecture, LayerSpec, Shape};
use crate::error::{Error, Result};

/// Row-major values with an explicit shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{len} values for shape {shape:?}"),
                got: format!("{} values", data.len()),
            });
        }
        Ok(Tensor { shape, data })
    }
}

/// Cached activations of one forward pass; `acts[0]` is the input and
/// `acts[l + 1]` the post-activation output of layer `l`.
#[derive(Debug, Clone)]
pub struct Trace {
    acts: Vec<Tensor>,
    probs: Vec<f64>,
}

impl Trace {
    pub fn logits(&self) -> &[f64] {
        &self.acts.last().expect("trace holds the input").data
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn activations(&self) -> &[Tensor] {
        &self.acts
    }
}

/// Loss heads whose gradient at the logits is `weight · (softmax − onehot)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Head {
    /// `−log π(target)`.
    CrossEntropy { target: usize },
    /// `−weight · log π(action)`.
    LogProb { action: usize, weight: f64 },
}

impl Head {
    pub fn loss(&self, probs: &[f64]) -> f64 {
        match *self {
            Head::CrossEntropy { target } => -probs[target].ln(),
            Head::LogProb { action, weight } => -weight * probs[action].ln(),
        }
    }

    pub fn logit_grad(&self, probs: &[f64]) -> Vec<f64> {
        let (index, weight) = match *self {
            Head::CrossEntropy { target } => (target, 1.0),
            Head::LogProb { action, weight } => (action, weight),
        };
        probs
            .iter()
            .enumerate()
            .map(|(i, &p)| weight * (p - if i == index { 1.0 } else { 0.0 }))
            .collect()
    }
}

/// Gradient of `weight · log π(action)` with respect to the logits.
pub fn log_prob_logit_grad(probs: &[f64], action: usize, weight: f64) -> Vec<f64> {
    probs
        .iter()
        .enumerate()
        .map(|(i, &p)| weight * (if i == action { 1.0 } else { 0.0 } - p))
        .collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let chunks = n / 8;
    for c in 0..chunks {
        let xa = &a[c * 8..c * 8 + 8];
        let xb = &b[c * 8..c * 8 + 8];
        for i in 0..8 {
            acc[i] += xa[i] * xb[i];
        }
    }
    let mut tail = 0.0;
    for i in chunks * 8..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}


/// Policy network parameters plus the architecture that interprets them.
///
/// All weights live in one flat vector: for each layer, weights then biases.
/// Convolution weights are `[out][in][ky][kx]`; dense weights `[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub arch: Architecture,
    pub params: Vec<f64>,
    /// Negates the parameter gradient of this layer during backward; used by
    /// the self-test to confirm the gradient checker catches faults.
    #[serde(skip)]
    pub fault: Option<usize>,
}

impl PolicyNet {
    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.num_params() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", arch.num_params()),
                got: format!("{}", params.len()),
            });
        }
        Ok(PolicyNet {
            arch,
            params,
            fault: None,
        })
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        let n = arch.num_params();
        Self::from_params(arch, vec![0.0; n])
    }

    /// Weights uniform in `±sqrt(3 / fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let mut params = Vec::with_capacity(arch.num_params());
        let mut cur = arch.input;
        for layer in &arch.layers {
            match *layer {
                LayerSpec::Conv2d {
                    out_channels, kernel, ..
                } => {
                    let fan_in = cur[0] * kernel * kernel;
                    let bound = (3.0 / fan_in as f64).sqrt();
                    params.extend((0..out_channels * fan_in).map(|_| rng.gen_range(-bound..bound)));
                    params.extend(std::iter::repeat(0.0).take(out_channels));
                    cur = [out_channels, cur[1], cur[2]];
                }
                LayerSpec::AvgPool2 => cur = [cur[0], cur[1] / 2, cur[2] / 2],
                LayerSpec::Dense { outputs, .. } => {
                    let fan_in: usize = cur.iter().product();
                    let bound = (3.0 / fan_in as f64).sqrt();
                    params.extend((0..outputs * fan_in).map(|_| rng.gen_range(-bound..bound)));
                    params.extend(std::iter::repeat(0.0).take(outputs));
                    cur = [outputs, 1, 1];
                }
            }
        }
        Self::from_params(arch, params)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn num_actions(&self) -> usize {
        self.arch.num_outputs()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.arch.input_len() {
            return Err(Error::ShapeMismatch {
                expected: format!("input {:?}", self.arch.input),
                got: format!("{} values", input.len()),
            });
        }
        Ok(())
    }

    /// Action probabilities for one input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(input)?.probs)
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        self.check_input(input)?;
        let offsets = self.arch.param_offsets();
        let mut acts = Vec::with_capacity(self.arch.layers.len() + 1);
        acts.push(Tensor {
            shape: self.arch.input.to_vec(),
            data: input.to_vec(),
        });
        let mut shape = self.arch.input;
        for (l, layer) in self.arch.layers.iter().enumerate() {
            let x = &acts[l].data;
            let p = &self.params[offsets[l]..];
            let (out, next) = match *layer {
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    activation,
                } => conv_forward(x, shape, p, out_channels, kernel, activation),
                LayerSpec::AvgPool2 => pool_forward(x, shape),
                LayerSpec::Dense { outputs, activation } => dense_forward(x, p, outputs, activation),
            };
            acts.push(Tensor {
                shape: next.to_vec(),
                data: out,
            });
            shape = next;
        }
        let probs = softmax(&acts.last().expect("input present").data);
        Ok(Trace { acts, probs })
    }

    /// Adds the parameter gradient for upstream logit gradient `dlogits` into
    /// `grads`.
    pub fn backward_into(&self, trace: &Trace, dlogits: &[f64], grads: &mut [f64]) -> Result<()> {
        if trace.acts.len() != self.arch.layers.len() + 1 || trace.acts[0].shape != self.arch.input.to_vec() {
            return Err(Error::ShapeMismatch {
                expected: "trace produced by this architecture".into(),
                got: format!("trace with {} activations", trace.acts.len()),
            });
        }
        if dlogits.len() != self.num_actions() || grads.len() != self.params.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} logits, {} grads", self.num_actions(), self.params.len()),
                got: format!("{} logits, {} grads", dlogits.len(), grads.len()),
            });
        }
        let offsets = self.arch.param_offsets();
        let counts = self.arch.layer_param_counts();
        let shapes = self.arch.shapes();
        let mut g = dlogits.to_vec();
        for l in (0..self.arch.layers.len()).rev() {
            let in_shape = if l == 0 { self.arch.input } else { shapes[l - 1] };
            let x = &trace.acts[l].data;
            let y = &trace.acts[l + 1].data;
            let p = &self.params[offsets[l]..offsets[l] + counts[l]];
            let gp = &mut grads[offsets[l]..offsets[l] + counts[l]];
            let need_input_grad = l > 0;
            let sign = if self.fault == Some(l) { -1.0 } else { 1.0 };
            g = match self.arch.layers[l] {
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    activation,
                } => {
                    for (gi, &yi) in g.iter_mut().zip(y) {
                        *gi *= activation.derivative_from_output(yi);
                    }
                    conv_backward(x, in_shape, p, out_channels, kernel, &g, gp, sign, need_input_grad)
                }
                LayerSpec::AvgPool2 => pool_backward(in_shape, &g),
                LayerSpec::Dense { outputs, activation } => {
                    for (gi, &yi) in g.iter_mut().zip(y) {
                        *gi *= activation.derivative_from_output(yi);
                    }
                    dense_backward(x, p, outputs, &g, gp, sign, need_input_grad)
                }
            };
        }
        Ok(())
    }

    /// Loss and full parameter gradient for one input under `head`.
    pub fn loss_and_grad(&self, input: &[f64], head: Head) -> Result<(f64, Vec<f64>)> {
        let trace = self.forward_trace(input)?;
        let mut grads = vec![0.0; self.params.len()];
        self.backward_into(&trace, &head.logit_grad(trace.probs()), &mut grads)?;
        Ok((head.loss(trace.probs()), grads))
    }

    pub fn loss(&self, input: &[f64], head: Head) -> Result<f64> {
        Ok(head.loss(&self.forward(input)?))
    }
}

/// `c = alpha · op(a) · op(b) + beta · c` for row-major matrices, where
/// `op(a)` is `m × k`, `op(b)` is `k × n` and a set `*_t` flag means the
/// operand is stored transposed.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, alpha: f64, a: &[f64], a_t: bool, b: &[f64], b_t: bool, beta: f64, c: &mut [f64]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (1, m) } else { (k, 1) };
    let (rsb, csb) = if b_t { (1, k) } else { (n, 1) };
    // SAFETY: the assertion above keeps every strided access within the
    // three slices, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Valid output columns `[lo, hi)` for kernel column `kx` with same padding.
#[inline]
fn valid_span(w: usize, kx: usize, pad: usize) -> (usize, usize) {
    (pad.saturating_sub(kx), (w + pad).saturating_sub(kx).min(w))
}

/// Unfolds `x` into a `(c·k·k) × (h·w)` matrix of shifted copies.
fn im2col(x: &[f64], shape: Shape, kernel: usize) -> Vec<f64> {
    let [c_in, h, w] = shape;
    let pad = kernel / 2;
    let hw = h * w;
    let mut cols = vec![0.0; c_in * kernel * kernel * hw];
    for c in 0..c_in {
        for ky in 0..kernel {
            for kx in 0..kernel {
                let row = &mut cols[((c * kernel + ky) * kernel + kx) * hw..][..hw];
                let (lo, hi) = valid_span(w, kx, pad);
                for y in 0..h {
                    let sy = y + ky;
                    if sy < pad || sy - pad >= h || lo >= hi {
                        continue;
                    }
                    let src = &x[(c * h + sy - pad) * w..][..w];
                    row[y * w + lo..y * w + hi].copy_from_slice(&src[lo + kx - pad..hi + kx - pad]);
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: folds column gradients back onto the input.
fn col2im(cols: &[f64], shape: Shape, kernel: usize) -> Vec<f64> {
    let [c_in, h, w] = shape;
    let pad = kernel / 2;
    let hw = h * w;
    let mut dx = vec![0.0; c_in * hw];
    for c in 0..c_in {
        for ky in 0..kernel {
            for kx in 0..kernel {
                let row = &cols[((c * kernel + ky) * kernel + kx) * hw..][..hw];
                let (lo, hi) = valid_span(w, kx, pad);
                for y in 0..h {
                    let sy = y + ky;
                    if sy < pad || sy - pad >= h || lo >= hi {
                        continue;
                    }
                    let dst = &mut dx[(c * h + sy - pad) * w..][..w];
                    for (d, &v) in dst[lo + kx - pad..hi + kx - pad].iter_mut().zip(&row[y * w + lo..y * w + hi]) {
                        *d += v;
                    }
                }
            }
        }
    }
    dx
}

fn conv_forward(
    x: &[f64],
    shape: Shape,
    p: &[f64],
    out_channels: usize,
    kernel: usize,
    activation: Activation,
) -> (Vec<f64>, Shape) {
    let [c_in, h, w] = shape;
    let ckk = c_in * kernel * kernel;
    let hw = h * w;
    let (weights, biases) = p.split_at(out_channels * ckk);
    let cols = im2col(x, shape, kernel);
    let mut out = vec![0.0; out_channels * hw];
    for (plane, &b) in out.chunks_mut(hw).zip(biases) {
        plane.fill(b);
    }
    gemm(out_channels, ckk, hw, 1.0, weights, false, &cols, false, 1.0, &mut out);
    if activation != Activation::Identity {
        for v in out.iter_mut() {
            *v = activation.apply(*v);
        }
    }
    (out, [out_channels, h, w])
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &[f64],
    shape: Shape,
    p: &[f64],
    out_channels: usize,
    kernel: usize,
    g: &[f64],
    gp: &mut [f64],
    sign: f64,
    need_input_grad: bool,
) -> Vec<f64> {
    let [c_in, h, w] = shape;
    let ckk = c_in * kernel * kernel;
    let hw = h * w;
    let cols = im2col(x, shape, kernel);
    let (gw, gb) = gp.split_at_mut(out_channels * ckk);
    for (b, go) in gb.iter_mut().zip(g.chunks(hw)) {
        *b += sign * go.iter().sum::<f64>();
    }
    gemm(out_channels, hw, ckk, sign, g, false, &cols, true, 1.0, gw);
    if !need_input_grad {
        return Vec::new();
    }
    let mut dcols = vec![0.0; ckk * hw];
    gemm(ckk, out_channels, hw, 1.0, &p[..out_channels * ckk], true, g, false, 0.0, &mut dcols);
    col2im(&dcols, shape, kernel)
}

fn pool_forward(x: &[f64], shape: Shape) -> (Vec<f64>, Shape) {
    let [c, h, w] = shape;
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; c * oh * ow];
    for ch in 0..c {
        for y in 0..oh {
            let r0 = &x[(ch * h + 2 * y) * w..];
            let r1 = &x[(ch * h + 2 * y + 1) * w..];
            let orow = &mut out[(ch * oh + y) * ow..(ch * oh + y + 1) * ow];
            for (xo, o) in orow.iter_mut().enumerate() {
                *o = 0.25 * (r0[2 * xo] + r0[2 * xo + 1] + r1[2 * xo] + r1[2 * xo + 1]);
            }
        }
    }
    (out, [c, oh, ow])
}

/// Spreads each output gradient equally over its 2×2 window.
pub(crate) fn pool_backward(in_shape: Shape, g: &[f64]) -> Vec<f64> {
    let [c, h, w] = in_shape;
    let (oh, ow) = (h / 2, w / 2);
    let mut dx = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..oh {
            for xo in 0..ow {
                let v = 0.25 * g[(ch * oh + y) * ow + xo];
                for dy in 0..2 {
                    let row = (ch * h + 2 * y + dy) * w;
                    dx[row + 2 * xo] = v;
                    dx[row + 2 * xo + 1] = v;
                }
            }
        }
    }
    dx
}

fn dense_forward(x: &[f64], p: &[f64], outputs: usize, activation: Activation) -> (Vec<f64>, Shape) {
    let n = x.len();
    let (weights, biases) = p.split_at(outputs * n);
    let out = (0..outputs)
        .map(|j| activation.apply(biases[j] + dot(&weights[j * n..(j + 1) * n], x)))
        .collect();
    (out, [outputs, 1, 1])
}

fn dense_backward(
    x: &[f64],
    p: &[f64],
    outputs: usize,
    g: &[f64],
    gp: &mut [f64],
    sign: f64,
    need_input_grad: bool,
) -> Vec<f64> {
    let n = x.len();
    let (gw, gb) = gp.split_at_mut(outputs * n);
    let mut dx = if need_input_grad { vec![0.0; n] } else { Vec::new() };
    for j in 0..outputs {
        if g[j] == 0.0 {
            continue;
        }
        axpy(sign * g[j], x, &mut gw[j * n..(j + 1) * n]);
        gb[j] += sign * g[j];
        if need_input_grad {
            axpy(g[j], &p[j * n..(j + 1) * n], &mut dx);
        }
    }
    dx
}
