//! Convolutional regressor from measurement channels to basis coefficients.
//!
//! Architecture: `L` blocks of periodic-padded convolution, ReLU and average
//! pooling, flattened into fully-connected layers. Every fully-connected
//! layer but the last applies ReLU; the last is linear so that signed
//! coefficients can be represented. All parameters live in one flat vector
//! whose layout is derived from [`NetConfig`].

pub mod data;
pub mod train;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

pub use data::{standardize, Dataset, NormStats, TargetStats};
pub use train::{momentum_step, train, train_with, EpochRecord, TrainConfig, TrainOutcome};

/// Input channel count: real and imaginary parts.
pub const INPUT_CHANNELS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    /// `(N_d, N_t)`
    pub input: [usize; 2],
    pub conv_layers: usize,
    pub channels: usize,
    pub kernel: usize,
    pub padding: usize,
    pub pool_kernel: usize,
    pub pool_stride: usize,
    pub fc: Vec<usize>,
}

impl NetConfig {
    /// Desk-scale network for a 16x16 measurement and `order^2` outputs.
    pub fn desk(input: [usize; 2], conv_layers: usize, order: usize) -> Self {
        Self {
            input,
            conv_layers,
            channels: 8,
            kernel: 5,
            padding: 2,
            pool_kernel: 2,
            pool_stride: 2,
            fc: vec![64, order * order],
        }
    }

    pub fn output_len(&self) -> usize {
        self.fc.last().copied().unwrap_or(0)
    }

    pub fn input_len(&self) -> usize {
        INPUT_CHANNELS * self.input[0] * self.input[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ConvShape {
    c_in: usize,
    c_out: usize,
    /// input spatial size
    h: usize,
    w: usize,
    /// convolution output size
    ho: usize,
    wo: usize,
    /// pooled output size
    hp: usize,
    wp: usize,
    w_off: usize,
    b_off: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct FcShape {
    n_in: usize,
    n_out: usize,
    w_off: usize,
    b_off: usize,
}

/// Parameter layout and per-layer shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    cfg: NetConfig,
    conv: Vec<ConvShape>,
    fc: Vec<FcShape>,
    n_params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetWeights {
    pub params: Vec<f64>,
}

impl Network {
    pub fn new(cfg: NetConfig) -> Result<Self> {
        if cfg.input[0] == 0 || cfg.input[1] == 0 {
            return Err(Error::invalid("input dimensions must be positive"));
        }
        if cfg.channels == 0 || cfg.kernel == 0 || cfg.pool_kernel == 0 || cfg.pool_stride == 0 {
            return Err(Error::invalid("channels, kernel and pooling sizes must be positive"));
        }
        if cfg.fc.is_empty() || cfg.fc.contains(&0) {
            return Err(Error::invalid("need at least one fully-connected layer with positive width"));
        }
        let mut off = 0;
        let (mut h, mut w, mut c) = (cfg.input[0], cfg.input[1], INPUT_CHANNELS);
        let mut conv = Vec::with_capacity(cfg.conv_layers);
        for l in 0..cfg.conv_layers {
            if cfg.padding > h || cfg.padding > w || h + 2 * cfg.padding < cfg.kernel || w + 2 * cfg.padding < cfg.kernel
            {
                return Err(Error::invalid(format!("conv layer {} does not fit a {h}x{w} input", l + 1)));
            }
            let ho = h + 2 * cfg.padding - cfg.kernel + 1;
            let wo = w + 2 * cfg.padding - cfg.kernel + 1;
            if ho < cfg.pool_kernel || wo < cfg.pool_kernel {
                return Err(Error::invalid(format!("pooling after conv layer {} sees a {ho}x{wo} map", l + 1)));
            }
            let hp = (ho - cfg.pool_kernel) / cfg.pool_stride + 1;
            let wp = (wo - cfg.pool_kernel) / cfg.pool_stride + 1;
            let w_off = off;
            off += cfg.channels * c * cfg.kernel * cfg.kernel;
            let b_off = off;
            off += cfg.channels;
            conv.push(ConvShape { c_in: c, c_out: cfg.channels, h, w, ho, wo, hp, wp, w_off, b_off });
            h = hp;
            w = wp;
            c = cfg.channels;
        }
        let mut n_in = c * h * w;
        let mut fc = Vec::with_capacity(cfg.fc.len());
        for &n_out in &cfg.fc {
            let w_off = off;
            off += n_in * n_out;
            let b_off = off;
            off += n_out;
            fc.push(FcShape { n_in, n_out, w_off, b_off });
            n_in = n_out;
        }
        Ok(Self { cfg, conv, fc, n_params: off })
    }

    /// Named parameter blocks in layout order, e.g. `conv1.weight`, `fc2.bias`.
    pub fn param_blocks(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let mut out = Vec::new();
        for (i, s) in self.conv.iter().enumerate() {
            out.push((format!("conv{}.weight", i + 1), s.w_off..s.b_off));
            out.push((format!("conv{}.bias", i + 1), s.b_off..s.b_off + s.c_out));
        }
        for (i, s) in self.fc.iter().enumerate() {
            out.push((format!("fc{}.weight", i + 1), s.w_off..s.b_off));
            out.push((format!("fc{}.bias", i + 1), s.b_off..s.b_off + s.n_out));
        }
        out
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Length of the flattened feature vector entering the first fc layer.
    pub fn flatten_len(&self) -> usize {
        self.fc[0].n_in
    }

    /// Spatial size after each conv+pool block.
    pub fn spatial_trace(&self) -> Vec<[usize; 2]> {
        self.conv.iter().map(|s| [s.hp, s.wp]).collect()
    }

    /// He-normal weights, zero biases.
    pub fn init(&self, seed: u64) -> NetWeights {
        let mut rng = stream(seed, Stream::Init, 0);
        let mut params = vec![0.0; self.n_params];
        let k2 = self.cfg.kernel * self.cfg.kernel;
        for s in &self.conv {
            fill_normal(&mut params[s.w_off..s.b_off], (2.0 / (s.c_in * k2) as f64).sqrt(), &mut rng);
        }
        for s in &self.fc {
            fill_normal(&mut params[s.w_off..s.b_off], (2.0 / s.n_in as f64).sqrt(), &mut rng);
        }
        NetWeights { params }
    }

    pub fn check(&self, w: &NetWeights) -> Result<()> {
        if w.params.len() != self.n_params {
            return Err(Error::shape(format!("{} parameters", self.n_params), w.params.len().to_string()));
        }
        Ok(())
    }

    pub fn forward(&self, w: &NetWeights, x: &[f64]) -> Result<Vec<f64>> {
        self.check(w)?;
        if x.len() != self.cfg.input_len() {
            return Err(Error::shape(format!("{} inputs", self.cfg.input_len()), x.len().to_string()));
        }
        Ok(self.run(&w.params, x, None))
    }

    /// Forward pass; with `trace`, records what backprop needs.
    fn run(&self, p: &[f64], x: &[f64], mut trace: Option<&mut Trace>) -> Vec<f64> {
        let (k, pad) = (self.cfg.kernel, self.cfg.padding);
        let mut cur = x.to_vec();
        for s in &self.conv {
            let padded = pad_periodic(&cur, s.c_in, s.h, s.w, pad);
            let mut act = conv_padded(&padded, s, k, pad, &p[s.w_off..s.b_off], &p[s.b_off..s.b_off + s.c_out]);
            act.iter_mut().for_each(|v| *v = v.max(0.0));
            let pooled = avg_pool(&act, s.c_out, s.ho, s.wo, self.cfg.pool_kernel, self.cfg.pool_stride);
            if let Some(t) = trace.as_deref_mut() {
                t.padded.push(padded);
                t.conv_act.push(act);
            }
            cur = pooled;
        }
        let last = self.fc.len() - 1;
        for (l, s) in self.fc.iter().enumerate() {
            let wmat = &p[s.w_off..s.b_off];
            let mut y = p[s.b_off..s.b_off + s.n_out].to_vec();
            for (o, yo) in y.iter_mut().enumerate() {
                *yo += dot(&wmat[o * s.n_in..(o + 1) * s.n_in], &cur);
            }
            if l < last {
                y.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            if let Some(t) = trace.as_deref_mut() {
                t.fc_in.push(std::mem::take(&mut cur));
            }
            cur = y;
        }
        cur
    }

    /// Accumulates `scale * d(sum (y - t)^2)/d theta` into `grad` and returns
    /// the sample's summed squared error.
    fn backprop(&self, p: &[f64], x: &[f64], target: &[f64], scale: f64, grad: &mut [f64]) -> f64 {
        let mut t = Trace::default();
        let y = self.run(p, x, Some(&mut t));
        let mut sse = 0.0;
        let mut delta: Vec<f64> = y
            .iter()
            .zip(target)
            .map(|(a, b)| {
                sse += (a - b) * (a - b);
                2.0 * (a - b) * scale
            })
            .collect();
        for (l, s) in self.fc.iter().enumerate().rev() {
            let input = &t.fc_in[l];
            for (o, &d) in delta.iter().enumerate() {
                grad[s.b_off + o] += d;
                if d != 0.0 {
                    axpy(d, input, &mut grad[s.w_off + o * s.n_in..s.w_off + (o + 1) * s.n_in]);
                }
            }
            let wmat = &p[s.w_off..s.b_off];
            let mut din = vec![0.0; s.n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, &wmat[o * s.n_in..(o + 1) * s.n_in], &mut din);
                }
            }
            if l > 0 {
                // ReLU of the previous fc layer
                for (di, &a) in din.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *di = 0.0;
                    }
                }
            }
            delta = din;
        }
        let (k, pad) = (self.cfg.kernel, self.cfg.padding);
        for (l, s) in self.conv.iter().enumerate().rev() {
            let mut dact = avg_pool_backward(&delta, s.c_out, s.ho, s.wo, self.cfg.pool_kernel, self.cfg.pool_stride);
            for (d, &a) in dact.iter_mut().zip(&t.conv_act[l]) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            let (gw, rest) = grad[s.w_off..].split_at_mut(s.b_off - s.w_off);
            let need_input = l > 0;
            let dpad = conv_backward(&t.padded[l], s, k, pad, &p[s.w_off..s.b_off], &dact, gw, &mut rest[..s.c_out], need_input);
            if need_input {
                delta = fold_periodic(&dpad, s.c_in, s.h, s.w, pad);
            }
        }
        sse
    }

    /// Mean-squared-error loss over the batch and all outputs, and its
    /// gradient. Samples are processed in fixed-size chunks whose partial
    /// sums are reduced in order, so the result does not depend on the
    /// number of threads.
    pub fn loss_and_grad(&self, w: &NetWeights, xs: &[&[f64]], ts: &[&[f64]]) -> Result<(f64, Vec<f64>)> {
        self.check(w)?;
        if xs.len() != ts.len() || xs.is_empty() {
            return Err(Error::invalid("batch inputs and targets must be non-empty and of equal length"));
        }
        let out = self.cfg.output_len();
        if xs.iter().any(|x| x.len() != self.cfg.input_len()) || ts.iter().any(|t| t.len() != out) {
            return Err(Error::shape("consistent sample shapes", "mismatched sample"));
        }
        let scale = 1.0 / (xs.len() * out) as f64;
        const CHUNK: usize = 8;
        let idx: Vec<usize> = (0..xs.len()).collect();
        let partial: Vec<(f64, Vec<f64>)> = idx
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut g = vec![0.0; self.n_params];
                let mut sse = 0.0;
                for &i in chunk {
                    sse += self.backprop(&w.params, xs[i], ts[i], scale, &mut g);
                }
                (sse, g)
            })
            .collect();
        let mut grad = vec![0.0; self.n_params];
        let mut sse = 0.0;
        for (s, g) in partial {
            sse += s;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        Ok((sse * scale, grad))
    }

    /// Mean squared error over a dataset, without gradients.
    pub fn mse(&self, w: &NetWeights, xs: &[&[f64]], ts: &[&[f64]]) -> Result<f64> {
        self.check(w)?;
        let sse: Vec<f64> = xs
            .par_iter()
            .zip(ts.par_iter())
            .map(|(x, t)| self.run(&w.params, x, None).iter().zip(t.iter()).map(|(a, b)| (a - b).powi(2)).sum())
            .collect();
        Ok(sse.iter().sum::<f64>() / (xs.len() * self.cfg.output_len()) as f64)
    }
}

#[derive(Default)]
struct Trace {
    padded: Vec<Vec<f64>>,
    conv_act: Vec<Vec<f64>>,
    fc_in: Vec<Vec<f64>>,
}

fn fill_normal<R: Rng + ?Sized>(out: &mut [f64], std: f64, rng: &mut R) {
    let d = Normal::new(0.0, std).expect("positive std");
    out.iter_mut().for_each(|v| *v = d.sample(rng));
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Channel-major `c x (h+2p) x (w+2p)` copy with wrap-around borders.
pub fn pad_periodic(x: &[f64], c: usize, h: usize, w: usize, p: usize) -> Vec<f64> {
    let (hp, wp) = (h + 2 * p, w + 2 * p);
    let mut out = vec![0.0; c * hp * wp];
    for ci in 0..c {
        for t in 0..hp {
            let a = (t + h - p % h) % h;
            let src = &x[(ci * h + a) * w..(ci * h + a + 1) * w];
            let dst = &mut out[(ci * hp + t) * wp..(ci * hp + t + 1) * wp];
            for (s, d) in dst.iter_mut().enumerate() {
                *d = src[(s + w - p % w) % w];
            }
        }
    }
    out
}

/// Adjoint of [`pad_periodic`]: sums wrapped border entries back.
fn fold_periodic(xp: &[f64], c: usize, h: usize, w: usize, p: usize) -> Vec<f64> {
    let (hp, wp) = (h + 2 * p, w + 2 * p);
    let mut out = vec![0.0; c * h * w];
    for ci in 0..c {
        for t in 0..hp {
            let a = (t + h - p % h) % h;
            for s in 0..wp {
                out[(ci * h + a) * w + (s + w - p % w) % w] += xp[(ci * hp + t) * wp + s];
            }
        }
    }
    out
}

fn conv_padded(padded: &[f64], s: &ConvShape, k: usize, p: usize, wts: &[f64], bias: &[f64]) -> Vec<f64> {
    let (hp, wp) = (s.h + 2 * p, s.w + 2 * p);
    let mut out = vec![0.0; s.c_out * s.ho * s.wo];
    for co in 0..s.c_out {
        let o = &mut out[co * s.ho * s.wo..(co + 1) * s.ho * s.wo];
        o.iter_mut().for_each(|v| *v = bias[co]);
        for ci in 0..s.c_in {
            let src = &padded[ci * hp * wp..(ci + 1) * hp * wp];
            for u in 0..k {
                for v in 0..k {
                    let wv = wts[((co * s.c_in + ci) * k + u) * k + v];
                    for i in 0..s.ho {
                        let row = &src[(i + u) * wp + v..(i + u) * wp + v + s.wo];
                        axpy(wv, row, &mut o[i * s.wo..(i + 1) * s.wo]);
                    }
                }
            }
        }
    }
    out
}

/// Accumulates kernel and bias gradients; returns the padded-input gradient
/// when requested.
#[allow(clippy::too_many_arguments)]
fn conv_backward(
    padded: &[f64],
    s: &ConvShape,
    k: usize,
    p: usize,
    wts: &[f64],
    dout: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    need_input: bool,
) -> Vec<f64> {
    let (hp, wp) = (s.h + 2 * p, s.w + 2 * p);
    let mut dpad = if need_input { vec![0.0; s.c_in * hp * wp] } else { Vec::new() };
    for co in 0..s.c_out {
        let d = &dout[co * s.ho * s.wo..(co + 1) * s.ho * s.wo];
        gb[co] += d.iter().sum::<f64>();
        for ci in 0..s.c_in {
            let src = &padded[ci * hp * wp..(ci + 1) * hp * wp];
            for u in 0..k {
                for v in 0..k {
                    let wi = ((co * s.c_in + ci) * k + u) * k + v;
                    let mut acc = 0.0;
                    for i in 0..s.ho {
                        acc += dot(&d[i * s.wo..(i + 1) * s.wo], &src[(i + u) * wp + v..(i + u) * wp + v + s.wo]);
                    }
                    gw[wi] += acc;
                    if need_input {
                        let wv = wts[wi];
                        let dst = &mut dpad[ci * hp * wp..(ci + 1) * hp * wp];
                        for i in 0..s.ho {
                            axpy(wv, &d[i * s.wo..(i + 1) * s.wo], &mut dst[(i + u) * wp + v..(i + u) * wp + v + s.wo]);
                        }
                    }
                }
            }
        }
    }
    dpad
}

pub fn avg_pool(x: &[f64], c: usize, h: usize, w: usize, k: usize, stride: usize) -> Vec<f64> {
    let (ho, wo) = ((h - k) / stride + 1, (w - k) / stride + 1);
    let inv = 1.0 / (k * k) as f64;
    let mut out = vec![0.0; c * ho * wo];
    for ci in 0..c {
        for i in 0..ho {
            for j in 0..wo {
                let mut acc = 0.0;
                for u in 0..k {
                    for v in 0..k {
                        acc += x[(ci * h + i * stride + u) * w + j * stride + v];
                    }
                }
                out[(ci * ho + i) * wo + j] = acc * inv;
            }
        }
    }
    out
}

fn avg_pool_backward(d: &[f64], c: usize, h: usize, w: usize, k: usize, stride: usize) -> Vec<f64> {
    let (ho, wo) = ((h - k) / stride + 1, (w - k) / stride + 1);
    let inv = 1.0 / (k * k) as f64;
    let mut out = vec![0.0; c * h * w];
    for ci in 0..c {
        for i in 0..ho {
            for j in 0..wo {
                let g = d[(ci * ho + i) * wo + j] * inv;
                for u in 0..k {
                    for v in 0..k {
                        out[(ci * h + i * stride + u) * w + j * stride + v] += g;
                    }
                }
            }
        }
    }
    out
}
