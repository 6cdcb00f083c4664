//! Fourier prior: fields bandlimited to `|k|, |j| <= N_F` modes of an inner
//! square `[-pi/2 + eps, pi/2 - eps]^2`, zero outside it.
//!
//! Coefficients are stored as the real and imaginary parts of the complex
//! Fourier coefficients `F(k, j) = c + i d`. Fields produced by projection
//! satisfy `F(-k, -j) = conj F(k, j)`, so `c` is even and `d` is odd; raw
//! samples and perturbations need not, and synthesis takes the real part.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::FieldPipeline;
use crate::error::{Error, Result};
use crate::fields::{FieldGrid, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FourierPriorConfig {
    pub nf: usize,
    /// Inner-square margin `eps`.
    pub margin: f64,
    /// Range of the value that `min f1` is mapped to.
    pub low: [f64; 2],
    /// Range of the value that `max f1` is mapped to.
    pub high: [f64; 2],
    /// Samples per axis used to truncate the rescaled field.
    pub sample_res: usize,
    pub c_sigma: f64,
}

impl Default for FourierPriorConfig {
    fn default() -> Self {
        Self {
            nf: 3,
            margin: PI / 8.0,
            low: [-0.2, -0.1],
            high: [2.0, 3.0],
            sample_res: 128,
            c_sigma: 2.0,
        }
    }
}

impl FourierPriorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nf == 0 {
            return Err(Error::invalid("nf must be at least 1"));
        }
        if !(self.margin > 0.0 && self.margin < FRAC_PI_2) {
            return Err(Error::invalid("margin must lie in (0, pi/2)"));
        }
        if self.low[0] > self.low[1] || self.high[0] > self.high[1] {
            return Err(Error::invalid("empty rescaling range"));
        }
        if self.sample_res < 2 * self.nf + 1 {
            return Err(Error::invalid("sample_res below the number of modes"));
        }
        if !(self.c_sigma >= 0.0) {
            return Err(Error::invalid("c_sigma must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCoeffs {
    nf: usize,
    c: Vec<f64>,
    d: Vec<f64>,
}

impl FourierCoeffs {
    pub fn zeros(nf: usize) -> Self {
        let m = (2 * nf + 1).pow(2);
        Self { nf, c: vec![0.0; m], d: vec![0.0; m] }
    }

    pub fn new(nf: usize, c: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        let m = (2 * nf + 1).pow(2);
        if c.len() != m || d.len() != m {
            return Err(Error::shape(format!("{m} coefficients"), format!("{} / {}", c.len(), d.len())));
        }
        if c.iter().chain(&d).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Fourier coefficients".into()));
        }
        Ok(Self { nf, c, d })
    }

    pub fn nf(&self) -> usize {
        self.nf
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn index(&self, k: i64, j: i64) -> usize {
        let w = 2 * self.nf as i64 + 1;
        ((k + self.nf as i64) * w + (j + self.nf as i64)) as usize
    }

    pub fn get(&self, k: i64, j: i64) -> C64 {
        let i = self.index(k, j);
        C64::new(self.c[i], self.d[i])
    }

    pub fn set(&mut self, k: i64, j: i64, v: C64) {
        let i = self.index(k, j);
        self.c[i] = v.re;
        self.d[i] = v.im;
    }

    /// `c` followed by `d`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.c.iter().chain(&self.d).copied().collect()
    }

    pub fn distance(&self, other: &FourierCoeffs) -> f64 {
        self.to_flat()
            .iter()
            .zip(other.to_flat())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub nf: usize,
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub c_sigma: f64,
}

impl SigmaEstimate {
    pub fn zeros(nf: usize) -> Self {
        let m = (2 * nf + 1).pow(2);
        Self { nf, sigma1: vec![0.0; m], sigma2: vec![0.0; m], c_sigma: 0.0 }
    }

    pub fn uniform(nf: usize, s: f64) -> Self {
        let m = (2 * nf + 1).pow(2);
        Self { nf, sigma1: vec![s; m], sigma2: vec![s; m], c_sigma: 1.0 }
    }

    pub fn mean(&self) -> f64 {
        let all = self.sigma1.iter().chain(&self.sigma2);
        all.clone().sum::<f64>() / all.count() as f64
    }
}

pub fn omega(margin: f64) -> f64 {
    2.0 * PI / (PI - 2.0 * margin)
}

/// Indices of grid nodes strictly inside the inner square.
pub fn inner_indices(grid: Grid, margin: f64) -> Vec<usize> {
    let half = FRAC_PI_2 - margin;
    (0..grid.n()).filter(|&a| grid.node(a).abs() < half).collect()
}

fn phases(omega: f64, nf: usize, xs: &[f64], sign: f64) -> Vec<Vec<C64>> {
    (-(nf as i64)..=nf as i64)
        .map(|k| xs.iter().map(|&x| C64::from_polar(1.0, sign * omega * k as f64 * x)).collect())
        .collect()
}

/// `Re sum F(k,j) exp(i omega (k x + j y))` on the tensor grid `xs x ys`,
/// row-major in `xs`.
fn eval_series(coeffs: &FourierCoeffs, omega: f64, xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let nf = coeffs.nf;
    let w = 2 * nf + 1;
    let ex = phases(omega, nf, xs, 1.0);
    let ey = phases(omega, nf, ys, 1.0);
    let mut out = vec![0.0; xs.len() * ys.len()];
    let mut t = vec![C64::new(0.0, 0.0); w];
    for a in 0..xs.len() {
        for (jj, tj) in t.iter_mut().enumerate() {
            *tj = (0..w)
                .map(|kk| C64::new(coeffs.c[kk * w + jj], coeffs.d[kk * w + jj]) * ex[kk][a])
                .sum();
        }
        for b in 0..ys.len() {
            out[a * ys.len() + b] = (0..w).map(|jj| (t[jj] * ey[jj][b]).re).sum();
        }
    }
    out
}

/// Mean-weighted discrete Fourier coefficients of samples on `xs x ys`.
fn analyze(values: &[f64], omega: f64, nf: usize, xs: &[f64], ys: &[f64]) -> FourierCoeffs {
    let w = 2 * nf + 1;
    let ex = phases(omega, nf, xs, -1.0);
    let ey = phases(omega, nf, ys, -1.0);
    let scale = 1.0 / (xs.len() * ys.len()) as f64;
    // partial transform along y first
    let mut py = vec![C64::new(0.0, 0.0); xs.len() * w];
    for a in 0..xs.len() {
        let row = &values[a * ys.len()..(a + 1) * ys.len()];
        for jj in 0..w {
            py[a * w + jj] = row.iter().zip(&ey[jj]).map(|(v, e)| e * v).sum();
        }
    }
    let mut out = FourierCoeffs::zeros(nf);
    for kk in 0..w {
        for jj in 0..w {
            let f: C64 = (0..xs.len()).map(|a| ex[kk][a] * py[a * w + jj]).sum::<C64>() * scale;
            out.c[kk * w + jj] = f.re;
            out.d[kk * w + jj] = f.im;
        }
    }
    out
}

/// Series evaluated on the inner-square nodes, zero elsewhere.
pub fn synthesize(coeffs: &FourierCoeffs, grid: Grid, margin: f64) -> FieldGrid {
    let idx = inner_indices(grid, margin);
    let xs: Vec<f64> = idx.iter().map(|&a| grid.node(a)).collect();
    let vals = eval_series(coeffs, omega(margin), &xs, &xs);
    let mut f = FieldGrid::zeros(grid);
    for (p, &a) in idx.iter().enumerate() {
        for (q, &b) in idx.iter().enumerate() {
            f.values_mut()[grid.index(a, b)] = vals[p * xs.len() + q];
        }
    }
    f
}

/// Synthesis, mollification and restriction to the sine basis.
pub fn reconstruct(coeffs: &FourierCoeffs, margin: f64, pipeline: &FieldPipeline) -> Result<FieldGrid> {
    pipeline.finish(&synthesize(coeffs, pipeline.grid, margin))
}

/// Fourier coefficients of the restriction of `f` to the inner square. Exact
/// inverse of [`synthesize`] when the inner square holds a whole number of
/// cells and `2 nf + 1` does not exceed the nodes per axis.
pub fn fourier_project(f: &FieldGrid, nf: usize, margin: f64) -> Result<FourierCoeffs> {
    let grid = f.grid();
    let idx = inner_indices(grid, margin);
    if idx.len() < 2 * nf + 1 {
        return Err(Error::invalid(format!(
            "inner square has {} nodes per axis, need at least {}",
            idx.len(),
            2 * nf + 1
        )));
    }
    let xs: Vec<f64> = idx.iter().map(|&a| grid.node(a)).collect();
    let mut vals = Vec::with_capacity(idx.len() * idx.len());
    for &a in &idx {
        for &b in &idx {
            vals.push(f.at(a, b));
        }
    }
    Ok(analyze(&vals, omega(margin), nf, &xs, &xs))
}

/// Piecewise-linear rescaling with `min -> low`, `0 -> 0`, `max -> high`. A
/// one-signed input is mapped affinely from `[min, max]` onto `[low, high]`.
pub fn psi_map(values: &[f64], low: f64, high: f64) -> Result<Vec<f64>> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max - min > 1e-12 * max.abs().max(min.abs()).max(1e-300)) {
        return Err(Error::Degenerate("constant field cannot be rescaled".into()));
    }
    Ok(if min < 0.0 && max > 0.0 {
        values
            .iter()
            .map(|&v| if v >= 0.0 { v * (high / max) } else { v * (low / min) })
            .collect()
    } else {
        values.iter().map(|&v| low + (v - min) * (high - low) / (max - min)).collect()
    })
}

pub fn sample_fourier_prior<R: Rng + ?Sized>(
    cfg: &FourierPriorConfig,
    pipeline: &FieldPipeline,
    rng: &mut R,
) -> Result<(FourierCoeffs, FieldGrid)> {
    cfg.validate()?;
    let m = (2 * cfg.nf + 1).pow(2);
    let c: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let d: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let raw = FourierCoeffs { nf: cfg.nf, c, d };
    let low = rng.random_range(cfg.low[0]..=cfg.low[1]);
    let high = rng.random_range(cfg.high[0]..=cfg.high[1]);
    let coeffs = rescale_and_truncate(&raw, cfg, low, high)?;
    let field = reconstruct(&coeffs, cfg.margin, pipeline)?;
    Ok((coeffs, field))
}

/// Samples of `f1` on the periodic grid used for rescaling.
pub fn sample_points(cfg: &FourierPriorConfig) -> Vec<f64> {
    let len = PI - 2.0 * cfg.margin;
    (0..cfg.sample_res)
        .map(|s| -len / 2.0 + s as f64 * len / cfg.sample_res as f64)
        .collect()
}

/// Rescale `Re sum (c + i d) e^{...}` through [`psi_map`] on the periodic
/// sample grid and keep the first `nf` modes.
pub fn rescale_and_truncate(raw: &FourierCoeffs, cfg: &FourierPriorConfig, low: f64, high: f64) -> Result<FourierCoeffs> {
    let ts = sample_points(cfg);
    let w = omega(cfg.margin);
    let f1 = eval_series(raw, w, &ts, &ts);
    if f1.iter().all(|&v| v == 0.0) {
        return Ok(FourierCoeffs::zeros(raw.nf));
    }
    let f0 = psi_map(&f1, low, high)?;
    Ok(analyze(&f0, w, raw.nf, &ts, &ts))
}

/// Per-mode `C * mean |pred - truth|` over the validation pairs.
pub fn estimate_sigma(preds: &[FourierCoeffs], truths: &[FourierCoeffs], c_sigma: f64) -> Result<SigmaEstimate> {
    if preds.is_empty() || preds.len() != truths.len() {
        return Err(Error::invalid(format!(
            "need equal non-empty validation lists, got {} predictions and {} truths",
            preds.len(),
            truths.len()
        )));
    }
    let nf = preds[0].nf;
    if preds.iter().chain(truths).any(|p| p.nf != nf) {
        return Err(Error::invalid("validation coefficients differ in nf"));
    }
    let mut est = SigmaEstimate::zeros(nf);
    est.c_sigma = c_sigma;
    for (p, t) in preds.iter().zip(truths) {
        for i in 0..est.sigma1.len() {
            est.sigma1[i] += (p.c[i] - t.c[i]).abs();
            est.sigma2[i] += (p.d[i] - t.d[i]).abs();
        }
    }
    let scale = c_sigma / preds.len() as f64;
    est.sigma1.iter_mut().chain(est.sigma2.iter_mut()).for_each(|s| *s *= scale);
    Ok(est)
}

pub fn perturb_coeffs<R: Rng + ?Sized>(coeffs: &FourierCoeffs, sigma: &SigmaEstimate, rng: &mut R) -> Result<FourierCoeffs> {
    if sigma.nf != coeffs.nf {
        return Err(Error::shape(format!("nf {}", coeffs.nf), format!("nf {}", sigma.nf)));
    }
    let draw = |mean: f64, s: f64, rng: &mut R| -> Result<f64> {
        let n = Normal::new(mean, s).map_err(|_| Error::invalid(format!("bad perturbation scale {s}")))?;
        Ok(n.sample(rng))
    };
    let mut out = coeffs.clone();
    for i in 0..out.c.len() {
        out.c[i] = draw(coeffs.c[i], sigma.sigma1[i], rng)?;
        out.d[i] = draw(coeffs.d[i], sigma.sigma2[i], rng)?;
    }
    Ok(out)
}

/// Gaussian perturbation of every coefficient followed by reconstruction
/// without rescaling.
pub fn perturb_fourier<R: Rng + ?Sized>(
    coeffs: &FourierCoeffs,
    sigma: &SigmaEstimate,
    margin: f64,
    pipeline: &FieldPipeline,
    rng: &mut R,
) -> Result<(FourierCoeffs, FieldGrid)> {
    let out = perturb_coeffs(coeffs, sigma, rng)?;
    let field = reconstruct(&out, margin, pipeline)?;
    Ok((out, field))
}
