//! Plane-wave scattering by a compactly supported potential on the grid:
//! Lippmann-Schwinger solve, Born approximation and far receivers.
//!
//! The volume integral `k^2 int G(x - y) q(y) u(y) dy` is discretized by a
//! Nyström rule on the grid nodes. Off-diagonal weights are `h^2 G(|x_a - x_b|)`;
//! the self term integrates the logarithmic singularity over a disk of the
//! cell's area. Because the grid is uniform, the Nyström matrix is two-level
//! Toeplitz and is applied through a zero-padded FFT convolution.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

pub use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{eval_sine_basis, FieldGrid, Grid, SineCoeffs};
use crate::gmres::{gmres, GmresConfig, GmresStats, LinearOperator};
use crate::special::{greens_h0_unchecked, EULER_GAMMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ForwardMode {
    Born,
    #[default]
    Ls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterConfig {
    /// Wavenumber.
    pub k: f64,
    pub n_dirs: usize,
    pub n_recv: usize,
    /// Receiver circle radius.
    pub radius: f64,
    pub mode: ForwardMode,
    pub ls_tol: f64,
    pub ls_max_iter: usize,
    pub ls_restart: usize,
    /// Standard deviation of additive circular complex Gaussian noise.
    pub noise_std: f64,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        Self {
            k: 5.0,
            n_dirs: 16,
            n_recv: 16,
            radius: 10.0,
            mode: ForwardMode::Ls,
            ls_tol: 1e-8,
            ls_max_iter: 2000,
            ls_restart: 50,
            noise_std: 0.0,
        }
    }
}

impl ScatterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return Err(Error::invalid(format!("wavenumber must be positive, got {}", self.k)));
        }
        if self.n_dirs == 0 || self.n_recv == 0 {
            return Err(Error::invalid("need at least one direction and one receiver"));
        }
        if !(self.radius > PI / std::f64::consts::SQRT_2) {
            return Err(Error::invalid(format!(
                "receiver radius {} must exceed pi/sqrt(2) so receivers lie outside the domain",
                self.radius
            )));
        }
        if !(self.ls_tol > 0.0) || self.ls_max_iter == 0 || self.ls_restart == 0 {
            return Err(Error::invalid("iterative solver tolerance and limits must be positive"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::invalid("noise_std must be non-negative"));
        }
        Ok(())
    }
}

/// Incident unit directions and receiver positions.
pub fn make_geometry(cfg: &ScatterConfig) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let dirs = (0..cfg.n_dirs)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / cfg.n_dirs as f64;
            [t.cos(), t.sin()]
        })
        .collect();
    let recv = (0..cfg.n_recv)
        .map(|l| {
            let t = 2.0 * PI * l as f64 / cfg.n_recv as f64;
            [cfg.radius * t.cos(), cfg.radius * t.sin()]
        })
        .collect();
    (dirs, recv)
}

/// Scattered field samples; row `j` is incidence direction `j`, column `l` receiver `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    n_dirs: usize,
    n_recv: usize,
    data: Vec<C64>,
}

impl Measurement {
    pub fn zeros(n_dirs: usize, n_recv: usize) -> Self {
        Self {
            n_dirs,
            n_recv,
            data: vec![C64::new(0.0, 0.0); n_dirs * n_recv],
        }
    }

    pub fn from_data(n_dirs: usize, n_recv: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != n_dirs * n_recv {
            return Err(Error::shape(format!("{}x{}", n_dirs, n_recv), format!("{} entries", data.len())));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("measurement".into()));
        }
        Ok(Self { n_dirs, n_recv, data })
    }

    pub fn n_dirs(&self) -> usize {
        self.n_dirs
    }

    pub fn n_recv(&self) -> usize {
        self.n_recv
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, j: usize, l: usize) -> C64 {
        self.data[j * self.n_recv + l]
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||self - other||_F`
    pub fn distance(&self, other: &Measurement) -> Result<f64> {
        if self.n_dirs != other.n_dirs || self.n_recv != other.n_recv {
            return Err(Error::shape(
                format!("{}x{}", self.n_dirs, self.n_recv),
                format!("{}x{}", other.n_dirs, other.n_recv),
            ));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Network input layout: channel 0 real parts, channel 1 imaginary parts.
    pub fn to_channels(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.data.len());
        out.extend(self.data.iter().map(|z| z.re));
        out.extend(self.data.iter().map(|z| z.im));
        out
    }

    pub fn from_channels(n_dirs: usize, n_recv: usize, channels: &[f64]) -> Result<Self> {
        let len = n_dirs * n_recv;
        if channels.len() != 2 * len {
            return Err(Error::shape(format!("2x{n_dirs}x{n_recv}"), channels.len()));
        }
        let data = (0..len).map(|i| C64::new(channels[i], channels[len + i])).collect();
        Self::from_data(n_dirs, n_recv, data)
    }

    pub fn add_noise(&mut self, std: f64, rng: &mut impl Rng) {
        if std <= 0.0 {
            return;
        }
        let s = std / std::f64::consts::SQRT_2;
        for z in &mut self.data {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z += C64::new(s * re, s * im);
        }
    }
}

/// Precomputed discretization for one grid and scattering configuration.
pub struct ForwardModel {
    grid: Grid,
    cfg: ScatterConfig,
    /// padded size, `2 n`
    pad: usize,
    /// transposed spectrum of the padded Green's kernel
    kernel_hat: Vec<C64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    /// `exp(i k x_a . d_j)`, one row per direction
    incident: Vec<Vec<C64>>,
    /// `k^2 h^2 G(|x_l - x_a|)`, one row per receiver
    receivers: Vec<Vec<C64>>,
}

impl std::fmt::Debug for ForwardModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ForwardModel")
            .field("grid", &self.grid)
            .field("cfg", &self.cfg)
            .finish_non_exhaustive()
    }
}

/// Self-interaction weight: `(i/4) H0(k r)` integrated over a disk of area `h^2`.
pub fn self_term(k: f64, h: f64) -> C64 {
    let rho = h / PI.sqrt();
    let i = C64::new(0.0, 1.0);
    let log_part = (0.5 * k * rho).ln() + EULER_GAMMA - 0.5;
    h * h * 0.25 * i * (1.0 + 2.0 * i / PI * log_part)
}

fn transpose_square(buf: &mut [C64], m: usize) {
    for r in 0..m {
        for c in r + 1..m {
            buf.swap(r * m + c, c * m + r);
        }
    }
}

impl ForwardModel {
    pub fn new(grid: Grid, cfg: &ScatterConfig) -> Result<Self> {
        cfg.validate()?;
        let n = grid.n();
        let m = 2 * n;
        let h = grid.h();
        let k = cfg.k;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        let ifft = planner.plan_fft_inverse(m);

        let mut kernel = vec![C64::new(0.0, 0.0); m * m];
        let offset = |p: usize| -> Option<f64> {
            match p.cmp(&n) {
                std::cmp::Ordering::Less => Some(p as f64),
                std::cmp::Ordering::Greater => Some(p as f64 - m as f64),
                std::cmp::Ordering::Equal => None,
            }
        };
        for p in 0..m {
            for q in 0..m {
                let (Some(dx), Some(dy)) = (offset(p), offset(q)) else {
                    continue;
                };
                kernel[p * m + q] = if p == 0 && q == 0 {
                    self_term(k, h)
                } else {
                    let r = h * (dx * dx + dy * dy).sqrt();
                    h * h * greens_h0_unchecked(k * r)
                };
            }
        }
        let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(&mut kernel, &mut scratch);
        transpose_square(&mut kernel, m);
        fft.process_with_scratch(&mut kernel, &mut scratch);

        let (dirs, recv) = make_geometry(cfg);
        let nodes = grid.nodes();
        let incident = dirs
            .iter()
            .map(|d| {
                let mut row = Vec::with_capacity(grid.len());
                for &x in &nodes {
                    for &y in &nodes {
                        let phase = k * (x * d[0] + y * d[1]);
                        row.push(C64::new(phase.cos(), phase.sin()));
                    }
                }
                row
            })
            .collect();
        let receivers = recv
            .iter()
            .map(|xl| {
                let mut row = Vec::with_capacity(grid.len());
                for &x in &nodes {
                    for &y in &nodes {
                        let r = ((xl[0] - x).powi(2) + (xl[1] - y).powi(2)).sqrt();
                        row.push(k * k * h * h * greens_h0_unchecked(k * r));
                    }
                }
                row
            })
            .collect();

        Ok(Self {
            grid,
            cfg: cfg.clone(),
            pad: m,
            kernel_hat: kernel,
            fft,
            ifft,
            incident,
            receivers,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn config(&self) -> &ScatterConfig {
        &self.cfg
    }

    /// `out <- G x` where `G` is the Nyström matrix without the `k^2` factor.
    pub fn apply_green(&self, x: &[C64], out: &mut [C64], work: &mut ConvWorkspace) {
        let n = self.grid.n();
        let m = self.pad;
        let buf = &mut work.buf;
        buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for a in 0..n {
            buf[a * m..a * m + n].copy_from_slice(&x[a * n..(a + 1) * n]);
        }
        self.fft.process_with_scratch(&mut buf[..n * m], &mut work.scratch);
        transpose_square(buf, m);
        self.fft.process_with_scratch(buf, &mut work.scratch);
        for (b, kh) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= kh;
        }
        self.ifft.process_with_scratch(buf, &mut work.scratch);
        transpose_square(buf, m);
        self.ifft.process_with_scratch(&mut buf[..n * m], &mut work.scratch);
        let scale = 1.0 / (m * m) as f64;
        for a in 0..n {
            for b in 0..n {
                out[a * n + b] = buf[a * m + b] * scale;
            }
        }
    }

    pub fn workspace(&self) -> ConvWorkspace {
        ConvWorkspace {
            buf: vec![C64::new(0.0, 0.0); self.pad * self.pad],
            scratch: vec![C64::new(0.0, 0.0); self.fft.get_inplace_scratch_len().max(self.ifft.get_inplace_scratch_len())],
        }
    }

    fn check_field(&self, q: &FieldGrid) -> Result<()> {
        if q.grid() != self.grid {
            return Err(Error::shape(format!("n={}", self.grid.n()), format!("n={}", q.grid().n())));
        }
        if q.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scattering potential".into()));
        }
        Ok(())
    }

    fn receive(&self, q: &[f64], support: &[usize], u: &[C64], j: usize, out: &mut Measurement) {
        let nr = self.cfg.n_recv;
        for (l, row) in self.receivers.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &a in support {
                acc += row[a] * (q[a] * u[a]);
            }
            out.data[j * nr + l] = acc;
        }
    }

    /// First-order (Born) measurement, linear in `q`.
    pub fn born(&self, q: &FieldGrid) -> Result<Measurement> {
        self.check_field(q)?;
        let qv = q.values();
        let support: Vec<usize> = (0..qv.len()).filter(|&a| qv[a] != 0.0).collect();
        let mut out = Measurement::zeros(self.cfg.n_dirs, self.cfg.n_recv);
        for (j, inc) in self.incident.iter().enumerate() {
            self.receive(qv, &support, inc, j, &mut out);
        }
        Ok(out)
    }

    /// Full Lippmann-Schwinger solve with per-direction solver statistics.
    pub fn solve_with_stats(&self, q: &FieldGrid) -> Result<(Measurement, Vec<GmresStats>)> {
        self.check_field(q)?;
        let qv = q.values();
        let support: Vec<usize> = (0..qv.len()).filter(|&a| qv[a] != 0.0).collect();
        let mut out = Measurement::zeros(self.cfg.n_dirs, self.cfg.n_recv);
        let mut stats = Vec::with_capacity(self.cfg.n_dirs);
        if support.is_empty() {
            stats.resize(self.cfg.n_dirs, GmresStats { iterations: 0, residual: 0.0 });
            return Ok((out, stats));
        }
        let op = LsOperator {
            model: self,
            q: qv,
            k2: self.cfg.k * self.cfg.k,
            state: RefCell::new((self.workspace(), vec![C64::new(0.0, 0.0); qv.len()])),
        };
        let gcfg = GmresConfig {
            restart: self.cfg.ls_restart,
            max_iter: self.cfg.ls_max_iter,
            tol: self.cfg.ls_tol,
        };
        for (j, inc) in self.incident.iter().enumerate() {
            let mut u = inc.clone();
            let st = gmres(&op, inc, &mut u, &gcfg)?;
            stats.push(st);
            self.receive(qv, &support, &u, j, &mut out);
        }
        Ok((out, stats))
    }

    pub fn solve(&self, q: &FieldGrid) -> Result<Measurement> {
        Ok(self.solve_with_stats(q)?.0)
    }

    /// Dispatches on the configured mode and adds configured noise.
    pub fn forward(&self, q: &FieldGrid, rng: &mut impl Rng) -> Result<Measurement> {
        let mut m = match self.cfg.mode {
            ForwardMode::Ls => self.solve(q)?,
            ForwardMode::Born => self.born(q)?,
        };
        m.add_noise(self.cfg.noise_std, rng);
        Ok(m)
    }

    /// Noise-free forward map in the configured mode.
    pub fn forward_clean(&self, q: &FieldGrid) -> Result<Measurement> {
        match self.cfg.mode {
            ForwardMode::Ls => self.solve(q),
            ForwardMode::Born => self.born(q),
        }
    }

    /// `||F(eval(qhat)) - m_obs||_F / ||m_obs||_F`
    pub fn measurement_error(&self, qhat: &SineCoeffs, m_obs: &Measurement) -> Result<f64> {
        let denom = m_obs.frobenius();
        if denom == 0.0 {
            return Err(Error::ZeroReference);
        }
        let pred = self.forward_clean(&eval_sine_basis(qhat, self.grid))?;
        Ok(pred.distance(m_obs)? / denom)
    }
}

pub struct ConvWorkspace {
    buf: Vec<C64>,
    scratch: Vec<C64>,
}

struct LsOperator<'a> {
    model: &'a ForwardModel,
    q: &'a [f64],
    k2: f64,
    state: RefCell<(ConvWorkspace, Vec<C64>)>,
}

impl LinearOperator for LsOperator<'_> {
    fn dim(&self) -> usize {
        self.q.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let mut state = self.state.borrow_mut();
        let (work, qx) = &mut *state;
        for ((t, xi), qi) in qx.iter_mut().zip(x).zip(self.q) {
            *t = xi * *qi;
        }
        self.model.apply_green(qx, y, work);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi - *yi * self.k2;
        }
    }
}

/// One-shot Lippmann-Schwinger forward solve (noise added when configured,
/// drawn from `noise_seed`).
pub fn forward_solve(q: &FieldGrid, cfg: &ScatterConfig, noise_seed: u64) -> Result<Measurement> {
    let mut cfg = cfg.clone();
    cfg.mode = ForwardMode::Ls;
    let model = ForwardModel::new(q.grid(), &cfg)?;
    let mut rng = crate::rng::stream(noise_seed, crate::rng::Stream::Noise, 0);
    model.forward(q, &mut rng)
}

pub fn forward_born(q: &FieldGrid, cfg: &ScatterConfig) -> Result<Measurement> {
    ForwardModel::new(q.grid(), cfg)?.born(q)
}

pub fn measurement_error(
    qhat: &SineCoeffs,
    m_obs: &Measurement,
    cfg: &ScatterConfig,
    grid: Grid,
) -> Result<f64> {
    let mut cfg = cfg.clone();
    cfg.mode = ForwardMode::Ls;
    ForwardModel::new(grid, &cfg)?.measurement_error(qhat, m_obs)
}
