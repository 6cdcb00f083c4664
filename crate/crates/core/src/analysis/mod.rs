//! Data-efficiency analysis: log-linear scaling fits of non-adaptive error
//! against training-set size, and the efficiency factor of an adaptive run.

pub mod experiment;
pub mod report;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `eps = a ln N + b` fitted by ordinary least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
    pub points: Vec<(f64, f64)>,
}

impl ScalingFit {
    pub fn predict(&self, n: f64) -> f64 {
        self.a * n.ln() + self.b
    }

    /// Training-set size at which the fitted line reaches `eps`.
    pub fn required_size(&self, eps: f64) -> f64 {
        ((eps - self.b) / self.a).exp()
    }
}

pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.iter().any(|&(n, e)| !(n > 0.0) || !n.is_finite() || !e.is_finite()) {
        return Err(Error::invalid("scaling points need positive sizes and finite errors"));
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if points.len() < 2 || !(sxx > 0.0) {
        return Err(Error::Degenerate("scaling fit needs at least two distinct sizes".into()));
    }
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let ss_res: f64 = xs.iter().zip(points).map(|(x, p)| (p.1 - a * x - b).powi(2)).sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    if a >= 0.0 {
        log::warn!("scaling fit has non-negative slope {a}");
    }
    Ok(ScalingFit { a, b, r2, points: points.to_vec() })
}

/// Total per-instance training samples of an adaptive run:
/// `N_base_model + N_round * N_adapt`.
pub fn adaptive_budget(n_base_model: usize, n_round: usize, n_adapt: usize) -> usize {
    n_base_model + n_round * n_adapt
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub target_eps: f64,
    pub n_adaptive: f64,
    pub n_nonadaptive: f64,
    pub f_eff: f64,
    /// Whether `n_nonadaptive` exceeds ten times the largest fitted size.
    pub far_extrapolation: bool,
}

impl EfficiencyReport {
    pub fn from_counts(target_eps: f64, n_nonadaptive: f64, n_adaptive: f64) -> Result<Self> {
        if !(n_adaptive > 0.0 && n_nonadaptive > 0.0) {
            return Err(Error::invalid("sample counts must be positive"));
        }
        Ok(Self {
            target_eps,
            n_adaptive,
            n_nonadaptive,
            f_eff: n_nonadaptive / n_adaptive,
            far_extrapolation: false,
        })
    }
}

/// Ratio of the non-adaptive size needed to reach `achieved_eps` (from the
/// fit) to the adaptive budget.
pub fn efficiency_factor(fit: &ScalingFit, n_adaptive: usize, achieved_eps: f64) -> Result<EfficiencyReport> {
    if !(fit.a < 0.0) {
        return Err(Error::invalid(format!(
            "scaling slope {} is not negative; extrapolation undefined",
            fit.a
        )));
    }
    let n_na = fit.required_size(achieved_eps);
    let mut r = EfficiencyReport::from_counts(achieved_eps, n_na, n_adaptive as f64)?;
    let largest = fit.points.iter().map(|p| p.0).fold(0.0, f64::max);
    r.far_extrapolation = n_na > 10.0 * largest;
    Ok(r)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}
