//! Training pairs with per-channel input standardization and an affine
//! target scaling.

use serde::{Deserialize, Serialize};

use super::INPUT_CHANNELS;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; INPUT_CHANNELS],
    pub std: [f64; INPUT_CHANNELS],
}

impl NormStats {
    /// Population mean and standard deviation of each channel over all
    /// samples and positions.
    pub fn fit(inputs: &[Vec<f64>]) -> Result<Self> {
        let len = inputs.first().map(Vec::len).ok_or_else(|| Error::invalid("no samples to fit statistics"))?;
        if len % INPUT_CHANNELS != 0 || inputs.iter().any(|x| x.len() != len) {
            return Err(Error::shape(format!("{len} inputs per sample"), "inconsistent sample"));
        }
        let per = len / INPUT_CHANNELS;
        let count = (per * inputs.len()) as f64;
        let mut stats = NormStats { mean: [0.0; INPUT_CHANNELS], std: [0.0; INPUT_CHANNELS] };
        for c in 0..INPUT_CHANNELS {
            let mean = inputs.iter().map(|x| x[c * per..(c + 1) * per].iter().sum::<f64>()).sum::<f64>() / count;
            let var = inputs
                .iter()
                .map(|x| x[c * per..(c + 1) * per].iter().map(|v| (v - mean).powi(2)).sum::<f64>())
                .sum::<f64>()
                / count;
            let std = var.sqrt();
            if !(std > 1e-300) || !std.is_finite() {
                return Err(Error::ZeroVariance { channel: c });
            }
            stats.mean[c] = mean;
            stats.std[c] = std;
        }
        Ok(stats)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let per = x.len() / INPUT_CHANNELS;
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                let c = (i / per).min(INPUT_CHANNELS - 1);
                (v - self.mean[c]) / self.std[c]
            })
            .collect()
    }
}

/// Per-output mean and one shared scale for the targets. A single scale
/// keeps the loss proportional to the squared l2 error in coefficient space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub mean: Vec<f64>,
    pub scale: f64,
}

impl TargetStats {
    /// Column means and the root mean squared deviation over all entries.
    pub fn fit(targets: &[Vec<f64>]) -> Result<Self> {
        let m = targets.first().map(Vec::len).ok_or_else(|| Error::invalid("no targets to fit statistics"))?;
        if m == 0 || targets.iter().any(|t| t.len() != m) {
            return Err(Error::shape(format!("{m} targets per sample"), "inconsistent sample"));
        }
        let n = targets.len() as f64;
        let mean: Vec<f64> = (0..m).map(|j| targets.iter().map(|t| t[j]).sum::<f64>() / n).collect();
        let ss: f64 = targets.iter().flat_map(|t| t.iter().zip(&mean).map(|(a, b)| (a - b).powi(2))).sum();
        let scale = (ss / (n * m as f64)).sqrt();
        if !(scale > 1e-300) || !scale.is_finite() {
            return Err(Error::Degenerate("targets have zero variance".into()));
        }
        Ok(Self { mean, scale })
    }

    pub fn identity(len: usize) -> Self {
        Self { mean: vec![0.0; len], scale: 1.0 }
    }

    pub fn apply(&self, t: &[f64]) -> Vec<f64> {
        t.iter().zip(&self.mean).map(|(v, m)| (v - m) / self.scale).collect()
    }

    pub fn invert(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.mean).map(|(v, m)| v * self.scale + m).collect()
    }
}

/// Standardized inputs with (possibly scaled) targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub stats: NormStats,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_refs(&self) -> Vec<&[f64]> {
        self.inputs.iter().map(Vec::as_slice).collect()
    }

    pub fn target_refs(&self) -> Vec<&[f64]> {
        self.targets.iter().map(Vec::as_slice).collect()
    }
}

/// Standardizes raw channel inputs, fitting statistics unless `stats` is
/// given.
pub fn standardize(inputs: &[Vec<f64>], targets: &[Vec<f64>], stats: Option<NormStats>) -> Result<Dataset> {
    if inputs.len() != targets.len() {
        return Err(Error::shape(format!("{} targets", inputs.len()), targets.len().to_string()));
    }
    let stats = match stats {
        Some(s) => s,
        None => NormStats::fit(inputs)?,
    };
    if let Some(first) = inputs.first() {
        if first.len() % INPUT_CHANNELS != 0 || inputs.iter().any(|x| x.len() != first.len()) {
            return Err(Error::shape(format!("{} inputs per sample", first.len()), "inconsistent sample"));
        }
    }
    if let Some(first) = targets.first() {
        if targets.iter().any(|t| t.len() != first.len()) {
            return Err(Error::shape(format!("{} targets per sample", first.len()), "inconsistent sample"));
        }
    }
    Ok(Dataset {
        inputs: inputs.iter().map(|x| stats.apply(x)).collect(),
        targets: targets.to_vec(),
        stats,
    })
}
