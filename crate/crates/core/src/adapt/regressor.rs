//! The learned inverse map as seen by the adaptive loop.

use super::dataset::SampleSet;
use crate::error::Result;
use crate::nn::{standardize, train, Dataset, NetConfig, NetWeights, Network, NormStats, TargetStats, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val: f64,
}

impl From<&TrainOutcome> for FitReport {
    fn from(o: &TrainOutcome) -> Self {
        Self { epochs: o.epochs_run(), best_epoch: o.best_epoch, best_val: o.best_val }
    }
}

pub trait Regressor {
    /// Target coefficients from raw measurement channels.
    fn predict(&self, input: &[f64]) -> Result<Vec<f64>>;
    /// Warm-started fine-tuning on raw samples.
    fn fine_tune(&mut self, train: &SampleSet, val: &SampleSet, cfg: &TrainConfig) -> Result<FitReport>;
    /// Fingerprint of the current parameters.
    fn checksum(&self) -> u64;
}

/// The convolutional network with the input and target statistics of its
/// base dataset.
#[derive(Debug, Clone)]
pub struct NetRegressor {
    pub net: Network,
    pub weights: NetWeights,
    pub stats: NormStats,
    pub target_stats: TargetStats,
}

impl NetRegressor {
    /// Fits input statistics on `base` and trains from a fresh
    /// initialization seeded by `init_seed`.
    pub fn train_base(
        cfg: NetConfig,
        base: &SampleSet,
        val: &SampleSet,
        tcfg: &TrainConfig,
        init_seed: u64,
    ) -> Result<(Self, TrainOutcome)> {
        let net = Network::new(cfg)?;
        let mut reg = NetRegressor {
            weights: net.init(init_seed),
            net,
            stats: NormStats::fit(&base.inputs)?,
            target_stats: TargetStats::fit(&base.targets)?,
        };
        let (tr, va) = (reg.prepare(base)?, reg.prepare(val)?);
        let out = train(&reg.net, &tr, &va, reg.weights.clone(), tcfg)?;
        reg.weights = out.weights.clone();
        Ok((reg, out))
    }

    fn prepare(&self, set: &SampleSet) -> Result<Dataset> {
        let targets: Vec<Vec<f64>> = set.targets.iter().map(|t| self.target_stats.apply(t)).collect();
        standardize(&set.inputs, &targets, Some(self.stats))
    }
}

/// FNV-1a over the little-endian parameter bytes; stable across builds.
pub fn checksum_params(params: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in params.iter().flat_map(|p| p.to_le_bytes()) {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl Regressor for NetRegressor {
    fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.target_stats.invert(&self.net.forward(&self.weights, &self.stats.apply(input))?))
    }

    fn fine_tune(&mut self, train_set: &SampleSet, val: &SampleSet, cfg: &TrainConfig) -> Result<FitReport> {
        let (tr, va) = (self.prepare(train_set)?, self.prepare(val)?);
        let out = train(&self.net, &tr, &va, self.weights.clone(), cfg)?;
        self.weights = out.weights.clone();
        Ok(FitReport::from(&out))
    }

    fn checksum(&self) -> u64 {
        checksum_params(&self.weights.params)
    }
}
