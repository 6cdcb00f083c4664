//! Instance-wise adaptive refinement.
//!
//! Starting from the base model's prediction for one observed measurement,
//! each round projects the current estimate onto the prior manifold, draws
//! local perturbations around it, forward-solves them, mixes in the nearest
//! base samples, fine-tunes the regressor and predicts again.

pub mod dataset;
pub mod regressor;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{relative_l2, FieldGrid, SineCoeffs};
use crate::nn::TrainConfig;
use crate::priors::{estimate_sigma, fourier_project, Disk, DiskSpec, PerturbScale, PriorConfig, PriorPoint, SigmaEstimate};
use crate::rng::{derive_seed, Stream};
use crate::scatter::Measurement;

pub use dataset::{
    build_adaptive_dataset, generate_base_dataset, generate_dataset, nearest_base_subset, perturbation_samples, Context,
    SampleSet,
};
pub use regressor::{checksum_params, FitReport, NetRegressor, Regressor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Stopping {
    FixedRounds,
    /// Stop once the best measurement error of the last `window` rounds is
    /// not at least `threshold` (relative) below the best before them.
    MeasurementPlateau { threshold: f64, window: usize },
}

impl Default for Stopping {
    fn default() -> Self {
        Stopping::FixedRounds
    }
}

impl Stopping {
    pub fn plateau() -> Self {
        Stopping::MeasurementPlateau { threshold: 0.02, window: 2 }
    }

    /// Whether to stop after the rounds whose measurement errors are given.
    pub fn should_stop(&self, errors: &[f64]) -> bool {
        match *self {
            Stopping::FixedRounds => false,
            Stopping::MeasurementPlateau { threshold, window } => {
                if window == 0 || errors.len() <= window {
                    return false;
                }
                let split = errors.len() - window;
                let before = errors[..split].iter().cloned().fold(f64::INFINITY, f64::min);
                let recent = errors[split..].iter().cloned().fold(f64::INFINITY, f64::min);
                recent > before * (1.0 - threshold)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptConfig {
    pub n_round: usize,
    pub n_adapt: usize,
    pub n_base: usize,
    pub stopping: Stopping,
    pub fine_tune: TrainConfig,
    /// Validation size as a fraction of each training component.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            n_round: 3,
            n_adapt: 50,
            n_base: 100,
            stopping: Stopping::FixedRounds,
            fine_tune: TrainConfig { lr: 0.01, ..TrainConfig::default() },
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_adapt == 0 && self.n_base == 0 {
            return Err(Error::invalid("n_adapt and n_base cannot both be zero"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction <= 1.0) {
            return Err(Error::invalid("val_fraction must lie in (0, 1]"));
        }
        self.fine_tune.validate()
    }

    fn val_sizes(&self) -> (usize, usize) {
        let f = |n: usize| if n == 0 { 0 } else { ((n as f64 * self.val_fraction).ceil() as usize).max(1) };
        (f(self.n_adapt), f(self.n_base))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub prediction: Vec<f64>,
    /// Manifold point whose neighbourhood produced this round's data; none
    /// for the base prediction.
    pub point: Option<PriorPoint>,
    pub fallback: bool,
    pub relative_error: Option<f64>,
    pub measurement_error: f64,
    pub n_adapt_samples: usize,
    pub n_base_samples: usize,
    pub n_val_samples: usize,
    pub epochs: usize,
    pub weights_in: u64,
    pub weights_out: u64,
    /// Perturbation scales used to build this round's data (Fourier prior).
    pub sigma: Option<SigmaEstimate>,
    /// Forward solves spent on training data so far, excluding the base set.
    pub adaptive_solves: usize,
    pub validation_solves: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptOutcome {
    pub prediction: Vec<f64>,
    pub records: Vec<RoundRecord>,
}

/// Manifold projection with the empty-detection fallback for the disk prior:
/// a single disk at the field's peak, mid-range radius.
pub fn project_with_fallback(prior: &PriorConfig, field: &FieldGrid) -> Result<(PriorPoint, bool)> {
    let point = prior.project(field)?;
    match (&point, prior) {
        (PriorPoint::Disk(s), PriorConfig::Disk(c)) if s.is_empty() => {
            let g = field.grid();
            let (imax, vmax) = field
                .values()
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |acc, (i, &v)| if v.abs() > acc.1.abs() { (i, v) } else { acc });
            let r = c.ranges;
            let radius = 0.5 * (r.radius_min + r.radius_max);
            let lim = std::f64::consts::FRAC_PI_2 - radius;
            let disk = Disk {
                cx: g.node(imax / g.n()).clamp(-lim, lim),
                cy: g.node(imax % g.n()).clamp(-lim, lim),
                radius,
                amplitude: vmax.clamp(r.amplitude_min, r.amplitude_max),
            };
            Ok((PriorPoint::Disk(DiskSpec { disks: vec![disk] }), true))
        }
        _ => Ok((point, false)),
    }
}

/// Per-mode perturbation scales from a regressor's errors on `val`.
pub fn sigma_from_validation<R: Regressor + ?Sized>(ctx: &Context, reg: &R, val: &SampleSet) -> Result<SigmaEstimate> {
    let PriorConfig::Fourier(c) = ctx.prior else {
        return Err(Error::invalid("perturbation scales are only estimated for the Fourier prior"));
    };
    let mut preds = Vec::with_capacity(val.len());
    let mut truths = Vec::with_capacity(val.len());
    for (x, t) in val.inputs.iter().zip(&val.targets) {
        preds.push(fourier_project(&ctx.field_of(&reg.predict(x)?)?, c.nf, c.margin)?);
        truths.push(fourier_project(&ctx.field_of(t)?, c.nf, c.margin)?);
    }
    estimate_sigma(&preds, &truths, c.c_sigma)
}

fn rel_error(ctx: &Context, pred: &[f64], truth: Option<&[f64]>) -> Result<Option<f64>> {
    truth
        .map(|t| relative_l2(&SineCoeffs::new(ctx.order, pred.to_vec())?, &SineCoeffs::new(ctx.order, t.to_vec())?))
        .transpose()
}

/// Runs the adaptive loop for one observed measurement. `base_val` is the
/// base model's validation set; it seeds the Fourier perturbation scales and
/// supplies the base part of each round's validation data.
pub fn adaptive_solve<R: Regressor + ?Sized>(
    ctx: &Context,
    m_obs: &Measurement,
    reg: &mut R,
    base: &SampleSet,
    base_val: &SampleSet,
    cfg: &AdaptConfig,
    truth: Option<&[f64]>,
) -> Result<AdaptOutcome> {
    cfg.validate()?;
    if cfg.n_base > base.len() {
        return Err(Error::invalid(format!("n_base {} exceeds the base set size {}", cfg.n_base, base.len())));
    }
    let input = m_obs.to_channels();
    let order = ctx.order;
    let mut pred = reg.predict(&input)?;
    let mut sigma = match ctx.prior {
        PriorConfig::Fourier(_) => Some(sigma_from_validation(ctx, reg, base_val)?),
        PriorConfig::Disk(_) => None,
    };
    let meas_err = |p: &[f64]| ctx.model.measurement_error(&SineCoeffs::new(order, p.to_vec())?, m_obs);
    let checksum = reg.checksum();
    let mut records = vec![RoundRecord {
        round: 0,
        prediction: pred.clone(),
        point: None,
        fallback: false,
        relative_error: rel_error(ctx, &pred, truth)?,
        measurement_error: meas_err(&pred)?,
        n_adapt_samples: 0,
        n_base_samples: 0,
        n_val_samples: 0,
        epochs: 0,
        weights_in: checksum,
        weights_out: checksum,
        sigma: None,
        adaptive_solves: 0,
        validation_solves: 0,
    }];
    let (val_adapt, val_base) = cfg.val_sizes();
    let val_base = val_base.min(base_val.len());

    for t in 0..cfg.n_round {
        let round = t + 1;
        let mut run = || -> Result<(RoundRecord, SampleSet)> {
            let field = ctx.field_of(&pred)?;
            let (point, fallback) = project_with_fallback(&ctx.prior, &field)?;
            let scale = match &sigma {
                Some(s) => PerturbScale::Sigma(s.clone()),
                None => PerturbScale::Round(t),
            };
            let seed = derive_seed(cfg.seed, Stream::Round, t as u64);
            let train_set = build_adaptive_dataset(ctx, &point, &scale, cfg.n_adapt, base, &pred, cfg.n_base, seed)?;
            let mut val_set =
                perturbation_samples(ctx, &point, &scale, val_adapt, derive_seed(seed, Stream::Validation, 0))?;
            val_set.extend(base_val.subset(&nearest_base_subset(base_val, &pred, val_base)?));
            let weights_in = reg.checksum();
            let fit = reg.fine_tune(&train_set, &val_set, &cfg.fine_tune)?;
            let weights_out = reg.checksum();
            let next = reg.predict(&input)?;
            let prev = records.last().expect("round 0 recorded");
            let rec = RoundRecord {
                round,
                relative_error: rel_error(ctx, &next, truth)?,
                measurement_error: meas_err(&next)?,
                prediction: next,
                point: Some(point),
                fallback,
                n_adapt_samples: cfg.n_adapt,
                n_base_samples: cfg.n_base,
                n_val_samples: val_set.len(),
                epochs: fit.epochs,
                weights_in,
                weights_out,
                sigma: sigma.clone(),
                adaptive_solves: prev.adaptive_solves + cfg.n_adapt,
                validation_solves: prev.validation_solves + val_adapt,
            };
            Ok((rec, val_set))
        };
        let (rec, val_set) = run().map_err(|e| e.in_round(round))?;
        log::debug!(
            "round {round}: measurement error {:.4e}, relative error {:?}",
            rec.measurement_error,
            rec.relative_error
        );
        pred = rec.prediction.clone();
        if sigma.is_some() {
            sigma = Some(sigma_from_validation(ctx, reg, &val_set).map_err(|e| e.in_round(round))?);
        }
        records.push(rec);
        let errs: Vec<f64> = records.iter().map(|r| r.measurement_error).collect();
        if cfg.stopping.should_stop(&errs) {
            break;
        }
    }
    Ok(AdaptOutcome { prediction: pred, records })
}
