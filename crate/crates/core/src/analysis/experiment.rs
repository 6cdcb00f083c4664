//! Reproducible experiment configuration and the shared drivers for base
//! training, per-instance adaptation and the non-adaptive baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::{adaptive_solve, generate_base_dataset, generate_dataset, AdaptConfig, AdaptOutcome, Context, NetRegressor, Regressor, SampleSet};
use crate::error::{Error, Result};
use crate::fields::{relative_l2, Grid, SineCoeffs};
use crate::nn::{NetConfig, TrainConfig, TrainOutcome};
use crate::priors::{DiskPriorConfig, DiskRanges, PriorConfig};
use crate::rng::{derive_seed, Stream};
use crate::scatter::ScatterConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Every knob of a run. Unknown keys are rejected; missing keys take the
/// desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    /// Grid points per axis.
    pub n: usize,
    /// Mollifier width; `None` uses the grid default.
    pub eps_m: Option<f64>,
    /// Sine order prior fields are restricted to; `None` uses `n / 2`.
    pub render_order: Option<usize>,
    /// Order of the regression target basis.
    pub order: usize,
    pub scatter: ScatterConfig,
    pub prior: PriorConfig,
    pub net: NetConfig,
    pub base_train: TrainConfig,
    pub adapt: AdaptConfig,
    pub n_base_model: usize,
    pub n_test: usize,
    /// Validation size as a fraction of a freshly trained model's dataset.
    pub val_fraction: f64,
    pub out_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scatter = ScatterConfig::default();
        let order = 5;
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            n: 64,
            eps_m: None,
            render_order: None,
            order,
            net: NetConfig::desk([scatter.n_dirs, scatter.n_recv], 2, order),
            scatter,
            prior: PriorConfig::Disk(DiskPriorConfig {
                ranges: DiskRanges { count_min: 1, count_max: 2, ..Default::default() },
                ..Default::default()
            }),
            base_train: TrainConfig::default(),
            adapt: AdaptConfig::default(),
            n_base_model: 300,
            n_test: 10,
            val_fraction: 0.2,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.scatter.validate()?;
        self.prior.validate()?;
        self.base_train.validate()?;
        self.adapt.validate()?;
        if self.net.input != [self.scatter.n_dirs, self.scatter.n_recv] {
            return Err(Error::invalid("net.input must equal [scatter.n_dirs, scatter.n_recv]"));
        }
        if self.net.output_len() != self.order * self.order {
            return Err(Error::invalid("the last fc width must equal order^2"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction <= 1.0) {
            return Err(Error::invalid("val_fraction must lie in (0, 1]"));
        }
        if self.n_base_model == 0 {
            return Err(Error::invalid("n_base_model must be at least 1"));
        }
        Ok(())
    }

    /// Copy with every optional field resolved.
    pub fn materialized(&self) -> Result<RunConfig> {
        let grid = Grid::new(self.n)?;
        let mut c = self.clone();
        c.eps_m = Some(self.eps_m.unwrap_or_else(|| grid.default_mollifier()));
        c.render_order = Some(self.render_order.unwrap_or(self.n / 2));
        Ok(c)
    }

    pub fn context(&self) -> Result<Context> {
        self.validate()?;
        let c = self.materialized()?;
        let grid = Grid::new(c.n)?;
        Context::new(
            c.prior.clone(),
            grid,
            c.eps_m.expect("materialized"),
            c.render_order.expect("materialized"),
            &c.scatter,
            c.order,
        )
    }

    pub fn val_size(&self, n: usize) -> usize {
        ((n as f64 * self.val_fraction).ceil() as usize).max(1)
    }
}

/// Base training set and its validation set, generated from the run seed.
pub fn base_sets(cfg: &RunConfig, ctx: &Context) -> Result<(SampleSet, SampleSet)> {
    let base = generate_base_dataset(ctx, cfg.n_base_model, cfg.seed)?;
    let val = generate_dataset(ctx, cfg.val_size(cfg.n_base_model), cfg.seed, Stream::Validation)?;
    Ok((base, val))
}

pub fn test_set(cfg: &RunConfig, ctx: &Context) -> Result<SampleSet> {
    generate_dataset(ctx, cfg.n_test, cfg.seed, Stream::Test)
}

pub fn train_base_model(cfg: &RunConfig, base: &SampleSet, val: &SampleSet) -> Result<(NetRegressor, TrainOutcome)> {
    let tcfg = TrainConfig { seed: derive_seed(cfg.seed, Stream::Shuffle, 0), ..cfg.base_train };
    NetRegressor::train_base(cfg.net.clone(), base, val, &tcfg, cfg.seed)
}

pub fn mean_relative_error<R: Regressor + ?Sized>(ctx: &Context, reg: &R, test: &SampleSet) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    let mut total = 0.0;
    for (x, t) in test.inputs.iter().zip(&test.targets) {
        total += relative_l2(&SineCoeffs::new(ctx.order, reg.predict(x)?)?, &SineCoeffs::new(ctx.order, t.clone())?)?;
    }
    Ok(total / test.len() as f64)
}

/// Adapts a copy of the base regressor to every test instance. Instances are
/// independent and run in parallel; instance `i` uses its own derived seed.
pub fn adapt_instances(
    cfg: &RunConfig,
    ctx: &Context,
    base_model: &NetRegressor,
    base: &SampleSet,
    base_val: &SampleSet,
    test: &SampleSet,
) -> Result<Vec<AdaptOutcome>> {
    (0..test.len())
        .into_par_iter()
        .map(|i| {
            let mut reg = base_model.clone();
            let acfg = AdaptConfig { seed: derive_seed(cfg.seed, Stream::Instance, i as u64), ..cfg.adapt };
            let m = ctx.measurement(&test.inputs[i])?;
            adaptive_solve(ctx, &m, &mut reg, base, base_val, &acfg, Some(&test.targets[i])).map_err(|e| e.in_sample(i))
        })
        .collect()
}

/// Mean relative error over instances after each round; shorter runs carry
/// their last value forward.
pub fn round_means(outcomes: &[AdaptOutcome]) -> Vec<f64> {
    let rounds = outcomes.iter().map(|o| o.records.len()).max().unwrap_or(0);
    (0..rounds)
        .map(|t| {
            let s: f64 = outcomes
                .iter()
                .map(|o| o.records[t.min(o.records.len() - 1)].relative_error.unwrap_or(f64::NAN))
                .sum();
            s / outcomes.len() as f64
        })
        .collect()
}

/// For each size: a fresh dataset, a fresh model trained from scratch with
/// `cfg.base_train`, and its mean relative error on `test`.
pub fn run_nonadaptive_baseline(cfg: &RunConfig, ctx: &Context, sizes: &[usize], test: &SampleSet) -> Result<Vec<(usize, f64)>> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("baseline sizes must be strictly ascending"));
    }
    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        if n == 0 {
            return Err(Error::invalid("baseline size must be at least 1"));
        }
        let seed = derive_seed(cfg.seed, Stream::Baseline, n as u64);
        let train = generate_dataset(ctx, n, seed, Stream::Prior)?;
        let val = generate_dataset(ctx, cfg.val_size(n), seed, Stream::Validation)?;
        let tcfg = TrainConfig { seed: derive_seed(seed, Stream::Shuffle, 0), ..cfg.base_train };
        let (reg, _) = NetRegressor::train_base(cfg.net.clone(), &train, &val, &tcfg, seed)?;
        let eps = mean_relative_error(ctx, &reg, test)?;
        log::info!("baseline N={n}: mean relative error {eps:.4}");
        out.push((n, eps));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RunConfig {
        let scatter = ScatterConfig { n_dirs: 8, n_recv: 8, ..Default::default() };
        RunConfig {
            n: 32,
            order: 3,
            net: NetConfig::desk([8, 8], 1, 3),
            scatter,
            base_train: TrainConfig { max_epochs: 5, batch_size: 10, ..Default::default() },
            adapt: AdaptConfig {
                n_round: 1,
                n_adapt: 4,
                n_base: 4,
                fine_tune: TrainConfig { lr: 0.01, max_epochs: 3, ..Default::default() },
                ..Default::default()
            },
            n_base_model: 12,
            n_test: 2,
            ..Default::default()
        }
    }

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let s = serde_json::to_string(&c.materialized().unwrap()).unwrap();
        let back: RunConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back.eps_m, Some(Grid::new(64).unwrap().default_mollifier()));
        assert_eq!(back.render_order, Some(32));
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
        let partial: RunConfig = serde_json::from_str(r#"{"seed": 9}"#).unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.n_base_model, 300);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let mut c = RunConfig::default();
        c.order = 4;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.scatter.n_dirs = 8;
        assert!(c.validate().is_err());
        let c = RunConfig { schema_version: 2, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn baseline_single_size_and_determinism() {
        let cfg = tiny();
        let ctx = cfg.context().unwrap();
        let test = test_set(&cfg, &ctx).unwrap();
        let a = run_nonadaptive_baseline(&cfg, &ctx, &[10], &test).unwrap();
        let b = run_nonadaptive_baseline(&cfg, &ctx, &[10], &test).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a, b);
        assert!(run_nonadaptive_baseline(&cfg, &ctx, &[10, 10], &test).is_err());
    }

    #[test]
    fn adaptation_driver_records_every_round() {
        let cfg = tiny();
        let ctx = cfg.context().unwrap();
        let (base, val) = base_sets(&cfg, &ctx).unwrap();
        let test = test_set(&cfg, &ctx).unwrap();
        let (reg, _) = train_base_model(&cfg, &base, &val).unwrap();
        let outs = adapt_instances(&cfg, &ctx, &reg, &base, &val, &test).unwrap();
        assert_eq!(outs.len(), 2);
        let means = round_means(&outs);
        assert_eq!(means.len(), 2);
        assert!((means[0] - mean_relative_error(&ctx, &reg, &test).unwrap()).abs() < 1e-12);
    }
}
