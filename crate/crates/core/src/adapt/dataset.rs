//! Labelled sample sets: prior draws pushed through the forward model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{eval_sine_basis, project_sine_basis, FieldGrid, Grid, SineCoeffs};
use crate::priors::{FieldPipeline, PerturbScale, PriorConfig, PriorPoint};
use crate::rng::{derive_seed, stream, Stream};
use crate::scatter::{ForwardModel, Measurement, ScatterConfig};

/// Everything fixed across one experiment: the prior, how fields are
/// rendered, the forward model, and the target basis order.
pub struct Context {
    pub prior: PriorConfig,
    pub pipeline: FieldPipeline,
    pub model: ForwardModel,
    /// Order of the regression target basis.
    pub order: usize,
}

impl Context {
    pub fn new(prior: PriorConfig, grid: Grid, eps_m: f64, render_order: usize, scatter: &ScatterConfig, order: usize) -> Result<Self> {
        prior.validate()?;
        if order == 0 || order > grid.n() {
            return Err(Error::invalid(format!("target order {order} outside 1..={}", grid.n())));
        }
        Ok(Self {
            prior,
            pipeline: FieldPipeline::new(grid, eps_m, render_order)?,
            model: ForwardModel::new(grid, scatter)?,
            order,
        })
    }

    pub fn grid(&self) -> Grid {
        self.pipeline.grid
    }

    /// Measurement channels and target coefficients of a rendered field.
    pub fn label(&self, field: &FieldGrid, noise_seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.model.forward(field, &mut stream(noise_seed, Stream::Noise, 0))?;
        let target = project_sine_basis(field, self.order)?;
        Ok((m.to_channels(), target.into_vec()))
    }

    pub fn coeffs(&self, v: &[f64]) -> Result<SineCoeffs> {
        SineCoeffs::new(self.order, v.to_vec())
    }

    pub fn field_of(&self, v: &[f64]) -> Result<FieldGrid> {
        Ok(eval_sine_basis(&self.coeffs(v)?, self.grid()))
    }

    pub fn measurement(&self, channels: &[f64]) -> Result<Measurement> {
        let cfg = self.model.config();
        Measurement::from_channels(cfg.n_dirs, cfg.n_recv, channels)
    }
}

/// Raw (unstandardized) measurement channels with their target coefficients
/// and the prior points they were generated from. `points` may be empty for
/// sets loaded from disk.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleSet {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub points: Vec<PriorPoint>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> SampleSet {
        SampleSet {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i].clone()).collect(),
            points: if self.points.is_empty() {
                Vec::new()
            } else {
                idx.iter().map(|&i| self.points[i].clone()).collect()
            },
        }
    }

    pub fn extend(&mut self, other: SampleSet) {
        self.inputs.extend(other.inputs);
        self.targets.extend(other.targets);
        self.points.extend(other.points);
    }

    fn from_triples(items: Vec<(Vec<f64>, Vec<f64>, PriorPoint)>) -> Self {
        let mut s = SampleSet::default();
        for (x, t, p) in items {
            s.inputs.push(x);
            s.targets.push(t);
            s.points.push(p);
        }
        s
    }
}

/// `n` independent prior draws, forward-solved in parallel. Sample `i` uses
/// seeds derived from `(seed, kind, i)` only.
pub fn generate_dataset(ctx: &Context, n: usize, seed: u64, kind: Stream) -> Result<SampleSet> {
    let items = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, kind, i as u64);
            let (point, field) = ctx.prior.sample(&ctx.pipeline, &mut stream(s, Stream::Prior, 0))?;
            let (x, t) = ctx.label(&field, s)?;
            Ok((x, t, point))
        })
        .enumerate()
        .map(|(i, r): (usize, Result<_>)| r.map_err(|e| e.in_sample(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet::from_triples(items))
}

pub fn generate_base_dataset(ctx: &Context, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::invalid("base dataset size must be at least 1"));
    }
    generate_dataset(ctx, n, seed, Stream::Prior)
}

/// Indices of the `n_base` targets nearest to `prediction` in coefficient
/// l2 distance, ties broken by lower index.
pub fn nearest_base_subset(base: &SampleSet, prediction: &[f64], n_base: usize) -> Result<Vec<usize>> {
    if n_base > base.len() {
        return Err(Error::invalid(format!("requested {n_base} nearest samples from a set of {}", base.len())));
    }
    let mut d: Vec<(f64, usize)> = base
        .targets
        .iter()
        .enumerate()
        .map(|(i, t)| (t.iter().zip(prediction).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(d.into_iter().take(n_base).map(|(_, i)| i).collect())
}

/// `n` perturbations of `point`, each forward-solved.
pub fn perturbation_samples(ctx: &Context, point: &PriorPoint, scale: &PerturbScale, n: usize, seed: u64) -> Result<SampleSet> {
    let items = (0..n)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, Stream::Perturb, i as u64);
            let (p, field) = ctx.prior.perturb(point, scale, &ctx.pipeline, &mut stream(s, Stream::Perturb, 0))?;
            let (x, t) = ctx.label(&field, s)?;
            Ok((x, t, p))
        })
        .enumerate()
        .map(|(i, r): (usize, Result<_>)| r.map_err(|e| e.in_sample(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet::from_triples(items))
}

/// Local perturbations followed by the nearest base samples.
#[allow(clippy::too_many_arguments)]
pub fn build_adaptive_dataset(
    ctx: &Context,
    point: &PriorPoint,
    scale: &PerturbScale,
    n_adapt: usize,
    base: &SampleSet,
    prediction: &[f64],
    n_base: usize,
    seed: u64,
) -> Result<SampleSet> {
    let mut out = perturbation_samples(ctx, point, scale, n_adapt, seed)?;
    out.extend(base.subset(&nearest_base_subset(base, prediction, n_base)?));
    Ok(out)
}
