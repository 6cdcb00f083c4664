//! Structured prior manifolds: sampling, projection of free-form estimates
//! onto the manifold, and local perturbation around a manifold point.

pub mod detect;
pub mod disk;
pub mod fourier;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{mollify, restrict_to_basis, FieldGrid, Grid};

pub use detect::{detect_disks, detect_disks_with, DetectConfig};
pub use disk::{perturb_disks, render_disks, sample_disk_prior, Disk, DiskRanges, DiskScales, DiskSpec};
pub use fourier::{
    estimate_sigma, fourier_project, inner_indices, perturb_fourier, reconstruct, sample_fourier_prior, synthesize, FourierCoeffs,
    FourierPriorConfig, SigmaEstimate,
};

/// Final rendering stage shared by both priors: mollify, then restrict to the
/// sine basis of the given order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPipeline {
    pub grid: Grid,
    pub eps_m: f64,
    pub order: usize,
}

impl FieldPipeline {
    pub fn new(grid: Grid, eps_m: f64, order: usize) -> Result<Self> {
        if order == 0 || order > grid.n() {
            return Err(Error::invalid(format!("basis order {order} outside 1..={}", grid.n())));
        }
        if !(eps_m > 0.0 && eps_m.is_finite()) {
            return Err(Error::invalid(format!("mollifier width must be positive, got {eps_m}")));
        }
        Ok(Self { grid, eps_m, order })
    }

    pub fn finish(&self, raw: &FieldGrid) -> Result<FieldGrid> {
        restrict_to_basis(&mollify(raw, self.eps_m)?, self.order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiskPriorConfig {
    pub ranges: DiskRanges,
    pub scales: DiskScales,
    pub detect: DetectConfig,
}

impl Default for DiskPriorConfig {
    fn default() -> Self {
        Self {
            ranges: DiskRanges::default(),
            scales: DiskScales::default(),
            detect: DetectConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PriorConfig {
    Disk(DiskPriorConfig),
    Fourier(FourierPriorConfig),
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig::Disk(DiskPriorConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PriorPoint {
    Disk(DiskSpec),
    Fourier(FourierCoeffs),
}

/// What a perturbation around a prior point needs besides the point itself.
#[derive(Debug, Clone, PartialEq)]
pub enum PerturbScale {
    Round(usize),
    Sigma(SigmaEstimate),
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            PriorConfig::Disk(c) => c.ranges.validate(),
            PriorConfig::Fourier(c) => c.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PriorConfig::Disk(_) => "disk",
            PriorConfig::Fourier(_) => "fourier",
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, pipeline: &FieldPipeline, rng: &mut R) -> Result<(PriorPoint, FieldGrid)> {
        match self {
            PriorConfig::Disk(c) => {
                let spec = sample_disk_prior(&c.ranges, rng)?;
                let f = render_disks(&spec, pipeline)?;
                Ok((PriorPoint::Disk(spec), f))
            }
            PriorConfig::Fourier(c) => {
                let (coeffs, f) = sample_fourier_prior(c, pipeline, rng)?;
                Ok((PriorPoint::Fourier(coeffs), f))
            }
        }
    }

    /// Approximate nearest manifold point to a free-form field.
    pub fn project(&self, f: &FieldGrid) -> Result<PriorPoint> {
        match self {
            PriorConfig::Disk(c) => Ok(PriorPoint::Disk(detect_disks_with(f, Some(&c.ranges), &c.detect))),
            PriorConfig::Fourier(c) => Ok(PriorPoint::Fourier(fourier_project(f, c.nf, c.margin)?)),
        }
    }

    pub fn render(&self, point: &PriorPoint, pipeline: &FieldPipeline) -> Result<FieldGrid> {
        match (self, point) {
            (PriorConfig::Disk(_), PriorPoint::Disk(s)) => render_disks(s, pipeline),
            (PriorConfig::Fourier(c), PriorPoint::Fourier(f)) => reconstruct(f, c.margin, pipeline),
            _ => Err(Error::invalid("prior point does not match the prior kind")),
        }
    }

    pub fn perturb<R: Rng + ?Sized>(
        &self,
        point: &PriorPoint,
        scale: &PerturbScale,
        pipeline: &FieldPipeline,
        rng: &mut R,
    ) -> Result<(PriorPoint, FieldGrid)> {
        match (self, point, scale) {
            (PriorConfig::Disk(c), PriorPoint::Disk(s), PerturbScale::Round(t)) => {
                let p = perturb_disks(s, *t, &c.scales, &c.ranges, rng);
                let f = render_disks(&p, pipeline)?;
                Ok((PriorPoint::Disk(p), f))
            }
            (PriorConfig::Fourier(c), PriorPoint::Fourier(f), PerturbScale::Sigma(s)) => {
                let (p, field) = perturb_fourier(f, s, c.margin, pipeline, rng)?;
                Ok((PriorPoint::Fourier(p), field))
            }
            _ => Err(Error::invalid("perturbation scale does not match the prior kind")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use proptest::prelude::*;

    #[test]
    fn config_json_round_trip() {
        for cfg in [PriorConfig::default(), PriorConfig::Fourier(FourierPriorConfig::default())] {
            let s = serde_json::to_string(&cfg).unwrap();
            assert_eq!(serde_json::from_str::<PriorConfig>(&s).unwrap(), cfg);
        }
        let bad = r#"{"kind":"disk","ranges":{"count_min":1,"count_max":1,"radius_min":0.1,"radius_max":0.2,"amplitude_min":1,"amplitude_max":1,"extra":0}}"#;
        assert!(serde_json::from_str::<PriorConfig>(bad).is_err());
    }

    #[test]
    fn mismatched_kinds_are_rejected() {
        let g = Grid::new(16).unwrap();
        let p = FieldPipeline::new(g, g.default_mollifier(), 8).unwrap();
        let disk = PriorConfig::default();
        let point = PriorPoint::Fourier(FourierCoeffs::zeros(1));
        assert!(disk.render(&point, &p).is_err());
        let mut rng = stream(0, Stream::Perturb, 0);
        assert!(disk.perturb(&PriorPoint::Disk(DiskSpec::default()), &PerturbScale::Sigma(SigmaEstimate::zeros(1)), &p, &mut rng).is_err());
    }

    #[test]
    fn sampled_disk_fields_lie_in_the_basis() {
        let g = Grid::new(32).unwrap();
        let p = FieldPipeline::new(g, g.default_mollifier(), 16).unwrap();
        let mut rng = stream(1, Stream::Prior, 0);
        let (_, f) = PriorConfig::default().sample(&p, &mut rng).unwrap();
        let again = restrict_to_basis(&f, 16).unwrap();
        let d = again.values().iter().zip(f.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d <= 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

        #[test]
        fn disk_samples_satisfy_invariants(seed in any::<u64>(), cmax in 1usize..5) {
            let ranges = DiskRanges { count_min: 1, count_max: cmax, ..Default::default() };
            let mut rng = stream(seed, Stream::Prior, 0);
            for _ in 0..150 {
                let s = sample_disk_prior(&ranges, &mut rng).unwrap();
                prop_assert!(s.pairwise_disjoint() && s.all_contained());
                prop_assert!(s.len() >= 1 && s.len() <= cmax);
            }
        }

        #[test]
        fn sigma_is_permutation_invariant_and_homogeneous(
            errs in proptest::collection::vec(-5.0f64..5.0, 2..8),
            scale in 0.0f64..10.0,
            rot in 0usize..8,
        ) {
            let mk = |v: f64| { let mut c = FourierCoeffs::zeros(1); c.set(1, -1, num_complex::Complex64::new(v, -v)); c };
            let preds: Vec<_> = errs.iter().map(|&e| mk(e)).collect();
            let truths: Vec<_> = errs.iter().map(|_| mk(0.0)).collect();
            let base = estimate_sigma(&preds, &truths, 2.0).unwrap();
            let mut rotated = preds.clone();
            rotated.rotate_left(rot % preds.len());
            let perm = estimate_sigma(&rotated, &truths, 2.0).unwrap();
            for (a, b) in base.sigma1.iter().zip(&perm.sigma1) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
            let scaled: Vec<_> = errs.iter().map(|&e| mk(scale * e)).collect();
            let s2 = estimate_sigma(&scaled, &truths, 2.0).unwrap();
            for (a, b) in base.sigma2.iter().zip(&s2.sigma2) {
                prop_assert!((scale * a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }
    }
}
