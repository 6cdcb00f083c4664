//! Disk prior: unions of disjoint constant-amplitude disks, mollified and
//! restricted to the sine basis.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::FieldPipeline;
use crate::error::{Error, Result};
use crate::fields::{FieldGrid, Grid};

pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;
pub const MAX_PERTURB_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskRanges {
    pub count_min: usize,
    pub count_max: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    pub amplitude_min: f64,
    pub amplitude_max: f64,
}

impl Default for DiskRanges {
    fn default() -> Self {
        Self {
            count_min: 1,
            count_max: 2,
            radius_min: 0.15,
            radius_max: 0.4,
            amplitude_min: 0.5,
            amplitude_max: 1.5,
        }
    }
}

impl DiskRanges {
    pub fn validate(&self) -> Result<()> {
        if self.count_min > self.count_max {
            return Err(Error::invalid("disk count range is empty"));
        }
        if !(self.radius_min > 0.0) || self.radius_min > self.radius_max {
            return Err(Error::invalid("disk radius range must satisfy 0 < r_min <= r_max"));
        }
        if !(2.0 * self.radius_max < std::f64::consts::PI) {
            return Err(Error::invalid("disks with radius r_max do not fit in the domain"));
        }
        if self.amplitude_min > self.amplitude_max {
            return Err(Error::invalid("disk amplitude range is empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub amplitude: f64,
}

impl Disk {
    pub fn contained(&self) -> bool {
        let lim = FRAC_PI_2 - self.radius;
        self.cx.abs() <= lim && self.cy.abs() <= lim
    }

    pub fn disjoint_from(&self, other: &Disk) -> bool {
        let d = ((self.cx - other.cx).powi(2) + (self.cy - other.cy).powi(2)).sqrt();
        d > self.radius + other.radius
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiskSpec {
    pub disks: Vec<Disk>,
}

impl DiskSpec {
    pub fn len(&self) -> usize {
        self.disks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disks.is_empty()
    }

    pub fn pairwise_disjoint(&self) -> bool {
        self.disks
            .iter()
            .enumerate()
            .all(|(i, a)| self.disks[i + 1..].iter().all(|b| a.disjoint_from(b)))
    }

    pub fn all_contained(&self) -> bool {
        self.disks.iter().all(Disk::contained)
    }
}

/// Standard deviations of the round-0 perturbation and their per-round decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskScales {
    pub center: f64,
    pub radius: f64,
    pub amplitude: f64,
    pub decay: f64,
}

impl Default for DiskScales {
    fn default() -> Self {
        Self {
            center: 0.15,
            radius: 0.05,
            amplitude: 0.15,
            decay: 0.7,
        }
    }
}

impl DiskScales {
    pub const ZERO: DiskScales = DiskScales {
        center: 0.0,
        radius: 0.0,
        amplitude: 0.0,
        decay: 1.0,
    };

    /// Scales in effect at `round`: `base * decay^round`.
    pub fn at_round(&self, round: usize) -> DiskScales {
        let f = self.decay.powi(round as i32);
        DiskScales {
            center: self.center * f,
            radius: self.radius * f,
            amplitude: self.amplitude * f,
            decay: self.decay,
        }
    }
}

pub fn sample_disk_prior<R: Rng + ?Sized>(ranges: &DiskRanges, rng: &mut R) -> Result<DiskSpec> {
    ranges.validate()?;
    let count = rng.random_range(ranges.count_min..=ranges.count_max);
    let mut disks: Vec<Disk> = Vec::with_capacity(count);
    for idx in 0..count {
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let radius = rng.random_range(ranges.radius_min..=ranges.radius_max);
            let lim = FRAC_PI_2 - radius;
            let cand = Disk {
                cx: rng.random_range(-lim..=lim),
                cy: rng.random_range(-lim..=lim),
                radius,
                amplitude: 0.0,
            };
            if disks.iter().all(|d| d.disjoint_from(&cand)) {
                placed = Some(cand);
                break;
            }
        }
        let Some(mut disk) = placed else {
            return Err(Error::RejectionCapExceeded {
                attempts: MAX_PLACEMENT_ATTEMPTS,
                disk: idx + 1,
                count,
                r_min: ranges.radius_min,
                r_max: ranges.radius_max,
            });
        };
        disk.amplitude = rng.random_range(ranges.amplitude_min..=ranges.amplitude_max);
        disks.push(disk);
    }
    Ok(DiskSpec { disks })
}

/// Sum of disk indicators sampled at the nodes.
pub fn rasterize_disks(spec: &DiskSpec, grid: Grid) -> FieldGrid {
    let mut f = FieldGrid::zeros(grid);
    let nodes = grid.nodes();
    for d in &spec.disks {
        let r2 = d.radius * d.radius;
        for (a, &x) in nodes.iter().enumerate() {
            let dx2 = (x - d.cx).powi(2);
            if dx2 > r2 {
                continue;
            }
            for (b, &y) in nodes.iter().enumerate() {
                if dx2 + (y - d.cy).powi(2) <= r2 {
                    f.values_mut()[grid.index(a, b)] += d.amplitude;
                }
            }
        }
    }
    f
}

/// Indicator sum, then mollification and restriction to the sine basis.
pub fn render_disks(spec: &DiskSpec, pipeline: &FieldPipeline) -> Result<FieldGrid> {
    pipeline.finish(&rasterize_disks(spec, pipeline.grid))
}

fn clamp_disk(d: Disk, ranges: &DiskRanges) -> Disk {
    let radius = d.radius.clamp(ranges.radius_min, ranges.radius_max);
    let lim = FRAC_PI_2 - radius;
    Disk {
        cx: d.cx.clamp(-lim, lim),
        cy: d.cy.clamp(-lim, lim),
        radius,
        amplitude: d.amplitude.clamp(ranges.amplitude_min, ranges.amplitude_max),
    }
}

/// Gaussian jitter of every center, radius and amplitude with scales decayed to
/// `round`, clamped back into the admissible ranges. Overlapping draws are
/// redrawn up to [`MAX_PERTURB_REDRAWS`] times; the last draw is kept
/// regardless.
pub fn perturb_disks<R: Rng + ?Sized>(
    spec: &DiskSpec,
    round: usize,
    scales: &DiskScales,
    ranges: &DiskRanges,
    rng: &mut R,
) -> DiskSpec {
    let s = scales.at_round(round);
    // Normal::new only fails for negative or NaN std.
    let nc = Normal::new(0.0, s.center.max(0.0)).expect("finite scale");
    let nr = Normal::new(0.0, s.radius.max(0.0)).expect("finite scale");
    let na = Normal::new(0.0, s.amplitude.max(0.0)).expect("finite scale");
    let mut out = spec.clone();
    for _ in 0..MAX_PERTURB_REDRAWS {
        out.disks = spec
            .disks
            .iter()
            .map(|d| {
                clamp_disk(
                    Disk {
                        cx: d.cx + nc.sample(rng),
                        cy: d.cy + nc.sample(rng),
                        radius: d.radius + nr.sample(rng),
                        amplitude: d.amplitude + na.sample(rng),
                    },
                    ranges,
                )
            })
            .collect();
        if out.pairwise_disjoint() {
            break;
        }
    }
    out
}
