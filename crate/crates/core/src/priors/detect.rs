//! Recovering disk parameters from a predicted field.
//!
//! Support regions are found at a low threshold relative to the global peak,
//! then each region is cut again at a fraction of its own peak so that weak
//! disks are not swallowed by a strong neighbour's threshold.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::disk::{Disk, DiskRanges, DiskSpec};
use crate::fields::FieldGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectConfig {
    /// Support threshold as a fraction of the global `max |f|`.
    pub support_fraction: f64,
    /// Level threshold as a fraction of each support component's peak.
    pub level_fraction: f64,
    /// Regions with fewer nodes are discarded.
    pub min_area: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            support_fraction: 0.2,
            level_fraction: 0.5,
            min_area: 4,
        }
    }
}

/// 4-connected components of `mask`, each listed in scan order.
fn components(mask: &[bool], n: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        seen[start] = true;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            comp.push(idx);
            let (a, b) = (idx / n, idx % n);
            let mut visit = |j: usize| {
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if a > 0 {
                visit(idx - n);
            }
            if a + 1 < n {
                visit(idx + n);
            }
            if b > 0 {
                visit(idx - 1);
            }
            if b + 1 < n {
                visit(idx + 1);
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

pub fn detect_disks(f: &FieldGrid, ranges: Option<&DiskRanges>) -> DiskSpec {
    detect_disks_with(f, ranges, &DetectConfig::default())
}

/// Disks as (magnitude-weighted centroid, area-equivalent radius) of every
/// level region, with amplitude = mass of the nearest support nodes / area.
/// With `ranges`, radii and amplitudes are clamped into range and centers
/// moved so the disk lies inside the domain.
pub fn detect_disks_with(f: &FieldGrid, ranges: Option<&DiskRanges>, cfg: &DetectConfig) -> DiskSpec {
    let grid = f.grid();
    let n = grid.n();
    let h = grid.h();
    let nodes = grid.nodes();
    let mag: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let peak = mag.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return DiskSpec::default();
    }
    let support: Vec<bool> = mag.iter().map(|&m| m >= cfg.support_fraction * peak).collect();
    let mut disks = Vec::new();
    for comp in components(&support, n) {
        let local = comp.iter().map(|&i| mag[i]).fold(0.0, f64::max);
        let mut level = vec![false; mag.len()];
        for &i in &comp {
            level[i] = mag[i] >= cfg.level_fraction * local;
        }
        let regions: Vec<Vec<usize>> =
            components(&level, n).into_iter().filter(|r| r.len() >= cfg.min_area).collect();
        let mut found: Vec<(Disk, f64)> = regions
            .iter()
            .map(|region| {
                let (mut w, mut sx, mut sy) = (0.0, 0.0, 0.0);
                for &i in region {
                    w += mag[i];
                    sx += mag[i] * nodes[i / n];
                    sy += mag[i] * nodes[i % n];
                }
                let disk = Disk {
                    cx: sx / w,
                    cy: sy / w,
                    radius: (region.len() as f64 * h * h / PI).sqrt(),
                    amplitude: 0.0,
                };
                (disk, 0.0)
            })
            .collect();
        // amplitude from the mass of the support nodes closest to each region
        for &i in &comp {
            let (x, y) = (nodes[i / n], nodes[i % n]);
            if let Some(best) = (0..found.len())
                .min_by(|&a, &b| {
                    let da = (found[a].0.cx - x).hypot(found[a].0.cy - y);
                    let db = (found[b].0.cx - x).hypot(found[b].0.cy - y);
                    da.total_cmp(&db)
                })
            {
                found[best].1 += f.values()[i] * h * h;
            }
        }
        for (mut disk, mass) in found {
            disk.amplitude = mass / (PI * disk.radius * disk.radius);
            if let Some(r) = ranges {
                disk.radius = disk.radius.clamp(r.radius_min, r.radius_max);
                disk.amplitude = disk.amplitude.clamp(r.amplitude_min, r.amplitude_max);
                let lim = std::f64::consts::FRAC_PI_2 - disk.radius;
                disk.cx = disk.cx.clamp(-lim, lim);
                disk.cy = disk.cy.clamp(-lim, lim);
            }
            disks.push(disk);
        }
    }
    DiskSpec { disks }
}
