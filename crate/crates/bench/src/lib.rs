//! Shared fixtures for the benchmarks.

use ainv_core::fields::{FieldGrid, Grid};
use ainv_core::priors::{render_disks, Disk, DiskSpec, FieldPipeline};

/// Two separated disks rendered through the default pipeline on an `n` grid.
pub fn two_disk_field(n: usize) -> FieldGrid {
    let grid = Grid::new(n).expect("valid grid size");
    let pipeline = FieldPipeline::new(grid, grid.default_mollifier(), n / 2).expect("valid pipeline");
    let spec = DiskSpec {
        disks: vec![
            Disk { cx: -0.6, cy: 0.2, radius: 0.3, amplitude: 1.0 },
            Disk { cx: 0.7, cy: -0.4, radius: 0.25, amplitude: 0.6 },
        ],
    };
    render_disks(&spec, &pipeline).expect("disks render")
}

/// Deterministic pseudo-random vector in [-1, 1).
pub fn pseudo_random(len: usize, seed: u64) -> Vec<f64> {
    let mut x = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    (0..len)
        .map(|_| {
            x = x.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
            (x >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect()
}
