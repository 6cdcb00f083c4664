use std::time::Instant;

use ainv_core::fields::{FieldGrid, Grid};
use ainv_core::scatter::{forward_born, ForwardModel, Measurement, ScatterConfig};
use proptest::prelude::*;

fn desk() -> ScatterConfig {
    ScatterConfig::default()
}

fn disk(grid: Grid, cx: f64, cy: f64, r: f64, amp: f64) -> FieldGrid {
    FieldGrid::from_fn(grid, |x, y| {
        if (x - cx).powi(2) + (y - cy).powi(2) <= r * r {
            amp
        } else {
            0.0
        }
    })
}

fn smooth(grid: Grid) -> FieldGrid {
    FieldGrid::from_fn(grid, |x, y| {
        let bump = |cx: f64, cy: f64, w: f64, a: f64| {
            let r2 = ((x - cx).powi(2) + (y - cy).powi(2)) / (w * w);
            if r2 < 1.0 { a * (1.0 - r2).powi(4) } else { 0.0 }
        };
        bump(0.3, -0.2, 0.7, 0.6) + bump(-0.5, 0.4, 0.5, 0.4)
    })
}

fn rotated_deviation(m: &Measurement, mr: &Measurement) -> f64 {
    let (nd, nt) = (m.n_dirs(), m.n_recv());
    let (sd, st) = (nd / 4, nt / 4);
    let mut worst = 0.0f64;
    for j in 0..nd {
        for l in 0..nt {
            worst = worst.max((mr.at((j + sd) % nd, (l + st) % nt) - m.at(j, l)).norm());
        }
    }
    worst
}

#[test]
fn rotation_equivariance_desk_scale() {
    let g = Grid::new(64).unwrap();
    let model = ForwardModel::new(g, &desk()).unwrap();
    let q = FieldGrid::from_values(
        g,
        disk(g, 0.4, -0.3, 0.35, 1.2)
            .values()
            .iter()
            .zip(disk(g, -0.6, 0.5, 0.25, 0.7).values())
            .map(|(a, b)| a + b)
            .collect(),
    )
    .unwrap();
    let m = model.solve(&q).unwrap();
    let mr = model.solve(&q.rotate_quarter()).unwrap();
    let dev = rotated_deviation(&m, &mr);
    assert!(dev <= 1e-6, "max deviation {dev:e}");
}

#[test]
fn born_agrees_at_small_contrast() {
    let g = Grid::new(64).unwrap();
    let q = disk(g, 0.1, 0.2, 0.4, 0.01);
    let model = ForwardModel::new(g, &desk()).unwrap();
    let m = model.solve(&q).unwrap();
    let b = forward_born(&q, &desk()).unwrap();
    let rel = m.distance(&b).unwrap() / m.frobenius();
    assert!(rel <= 0.02, "relative Born discrepancy {rel}");
}

#[test]
fn self_convergence_under_refinement() {
    let m64 = ForwardModel::new(Grid::new(64).unwrap(), &desk())
        .unwrap()
        .solve(&smooth(Grid::new(64).unwrap()))
        .unwrap();
    let m128 = ForwardModel::new(Grid::new(128).unwrap(), &desk())
        .unwrap()
        .solve(&smooth(Grid::new(128).unwrap()))
        .unwrap();
    let rel = m64.distance(&m128).unwrap() / m128.frobenius();
    assert!(rel <= 0.05, "n=64 vs n=128 relative difference {rel}");
}

#[test]
fn desk_solve_runtime() {
    let g = Grid::new(64).unwrap();
    let model = ForwardModel::new(g, &desk()).unwrap();
    let q = disk(g, 0.0, 0.3, 0.4, 1.5);
    let t = Instant::now();
    let (_, stats) = model.solve_with_stats(&q).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let iters: usize = stats.iter().map(|s| s.iterations).sum();
    eprintln!("desk LS solve: {secs:.3}s, {iters} GMRES iterations over 16 directions");
    assert!(secs <= 60.0);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rotation_equivariance_random_potentials(
        vals in proptest::collection::vec(0.0f64..1.0, 16),
    ) {
        let g = Grid::new(32).unwrap();
        let cfg = ScatterConfig { n_dirs: 8, n_recv: 12, ..desk() };
        let model = ForwardModel::new(g, &cfg).unwrap();
        // random piecewise-constant 4x4 blocks inside the central region
        let q = FieldGrid::from_fn(g, |x, y| {
            if x.abs() >= 1.0 || y.abs() >= 1.0 {
                return 0.0;
            }
            let bi = (((x + 1.0) / 0.5) as usize).min(3);
            let bj = (((y + 1.0) / 0.5) as usize).min(3);
            vals[bi * 4 + bj]
        });
        let m = model.solve(&q).unwrap();
        let mr = model.solve(&q.rotate_quarter()).unwrap();
        prop_assert!(rotated_deviation(&m, &mr) <= 1e-6);
    }
}
