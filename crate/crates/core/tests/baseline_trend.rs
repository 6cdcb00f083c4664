use ainv_core::analysis::experiment::{run_nonadaptive_baseline, test_set, RunConfig};
use ainv_core::analysis::{fit_scaling, spearman};

const SIZES: [usize; 3] = [100, 400, 1600];

/// Desk-scale non-adaptive sweep: error falls with dataset size.
#[test]
fn error_does_not_grow_with_dataset_size() {
    let mut mean = [0.0; 3];
    for seed in 0..3u64 {
        let cfg = RunConfig { seed, ..Default::default() };
        let ctx = cfg.context().unwrap();
        let test = test_set(&cfg, &ctx).unwrap();
        let pts = run_nonadaptive_baseline(&cfg, &ctx, &SIZES, &test).unwrap();
        eprintln!("seed {seed}: {pts:?}");
        for (m, (_, e)) in mean.iter_mut().zip(&pts) {
            *m += e / 3.0;
        }
    }
    let n: Vec<f64> = SIZES.iter().map(|&s| s as f64).collect();
    let rho = spearman(&n, &mean);
    eprintln!("seed-averaged errors {mean:?}, Spearman {rho}");
    assert!(rho <= 0.0, "errors {mean:?} rise with N (rho {rho})");
    let xy: Vec<(f64, f64)> = n.iter().copied().zip(mean).collect();
    assert!(fit_scaling(&xy).unwrap().a < 0.0);
}
