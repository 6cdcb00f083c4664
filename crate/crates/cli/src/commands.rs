use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ainv_core::adapt::{adaptive_solve, AdaptConfig, NetRegressor, SampleSet};
use ainv_core::analysis::experiment::{base_sets, run_nonadaptive_baseline, test_set, train_base_model, RunConfig};
use ainv_core::analysis::report::{emit_report, AdaptiveRow};
use ainv_core::analysis::{efficiency_factor, fit_scaling};
use ainv_core::container::Record;
use ainv_core::fields::{to_csv, to_pgm, FieldGrid};
use ainv_core::rng::{derive_seed, stream, Stream};
use ainv_core::scatter::Measurement;

use crate::{weights_hex, CliError, Manifest, Result, RunDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Base,
    Test,
}

/// Base sets get a companion `validation.ainv`.
pub fn gen_data(cfg: &RunConfig, kind: DataKind, count: Option<usize>, out: &Path, args: Vec<String>) -> Result<Manifest> {
    let ctx = cfg.context()?;
    let mut dir = RunDir::create(out)?;
    let (data, val) = match kind {
        DataKind::Base => {
            let c = RunConfig { n_base_model: count.unwrap_or(cfg.n_base_model), ..cfg.clone() };
            let (b, v) = base_sets(&c, &ctx)?;
            (b, Some(v))
        }
        DataKind::Test => {
            let c = RunConfig { n_test: count.unwrap_or(cfg.n_test), ..cfg.clone() };
            (test_set(&c, &ctx)?, None)
        }
    };
    log::info!("generated {} samples", data.len());
    dir.write("dataset.ainv", data.to_bytes())?;
    dir.write_json("points.json", &data.points)?;
    if let Some(v) = val {
        dir.write("validation.ainv", v.to_bytes())?;
    }
    dir.finish("gen-data", args, Some(cfg))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val: f64,
    pub weights: String,
}

fn load_base(dir: &Path) -> Result<(SampleSet, SampleSet)> {
    Ok((SampleSet::load(&dir.join("dataset.ainv"))?, SampleSet::load(&dir.join("validation.ainv"))?))
}

pub fn train_base(cfg: &RunConfig, data_dir: &Path, out: &Path, args: Vec<String>) -> Result<Manifest> {
    let (base, val) = load_base(data_dir)?;
    let (reg, outcome) = train_base_model(cfg, &base, &val)?;
    log::info!("base model: {} epochs, best validation {:.4e}", outcome.epochs_run(), outcome.best_val);
    let mut dir = RunDir::create(out)?;
    dir.write("model.ainv", reg.to_bytes())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &outcome.history {
        w.serialize(r)?;
    }
    dir.write("history.csv", w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?)?;
    dir.write_json(
        "train.json",
        &TrainSummary {
            epochs: outcome.epochs_run(),
            best_epoch: outcome.best_epoch,
            best_val: outcome.best_val,
            weights: weights_hex(&reg.weights.params),
        },
    )?;
    dir.finish("train-base", args, Some(cfg))
}

/// Where the observed measurement of an adaptive run comes from.
pub enum AdaptSource {
    Measurement(PathBuf),
    /// Forward-solved with the run seed; its projection is the truth.
    TruthField(PathBuf),
    /// Instance `index` of a test dataset directory.
    Test { dir: PathBuf, index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub round: usize,
    pub cumulative_samples: usize,
    pub adaptive_solves: usize,
    pub validation_solves: usize,
    pub relative_error: Option<f64>,
    pub measurement_error: f64,
    pub fallback: bool,
    pub epochs: usize,
    pub n_adapt: usize,
    pub n_base: usize,
    pub n_val: usize,
    pub weights_in: String,
    pub weights_out: String,
}

pub fn adapt(cfg: &RunConfig, model: &Path, base_dir: &Path, source: AdaptSource, out: &Path, args: Vec<String>) -> Result<Manifest> {
    let ctx = cfg.context()?;
    let mut reg = NetRegressor::load(model)?;
    if *reg.net.config() != cfg.net {
        return Err(CliError::Usage("model architecture differs from the configured net".into()));
    }
    let (base, base_val) = load_base(base_dir)?;
    let (m, truth, instance) = match source {
        AdaptSource::Measurement(p) => (Measurement::load(&p)?, None, 0),
        AdaptSource::TruthField(p) => {
            let f = FieldGrid::load(&p)?;
            if f.grid() != ctx.grid() {
                return Err(CliError::Usage(format!("field is {0}x{0}, config grid is {1}x{1}", f.grid().n(), cfg.n)));
            }
            let (x, t) = ctx.label(&f, cfg.seed)?;
            (ctx.measurement(&x)?, Some(t), 0)
        }
        AdaptSource::Test { dir, index } => {
            let t = SampleSet::load(&dir.join("dataset.ainv"))?;
            if index >= t.len() {
                return Err(CliError::Usage(format!("instance {index} out of range for {} test samples", t.len())));
            }
            (ctx.measurement(&t.inputs[index])?, Some(t.targets[index].clone()), index)
        }
    };
    let acfg = AdaptConfig { seed: derive_seed(cfg.seed, Stream::Instance, instance as u64), ..cfg.adapt };
    let outcome = adaptive_solve(&ctx, &m, &mut reg, &base, &base_val, &acfg, truth.as_deref())?;

    let mut dir = RunDir::create(out)?;
    let rows: Vec<RoundRow> = outcome
        .records
        .iter()
        .map(|r| RoundRow {
            round: r.round,
            cumulative_samples: base.len() + r.adaptive_solves,
            adaptive_solves: r.adaptive_solves,
            validation_solves: r.validation_solves,
            relative_error: r.relative_error,
            measurement_error: r.measurement_error,
            fallback: r.fallback,
            epochs: r.epochs,
            n_adapt: r.n_adapt_samples,
            n_base: r.n_base_samples,
            n_val: r.n_val_samples,
            weights_in: format!("{:016x}", r.weights_in),
            weights_out: format!("{:016x}", r.weights_out),
        })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    dir.write("rounds.csv", w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?)?;
    for r in &outcome.records {
        let f = ctx.field_of(&r.prediction)?;
        dir.write(&format!("round_{}.pgm", r.round), to_pgm(&f))?;
        dir.write(&format!("round_{}.csv", r.round), to_csv(&f))?;
    }
    dir.write_json("records.json", &outcome.records)?;
    dir.write("prediction.ainv", ctx.coeffs(&outcome.prediction)?.to_bytes())?;
    dir.write("model.ainv", reg.to_bytes())?;
    dir.finish("adapt", args, Some(cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselinePoint {
    pub n: usize,
    pub eps: f64,
}

pub fn baseline(cfg: &RunConfig, sizes: &[usize], out: &Path, args: Vec<String>) -> Result<Manifest> {
    let ctx = cfg.context()?;
    let test = test_set(cfg, &ctx)?;
    let points = run_nonadaptive_baseline(cfg, &ctx, sizes, &test)?;
    let mut dir = RunDir::create(out)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for &(n, eps) in &points {
        w.serialize(BaselinePoint { n, eps })?;
    }
    dir.write("baseline_points.csv", w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?)?;
    let xy: Vec<(f64, f64)> = points.iter().map(|&(n, e)| (n as f64, e)).collect();
    if let Ok(fit) = fit_scaling(&xy) {
        dir.write_json("fit.json", &fit)?;
    }
    dir.finish("baseline", args, Some(cfg))
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

/// Collects adaptive runs (`rounds.csv`) and baseline sweeps
/// (`baseline_points.csv`) from `run_dirs` and writes the report.
pub fn analyze(run_dirs: &[PathBuf], out: &Path, args: Vec<String>) -> Result<Manifest> {
    let mut rows = Vec::new();
    let mut points: Vec<(usize, f64)> = Vec::new();
    let mut instance = 0;
    for d in run_dirs {
        let rounds = d.join("rounds.csv");
        let base = d.join("baseline_points.csv");
        if rounds.exists() {
            let cfg: RunConfig = serde_json::from_str(&fs::read_to_string(d.join("config.json"))?)?;
            for r in read_rows::<RoundRow>(&rounds)? {
                rows.push(AdaptiveRow {
                    seed: cfg.seed,
                    instance,
                    round: r.round,
                    cumulative_samples: r.cumulative_samples,
                    validation_solves: r.validation_solves,
                    relative_error: r.relative_error,
                    measurement_error: r.measurement_error,
                });
            }
            instance += 1;
        } else if base.exists() {
            points.extend(read_rows::<BaselinePoint>(&base)?.into_iter().map(|p| (p.n, p.eps)));
        } else {
            return Err(CliError::Usage(format!("{} holds neither rounds.csv nor baseline_points.csv", d.display())));
        }
    }
    points.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let xy: Vec<(f64, f64)> = points.iter().map(|&(n, e)| (n as f64, e)).collect();
    let fit = fit_scaling(&xy).ok();
    let mut reports = Vec::new();
    if let Some(f) = &fit {
        for (n, eps) in ainv_core::analysis::report::adaptive_means(&rows) {
            match efficiency_factor(f, n, eps) {
                Ok(r) => reports.push(r),
                Err(e) => log::warn!("no efficiency report at N={n}: {e}"),
            }
        }
    }
    let mut dir = RunDir::create(out)?;
    for p in emit_report(out, &rows, &points, fit.as_ref(), &reports, true)? {
        let name = p.file_name().and_then(|s| s.to_str()).expect("report file names are ASCII");
        dir.record(name)?;
    }
    dir.finish("analyze", args, None)
}

pub fn forward(cfg: &RunConfig, field: &Path, out: &Path, args: Vec<String>) -> Result<Manifest> {
    let ctx = cfg.context()?;
    let f = FieldGrid::load(field)?;
    if f.grid() != ctx.grid() {
        return Err(CliError::Usage(format!("field is {0}x{0}, config grid is {1}x{1}", f.grid().n(), cfg.n)));
    }
    let m = ctx.model.forward(&f, &mut stream(cfg.seed, Stream::Noise, 0))?;
    let mut dir = RunDir::create(out)?;
    dir.write("measurement.ainv", m.to_bytes())?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["direction", "receiver", "re", "im"])?;
    for j in 0..m.n_dirs() {
        for l in 0..m.n_recv() {
            let z = m.at(j, l);
            w.write_record([j.to_string(), l.to_string(), format!("{:?}", z.re), format!("{:?}", z.im)])?;
        }
    }
    dir.write("measurement.csv", w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?)?;
    dir.finish("forward", args, Some(cfg))
}
