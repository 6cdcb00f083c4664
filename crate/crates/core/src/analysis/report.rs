//! Tabular and plotted outputs of an analysis run.
//!
//! | file | columns |
//! |------|---------|
//! | `adaptive.csv` | seed, instance, round, cumulative_samples, validation_solves, relative_error, measurement_error |
//! | `baseline.csv` | n, eps, fitted |
//! | `efficiency.csv` | target_eps, n_adaptive, n_nonadaptive, f_eff, far_extrapolation |
//! | `summary.json` | [`Summary`] |
//! | `error_vs_samples.svg` | adaptive round means and baseline points against sample count |
//!
//! `cumulative_samples` counts base-model samples plus adaptive training
//! solves; validation solves are listed separately. `fitted` is the scaling
//! fit at `n`, empty without a fit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::{EfficiencyReport, ScalingFit};
use crate::adapt::AdaptOutcome;
use crate::error::Result;

pub const SUMMARY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveRow {
    pub seed: u64,
    pub instance: usize,
    pub round: usize,
    pub cumulative_samples: usize,
    pub validation_solves: usize,
    pub relative_error: Option<f64>,
    pub measurement_error: f64,
}

impl AdaptiveRow {
    pub fn from_outcomes(seed: u64, n_base_model: usize, outcomes: &[AdaptOutcome]) -> Vec<AdaptiveRow> {
        outcomes
            .iter()
            .enumerate()
            .flat_map(|(instance, o)| {
                o.records.iter().map(move |r| AdaptiveRow {
                    seed,
                    instance,
                    round: r.round,
                    cumulative_samples: n_base_model + r.adaptive_solves,
                    validation_solves: r.validation_solves,
                    relative_error: r.relative_error,
                    measurement_error: r.measurement_error,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub n: usize,
    pub eps: f64,
    pub fitted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub fit: Option<ScalingFit>,
    pub reports: Vec<EfficiencyReport>,
    /// Mean relative error per cumulative sample count.
    pub adaptive_means: Vec<(usize, f64)>,
}

const ADAPTIVE_HEADER: [&str; 7] =
    ["seed", "instance", "round", "cumulative_samples", "validation_solves", "relative_error", "measurement_error"];
const BASELINE_HEADER: [&str; 3] = ["n", "eps", "fitted"];
const EFFICIENCY_HEADER: [&str; 5] = ["target_eps", "n_adaptive", "n_nonadaptive", "f_eff", "far_extrapolation"];

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

/// Mean relative error per distinct cumulative sample count, ascending.
pub fn adaptive_means(rows: &[AdaptiveRow]) -> Vec<(usize, f64)> {
    let mut acc: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
    for r in rows {
        if let Some(e) = r.relative_error {
            let s = acc.entry(r.cumulative_samples).or_default();
            s.0 += e;
            s.1 += 1;
        }
    }
    acc.into_iter().map(|(n, (s, c))| (n, s / c as f64)).collect()
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Polyline chart with axes and tick labels; `log_x` plots against ln x.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log_x: bool) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const L: f64 = 70.0;
    const R: f64 = 150.0;
    const T: f64 = 40.0;
    const B: f64 = 50.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
    let tx = |x: f64| if log_x { x.ln() } else { x };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|&(x, y)| (tx(x), y)))
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |a, p| (a.0.min(p.0), a.1.max(p.0), a.2.min(p.1), a.3.max(p.1)),
    );
    if pts.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        (x0, x1) = (x0 - 0.5, x1 + 0.5);
    }
    if y1 - y0 <= 0.0 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let px = |x: f64| L + (x - x0) / (x1 - x0) * (W - L - R);
    let py = |y: f64| H - B - (y - y0) / (y1 - y0) * (H - T - B);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, (L + W - R) / 2.0, esc(title));
    let _ = writeln!(
        s,
        r#"<path d="M{L} {T} L{L} {} L{} {}" fill="none" stroke="black"/>"#,
        H - B,
        W - R,
        H - B
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let xl = if log_x { xv.exp() } else { xv };
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(xv), H - B + 16.0, fmt_tick(xl));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, L - 6.0, py(yv) + 4.0, fmt_tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (L + W - R) / 2.0, H - 12.0, esc(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (T + H - B) / 2.0,
        (T + H - B) / 2.0,
        esc(y_label)
    );
    for (k, se) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let coords: Vec<String> = se
            .points
            .iter()
            .map(|&(x, y)| (tx(x), y))
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let dash = if se.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}"{dash}/>"#, coords.join(" "));
        let ly = T + 14.0 + 18.0 * k as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}"{dash}/>"#, W - R + 10.0, W - R + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, W - R + 36.0, ly + 4.0, esc(se.name));
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

/// Writes the CSVs, the summary and (when `svg`) the chart into `out_dir`
/// and returns the paths written.
pub fn emit_report(
    out_dir: &Path,
    adaptive: &[AdaptiveRow],
    baseline: &[(usize, f64)],
    fit: Option<&ScalingFit>,
    reports: &[EfficiencyReport],
    svg: bool,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();

    let p = out_dir.join("adaptive.csv");
    write_csv(&p, &ADAPTIVE_HEADER, adaptive)?;
    files.push(p);

    let rows: Vec<BaselineRow> =
        baseline.iter().map(|&(n, eps)| BaselineRow { n, eps, fitted: fit.map(|f| f.predict(n as f64)) }).collect();
    let p = out_dir.join("baseline.csv");
    write_csv(&p, &BASELINE_HEADER, &rows)?;
    files.push(p);

    let p = out_dir.join("efficiency.csv");
    write_csv(&p, &EFFICIENCY_HEADER, reports)?;
    files.push(p);

    let means = adaptive_means(adaptive);
    let summary = Summary { schema_version: SUMMARY_VERSION, fit: fit.cloned(), reports: reports.to_vec(), adaptive_means: means.clone() };
    let p = out_dir.join("summary.json");
    fs::write(&p, serde_json::to_string_pretty(&summary)? + "\n")?;
    files.push(p);

    if svg {
        let mut series = vec![
            Series { name: "adaptive", points: means.iter().map(|&(n, e)| (n as f64, e)).collect(), dashed: false },
            Series { name: "non-adaptive", points: baseline.iter().map(|&(n, e)| (n as f64, e)).collect(), dashed: false },
        ];
        if let Some(f) = fit {
            let xs: Vec<f64> = baseline.iter().map(|p| p.0 as f64).chain(means.iter().map(|p| p.0 as f64)).collect();
            let (lo, hi) = xs.iter().fold((f64::INFINITY, 0.0f64), |a, &x| (a.0.min(x), a.1.max(x)));
            if lo.is_finite() {
                series.push(Series { name: "fit", points: vec![(lo, f.predict(lo)), (hi, f.predict(hi))], dashed: true });
            }
        }
        let p = out_dir.join("error_vs_samples.svg");
        fs::write(&p, line_chart("Relative error vs training samples", "samples", "mean relative error", &series, true))?;
        files.push(p);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::fit_scaling;

    fn rows() -> Vec<AdaptiveRow> {
        vec![
            AdaptiveRow { seed: 1, instance: 0, round: 0, cumulative_samples: 300, validation_solves: 0, relative_error: Some(0.5), measurement_error: 0.3 },
            AdaptiveRow { seed: 1, instance: 0, round: 1, cumulative_samples: 350, validation_solves: 10, relative_error: Some(0.1 + 0.2), measurement_error: 0.2 },
            AdaptiveRow { seed: 1, instance: 1, round: 0, cumulative_samples: 300, validation_solves: 0, relative_error: None, measurement_error: 1e-300 },
        ]
    }

    #[test]
    fn empty_inputs_give_header_only_csvs() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(dir.path(), &[], &[], None, &[], false).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("adaptive.csv")).unwrap().lines().count(), 1);
        assert_eq!(fs::read_to_string(dir.path().join("baseline.csv")).unwrap(), "n,eps,fitted\n");
        assert_eq!(fs::read_to_string(dir.path().join("efficiency.csv")).unwrap().lines().count(), 1);
        assert!(read_csv::<AdaptiveRow>(&dir.path().join("adaptive.csv")).unwrap().is_empty());
    }

    #[test]
    fn csvs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let base = [(100, 0.6), (400, 0.45), (1600, 0.3)];
        let fit = fit_scaling(&base.map(|(n, e)| (n as f64, e))).unwrap();
        let rep = vec![EfficiencyReport::from_counts(0.123, 163295.0, 7000.0).unwrap()];
        emit_report(dir.path(), &rows(), &base, Some(&fit), &rep, true).unwrap();
        assert_eq!(read_csv::<AdaptiveRow>(&dir.path().join("adaptive.csv")).unwrap(), rows());
        let b: Vec<BaselineRow> = read_csv(&dir.path().join("baseline.csv")).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b[1].eps, 0.45);
        assert_eq!(b[1].fitted, Some(fit.predict(400.0)));
        assert_eq!(read_csv::<EfficiencyReport>(&dir.path().join("efficiency.csv")).unwrap(), rep);
        let s: Summary = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(s.schema_version, SUMMARY_VERSION);
        assert_eq!(s.adaptive_means, vec![(300, 0.5), (350, 0.1 + 0.2)]);
    }

    #[test]
    fn svg_is_well_formed() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(dir.path(), &rows(), &[(10, 1.0), (20, 0.5)], None, &[], true).unwrap();
        let text = fs::read_to_string(dir.path().join("error_vs_samples.svg")).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 2);
        let empty = line_chart("a < b & c", "x", "y", &[], false);
        roxmltree::Document::parse(&empty).unwrap();
    }

    #[test]
    fn unwritable_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("f");
        fs::write(&file, "x").unwrap();
        assert!(emit_report(&file.join("sub"), &[], &[], None, &[], false).is_err());
    }
}
