//! Dataset evaluation, K1/K2 sweeps and the window ablation.
//!
//! Every distinct image in a manifest is decoded and normalized once; the
//! per-pair distance under any (K1, K2, threshold) is then a cheap pass over
//! the pooled maps. Scores are keyed by row index, so the reduction is
//! independent of the thread count.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::color::{load_image, srgb_to_lab};
use crate::error::{Error, Result};
use crate::feature::{score_prepared, PreparedImage};
use crate::harness::logistic::fit_logistic;
use crate::harness::manifest::DatasetManifest;
use crate::harness::stats::{kendall, pearson, rmse, spearman};
use crate::round_sig;
use crate::scaling::{NormMode, ScalingParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalOptions {
    /// Worker threads; at least 1.
    pub jobs: usize,
    /// Also report PLCC on the raw (unfitted) scores.
    pub plcc_raw: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { jobs: 1, plcc_raw: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogisticReport {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub b5: f64,
    pub converged: bool,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamsEcho {
    pub k1: f64,
    pub k2: f64,
    pub cr_threshold: f64,
    pub mode: NormMode,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowFailure {
    /// 1-based data row of the manifest.
    pub row: usize,
    pub error: String,
}

/// Correlation summary of one dataset run. Correlations that cannot be
/// computed (too few rows, constant scores) are `null` with the reason in
/// `notes`. All numbers carry six significant digits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub dataset: String,
    pub n_pairs: usize,
    pub n_failed: usize,
    pub srcc: Option<f64>,
    pub krcc: Option<f64>,
    pub plcc: Option<f64>,
    pub rmse: Option<f64>,
    pub abs_srcc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plcc_raw: Option<f64>,
    pub logistic: Option<LogisticReport>,
    pub params: ParamsEcho,
    pub failures: Vec<RowFailure>,
    pub notes: Vec<String>,
}

impl CorrelationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        return Err(Error::InvalidParams("jobs must be >= 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParams(format!("cannot start {jobs} worker threads: {e}")))
}

struct Prepared {
    image: PreparedImage,
    dims: (usize, usize),
}

/// Decodes and normalizes every distinct image of the manifest. Only the
/// normalization mode and sigma floor of `p` matter here.
fn prepare_images(m: &DatasetManifest, p: &ScalingParams, pool: &rayon::ThreadPool) -> BTreeMap<PathBuf, std::result::Result<Prepared, String>> {
    let paths: Vec<&Path> = m
        .rows
        .iter()
        .flat_map(|r| [r.ref_path.as_path(), r.dist_path.as_path()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    pool.install(|| {
        paths
            .par_iter()
            .map(|&path| {
                let prepared = load_image(path)
                    .and_then(|img| {
                        let dims = (img.width(), img.height());
                        PreparedImage::new(&srgb_to_lab(&img), p).map(|image| Prepared { image, dims })
                    })
                    .map_err(|e| e.to_string());
                (path.to_path_buf(), prepared)
            })
            .collect()
    })
}

/// Per-row score or failure message under `p`.
fn score_rows(m: &DatasetManifest, images: &BTreeMap<PathBuf, std::result::Result<Prepared, String>>, p: &ScalingParams) -> Vec<std::result::Result<f64, String>> {
    m.rows
        .iter()
        .map(|row| {
            let r = images[&row.ref_path].as_ref().map_err(|e| format!("reference: {e}"))?;
            let d = images[&row.dist_path].as_ref().map_err(|e| format!("distorted: {e}"))?;
            if r.dims != d.dims {
                return Err(Error::DimensionMismatch(format!(
                    "reference is {}x{}, distorted is {}x{}",
                    r.dims.0, r.dims.1, d.dims.0, d.dims.1
                ))
                .to_string());
            }
            score_prepared(&r.image, &d.image, p).map(|s| s.e).map_err(|e| e.to_string())
        })
        .collect()
}

fn summarize(m: &DatasetManifest, scores: &[std::result::Result<f64, String>], p: &ScalingParams, opts: &EvalOptions) -> CorrelationReport {
    let mut failures = Vec::new();
    let (mut e, mut mos) = (Vec::new(), Vec::new());
    for (i, (s, row)) in scores.iter().zip(&m.rows).enumerate() {
        match s {
            Ok(v) => {
                e.push(*v);
                mos.push(row.mos);
            }
            Err(msg) => failures.push(RowFailure { row: i + 1, error: msg.clone() }),
        }
    }
    let mut notes = Vec::new();
    fn keep(notes: &mut Vec<String>, name: &str, r: Result<f64>) -> Option<f64> {
        match r {
            Ok(v) => Some(round_sig(v)),
            Err(err) => {
                notes.push(format!("{name}: {err}"));
                None
            }
        }
    }
    let srcc = keep(&mut notes, "srcc", spearman(&e, &mos));
    let krcc = keep(&mut notes, "krcc", kendall(&e, &mos));
    let plcc_raw = if opts.plcc_raw { keep(&mut notes, "plcc_raw", pearson(&e, &mos)) } else { None };

    let degenerate_scores = e.len() < 2 || e.iter().all(|&v| v == e[0]);
    let fit = if degenerate_scores {
        None
    } else {
        match fit_logistic(&e, &mos) {
            Ok(f) => Some(f),
            Err(err) => {
                notes.push(format!("logistic: {err}"));
                None
            }
        }
    };
    let (plcc, rmse_v) = match &fit {
        Some(f) => {
            let mapped = f.map(&e);
            (keep(&mut notes, "plcc", pearson(&mapped, &mos)), keep(&mut notes, "rmse", rmse(&mapped, &mos)))
        }
        None => (None, None),
    };
    let logistic = fit.map(|f| LogisticReport {
        b1: round_sig(f.beta[0]),
        b2: round_sig(f.beta[1]),
        b3: round_sig(f.beta[2]),
        b4: round_sig(f.beta[3]),
        b5: round_sig(f.beta[4]),
        converged: f.converged,
        residual: round_sig(f.residual),
    });
    CorrelationReport {
        dataset: m.name.clone(),
        n_pairs: e.len(),
        n_failed: failures.len(),
        srcc,
        krcc,
        plcc,
        rmse: rmse_v,
        abs_srcc: srcc.map(f64::abs),
        plcc_raw,
        logistic,
        params: ParamsEcho {
            k1: round_sig(p.k1),
            k2: round_sig(p.k2),
            cr_threshold: round_sig(p.cr_threshold),
            mode: p.mode,
        },
        failures,
        notes,
    }
}

/// Raw per-row scores (`Err` for failed rows), in manifest order.
pub fn score_manifest(m: &DatasetManifest, p: &ScalingParams, opts: &EvalOptions) -> Result<Vec<std::result::Result<f64, String>>> {
    p.validate()?;
    let pool = thread_pool(opts.jobs)?;
    let images = prepare_images(m, p, &pool);
    Ok(score_rows(m, &images, p))
}

/// Scores every pair, fits the logistic map and computes the correlations.
/// Rows that fail are listed in the report rather than aborting the run.
pub fn evaluate_dataset(m: &DatasetManifest, p: &ScalingParams, opts: &EvalOptions) -> Result<CorrelationReport> {
    let scores = score_manifest(m, p, opts)?;
    Ok(summarize(m, &scores, p, opts))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub k1: f64,
    pub k2: f64,
    pub srcc: Option<f64>,
    pub krcc: Option<f64>,
    pub plcc: Option<f64>,
}

/// Row-major over `k1_values`, then `k2_values`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepGrid {
    pub k1_values: Vec<f64>,
    pub k2_values: Vec<f64>,
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    /// `k1,k2,srcc,krcc,plcc`; undefined correlations are written as `nan`.
    pub fn to_csv(&self) -> String {
        let f = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), crate::fmt_sig);
        let mut out = String::from("k1,k2,srcc,krcc,plcc\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{},{},{}\n", crate::fmt_sig(c.k1), crate::fmt_sig(c.k2), f(c.srcc), f(c.krcc), f(c.plcc)));
        }
        out
    }
}

/// Evaluates the full K1 x K2 grid. Images are prepared once; each cell's
/// numbers are exactly those [`evaluate_dataset`] reports at that setting.
pub fn sweep_parameters(m: &DatasetManifest, k1_values: &[f64], k2_values: &[f64], base: &ScalingParams, opts: &EvalOptions) -> Result<SweepGrid> {
    if k1_values.is_empty() || k2_values.is_empty() {
        return Err(Error::InvalidParams("sweep axes must be non-empty".into()));
    }
    let settings: Vec<ScalingParams> = k1_values
        .iter()
        .flat_map(|&k1| k2_values.iter().map(move |&k2| ScalingParams { k1, k2, ..*base }))
        .collect();
    for p in &settings {
        p.validate()?;
    }
    let pool = thread_pool(opts.jobs)?;
    let images = prepare_images(m, base, &pool);
    let cells = pool.install(|| {
        settings
            .par_iter()
            .map(|p| {
                let r = summarize(m, &score_rows(m, &images, p), p, opts);
                SweepCell { k1: round_sig(p.k1), k2: round_sig(p.k2), srcc: r.srcc, krcc: r.krcc, plcc: r.plcc }
            })
            .collect()
    });
    Ok(SweepGrid { k1_values: k1_values.to_vec(), k2_values: k2_values.to_vec(), cells })
}

/// Center-surround first, then one single-window run per size in `windows`.
pub fn ablate_window(m: &DatasetManifest, windows: &[usize], base: &ScalingParams, opts: &EvalOptions) -> Result<Vec<CorrelationReport>> {
    std::iter::once(NormMode::CenterSurround)
        .chain(windows.iter().map(|&k| NormMode::SingleWindow(k)))
        .map(|mode| evaluate_dataset(m, &ScalingParams { mode, ..*base }, opts))
        .collect()
}

/// `mode,n_pairs,srcc,krcc,plcc,rmse` table of an ablation run.
pub fn ablation_csv(reports: &[CorrelationReport]) -> String {
    let f = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), crate::fmt_sig);
    let mut out = String::from("mode,n_pairs,srcc,krcc,plcc,rmse\n");
    for r in reports {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.params.mode, r.n_pairs, f(r.srcc), f(r.krcc), f(r.plcc), f(r.rmse)));
    }
    out
}
