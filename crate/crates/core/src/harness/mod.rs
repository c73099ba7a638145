//! Benchmark harness: datasets, correlation statistics, logistic mapping,
//! parameter sweeps, window ablation and synthetic distortions.

pub mod distort;
pub mod eval;
pub mod logistic;
pub mod manifest;
pub mod psnr;
pub mod scenes;
pub mod stats;

pub use distort::{apply_distortion, generate_distortions, DistortionKind};
pub use eval::{ablate_window, ablation_csv, evaluate_dataset, score_manifest, sweep_parameters, CorrelationReport, EvalOptions, SweepGrid};
pub use logistic::{fit_logistic, logistic, LogisticFit};
pub use manifest::{load_manifest, DatasetManifest, ManifestRow};
pub use psnr::psnr_baseline;
pub use scenes::{scene_suite, synthetic_scene, SceneSpec};
pub use stats::{kendall, pearson, rmse, spearman};
