use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use ciiqa::config::{OutputFormat, RunConfig};
use ciiqa::feature::{normalized_decompositions, PreparedImage};
use ciiqa::harness::manifest::{load_tid, write_manifest};
use ciiqa::harness::{
    ablate_window, ablation_csv, evaluate_dataset, generate_distortions, load_manifest, sweep_parameters, CorrelationReport,
    DatasetManifest, DistortionKind, EvalOptions, ManifestRow,
};
use ciiqa::wavelet::save_fmap;
use ciiqa::{fmt_sig, load_image, round_sig, score_pair, srgb_to_lab, Error, Result};

/// Full-reference image quality scores from normalized wavelet features.
#[derive(Parser)]
#[command(name = "ciiqa", version, about)]
struct Cli {
    /// Constant term of the frequency gain [default: 31]. `sweep` also accepts
    /// an axis `start:stop:step` or a comma list.
    #[arg(long, global = true, allow_hyphen_values = true)]
    k1: Option<String>,
    /// Deviation term of the frequency gain [default: 3]; axis syntax as for --k1.
    #[arg(long, global = true, allow_hyphen_values = true)]
    k2: Option<String>,
    /// Color ratio at or above which the color-adapted gain applies [default: 0.25].
    #[arg(long, global = true, allow_hyphen_values = true)]
    cr_threshold: Option<String>,
    /// Tier-1 normalization: cs, win3, win5 or win7 [default: cs].
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Lower bound substituted for vanishing deviations [default: 1e-6].
    #[arg(long, global = true, allow_hyphen_values = true)]
    sigma_floor: Option<String>,
    /// Worker threads [default: available cores].
    #[arg(long, global = true)]
    jobs: Option<String>,
    /// Output path (a directory for `distort`) instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// json or csv [default: json].
    #[arg(long, global = true)]
    format: Option<String>,
    /// Flat `key = value` file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for distortion generation [default: 0].
    #[arg(long, global = true)]
    seed: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a distorted image against its reference.
    Score { reference: PathBuf, distorted: PathBuf },
    /// Extract the feature vector of one image.
    Features {
        image: PathBuf,
        /// Per-subband deviation and gain table.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
        /// Directory receiving every normalized, unscaled feature map.
        #[arg(long)]
        fmap_dir: Option<PathBuf>,
    },
    /// Evaluate a dataset manifest.
    Bench {
        manifest: PathBuf,
        /// Treat the argument as a TID2008/2013 directory.
        #[arg(long)]
        tid: bool,
        /// Also report PLCC of the raw scores.
        #[arg(long)]
        plcc_raw: bool,
    },
    /// Correlation grid over K1 x K2.
    Sweep {
        manifest: PathBuf,
        #[arg(long)]
        tid: bool,
    },
    /// Center-surround against single-window normalization.
    Ablate {
        manifest: PathBuf,
        #[arg(long)]
        tid: bool,
        /// Single-window sizes.
        #[arg(long, value_delimiter = ',', default_values_t = vec![3usize, 5, 7])]
        windows: Vec<usize>,
    },
    /// Write a severity ladder of one distortion kind, plus a manifest.
    Distort {
        reference: PathBuf,
        /// gaussian_noise, gaussian_blur, jpeg_like_blocking or contrast_shift.
        kind: String,
        levels: usize,
    },
}

/// `start:stop:step` (inclusive), a comma list, or one value.
fn parse_axis(flag: &str, text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParams(format!("--{flag}: cannot parse axis {text:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    if let Some((a, rest)) = text.split_once(':') {
        let (b, step) = rest.split_once(':').map_or((rest, "1"), |(b, s)| (b, s));
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if step.is_nan() || step <= 0.0 || b < a {
            return Err(bad());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + i as f64 * step).collect());
    }
    text.split(',').map(num).collect()
}

fn single(flag: &str, text: &str) -> Result<String> {
    match parse_axis(flag, text)?.as_slice() {
        [v] => Ok(v.to_string()),
        _ => Err(Error::InvalidParams(format!("--{flag} takes a single value here"))),
    }
}

fn run_config(cli: &Cli, axis_flags: bool) -> Result<RunConfig> {
    let mut cfg = RunConfig { jobs: std::thread::available_parallelism().map_or(1, |n| n.get()), ..RunConfig::default() };
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(path.clone()),
            _ => Error::Io { path: path.clone(), source: e },
        })?;
        cfg.apply_text(&text)?;
    }
    let numeric = [("k1", &cli.k1), ("k2", &cli.k2)];
    for (key, value) in numeric {
        if let Some(v) = value {
            if axis_flags {
                parse_axis(key, v)?;
            } else {
                cfg.set(key, &single(key, v)?)?;
            }
        }
    }
    let rest = [
        ("cr_threshold", &cli.cr_threshold),
        ("mode", &cli.mode),
        ("sigma_floor", &cli.sigma_floor),
        ("jobs", &cli.jobs),
        ("format", &cli.format),
        ("seed", &cli.seed),
    ];
    for (key, value) in rest {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io { path: PathBuf::from("<stdout>"), source: e })
        }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn load_dataset(path: &Path, tid: bool) -> Result<DatasetManifest> {
    if tid {
        load_tid(path)
    } else {
        load_manifest(path)
    }
}

#[derive(Serialize)]
struct ParamsOut {
    k1: f64,
    k2: f64,
    cr_threshold: f64,
    sigma_floor: f64,
    mode: String,
}

impl ParamsOut {
    fn new(cfg: &RunConfig) -> Self {
        let p = &cfg.params;
        Self {
            k1: round_sig(p.k1),
            k2: round_sig(p.k2),
            cr_threshold: round_sig(p.cr_threshold),
            sigma_floor: round_sig(p.sigma_floor),
            mode: p.mode.to_string(),
        }
    }
}

#[derive(Serialize)]
struct ScoreOut {
    e: f64,
    branch: String,
    cr: f64,
    params: ParamsOut,
}

#[derive(Serialize)]
struct FeaturesOut {
    values: usize,
    segments: usize,
    branch: String,
    cr: f64,
    degenerate: bool,
}

fn report_text(r: &CorrelationReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => json(r),
        OutputFormat::Csv => ablation_csv(std::slice::from_ref(r)),
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = run_config(&cli, matches!(cli.command, Command::Sweep { .. }))?;
    let p = cfg.params;
    let opts = EvalOptions { jobs: cfg.jobs, plcc_raw: false };
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Score { reference, distorted } => {
            let (r, d) = (load_image(reference)?, load_image(distorted)?);
            let s = score_pair(&r, &d, &p)?;
            let text = match cfg.format {
                OutputFormat::Json => json(&ScoreOut { e: round_sig(s.e), branch: s.branch.to_string(), cr: round_sig(s.cr), params: ParamsOut::new(&cfg) }),
                OutputFormat::Csv => format!("e,branch,cr\n{},{},{}\n", fmt_sig(s.e), s.branch, fmt_sig(s.cr)),
            };
            emit(out, &text)
        }
        Command::Features { image, diagnostics, fmap_dir } => {
            let lab = srgb_to_lab(&load_image(image)?);
            let prep = PreparedImage::new(&lab, &p)?;
            let branch = prep.own_branch(&p);
            let feature = prep.feature(&p, branch);
            if let Some(path) = out {
                feature.save(path)?;
            }
            if let Some(path) = diagnostics {
                let csv = prep.report(&p, branch).to_csv();
                std::fs::write(path, csv).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            }
            if let Some(dir) = fmap_dir {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
                for decomp in normalized_decompositions(&lab, &p)? {
                    for m in &decomp.maps {
                        let name = format!("{}_s{}_{}.fmap", m.channel.name(), m.level, m.orientation.name());
                        save_fmap(m, &dir.join(name))?;
                    }
                }
            }
            let summary = FeaturesOut {
                values: feature.len(),
                segments: feature.layout.len(),
                branch: branch.to_string(),
                cr: round_sig(prep.cr.value),
                degenerate: prep.cr.degenerate,
            };
            emit(None, &json(&summary))
        }
        Command::Bench { manifest, tid, plcc_raw } => {
            let m = load_dataset(manifest, *tid)?;
            let r = evaluate_dataset(&m, &p, &EvalOptions { plcc_raw: *plcc_raw, ..opts })?;
            emit(out, &report_text(&r, cfg.format))
        }
        Command::Sweep { manifest, tid } => {
            let k1 = cli.k1.as_deref().map_or(Ok(vec![p.k1]), |t| parse_axis("k1", t))?;
            let k2 = cli.k2.as_deref().map_or(Ok(vec![p.k2]), |t| parse_axis("k2", t))?;
            let m = load_dataset(manifest, *tid)?;
            let grid = sweep_parameters(&m, &k1, &k2, &p, &opts)?;
            let text = match cfg.format {
                OutputFormat::Csv => grid.to_csv(),
                OutputFormat::Json => json(&grid.cells),
            };
            emit(out, &text)
        }
        Command::Ablate { manifest, tid, windows } => {
            let m = load_dataset(manifest, *tid)?;
            let reports = ablate_window(&m, windows, &p, &opts)?;
            let text = match cfg.format {
                OutputFormat::Csv => ablation_csv(&reports),
                OutputFormat::Json => json(&reports),
            };
            emit(out, &text)
        }
        Command::Distort { reference, kind, levels } => {
            let kind: DistortionKind = kind.parse()?;
            let img = load_image(reference)?;
            let dir = out.unwrap_or(Path::new("."));
            std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
            let stem = reference.file_stem().map_or("image".into(), |s| s.to_string_lossy().into_owned());
            let ladder = generate_distortions(&img, kind, *levels, cfg.seed)?;
            let mut rows = Vec::new();
            let mut listing = String::new();
            for (d, rank) in &ladder {
                let path = dir.join(format!("{stem}_{kind}_{rank}.png"));
                d.save_png(&path)?;
                listing.push_str(&format!("{}\n", path.display()));
                // nominal MOS: the mildest level rates highest
                rows.push(ManifestRow {
                    ref_path: std::path::absolute(reference).unwrap_or_else(|_| reference.clone()),
                    dist_path: path,
                    mos: (levels + 1 - rank) as f64,
                    tag: kind.to_string(),
                });
            }
            let manifest = DatasetManifest { name: format!("{stem}_{kind}"), rows };
            write_manifest(&manifest, &dir.join(format!("{stem}_{kind}.csv")))?;
            emit(None, &listing)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors; help and version are not errors
            return if e.use_stderr() { ExitCode::from(4) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
