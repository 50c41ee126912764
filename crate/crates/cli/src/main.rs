use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use propkern::data::{Dataset, TargetScaler};
use propkern::harness::{
    base_spec, generate_dataset, run_experiment, ExperimentConfig, ExperimentKind, KernelChoice,
};
use propkern::kernel::KernelSpec;
use propkern::numerics::SeededRng;
use propkern::spectral::PsdMode;
use propkern::svr::{grid_search, metrics, scale_features, train_gram, SvrConfig, SvrModel};
use propkern::Error;

/// Kernel regression experiments on physics datasets.
#[derive(Parser)]
#[command(name = "propkern", version, about)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed for data generation, splits and folds.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum Experiment {
    Conductivity,
    Graphene,
    Anharmonic,
    Photonic,
    Quasicrystal,
}

impl From<Experiment> for ExperimentKind {
    fn from(e: Experiment) -> Self {
        match e {
            Experiment::Conductivity => ExperimentKind::Conductivity,
            Experiment::Graphene => ExperimentKind::Graphene,
            Experiment::Anharmonic => ExperimentKind::Anharmonic,
            Experiment::Photonic => ExperimentKind::Photonic,
            Experiment::Quasicrystal => ExperimentKind::Quasicrystal,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum Kernel {
    Custom,
    Rbf,
    Linear,
    Poly,
    Sigmoid,
}

impl From<Kernel> for KernelChoice {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::Custom => KernelChoice::Custom,
            Kernel::Rbf => KernelChoice::Rbf,
            Kernel::Linear => KernelChoice::Linear,
            Kernel::Poly => KernelChoice::Poly,
            Kernel::Sigmoid => KernelChoice::Sigmoid,
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum PsdBackend {
    FullClip,
    Lanczos,
    Nystrom,
}

#[derive(Subcommand)]
enum Command {
    /// Write an experiment's dataset as CSV plus a metadata sidecar.
    Generate {
        experiment: Experiment,
        #[command(flatten)]
        common: Common,
        /// Materials export to ingest (conductivity only).
        #[arg(long)]
        materials: Option<PathBuf>,
    },
    /// Run a named experiment: grid search, fit and evaluate every kernel.
    Experiment {
        /// Experiment name; overrides the config file.
        experiment: Option<Experiment>,
        #[command(flatten)]
        common: Common,
        /// Comma-separated kernel list.
        #[arg(long, value_delimiter = ',')]
        kernels: Vec<Kernel>,
        /// Comma-separated polynomial degrees, one result entry each.
        #[arg(long, value_delimiter = ',')]
        poly_degrees: Vec<u32>,
        /// Fraction of rows used for training.
        #[arg(long)]
        train_fraction: Option<f64>,
        /// Cross-validation folds.
        #[arg(long)]
        folds: Option<usize>,
        /// Chebyshev expansion degree of the custom kernel.
        #[arg(long)]
        cheb_degree: Option<usize>,
        /// Materials export to ingest (conductivity only).
        #[arg(long)]
        materials: Option<PathBuf>,
    },
    /// Export the training Gram matrix of a dataset and its PSD report.
    KernelMatrix {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        kernel: KernelArgs,
        /// Dataset CSV (feature_0,...,target).
        #[arg(long)]
        data: PathBuf,
        /// Output CSV; defaults to <out-dir>/gram.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit one kernel on a dataset and save the model as JSON.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        data: PathBuf,
        /// Box constraint; with --epsilon skips the grid search.
        #[arg(long)]
        c: Option<f64>,
        /// Tube width in standardized target units.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Output model; defaults to <out-dir>/model.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict with a saved model; prints metrics when targets are present.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output CSV; defaults to <out-dir>/predictions.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct KernelArgs {
    #[arg(long, value_enum)]
    kernel: Kernel,
    /// Kernel γ (rbf, poly, sigmoid); swept by the grid when omitted.
    #[arg(long)]
    gamma: Option<f64>,
    /// Polynomial degree.
    #[arg(long, default_value_t = 3)]
    degree: u32,
    /// Offset r of the poly and sigmoid kernels.
    #[arg(long)]
    coef0: Option<f64>,
    /// Chebyshev expansion degree of the custom kernel.
    #[arg(long)]
    cheb_degree: Option<usize>,
    /// PSD repair for the custom kernel.
    #[arg(long, value_enum, default_value = "full-clip")]
    psd: PsdBackend,
    /// Lanczos rank or Nyström landmark count.
    #[arg(long)]
    rank: Option<usize>,
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(common: &Common) -> PathBuf {
    common.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn out_file(explicit: &Option<PathBuf>, common: &Common, name: &str) -> Result<PathBuf, Error> {
    let path = explicit
        .clone()
        .unwrap_or_else(|| out_dir(common).join(name));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(path)
}

/// Kernel spec for a one-off dataset command.
fn kernel_spec(
    cfg: &mut ExperimentConfig,
    args: &KernelArgs,
    data: &Dataset,
) -> Result<KernelSpec, Error> {
    if let Some(d) = args.cheb_degree {
        cfg.custom.degree = d;
    }
    cfg.custom.psd_mode = match args.psd {
        PsdBackend::FullClip => PsdMode::FullClip,
        PsdBackend::Lanczos => PsdMode::Lanczos { k: args.rank },
        PsdBackend::Nystrom => PsdMode::Nystrom {
            m: args.rank.unwrap_or(data.len().min(100)),
            jitter: propkern::spectral::DEFAULT_NYSTROM_JITTER,
        },
    };
    let mut spec = base_spec(cfg, args.kernel.into(), Some(args.degree), data)?;
    if let Some(g) = args.gamma {
        spec = spec.with_gamma(g);
    }
    if let Some(c0) = args.coef0 {
        match &mut spec {
            KernelSpec::Poly { r, .. } | KernelSpec::Sigmoid { r, .. } => *r = c0,
            _ => {}
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate {
            experiment,
            common,
            materials,
        } => {
            let mut cfg = load_config(&common)?;
            cfg.experiment = experiment.into();
            if materials.is_some() {
                cfg.data.materials_csv = materials;
            }
            let data = generate_dataset(cfg.experiment, &cfg.data, cfg.seed)?;
            let path = out_file(&None, &common, &format!("{}.csv", cfg.experiment))?;
            data.write_csv(&path)?;
            println!("wrote {} rows to {}", data.len(), path.display());
        }
        Command::Experiment {
            experiment,
            common,
            kernels,
            poly_degrees,
            train_fraction,
            folds,
            cheb_degree,
            materials,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(e) = experiment {
                cfg.experiment = e.into();
            }
            if !kernels.is_empty() {
                cfg.kernels = kernels.into_iter().map(Into::into).collect();
            }
            if !poly_degrees.is_empty() {
                cfg.poly_degrees = poly_degrees;
            }
            if let Some(f) = train_fraction {
                cfg.train_fraction = f;
            }
            if let Some(f) = folds {
                cfg.grid.folds = f;
            }
            if let Some(d) = cheb_degree {
                cfg.custom.degree = d;
            }
            if materials.is_some() {
                cfg.data.materials_csv = materials;
            }
            let (report, data) = run_experiment(&cfg)?;
            let dir = out_dir(&common);
            report.write(&dir, &data)?;
            print!("{}", report.metrics_csv());
            for r in &report.results {
                if let Some(e) = &r.error {
                    eprintln!("{}: {e}", r.kernel);
                }
            }
            println!("outputs in {}", dir.display());
        }
        Command::KernelMatrix {
            common,
            kernel,
            data,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            let ds = Dataset::read_csv(&data)?;
            let spec = kernel_spec(&mut cfg, &kernel, &ds)?;
            let (_, xs) = scale_features(&spec, ds.x())?;
            let gram = train_gram(&spec, &xs, &mut SeededRng::new(cfg.seed))?;
            let path = out_file(&out, &common, "gram.csv")?;
            let mut text = String::new();
            for i in 0..gram.n() {
                let row: Vec<String> = gram
                    .matrix()
                    .row(i)
                    .iter()
                    .map(|v| format!("{v:?}"))
                    .collect();
                text.push_str(&row.join(","));
                text.push('\n');
            }
            write_text(&path, &text)?;
            let report = serde_json::json!({
                "kernel": spec,
                "n": gram.n(),
                "min_eigenvalue": gram.min_eigenvalue(),
                "psd_report": gram.psd_report(),
            });
            let rpath = path.with_extension("psd.json");
            write_text(&rpath, &(serde_json::to_string_pretty(&report)? + "\n"))?;
            println!(
                "wrote {}x{} Gram to {} (min eigenvalue {:.3e})",
                gram.n(),
                gram.n(),
                path.display(),
                gram.min_eigenvalue()
            );
        }
        Command::Train {
            common,
            kernel,
            data,
            c,
            epsilon,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            let ds = Dataset::read_csv(&data)?;
            let spec = kernel_spec(&mut cfg, &kernel, &ds)?;
            let (spec, svr) = match (c, epsilon) {
                (Some(c), Some(eps)) => {
                    let allow_indefinite = matches!(spec, KernelSpec::Sigmoid { .. });
                    (
                        spec,
                        SvrConfig {
                            allow_indefinite,
                            ..SvrConfig::new(c, eps)
                        },
                    )
                }
                (None, None) => {
                    let (_, xs) = scale_features(&spec, ds.x())?;
                    let yz = TargetScaler::fit(ds.y())?.apply(ds.y());
                    let mut grid = cfg.grid.clone();
                    if kernel.gamma.is_some() {
                        grid.gamma.clear();
                    }
                    let gs = grid_search(&xs, &yz, &spec, &grid, cfg.seed)?;
                    (gs.kernel, gs.config)
                }
                _ => {
                    return Err(Error::Config(
                        "--c and --epsilon must be given together".into(),
                    ))
                }
            };
            let model = SvrModel::train(&ds, &spec, &svr, cfg.seed)?;
            let path = out_file(&out, &common, "model.json")?;
            write_text(&path, &(serde_json::to_string_pretty(&model)? + "\n"))?;
            println!(
                "C={} epsilon={} gamma={:?} support_vectors={} converged={} -> {}",
                svr.c,
                svr.epsilon,
                spec.gamma(),
                model.support_vectors(),
                model.converged,
                path.display()
            );
        }
        Command::Predict {
            common,
            model,
            data,
            out,
        } => {
            let text = std::fs::read_to_string(&model).map_err(|e| Error::io(&model, e))?;
            let model: SvrModel = serde_json::from_str(&text)?;
            let ds = Dataset::read_csv(&data)?;
            let pred = model.predict(ds.x())?;
            let path = out_file(&out, &common, "predictions.csv")?;
            let mut text: String = (0..ds.dims()).map(|j| format!("feature_{j},")).collect();
            text.push_str("prediction\n");
            for (i, p) in pred.iter().enumerate() {
                for v in ds.x().row(i) {
                    text.push_str(&format!("{v:?},"));
                }
                text.push_str(&format!("{p:?}\n"));
            }
            write_text(&path, &text)?;
            if ds.len() >= 2 {
                let m = metrics(ds.y(), &pred)?;
                println!(
                    "mse={} r2={}",
                    m.mse,
                    m.r2.map_or("undefined".into(), |v| v.to_string())
                );
            }
            println!("wrote {} predictions to {}", pred.len(), path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_)
                | Error::InvalidParameter(_)
                | Error::VectorInputToSpectralKernel { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
