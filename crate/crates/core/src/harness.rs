//! End-to-end experiments: generate, split, standardize, grid-search, fit,
//! evaluate and write `metrics.csv`, `report.json` and SVG plots.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{train_test_split, Dataset, DatasetMeta, TargetScaler};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::numerics::SeededRng;
use crate::physics::{
    anharmonic_dataset, dirac_cone_dataset, ingest_materials_csv, photonic_dataset,
    quasicrystal_dataset, synth_conductivity, AnharmonicSampling, DiracCone, PhotonicParams,
    QuasicrystalParams, SynthConductivity,
};
use crate::plot::{bar_chart, line_chart};
use crate::spectral::{ChebyshevKernel, PsdMode, PsdReport, DEFAULT_EDGE_MARGIN};
use crate::svr::{
    grid_search, metrics, scale_features, svr_fit, svr_predict, test_cross, train_gram, SvrGrid,
};

pub const METRICS_HEADER: &str = "experiment,kernel,mse,r2,n_train,n_test,seed,converged";

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Conductivity,
    Graphene,
    Anharmonic,
    Photonic,
    #[default]
    Quasicrystal,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Conductivity,
        ExperimentKind::Graphene,
        ExperimentKind::Anharmonic,
        ExperimentKind::Photonic,
        ExperimentKind::Quasicrystal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Conductivity => "conductivity",
            ExperimentKind::Graphene => "graphene",
            ExperimentKind::Anharmonic => "anharmonic",
            ExperimentKind::Photonic => "photonic",
            ExperimentKind::Quasicrystal => "quasicrystal",
        }
    }

    /// Spectrum experiments get a predicted-vs-true curve plot.
    pub fn is_spectrum(self) -> bool {
        matches!(
            self,
            ExperimentKind::Photonic | ExperimentKind::Quasicrystal
        )
    }

    pub fn default_kernels(self) -> Vec<KernelChoice> {
        use KernelChoice::*;
        match self {
            ExperimentKind::Conductivity => vec![Rbf, Sigmoid, Linear, Poly],
            ExperimentKind::Graphene => vec![Linear, Poly, Rbf],
            ExperimentKind::Anharmonic => vec![Poly],
            ExperimentKind::Photonic | ExperimentKind::Quasicrystal => {
                vec![Custom, Rbf, Linear, Poly, Sigmoid]
            }
        }
    }

    pub fn default_poly_degrees(self) -> Vec<u32> {
        match self {
            ExperimentKind::Anharmonic => vec![2, 3, 4, 5, 6],
            ExperimentKind::Graphene => vec![2],
            _ => vec![3],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown experiment '{s}' (expected conductivity, graphene, anharmonic, photonic or quasicrystal)"
                ))
            })
    }
}

/// Kernel families selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    Custom,
    Rbf,
    Linear,
    Poly,
    Sigmoid,
}

impl FromStr for KernelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "custom" => KernelChoice::Custom,
            "rbf" => KernelChoice::Rbf,
            "linear" => KernelChoice::Linear,
            "poly" => KernelChoice::Poly,
            "sigmoid" => KernelChoice::Sigmoid,
            _ => {
                return Err(Error::Config(format!(
                    "unknown kernel '{s}' (expected custom, rbf, linear, poly or sigmoid)"
                )))
            }
        })
    }
}

/// Settings of the Jackson-Chebyshev kernel; its domain comes from the
/// training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CustomKernelConfig {
    pub degree: usize,
    pub edge_margin: f64,
    pub psd_mode: PsdMode,
}

impl Default for CustomKernelConfig {
    fn default() -> Self {
        Self {
            degree: 60,
            edge_margin: DEFAULT_EDGE_MARGIN,
            psd_mode: PsdMode::FullClip,
        }
    }
}

/// Generator parameters, one table per experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct DatasetParams {
    pub conductivity: SynthConductivity,
    /// Materials export to ingest instead of synthesizing conductivity data.
    pub materials_csv: Option<PathBuf>,
    pub graphene: DiracCone,
    pub anharmonic: AnharmonicSampling,
    pub photonic: PhotonicParams,
    pub quasicrystal: QuasicrystalParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub train_fraction: f64,
    /// Empty means the experiment's default list.
    pub kernels: Vec<KernelChoice>,
    /// One polynomial entry per degree; empty means the default.
    pub poly_degrees: Vec<u32>,
    pub grid: SvrGrid,
    pub custom: CustomKernelConfig,
    pub data: DatasetParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::default(),
            seed: 1,
            train_fraction: 0.8,
            kernels: Vec::new(),
            poly_degrees: Vec::new(),
            grid: SvrGrid::default(),
            custom: CustomKernelConfig::default(),
            data: DatasetParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, seed: u64) -> Self {
        Self {
            experiment,
            seed,
            ..Default::default()
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fills empty kernel and degree lists with the experiment defaults.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        if c.kernels.is_empty() {
            c.kernels = c.experiment.default_kernels();
        }
        if c.poly_degrees.is_empty() {
            c.poly_degrees = c.experiment.default_poly_degrees();
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        let r = self.resolved();
        if r.kernels.is_empty() {
            return Err(Error::Config("kernel list is empty".into()));
        }
        if r.kernels.contains(&KernelChoice::Poly) && r.poly_degrees.contains(&0) {
            return Err(Error::Config("polynomial degrees must be >= 1".into()));
        }
        if let Some(p) = &self.data.materials_csv {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "materials file {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    /// `(label, choice, degree)` for every kernel entry, polynomial entries
    /// expanded per degree.
    pub fn kernel_entries(&self) -> Vec<(String, KernelChoice, Option<u32>)> {
        let r = self.resolved();
        let mut out = Vec::new();
        for &k in &r.kernels {
            match k {
                KernelChoice::Poly => {
                    for &d in &r.poly_degrees {
                        out.push((format!("poly{d}"), k, Some(d)));
                    }
                }
                KernelChoice::Custom => out.push(("custom".into(), k, None)),
                KernelChoice::Rbf => out.push(("rbf".into(), k, None)),
                KernelChoice::Linear => out.push(("linear".into(), k, None)),
                KernelChoice::Sigmoid => out.push(("sigmoid".into(), k, None)),
            }
        }
        out
    }
}

/// Builds the configured dataset for `kind`.
pub fn generate_dataset(
    kind: ExperimentKind,
    params: &DatasetParams,
    seed: u64,
) -> Result<Dataset> {
    match kind {
        ExperimentKind::Conductivity => match &params.materials_csv {
            Some(path) => Ok(ingest_materials_csv(path)?.0),
            None => synth_conductivity(&params.conductivity, seed),
        },
        ExperimentKind::Graphene => dirac_cone_dataset(&params.graphene, seed),
        ExperimentKind::Anharmonic => anharmonic_dataset(&params.anharmonic, seed),
        ExperimentKind::Photonic => photonic_dataset(&params.photonic, seed),
        ExperimentKind::Quasicrystal => quasicrystal_dataset(&params.quasicrystal, seed),
    }
}

/// Outcome of one kernel entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelResult {
    pub kernel: String,
    pub spec: Option<KernelSpec>,
    pub c: Option<f64>,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub cv_mse: Option<f64>,
    pub mse: Option<f64>,
    pub r2: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub converged: bool,
    pub iterations: usize,
    pub support_vectors: usize,
    /// Every fit (grid search and final) satisfied the dual constraints.
    pub dual_feasible: bool,
    /// Smallest eigenvalue over all training Grams this kernel used.
    pub min_gram_eigenvalue: Option<f64>,
    pub psd_report: Option<PsdReport>,
    pub error: Option<String>,
    pub wall_clock_s: f64,
    /// Predictions over the whole dataset, in dataset order.
    #[serde(skip)]
    pub curve: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub rows: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub meta: DatasetMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub results: Vec<KernelResult>,
    pub versions: BTreeMap<String, String>,
    pub wall_clock_s: f64,
}

impl ExperimentReport {
    pub fn result(&self, kernel: &str) -> Option<&KernelResult> {
        self.results.iter().find(|r| r.kernel == kernel)
    }

    /// CSV rows under [`METRICS_HEADER`]; deterministic for a fixed config.
    pub fn metrics_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for r in &self.results {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.config.experiment,
                r.kernel,
                opt(r.mse),
                opt(r.r2),
                r.n_train,
                r.n_test,
                self.config.seed,
                r.converged
            ));
        }
        out
    }

    pub fn mse_chart(&self) -> String {
        let bars: Vec<(String, Option<f64>)> = self
            .results
            .iter()
            .map(|r| (r.kernel.clone(), r.mse))
            .collect();
        bar_chart(
            &format!("{}: test MSE", self.config.experiment),
            "MSE",
            &bars,
        )
    }

    pub fn r2_chart(&self) -> String {
        let bars: Vec<(String, Option<f64>)> = self
            .results
            .iter()
            .map(|r| (r.kernel.clone(), r.r2))
            .collect();
        bar_chart(&format!("{}: test R²", self.config.experiment), "R²", &bars)
    }

    /// Writes `metrics.csv`, `report.json`, `mse.svg`, `r2.svg` and, for
    /// spectrum experiments, `curve.svg`. Returns the written paths.
    pub fn write(&self, out_dir: &Path, dataset: &Dataset) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let mut files: Vec<(PathBuf, String)> = vec![
            (out_dir.join("metrics.csv"), self.metrics_csv()),
            (
                out_dir.join("report.json"),
                serde_json::to_string_pretty(self)? + "\n",
            ),
            (out_dir.join("mse.svg"), self.mse_chart()),
            (out_dir.join("r2.svg"), self.r2_chart()),
        ];
        if self.config.experiment.is_spectrum() {
            files.push((out_dir.join("curve.svg"), self.curve_chart(dataset)));
        }
        for (path, text) in &files {
            std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
        }
        Ok(files.into_iter().map(|f| f.0).collect())
    }

    pub fn curve_chart(&self, dataset: &Dataset) -> String {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.sort_by(|&a, &b| dataset.x().get(a, 0).total_cmp(&dataset.x().get(b, 0)));
        let x: Vec<f64> = order.iter().map(|&i| dataset.x().get(i, 0)).collect();
        let mut series = vec![(
            "true".to_string(),
            order.iter().map(|&i| dataset.y()[i]).collect(),
        )];
        for r in &self.results {
            if let Some(c) = &r.curve {
                series.push((r.kernel.clone(), order.iter().map(|&i| c[i]).collect()));
            }
        }
        let x_label = dataset
            .meta
            .feature_names
            .first()
            .cloned()
            .unwrap_or_default();
        line_chart(
            &format!("{}: predicted vs true", self.config.experiment),
            &x_label,
            &dataset.meta.target_name,
            &x,
            &series,
        )
    }
}

pub fn versions() -> BTreeMap<String, String> {
    let mut v = BTreeMap::new();
    v.insert("propkern".into(), env!("CARGO_PKG_VERSION").into());
    v.insert("report_format".into(), "1".into());
    v
}

/// Runs every configured kernel on one dataset. Kernel failures are
/// recorded in their result entry; only configuration and data errors abort.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Dataset)> {
    cfg.validate()?;
    let start = Instant::now();
    let cfg = cfg.resolved();
    let data = generate_dataset(cfg.experiment, &cfg.data, cfg.seed)?;
    let mut rng = SeededRng::new(cfg.seed).fork(1);
    let (tr, te) = train_test_split(data.len(), cfg.train_fraction, &mut rng)?;
    let train = data.subset(&tr);
    let test = data.subset(&te);

    let mut results = Vec::new();
    for (label, choice, degree) in cfg.kernel_entries() {
        let t0 = Instant::now();
        let mut r = match run_kernel(&cfg, choice, degree, &train, &test, &data) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("{}: kernel {label} failed: {e}", cfg.experiment);
                failed(&train, &test, e.to_string())
            }
        };
        r.kernel = label;
        r.wall_clock_s = t0.elapsed().as_secs_f64();
        results.push(r);
    }
    let report = ExperimentReport {
        dataset: DatasetSummary {
            rows: data.len(),
            n_train: train.len(),
            n_test: test.len(),
            meta: data.meta.clone(),
        },
        config: cfg,
        results,
        versions: versions(),
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    Ok((report, data))
}

fn failed(train: &Dataset, test: &Dataset, error: String) -> KernelResult {
    KernelResult {
        kernel: String::new(),
        spec: None,
        c: None,
        epsilon: None,
        gamma: None,
        cv_mse: None,
        mse: None,
        r2: None,
        n_train: train.len(),
        n_test: test.len(),
        converged: false,
        iterations: 0,
        support_vectors: 0,
        dual_feasible: false,
        min_gram_eigenvalue: None,
        psd_report: None,
        error: Some(error),
        wall_clock_s: 0.0,
        curve: None,
    }
}

/// Base spec for a kernel choice; `γ` values are placeholders swept by the grid.
pub fn base_spec(
    cfg: &ExperimentConfig,
    choice: KernelChoice,
    degree: Option<u32>,
    train: &Dataset,
) -> Result<KernelSpec> {
    Ok(match choice {
        KernelChoice::Rbf => KernelSpec::Rbf { gamma: 1.0 },
        KernelChoice::Linear => KernelSpec::Linear,
        KernelChoice::Poly => KernelSpec::Poly {
            gamma: 1.0,
            r: 1.0,
            degree: degree.unwrap_or(3),
        },
        KernelChoice::Sigmoid => KernelSpec::Sigmoid { gamma: 1.0, r: 0.0 },
        KernelChoice::Custom => {
            if train.dims() != 1 {
                return Err(Error::VectorInputToSpectralKernel { dims: train.dims() });
            }
            let col = train.x().column(0);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut k =
                ChebyshevKernel::new(cfg.custom.degree, lo, hi).with_psd_mode(cfg.custom.psd_mode);
            k.edge_margin = cfg.custom.edge_margin;
            KernelSpec::JacksonChebyshev(k)
        }
    })
}

fn run_kernel(
    cfg: &ExperimentConfig,
    choice: KernelChoice,
    degree: Option<u32>,
    train: &Dataset,
    test: &Dataset,
    all: &Dataset,
) -> Result<KernelResult> {
    let spec = base_spec(cfg, choice, degree, train)?;
    spec.validate()?;
    let (scaler, xs_train) = scale_features(&spec, train.x())?;
    let ts = TargetScaler::fit(train.y())?;
    let yz = ts.apply(train.y());

    let gs = grid_search(&xs_train, &yz, &spec, &cfg.grid, cfg.seed)?;
    let gram = train_gram(
        &gs.kernel,
        &xs_train,
        &mut SeededRng::new(cfg.seed).fork(0xF17),
    )?;
    let mut model = svr_fit(&gram, &yz, &gs.config)?;
    model.target_scaler = ts;

    let cross = test_cross(&gs.kernel, &scaler.apply(test.x())?, &xs_train)?;
    let pred = svr_predict(&model, &cross)?;
    let m = metrics(test.y(), &pred)?;

    let curve = if cfg.experiment.is_spectrum() {
        let cross = test_cross(&gs.kernel, &scaler.apply(all.x())?, &xs_train)?;
        Some(svr_predict(&model, &cross)?)
    } else {
        None
    };
    let grid_feasible = gs.table.iter().all(|r| r.feasible);
    Ok(KernelResult {
        kernel: String::new(),
        gamma: gs.kernel.gamma(),
        spec: Some(gs.kernel.clone()),
        c: Some(gs.config.c),
        epsilon: Some(gs.config.epsilon),
        cv_mse: Some(gs.cv_mse),
        mse: Some(m.mse),
        r2: m.r2,
        n_train: train.len(),
        n_test: test.len(),
        converged: model.converged,
        iterations: model.iterations,
        support_vectors: model.support_vectors(),
        dual_feasible: grid_feasible && model.is_dual_feasible(),
        min_gram_eigenvalue: Some(gs.min_gram_eigenvalue.min(gram.min_eigenvalue())),
        psd_report: gram.psd_report().cloned(),
        error: None,
        wall_clock_s: 0.0,
        curve,
    })
}
