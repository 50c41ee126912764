//! ε-insensitive support vector regression on precomputed Gram matrices.
//!
//! The dual
//!
//! ```text
//! max  -½ βᵀKβ - ε Σ|β_i| + Σ y_i β_i     s.t.  Σ β_i = 0,  |β_i| ≤ C
//! ```
//!
//! is solved by SMO over the split variables `β = α - α*`, `0 ≤ α, α* ≤ C`.
//! The prediction is `f(x) = Σ β_i K(x_i, x) + b`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Scaler, TargetScaler};
use crate::error::{Error, Result};
use crate::kernel::{cross_gram, gram, GramMatrix, KernelSpec};
use crate::numerics::{Matrix, SeededRng};
use crate::spectral::{custom_kernel_matrices, feature_map, jackson_coefficients, raw_cross};

mod smo;

/// Working-set selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WorkingSet {
    /// The pair with the largest KKT violation gap.
    #[default]
    MaxViolatingPair,
    /// First index by maximal violation, second by largest guaranteed
    /// decrease of the objective.
    SecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrConfig {
    /// Box constraint C.
    pub c: f64,
    /// Width of the insensitive tube, in standardized target units.
    pub epsilon: f64,
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub working_set: WorkingSet,
    /// Temporarily drop variables that are stuck at a bound.
    #[serde(default = "default_true")]
    pub shrinking: bool,
    /// Fit indefinite Grams anyway (sigmoid); the model then typically
    /// carries the non-convergence flag instead of an error.
    #[serde(default)]
    pub allow_indefinite: bool,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            tol: 1e-3,
            max_iter: 200_000,
            working_set: WorkingSet::MaxViolatingPair,
            shrinking: true,
            allow_indefinite: false,
        }
    }
}

impl SvrConfig {
    pub fn new(c: f64, epsilon: f64) -> Self {
        Self {
            c,
            epsilon,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "C must be > 0, got {}",
                self.c
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// A trained regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    /// `α_i - α_i*` per training point.
    pub beta: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Final maximal KKT violation.
    pub kkt_gap: f64,
    pub config: SvrConfig,
    /// Kernel and training inputs, present when built through
    /// [`SvrModel::train`].
    pub kernel: Option<KernelSpec>,
    /// Training inputs after feature scaling.
    pub train_x: Vec<Vec<f64>>,
    pub feature_scaler: Option<Scaler>,
    pub target_scaler: TargetScaler,
}

impl SvrModel {
    /// Dual objective `-½βᵀKβ - εΣ|β| + yᵀβ` on the (standardized) targets.
    pub fn dual_objective(&self, k: &GramMatrix, y: &[f64]) -> f64 {
        dual_objective(&self.beta, k, y, self.config.epsilon)
    }

    /// Largest violation of `Σβ = 0` and `|β_i| ≤ C`; zero when feasible.
    pub fn feasibility_violation(&self) -> f64 {
        let sum: f64 = self.beta.iter().sum();
        let over = self
            .beta
            .iter()
            .map(|b| (b.abs() - self.config.c).max(0.0))
            .fold(0.0, f64::max);
        sum.abs().max(over)
    }

    /// Dual feasibility to within `1e-9 · max(1, C)`.
    pub fn is_dual_feasible(&self) -> bool {
        self.feasibility_violation() <= 1e-9 * self.config.c.max(1.0)
    }

    pub fn support_vectors(&self) -> usize {
        self.beta.iter().filter(|b| b.abs() > 0.0).count()
    }

    /// Standardizes, builds the training Gram for `kernel` and fits.
    ///
    /// Spectral kernels see raw inputs (their domain map is the scaling);
    /// every other kernel sees standardized features. Targets are always
    /// standardized.
    pub fn train(
        data: &Dataset,
        kernel: &KernelSpec,
        cfg: &SvrConfig,
        seed: u64,
    ) -> Result<SvrModel> {
        kernel.validate()?;
        let (scaler, xs) = scale_features(kernel, data.x())?;
        let ts = TargetScaler::fit(data.y())?;
        let yz = ts.apply(data.y());
        let k = train_gram(kernel, &xs, &mut SeededRng::new(seed))?;
        let mut model = svr_fit(&k, &yz, cfg)?;
        model.kernel = Some(kernel.clone());
        model.train_x = xs.to_rows();
        model.feature_scaler = Some(scaler);
        model.target_scaler = ts;
        Ok(model)
    }

    /// Predictions in target units for raw (unscaled) inputs.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        let kernel = self.kernel.as_ref().ok_or_else(|| {
            Error::InvalidParameter(
                "model has no kernel attached; use svr_predict with a kernel block".into(),
            )
        })?;
        let scaler = self
            .feature_scaler
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("model has no feature scaler".into()))?;
        let xs = scaler.apply(x)?;
        let train = Matrix::from_rows(&self.train_x)?;
        let cross = test_cross(kernel, &xs, &train)?;
        svr_predict(self, &cross)
    }
}

/// Feature scaling used by [`SvrModel::train`] and the experiment harness.
pub fn scale_features(kernel: &KernelSpec, x: &Matrix) -> Result<(Scaler, Matrix)> {
    if kernel.is_spectral() {
        Ok((Scaler::identity(x.cols()), x.clone()))
    } else {
        let s = Scaler::fit(x)?;
        let xs = s.apply(x)?;
        Ok((s, xs))
    }
}

/// Training Gram for any kernel (PSD-repaired for the spectral kernel).
pub fn train_gram(kernel: &KernelSpec, x: &Matrix, rng: &mut SeededRng) -> Result<GramMatrix> {
    match kernel {
        KernelSpec::JacksonChebyshev(spec) => {
            let (k, _) = custom_kernel_matrices(spec, x, &Matrix::zeros(0, x.cols()), rng)?;
            Ok(k)
        }
        _ => GramMatrix::new(gram(kernel, x)?),
    }
}

/// Test-versus-train block for any kernel (raw series for the spectral
/// kernel).
pub fn test_cross(kernel: &KernelSpec, x_test: &Matrix, x_train: &Matrix) -> Result<Matrix> {
    match kernel {
        KernelSpec::JacksonChebyshev(spec) => {
            let map = spec.map()?;
            let w = jackson_coefficients(spec.degree)?;
            let a = feature_map(&map, &w, x_test)?;
            let b = feature_map(&map, &w, x_train)?;
            Ok(raw_cross(&a, &b))
        }
        _ => cross_gram(kernel, x_test, x_train),
    }
}

pub fn dual_objective(beta: &[f64], k: &GramMatrix, y: &[f64], epsilon: f64) -> f64 {
    let km = k.matrix();
    let n = beta.len();
    let mut quad = 0.0;
    for i in 0..n {
        if beta[i] == 0.0 {
            continue;
        }
        let row = km.row(i);
        let s: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        quad += beta[i] * s;
    }
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let lin: f64 = beta.iter().zip(y).map(|(b, t)| b * t).sum();
    -0.5 * quad - epsilon * l1 + lin
}

/// Solves the ε-SVR dual on a precomputed Gram matrix.
///
/// `y` is used as given; callers standardize it first. A fit that hits
/// `max_iter` is returned with `converged == false`.
pub fn svr_fit(k: &GramMatrix, y: &[f64], cfg: &SvrConfig) -> Result<SvrModel> {
    cfg.validate()?;
    let l = k.n();
    if y.len() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            got: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "regression targets".into(),
        });
    }
    if !k.is_psd() && !cfg.allow_indefinite {
        return Err(Error::Indefinite {
            min_eigenvalue: k.min_eigenvalue(),
        });
    }
    let out = smo::solve(k.matrix(), y, cfg);
    if !out.converged {
        log::warn!(
            "SMO stopped at max_iter={} with KKT gap {:.3e} (tol {})",
            cfg.max_iter,
            out.gap,
            cfg.tol
        );
    }
    Ok(SvrModel {
        beta: out.beta,
        bias: -out.rho,
        converged: out.converged,
        iterations: out.iterations,
        kkt_gap: out.gap,
        config: *cfg,
        kernel: None,
        train_x: Vec::new(),
        feature_scaler: None,
        target_scaler: TargetScaler::identity(),
    })
}

/// `Σ_i β_i K_cross[t, i] + b`, mapped back through the target scaler.
pub fn svr_predict(model: &SvrModel, k_cross: &Matrix) -> Result<Vec<f64>> {
    if k_cross.cols() != model.beta.len() {
        return Err(Error::DimensionMismatch {
            expected: model.beta.len(),
            got: k_cross.cols(),
        });
    }
    Ok((0..k_cross.rows())
        .map(|t| {
            let s: f64 = k_cross
                .row(t)
                .iter()
                .zip(&model.beta)
                .map(|(k, b)| k * b)
                .sum();
            model.target_scaler.invert_one(s + model.bias)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    /// `None` when the true values are constant.
    pub r2: Option<f64>,
    pub n_test: usize,
}

pub fn metrics(y_true: &[f64], y_pred: &[f64]) -> Result<RegressionMetrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    let n = y_true.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "metrics need at least 2 points, got {n}"
        )));
    }
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let mean = y_true.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y_true.iter().map(|a| (a - mean) * (a - mean)).sum();
    let r2 = if ss_tot > 0.0 {
        Some(1.0 - ss_res / ss_tot)
    } else {
        log::warn!("R² undefined: true values are constant");
        None
    };
    Ok(RegressionMetrics {
        mse: ss_res / n as f64,
        r2,
        n_test: n,
    })
}

/// Hyperparameter grid for [`grid_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrGrid {
    pub c: Vec<f64>,
    /// Swept for kernels that have a `γ`; ignored otherwise.
    pub gamma: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub folds: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub working_set: WorkingSet,
    #[serde(default = "default_true")]
    pub shrinking: bool,
}

fn default_true() -> bool {
    true
}

fn default_tol() -> f64 {
    1e-3
}

fn default_max_iter() -> usize {
    200_000
}

impl Default for SvrGrid {
    fn default() -> Self {
        Self {
            c: vec![0.1, 1.0, 10.0, 100.0],
            gamma: vec![0.01, 0.1, 1.0, 10.0],
            epsilon: vec![0.01, 0.1],
            folds: 5,
            tol: default_tol(),
            max_iter: default_max_iter(),
            working_set: WorkingSet::default(),
            shrinking: true,
        }
    }
}

impl SvrGrid {
    pub fn single(c: f64, epsilon: f64) -> Self {
        Self {
            c: vec![c],
            gamma: vec![],
            epsilon: vec![epsilon],
            ..Default::default()
        }
    }
}

/// One cross-validated candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub kernel: KernelSpec,
    pub c: f64,
    pub gamma: Option<f64>,
    pub epsilon: f64,
    /// Mean validation MSE in standardized target units.
    pub mean_mse: f64,
    pub fold_mse: Vec<f64>,
    /// False if any fold hit `max_iter`.
    pub converged: bool,
    /// Every fold's dual solution satisfied `Σβ = 0`, `|β| ≤ C`.
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub kernel: KernelSpec,
    pub config: SvrConfig,
    pub cv_mse: f64,
    /// Smallest eigenvalue over all fold training Grams.
    pub min_gram_eigenvalue: f64,
    pub table: Vec<CvRow>,
}

/// k-fold cross-validated grid search over C, ε and (where present) γ.
///
/// `x` and `y` are the training split, already scaled as the kernel
/// expects. Fold membership is a seeded shuffle dealt round-robin. The
/// winner minimizes mean validation MSE; ties go to smaller C, then smaller
/// γ, then smaller ε.
pub fn grid_search(
    x: &Matrix,
    y: &[f64],
    kernel: &KernelSpec,
    grid: &SvrGrid,
    seed: u64,
) -> Result<GridSearchResult> {
    if grid.c.is_empty() || grid.epsilon.is_empty() {
        return Err(Error::InvalidParameter("grid must not be empty".into()));
    }
    if grid.folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 folds, got {}",
            grid.folds
        )));
    }
    let n = x.rows();
    if n < grid.folds {
        return Err(Error::InvalidParameter(format!(
            "{n} rows cannot be split into {} folds",
            grid.folds
        )));
    }
    let kernels: Vec<KernelSpec> = match kernel.gamma() {
        Some(_) if !grid.gamma.is_empty() => {
            grid.gamma.iter().map(|&g| kernel.with_gamma(g)).collect()
        }
        _ => vec![kernel.clone()],
    };
    for k in &kernels {
        k.validate()?;
    }

    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::new(seed).fork(0xF01D).shuffle(&mut order);
    let folds: Vec<(Vec<usize>, Vec<usize>)> = (0..grid.folds)
        .map(|f| {
            let mut train = Vec::new();
            let mut val = Vec::new();
            for (p, &i) in order.iter().enumerate() {
                if p % grid.folds == f {
                    val.push(i);
                } else {
                    train.push(i);
                }
            }
            (train, val)
        })
        .collect();

    // kernel blocks per (kernel, fold)
    let jobs: Vec<(usize, usize)> = (0..kernels.len())
        .flat_map(|k| (0..folds.len()).map(move |f| (k, f)))
        .collect();
    let blocks: Vec<Result<(GramMatrix, Matrix)>> = jobs
        .par_iter()
        .map(|&(ki, f)| {
            let (tr, va) = &folds[f];
            let xtr = x.select_rows(tr);
            let xva = x.select_rows(va);
            let mut rng = SeededRng::new(seed).fork(f as u64 + 1);
            let kt = train_gram(&kernels[ki], &xtr, &mut rng)?;
            let kv = test_cross(&kernels[ki], &xva, &xtr)?;
            Ok((kt, kv))
        })
        .collect();
    let blocks: Vec<(GramMatrix, Matrix)> = blocks.into_iter().collect::<Result<_>>()?;

    let allow_indefinite = matches!(kernel, KernelSpec::Sigmoid { .. });
    let mut candidates = Vec::new();
    for (ki, k) in kernels.iter().enumerate() {
        for &c in &grid.c {
            for &eps in &grid.epsilon {
                candidates.push((ki, k.gamma(), c, eps));
            }
        }
    }
    let rows: Vec<Result<CvRow>> = candidates
        .par_iter()
        .map(|&(ki, gamma, c, eps)| {
            let cfg = SvrConfig {
                c,
                epsilon: eps,
                tol: grid.tol,
                max_iter: grid.max_iter,
                working_set: grid.working_set,
                shrinking: grid.shrinking,
                allow_indefinite,
            };
            let mut fold_mse = Vec::with_capacity(folds.len());
            let mut converged = true;
            let mut feasible = true;
            for (f, (tr, va)) in folds.iter().enumerate() {
                let (kt, kv) = &blocks[ki * folds.len() + f];
                let ytr: Vec<f64> = tr.iter().map(|&i| y[i]).collect();
                let model = svr_fit(kt, &ytr, &cfg)?;
                converged &= model.converged;
                feasible &= model.is_dual_feasible();
                let pred = svr_predict(&model, kv)?;
                let mse = va
                    .iter()
                    .zip(&pred)
                    .map(|(&i, p)| (y[i] - p) * (y[i] - p))
                    .sum::<f64>()
                    / va.len() as f64;
                fold_mse.push(mse);
            }
            let mean_mse = fold_mse.iter().sum::<f64>() / fold_mse.len() as f64;
            Ok(CvRow {
                kernel: kernels[ki].clone(),
                c,
                gamma,
                epsilon: eps,
                mean_mse,
                fold_mse,
                converged,
                feasible,
            })
        })
        .collect();
    let table: Vec<CvRow> = rows.into_iter().collect::<Result<_>>()?;

    let key = |r: &CvRow| {
        let m = if r.mean_mse.is_nan() {
            f64::INFINITY
        } else {
            r.mean_mse
        };
        (m, r.c, r.gamma.unwrap_or(0.0), r.epsilon)
    };
    let best = table
        .iter()
        .min_by(|a, b| {
            key(a)
                .partial_cmp(&key(b))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("non-empty grid");
    Ok(GridSearchResult {
        kernel: best.kernel.clone(),
        config: SvrConfig {
            c: best.c,
            epsilon: best.epsilon,
            tol: grid.tol,
            max_iter: grid.max_iter,
            working_set: grid.working_set,
            shrinking: grid.shrinking,
            allow_indefinite,
        },
        cv_mse: best.mean_mse,
        min_gram_eigenvalue: blocks
            .iter()
            .map(|(k, _)| k.min_eigenvalue())
            .fold(f64::INFINITY, f64::min),
        table,
    })
}
