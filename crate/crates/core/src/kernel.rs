//! Standard kernel functions, Gram assembly and the propagator mapping.
//!
//! The RBF kernel `exp(-γ‖x - x'‖²)` is the imaginary-time free-particle
//! propagator with `γ = m / (2ħτ)`; see [`gamma_from_propagator`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eigvals_sym, Matrix, SymMatrix};
use crate::spectral::{ChebyshevKernel, PsdReport};

/// One kernel family with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    Rbf { gamma: f64 },
    Linear,
    Poly { gamma: f64, r: f64, degree: u32 },
    Sigmoid { gamma: f64, r: f64 },
    JacksonChebyshev(ChebyshevKernel),
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            KernelSpec::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                bad(format!("rbf gamma must be > 0, got {gamma}"))
            }
            KernelSpec::Poly { degree: 0, .. } => bad("poly degree must be >= 1".into()),
            KernelSpec::Poly { gamma, r, .. } | KernelSpec::Sigmoid { gamma, r }
                if !(gamma.is_finite() && r.is_finite()) =>
            {
                bad("kernel parameters must be finite".into())
            }
            KernelSpec::JacksonChebyshev(ref k) => k.validate(),
            _ => Ok(()),
        }
    }

    /// Short family name used in reports (`rbf`, `linear`, `poly`, ...).
    pub fn family(&self) -> &'static str {
        match self {
            KernelSpec::Rbf { .. } => "rbf",
            KernelSpec::Linear => "linear",
            KernelSpec::Poly { .. } => "poly",
            KernelSpec::Sigmoid { .. } => "sigmoid",
            KernelSpec::JacksonChebyshev(_) => "custom",
        }
    }

    /// The kernel's `γ` if it has one.
    pub fn gamma(&self) -> Option<f64> {
        match *self {
            KernelSpec::Rbf { gamma }
            | KernelSpec::Poly { gamma, .. }
            | KernelSpec::Sigmoid { gamma, .. } => Some(gamma),
            _ => None,
        }
    }

    /// Same family with `γ` replaced (no-op for families without one).
    pub fn with_gamma(&self, g: f64) -> KernelSpec {
        let mut out = self.clone();
        match &mut out {
            KernelSpec::Rbf { gamma }
            | KernelSpec::Poly { gamma, .. }
            | KernelSpec::Sigmoid { gamma, .. } => *gamma = g,
            _ => {}
        }
        out
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self, KernelSpec::JacksonChebyshev(_))
    }
}

/// Kernel value between two feature vectors.
///
/// The Jackson-Chebyshev kernel is matrix-valued (its training Gram is
/// PSD-repaired), so it goes through
/// [`custom_kernel_matrices`](crate::spectral::custom_kernel_matrices)
/// instead and is rejected here.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<f64> {
    if x.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: x2.len(),
        });
    }
    Ok(match *spec {
        KernelSpec::Rbf { gamma } => {
            let d2: f64 = x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
            (-gamma * d2).exp()
        }
        KernelSpec::Linear => dot(x, x2),
        KernelSpec::Poly { gamma, r, degree } => (gamma * dot(x, x2) + r).powi(degree as i32),
        KernelSpec::Sigmoid { gamma, r } => (gamma * dot(x, x2) + r).tanh(),
        KernelSpec::JacksonChebyshev(_) => {
            return Err(Error::InvalidParameter(
                "the Jackson-Chebyshev kernel is built with spectral::custom_kernel_matrices"
                    .into(),
            ))
        }
    })
}

// Summation order is fixed (left to right) so that k(a, b) == k(b, a) bitwise.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Training Gram matrix `K_ij = k(x_i, x_j)`; upper triangle computed row by
/// row in parallel and mirrored.
pub fn gram(spec: &KernelSpec, x: &Matrix) -> Result<SymMatrix> {
    kernel_eval(spec, &[], &[])?;
    let n = x.rows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| kernel_eval(spec, x.row(i), x.row(j)).expect("shared dimension"))
                .collect()
        })
        .collect();
    let mut data = vec![0.0; n * n];
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    SymMatrix::from_row_major(n, data)
}

/// Test-versus-train kernel block, entry `(t, i) = k(x_test_t, x_train_i)`.
pub fn cross_gram(spec: &KernelSpec, x_test: &Matrix, x_train: &Matrix) -> Result<Matrix> {
    if x_test.cols() != x_train.cols() {
        return Err(Error::DimensionMismatch {
            expected: x_train.cols(),
            got: x_test.cols(),
        });
    }
    kernel_eval(spec, &[], &[])?;
    let cols = x_train.rows();
    let data: Vec<f64> = (0..x_test.rows())
        .into_par_iter()
        .flat_map_iter(|t| {
            (0..cols).map(move |i| {
                kernel_eval(spec, x_test.row(t), x_train.row(i)).expect("shared dimension")
            })
        })
        .collect();
    Matrix::from_row_major(x_test.rows(), cols, data)
}

/// RBF width implied by the imaginary-time free-particle propagator,
/// `γ = m / (2ħτ)`.
pub fn gamma_from_propagator(mass: f64, hbar: f64, tau: f64) -> Result<f64> {
    for (name, v) in [("mass", mass), ("hbar", hbar), ("tau", tau)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be a positive finite number, got {v}"
            )));
        }
    }
    Ok(mass / (2.0 * hbar * tau))
}

/// A training Gram matrix together with what is known about its spectrum.
///
/// The minimum eigenvalue is computed once at construction so that repeated
/// fits on the same matrix (grid search) do not pay for it again.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    matrix: SymMatrix,
    min_eigenvalue: f64,
    psd_report: Option<PsdReport>,
}

impl GramMatrix {
    pub fn new(matrix: SymMatrix) -> Result<Self> {
        let min_eigenvalue = min_eigenvalue(&matrix)?;
        Ok(Self {
            matrix,
            min_eigenvalue,
            psd_report: None,
        })
    }

    pub fn with_report(matrix: SymMatrix, report: PsdReport) -> Self {
        Self {
            matrix,
            min_eigenvalue: report.min_eigenvalue_after,
            psd_report: Some(report),
        }
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// PSD up to a roundoff allowance of `1e-8 · max(1, max_i K_ii)`.
    ///
    /// The scale matters for polynomial Grams, whose entries reach 1e12 and
    /// whose eigenvalue roundoff grows with them.
    pub fn is_psd(&self) -> bool {
        let scale = self.matrix.diag().into_iter().fold(1.0, f64::max);
        self.min_eigenvalue >= -1e-8 * scale
    }

    pub fn psd_report(&self) -> Option<&PsdReport> {
        self.psd_report.as_ref()
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }
}

pub fn min_eigenvalue(m: &SymMatrix) -> Result<f64> {
    Ok(eigvals_sym(m)?.first().copied().unwrap_or(0.0))
}
