//! The Jackson-Chebyshev kernel.
//!
//! Scalar inputs `x ∈ [x_min, x_max]` are mapped affinely into
//! `[-(1-ε), 1-ε]`, expanded in Chebyshev polynomials of the first kind and
//! weighted by the square roots of the Jackson damping coefficients:
//!
//! ```text
//! Φ(x) = [√g_0 T_0(x̃), √g_1 T_1(x̃), ..., √g_N T_N(x̃)]
//! K(x, x') = Σ_n g_n T_n(x̃) T_n(x̃')
//! ```
//!
//! The Gram matrix `ΦΦᵀ` is PSD in exact arithmetic; [`enforce_psd`] removes
//! the roundoff-level negative eigenvalues before the matrix is handed to the
//! SVR solver. Three repair backends exist: full spectral clipping, a
//! Lanczos top-k reconstruction and a Nyström landmark approximation.
//!
//! Test-time kernel rows use the raw series. Clipping repairs the training
//! matrix only; it does not define a different kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::GramMatrix;
use crate::numerics::{eig_sym, eigvals_sym, lanczos_topk, Matrix, SeededRng, SymMatrix};

/// Default edge margin ε.
pub const DEFAULT_EDGE_MARGIN: f64 = 0.01;
/// Default Tikhonov jitter added to the Nyström landmark block.
pub const DEFAULT_NYSTROM_JITTER: f64 = 1e-8;

/// How the training Gram matrix is made positive semi-definite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum PsdMode {
    /// Full eigendecomposition, negative eigenvalues set to zero.
    #[default]
    FullClip,
    /// Rank-k reconstruction from the k largest Ritz pairs. `None` picks
    /// `min(samples, 2·(N+1))`.
    Lanczos { k: Option<usize> },
    /// `C (W + jitter·I)⁺ Cᵀ` from `m` uniformly sampled landmarks.
    Nystrom {
        m: usize,
        #[serde(default = "default_jitter")]
        jitter: f64,
    },
}

fn default_jitter() -> f64 {
    DEFAULT_NYSTROM_JITTER
}

fn default_margin() -> f64 {
    DEFAULT_EDGE_MARGIN
}

/// Parameters of the Jackson-Chebyshev kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevKernel {
    /// Expansion degree N.
    pub degree: usize,
    pub x_min: f64,
    pub x_max: f64,
    #[serde(default = "default_margin")]
    pub edge_margin: f64,
    #[serde(default)]
    pub psd_mode: PsdMode,
}

impl ChebyshevKernel {
    pub fn new(degree: usize, x_min: f64, x_max: f64) -> Self {
        Self {
            degree,
            x_min,
            x_max,
            edge_margin: DEFAULT_EDGE_MARGIN,
            psd_mode: PsdMode::FullClip,
        }
    }

    pub fn with_psd_mode(mut self, mode: PsdMode) -> Self {
        self.psd_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree < 1 {
            return Err(Error::InvalidParameter(
                "Chebyshev degree N must be >= 1".into(),
            ));
        }
        SpectralMap::new(self.x_min, self.x_max, self.edge_margin)?;
        if let PsdMode::Nystrom { jitter, .. } = self.psd_mode {
            if !(jitter >= 0.0 && jitter.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "nystrom jitter must be >= 0, got {jitter}"
                )));
            }
        }
        Ok(())
    }

    pub fn map(&self) -> Result<SpectralMap> {
        SpectralMap::new(self.x_min, self.x_max, self.edge_margin)
    }
}

/// Affine map of `[x_min, x_max]` onto `[-(1-ε), 1-ε]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMap {
    x_min: f64,
    x_max: f64,
    edge_margin: f64,
}

impl SpectralMap {
    pub fn new(x_min: f64, x_max: f64, edge_margin: f64) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::InvalidParameter(format!(
                "spectral domain needs x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if !(edge_margin > 0.0 && edge_margin < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "edge margin must lie in (0, 1), got {edge_margin}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            edge_margin,
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// `(2x - (x_max + x_min)) / (x_max - x_min) · (1 - ε)`, with `x`
    /// clamped to the domain first.
    pub fn rescale(&self, x: f64) -> f64 {
        let x = x.clamp(self.x_min, self.x_max);
        let unit = (2.0 * x - (self.x_max + self.x_min)) / (self.x_max - self.x_min);
        unit.clamp(-1.0, 1.0) * (1.0 - self.edge_margin)
    }
}

/// Jackson damping coefficients `g_0..=g_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacksonWeights {
    g: Vec<f64>,
}

impl JacksonWeights {
    pub fn degree(&self) -> usize {
        self.g.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.g
    }

    /// `√g_n`, with roundoff-negative tail values treated as zero.
    pub fn sqrt_weights(&self) -> Vec<f64> {
        self.g.iter().map(|&g| g.max(0.0).sqrt()).collect()
    }
}

/// ```text
/// g_n = ((N - n + 1) cos(nπ/(N+1)) + sin(nπ/(N+1)) cot(π/(N+1))) / (N + 1)
/// ```
pub fn jackson_coefficients(degree: usize) -> Result<JacksonWeights> {
    if degree < 1 {
        return Err(Error::InvalidParameter(
            "Jackson degree N must be >= 1".into(),
        ));
    }
    let np1 = (degree + 1) as f64;
    let q = std::f64::consts::PI / np1;
    let cot = q.cos() / q.sin();
    let g = (0..=degree)
        .map(|n| {
            let nf = n as f64;
            ((np1 - nf) * (nf * q).cos() + (nf * q).sin() * cot) / np1
        })
        .collect();
    Ok(JacksonWeights { g })
}

/// `T_n(x) = cos(n arccos x)`, evaluated by the three-term recurrence.
pub fn chebyshev_t(n: usize, x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Chebyshev argument must lie in [-1, 1], got {x}"
        )));
    }
    let mut out = vec![0.0; n + 1];
    chebyshev_all(x, &mut out);
    Ok(out[n])
}

/// Fills `out[k] = T_k(x)` for `k < out.len()`.
pub fn chebyshev_all(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 2..out.len() {
        out[k] = 2.0 * x * out[k - 1] - out[k - 2];
    }
}

/// Weighted Chebyshev features, one row per input point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebFeatures {
    phi: Matrix,
    /// Inputs that fell outside the domain and were clamped.
    pub clamped: usize,
}

impl ChebFeatures {
    pub fn matrix(&self) -> &Matrix {
        &self.phi
    }

    pub fn rows(&self) -> usize {
        self.phi.rows()
    }
}

/// Builds `Φ` for a single column of scalar inputs.
pub fn feature_map(
    map: &SpectralMap,
    weights: &JacksonWeights,
    x: &Matrix,
) -> Result<ChebFeatures> {
    if x.cols() != 1 {
        return Err(Error::VectorInputToSpectralKernel { dims: x.cols() });
    }
    let sw = weights.sqrt_weights();
    let width = sw.len();
    let mut clamped = 0;
    let mut data = Vec::with_capacity(x.rows() * width);
    let mut t = vec![0.0; width];
    for i in 0..x.rows() {
        let v = x.get(i, 0);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: format!("spectral input row {i}"),
            });
        }
        if !map.contains(v) {
            clamped += 1;
        }
        chebyshev_all(map.rescale(v), &mut t);
        data.extend(t.iter().zip(&sw).map(|(tn, s)| s * tn));
    }
    if clamped > 0 {
        log::warn!(
            "{clamped} spectral input(s) outside the kernel domain were clamped to its boundary"
        );
    }
    Ok(ChebFeatures {
        phi: Matrix::from_row_major(x.rows(), width, data)?,
        clamped,
    })
}

/// `K = ΦΦᵀ`.
pub fn raw_gram(features: &ChebFeatures) -> SymMatrix {
    features.phi.gram()
}

/// `Φ_a Φ_bᵀ`, the unclipped series between two point sets.
pub fn raw_cross(a: &ChebFeatures, b: &ChebFeatures) -> Matrix {
    let (pa, pb) = (&a.phi, &b.phi);
    Matrix::from_fn(pa.rows(), pb.rows(), |i, j| {
        pa.row(i).iter().zip(pb.row(j)).map(|(x, y)| x * y).sum()
    })
}

/// What the PSD repair did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    /// `full_clip`, `lanczos` or `nystrom`.
    pub backend: String,
    /// Eigen-directions dropped (negative, or outside the retained rank).
    pub removed_count: usize,
    /// Total magnitude of what was dropped: `Σ|λ|` over clipped eigenvalues
    /// for `full_clip`, `|tr K - tr K̃|` for the low-rank backends.
    pub removed_magnitude: f64,
    /// Largest magnitude among clipped negative eigenvalues, when known.
    pub largest_removed: Option<f64>,
    /// Smallest eigenvalue of the input, when the backend computes it.
    pub min_eigenvalue_before: Option<f64>,
    pub min_eigenvalue_after: f64,
    /// Rank of the returned matrix representation.
    pub rank: usize,
}

/// Projects `k` onto (an approximation of) the PSD cone.
///
/// The seeded stream is consumed by the Lanczos start vectors and the
/// Nyström landmark draw only.
pub fn enforce_psd(
    k: &SymMatrix,
    mode: PsdMode,
    rng: &mut SeededRng,
) -> Result<(SymMatrix, PsdReport)> {
    let n = k.n();
    let (out, mut report) = match mode {
        PsdMode::FullClip => {
            let ed = eig_sym(k)?;
            let negatives: Vec<f64> = ed.values().iter().copied().filter(|&l| l < 0.0).collect();
            let out = ed.reconstruct_with(|l| l.max(0.0));
            let report = PsdReport {
                backend: "full_clip".into(),
                removed_count: negatives.len(),
                removed_magnitude: negatives.iter().map(|l| l.abs()).sum(),
                largest_removed: negatives.iter().map(|l| l.abs()).reduce(f64::max),
                min_eigenvalue_before: ed.values().first().copied(),
                min_eigenvalue_after: 0.0,
                rank: n - negatives.len(),
            };
            (out, report)
        }
        PsdMode::Lanczos { k: rank } => {
            let rank = rank.unwrap_or(n);
            if rank == 0 || rank > n {
                return Err(Error::InvalidParameter(format!(
                    "lanczos rank k={rank} must lie in 1..={n}"
                )));
            }
            let ed = lanczos_topk(k, rank, rng)?;
            let kept: Vec<f64> = ed.values().iter().copied().filter(|&l| l > 0.0).collect();
            let dropped_neg: Vec<f64> = ed.values().iter().copied().filter(|&l| l <= 0.0).collect();
            let out = ed.reconstruct_with(|l| l.max(0.0));
            let report = PsdReport {
                backend: "lanczos".into(),
                removed_count: n - kept.len(),
                removed_magnitude: (k.trace() - kept.iter().sum::<f64>()).abs(),
                largest_removed: dropped_neg.iter().map(|l| l.abs()).reduce(f64::max),
                min_eigenvalue_before: None,
                min_eigenvalue_after: 0.0,
                rank: kept.len(),
            };
            (out, report)
        }
        PsdMode::Nystrom { m, jitter } => {
            if m == 0 || m > n {
                return Err(Error::InvalidParameter(format!(
                    "nystrom landmark count m={m} must lie in 1..={n}"
                )));
            }
            let landmarks = rng.sample_indices(n, m);
            let w = k.submatrix(&landmarks).shifted(jitter);
            let ed = eig_sym(&w)?;
            let positive: Vec<usize> = (0..ed.len()).filter(|&i| ed.values()[i] > 0.0).collect();
            let negatives = ed.len() - positive.len();
            // F = C U Σ^{-1/2}, so that C W⁺ Cᵀ = F Fᵀ is PSD by construction
            let f = Matrix::from_fn(n, positive.len(), |i, c| {
                let p = positive[c];
                let u = ed.vector(p);
                let s: f64 = landmarks
                    .iter()
                    .zip(u)
                    .map(|(&l, uj)| k.get(i, l) * uj)
                    .sum();
                s / ed.values()[p].sqrt()
            });
            let out = f.gram();
            let report = PsdReport {
                backend: "nystrom".into(),
                removed_count: n - positive.len(),
                removed_magnitude: (k.trace() - out.trace()).abs(),
                largest_removed: (negatives > 0).then(|| {
                    ed.values()
                        .iter()
                        .filter(|&&l| l <= 0.0)
                        .map(|l| l.abs())
                        .fold(0.0, f64::max)
                }),
                min_eigenvalue_before: None,
                min_eigenvalue_after: 0.0,
                rank: positive.len(),
            };
            (out, report)
        }
    };
    report.min_eigenvalue_after = eigvals_sym(&out)?.first().copied().unwrap_or(0.0);
    Ok((out, report))
}

/// Training Gram (PSD-repaired) and test-versus-train block (raw series) for
/// the Jackson-Chebyshev kernel.
pub fn custom_kernel_matrices(
    spec: &ChebyshevKernel,
    x_train: &Matrix,
    x_test: &Matrix,
    rng: &mut SeededRng,
) -> Result<(GramMatrix, Matrix)> {
    spec.validate()?;
    let map = spec.map()?;
    let weights = jackson_coefficients(spec.degree)?;
    let phi_train = feature_map(&map, &weights, x_train)?;
    let phi_test = feature_map(&map, &weights, x_test)?;
    let raw = raw_gram(&phi_train);
    let mode = resolve_mode(spec, x_train.rows());
    let (k_train, report) = enforce_psd(&raw, mode, rng)?;
    let cross = raw_cross(&phi_test, &phi_train);
    Ok((GramMatrix::with_report(k_train, report), cross))
}

/// Fills in the default Lanczos rank `min(samples, 2·(N+1))`.
pub fn resolve_mode(spec: &ChebyshevKernel, samples: usize) -> PsdMode {
    match spec.psd_mode {
        PsdMode::Lanczos { k: None } => PsdMode::Lanczos {
            k: Some(samples.min(2 * (spec.degree + 1)).max(1)),
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(values: &[f64]) -> Matrix {
        Matrix::from_fn(values.len(), 1, |i, _| values[i])
    }

    #[test]
    fn rescale_examples() {
        let m = SpectralMap::new(0.0, 2.0, 0.01).unwrap();
        assert_eq!(m.rescale(1.0), 0.0);
        assert!((m.rescale(2.0) - 0.99).abs() < 1e-15);
        let p = SpectralMap::new(0.5, 3.0, 0.01).unwrap();
        assert!((p.rescale(0.5) + 0.99).abs() < 1e-15);
        // clamped outside the domain
        assert_eq!(p.rescale(100.0), p.rescale(3.0));
        assert!(SpectralMap::new(1.0, 1.0, 0.01).is_err());
        assert!(SpectralMap::new(0.0, 1.0, 0.0).is_err());
        assert!(SpectralMap::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn jackson_small_degrees_by_hand() {
        let g = jackson_coefficients(1).unwrap();
        assert!((g.as_slice()[0] - 1.0).abs() < 1e-15);
        assert!(g.as_slice()[1].abs() < 1e-15);
        let g = jackson_coefficients(2).unwrap();
        let want = [1.0, 0.5, 0.0];
        for (a, b) in g.as_slice().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(jackson_coefficients(0).is_err());
    }

    #[test]
    fn jackson_head_and_tail() {
        for n in 1..=512 {
            let g = jackson_coefficients(n).unwrap();
            assert!((g.as_slice()[0] - 1.0).abs() <= 1e-12, "N={n}");
            assert!(g.as_slice().iter().all(|&v| v.is_finite() && v >= -1e-12));
            if n >= 8 {
                let tail = g.as_slice()[n];
                assert!((-1e-12..=1e-3).contains(&tail), "N={n} tail {tail}");
            }
        }
    }

    #[test]
    fn chebyshev_examples() {
        assert_eq!(chebyshev_t(0, 0.3).unwrap(), 1.0);
        assert_eq!(chebyshev_t(1, 0.3).unwrap(), 0.3);
        assert!((chebyshev_t(2, 0.5).unwrap() + 0.5).abs() < 1e-15);
        for i in 0..50 {
            let theta = i as f64 * 0.0641;
            let v = chebyshev_t(5, theta.cos()).unwrap();
            assert!((v - (5.0 * theta).cos()).abs() < 1e-12);
        }
        assert!(chebyshev_t(3, 1.0000001).is_err());
    }

    #[test]
    fn feature_map_examples() {
        let map = SpectralMap::new(0.0, 2.0, 0.01).unwrap();
        let w1 = jackson_coefficients(1).unwrap();
        let f = feature_map(&map, &w1, &col(&[1.0])).unwrap();
        assert_eq!(f.matrix().row(0), &[1.0, 0.0]);

        // x̃ = 0.5 exactly: pick x with (x - 1)·0.99 = 0.5
        let x = 1.0 + 0.5 / 0.99;
        let w2 = jackson_coefficients(2).unwrap();
        let f = feature_map(&map, &w2, &col(&[x])).unwrap();
        let row = f.matrix().row(0);
        assert!((row[0] - 1.0).abs() < 1e-15);
        assert!((row[1] - 0.5f64.sqrt() * 0.5).abs() < 1e-12);
        assert!(row[2].abs() < 1e-7); // √g_2 with g_2 ≈ 0 up to roundoff

        let err = feature_map(&map, &w2, &Matrix::zeros(3, 2)).unwrap_err();
        assert!(matches!(
            err,
            Error::VectorInputToSpectralKernel { dims: 2 }
        ));
    }

    #[test]
    fn first_feature_is_one_and_bounded() {
        let map = SpectralMap::new(-3.0, 5.0, 0.01).unwrap();
        let w = jackson_coefficients(40).unwrap();
        let xs: Vec<f64> = (0..37).map(|i| -3.0 + 8.0 * i as f64 / 36.0).collect();
        let f = feature_map(&map, &w, &col(&xs)).unwrap();
        let sw = w.sqrt_weights();
        for i in 0..f.rows() {
            assert_eq!(f.matrix().get(i, 0), 1.0);
            for (n, s) in sw.iter().enumerate() {
                assert!(f.matrix().get(i, n).abs() <= s + 1e-15);
            }
        }
    }

    #[test]
    fn raw_gram_examples() {
        let map = SpectralMap::new(0.0, 2.0, 0.01).unwrap();
        let w = jackson_coefficients(1).unwrap();
        let k = raw_gram(&feature_map(&map, &w, &col(&[1.0, 1.0])).unwrap());
        assert_eq!(k.to_rows(), vec![vec![1.0, 1.0], vec![1.0, 1.0]]);

        // 2-point toy case against the hand-summed series with N = 2
        let x = [0.3, 1.7];
        let w2 = jackson_coefficients(2).unwrap();
        let k = raw_gram(&feature_map(&map, &w2, &col(&x)).unwrap());
        let t = |n: i32, v: f64| -> f64 {
            let xt = (2.0 * v - 2.0) / 2.0 * 0.99;
            match n {
                0 => 1.0,
                1 => xt,
                _ => 2.0 * xt * xt - 1.0,
            }
        };
        let g = [1.0, 0.5, 0.0];
        for i in 0..2 {
            for j in 0..2 {
                let want: f64 = (0..3)
                    .map(|n| g[n] * t(n as i32, x[i]) * t(n as i32, x[j]))
                    .sum();
                assert!((k.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn raw_gram_is_psd_to_roundoff() {
        let mut rng = SeededRng::new(8);
        let xs: Vec<f64> = (0..200).map(|_| rng.uniform(0.0, 1.0)).collect();
        let map = SpectralMap::new(0.0, 1.0, 0.01).unwrap();
        let w = jackson_coefficients(60).unwrap();
        let k = raw_gram(&feature_map(&map, &w, &col(&xs)).unwrap());
        let min = eigvals_sym(&k).unwrap()[0];
        assert!(min >= -1e-10, "min eigenvalue {min}");
    }

    #[test]
    fn brute_force_series_matches_inner_product() {
        let mut rng = SeededRng::new(21);
        let map = SpectralMap::new(-1.0, 4.0, 0.01).unwrap();
        for deg in [3, 17, 60] {
            let w = jackson_coefficients(deg).unwrap();
            let xs: Vec<f64> = (0..10).map(|_| rng.uniform(-1.0, 4.0)).collect();
            let k = raw_gram(&feature_map(&map, &w, &col(&xs)).unwrap());
            for i in 0..10 {
                for j in 0..10 {
                    let (a, b) = (map.rescale(xs[i]).acos(), map.rescale(xs[j]).acos());
                    let want: f64 = (0..=deg)
                        .map(|n| {
                            w.as_slice()[n].max(0.0) * (n as f64 * a).cos() * (n as f64 * b).cos()
                        })
                        .sum();
                    assert!((k.get(i, j) - want).abs() < 1e-12, "N={deg}");
                }
            }
        }
    }

    /// Chebyshev series of sign(x): c_n = 4 sin(nπ/2) / (nπ). The damped
    /// partial sum must overshoot less than the plain truncation.
    #[test]
    fn jackson_damping_suppresses_gibbs() {
        for deg in [16usize, 32, 64] {
            let g = jackson_coefficients(deg).unwrap();
            let overshoot = |weights: &dyn Fn(usize) -> f64| -> f64 {
                let mut worst = f64::NEG_INFINITY;
                let mut t = vec![0.0; deg + 1];
                for i in 0..=4000 {
                    let x = -1.0 + 2.0 * i as f64 / 4000.0;
                    chebyshev_all(x, &mut t);
                    let s: f64 = (1..=deg)
                        .map(|n| {
                            let c = 4.0 * (n as f64 * std::f64::consts::FRAC_PI_2).sin()
                                / (n as f64 * std::f64::consts::PI);
                            weights(n) * c * t[n]
                        })
                        .sum();
                    worst = worst.max(s - 1.0);
                }
                worst
            };
            let damped = overshoot(&|n| g.as_slice()[n]);
            let plain = overshoot(&|_| 1.0);
            assert!(damped < plain, "N={deg}: damped {damped} vs plain {plain}");
            assert!(plain > 0.1);
        }
    }

    fn random_psd(n: usize, rank: usize, seed: u64) -> SymMatrix {
        let mut rng = SeededRng::new(seed);
        let f = Matrix::from_fn(n, rank, |_, _| rng.normal(0.0, 1.0));
        f.gram()
    }

    #[test]
    fn full_clip_examples() {
        let d = SymMatrix::diagonal(&[1.0, -0.5]);
        let (out, rep) = enforce_psd(&d, PsdMode::FullClip, &mut SeededRng::new(0)).unwrap();
        assert!(out.max_abs_diff(&SymMatrix::diagonal(&[1.0, 0.0])) < 1e-15);
        assert_eq!(rep.removed_count, 1);
        assert_eq!(rep.removed_magnitude, 0.5);

        let k = random_psd(30, 30, 2);
        let (out, _) = enforce_psd(&k, PsdMode::FullClip, &mut SeededRng::new(0)).unwrap();
        assert!(out.max_abs_diff(&k) < 1e-10);
    }

    #[test]
    fn full_clip_idempotent_and_optimal() {
        let mut rng = SeededRng::new(6);
        let n = 25;
        let data: Vec<f64> = (0..n * n).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let k = SymMatrix::from_row_major(n, data).unwrap();
        let (once, rep) = enforce_psd(&k, PsdMode::FullClip, &mut SeededRng::new(0)).unwrap();
        let (twice, _) = enforce_psd(&once, PsdMode::FullClip, &mut SeededRng::new(0)).unwrap();
        assert!(once.max_abs_diff(&twice) < 1e-10);
        assert!(rep.min_eigenvalue_after >= -1e-8);
        let removed_sq: f64 = eigvals_sym(&k)
            .unwrap()
            .iter()
            .filter(|&&l| l < 0.0)
            .map(|l| l * l)
            .sum();
        assert!((once.frobenius_diff_sq(&k) - removed_sq).abs() < 1e-10);
    }

    #[test]
    fn low_rank_backends_agree_on_psd_input() {
        let n = 40;
        let k = random_psd(n, 6, 4);
        let (full, _) = enforce_psd(&k, PsdMode::FullClip, &mut SeededRng::new(0)).unwrap();
        let (lz, rep) =
            enforce_psd(&k, PsdMode::Lanczos { k: Some(n) }, &mut SeededRng::new(1)).unwrap();
        assert!(lz.max_abs_diff(&full) < 1e-6);
        assert!(rep.min_eigenvalue_after >= -1e-8);
        let (lz6, _) =
            enforce_psd(&k, PsdMode::Lanczos { k: Some(6) }, &mut SeededRng::new(1)).unwrap();
        assert!(lz6.max_abs_diff(&full) < 1e-6);
        let (ny, rep) = enforce_psd(
            &k,
            PsdMode::Nystrom { m: n, jitter: 1e-8 },
            &mut SeededRng::new(2),
        )
        .unwrap();
        assert!(ny.max_abs_diff(&k) < 1e-6);
        assert!(rep.min_eigenvalue_after >= -1e-8);
    }

    #[test]
    fn backend_size_limits() {
        let k = SymMatrix::identity(4);
        let mut r = SeededRng::new(0);
        assert!(enforce_psd(&k, PsdMode::Lanczos { k: Some(5) }, &mut r).is_err());
        assert!(enforce_psd(&k, PsdMode::Nystrom { m: 5, jitter: 0.0 }, &mut r).is_err());
    }

    #[test]
    fn custom_matrices_consistency() {
        let xs: Vec<f64> = (0..30).map(|i| 0.1 + 3.9 * i as f64 / 29.0).collect();
        let spec = ChebyshevKernel::new(20, 0.1, 4.0);
        let x = col(&xs);
        let (k, cross) = custom_kernel_matrices(&spec, &x, &x, &mut SeededRng::new(0)).unwrap();
        assert!(k.psd_report().is_some());
        assert!(Matrix::from(k.matrix().clone()).max_abs_diff(&cross) < 1e-8);
    }

    #[test]
    fn default_lanczos_rank() {
        let spec = ChebyshevKernel::new(60, 0.0, 1.0).with_psd_mode(PsdMode::Lanczos { k: None });
        assert_eq!(resolve_mode(&spec, 240), PsdMode::Lanczos { k: Some(122) });
        assert_eq!(resolve_mode(&spec, 50), PsdMode::Lanczos { k: Some(50) });
    }

    proptest! {
        #[test]
        fn mapped_values_stay_inside_margin(x in -100.0f64..100.0, lo in -5.0f64..0.0, w in 0.1f64..10.0, eps in 0.001f64..0.5) {
            let m = SpectralMap::new(lo, lo + w, eps).unwrap();
            let v = m.rescale(x);
            prop_assert!(v.abs() <= 1.0 - eps + 1e-15);
        }
    }
}
