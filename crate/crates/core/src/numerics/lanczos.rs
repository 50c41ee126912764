use super::eigen::{eig_tridiag, EigenDecomposition};
use super::matrix::{dot, SymMatrix};
use super::rng::SeededRng;
use crate::error::{Error, Result};

/// Tuning knobs for [`lanczos_topk`].
#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// How many times a fresh start vector may fail to add a new direction
    /// before giving up.
    pub max_restarts: usize,
    /// Ritz residual at which the top-k pairs count as converged, relative
    /// to `‖A‖∞`.
    pub tol: f64,
    /// Steps between convergence checks once the basis holds `k` vectors.
    pub check_every: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_restarts: 5,
            tol: 1e-10,
            check_every: 4,
        }
    }
}

/// The `k` largest eigenpairs of `a`, returned in ascending order.
///
/// Lanczos with full reorthogonalization (two Gram-Schmidt passes per step).
/// A vanishing residual means the Krylov space is invariant; the iteration
/// then continues from a fresh seeded vector orthogonal to the basis.
pub fn lanczos_topk(a: &SymMatrix, k: usize, rng: &mut SeededRng) -> Result<EigenDecomposition> {
    lanczos_topk_with(a, k, rng, LanczosOptions::default())
}

pub fn lanczos_topk_with(
    a: &SymMatrix,
    k: usize,
    rng: &mut SeededRng,
    opts: LanczosOptions,
) -> Result<EigenDecomposition> {
    let n = a.n();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "lanczos rank k={k} must lie in 1..={n}"
        )));
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "lanczos input".into(),
        });
    }
    let anorm = a.norm_inf();
    let scale = if anorm > 0.0 { anorm } else { 1.0 };
    let breakdown = 1e-12 * scale;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n.min(4 * k + 16));
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut restarts = 0;

    let mut q = fresh_direction(&basis, n, rng, &mut restarts, opts.max_restarts)?;
    let mut w = vec![0.0; n];
    loop {
        a.matvec(&q, &mut w);
        let al = dot(&q, &w);
        basis.push(q);
        alpha.push(al);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
            }
        }
        let b_next = dot(&w, &w).sqrt();
        let m = basis.len();
        if m == n {
            break;
        }
        let broke = b_next <= breakdown;
        if m >= k && (broke || (m - k).is_multiple_of(opts.check_every.max(1))) {
            let res_beta = if broke { 0.0 } else { b_next };
            if ritz_converged(&alpha, &beta, k, res_beta, opts.tol * scale)? {
                break;
            }
        }
        if broke {
            beta.push(0.0);
            q = fresh_direction(&basis, n, rng, &mut restarts, opts.max_restarts)?;
        } else {
            beta.push(b_next);
            q = w.iter().map(|v| v / b_next).collect();
        }
    }

    let t = eig_tridiag(&alpha, &beta)?;
    let m = basis.len();
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k * n);
    for idx in (m - k)..m {
        values.push(t.values()[idx]);
        let s = t.vector(idx);
        let mut y = vec![0.0; n];
        for (coef, b) in s.iter().zip(&basis) {
            y.iter_mut().zip(b).for_each(|(yi, bi)| *yi += coef * bi);
        }
        vectors.extend(y);
    }
    let ed = EigenDecomposition::new(values, vectors, n);

    let mut av = vec![0.0; n];
    for i in 0..ed.len() {
        a.matvec(ed.vector(i), &mut av);
        let lam = ed.values()[i];
        let res = av
            .iter()
            .zip(ed.vector(i))
            .map(|(x, v)| (x - lam * v).abs())
            .fold(0.0, f64::max);
        if res > 1e-6 * scale {
            return Err(Error::NoConvergence(format!(
                "Ritz pair {i} residual {res:e} exceeds 1e-6·‖A‖"
            )));
        }
    }
    Ok(ed)
}

fn ritz_converged(alpha: &[f64], beta: &[f64], k: usize, res_beta: f64, tol: f64) -> Result<bool> {
    let t = eig_tridiag(alpha, beta)?;
    let m = alpha.len();
    Ok(((m - k)..m).all(|i| (res_beta * t.vector(i)[m - 1]).abs() <= tol))
}

fn fresh_direction(
    basis: &[Vec<f64>],
    n: usize,
    rng: &mut SeededRng,
    restarts: &mut usize,
    max_restarts: usize,
) -> Result<Vec<f64>> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.normal(0.0, 1.0)).collect();
        let start = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for b in basis {
                let c = dot(b, &v);
                v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= c * bi);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 * start {
            v.iter_mut().for_each(|x| *x /= norm);
            return Ok(v);
        }
        *restarts += 1;
        if *restarts > max_restarts {
            return Err(Error::NoConvergence(format!(
                "lanczos could not find a fresh direction after {max_restarts} restarts"
            )));
        }
    }
}
