use super::matrix::SymMatrix;
use crate::error::{Error, Result};

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
///
/// Each eigenvector has its largest-magnitude component non-negative, which
/// makes decompositions reproducible.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    values: Vec<f64>,
    /// column-major, `dim` rows by `values.len()` columns
    vectors: Vec<f64>,
    dim: usize,
}

impl EigenDecomposition {
    pub(crate) fn new(values: Vec<f64>, vectors: Vec<f64>, dim: usize) -> Self {
        debug_assert_eq!(vectors.len(), dim * values.len());
        let mut out = Self {
            values,
            vectors,
            dim,
        };
        out.normalize_signs();
        out
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    /// Number of eigenpairs held.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Length of each eigenvector.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `V · diag(f(λ)) · Vᵀ` over the held pairs.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.dim;
        let weights: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut data = vec![0.0; n * n];
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let v = self.vector(k);
            for i in 0..n {
                let wi = w * v[i];
                if wi == 0.0 {
                    continue;
                }
                let row = &mut data[i * n..(i + 1) * n];
                for j in i..n {
                    row[j] += wi * v[j];
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                data[j * n + i] = data[i * n + j];
            }
        }
        SymMatrix::from_symmetric_unchecked(n, data)
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|l| l)
    }

    /// Keeps the `k` largest pairs (ascending order preserved).
    pub fn top(mut self, k: usize) -> Self {
        let k = k.min(self.values.len());
        let drop = self.values.len() - k;
        self.values.drain(..drop);
        self.vectors.drain(..drop * self.dim);
        self
    }

    fn normalize_signs(&mut self) {
        let n = self.dim;
        for k in 0..self.values.len() {
            let v = &mut self.vectors[k * n..(k + 1) * n];
            let mut best = 0;
            for i in 1..n {
                if v[i].abs() > v[best].abs() {
                    best = i;
                }
            }
            if n > 0 && v[best] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
}

/// Full symmetric eigendecomposition (Householder tridiagonalization
/// followed by implicit QL with Wilkinson shifts).
pub fn eig_sym(a: &SymMatrix) -> Result<EigenDecomposition> {
    check_finite(a)?;
    let n = a.n();
    if n == 0 {
        return Ok(EigenDecomposition::new(vec![], vec![], 0));
    }
    let mut v = a.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    // tred2 leaves the subdiagonal in e[1..]; tql2 wants it in e[..n-1]
    e.rotate_left(1);
    e[n - 1] = 0.0;
    tql2(n, &mut d, &mut e, Some(&mut v))?;
    Ok(from_row_major_columns(n, d, &v))
}

/// Eigenvalues only, ascending.
pub fn eigvals_sym(a: &SymMatrix) -> Result<Vec<f64>> {
    check_finite(a)?;
    let n = a.n();
    if n == 0 {
        return Ok(vec![]);
    }
    let (mut d, mut e) = tridiagonalize(a);
    tql2(n, &mut d, &mut e, None)?;
    Ok(d)
}

/// Householder reduction to tridiagonal form without accumulating the
/// transformations. Works on rows only, so it stays cache-friendly.
/// Returns the diagonal and the subdiagonal (padded with a trailing zero).
fn tridiagonalize(a: &SymMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.n();
    let mut m = a.as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n {
        d[k] = m[k * n + k];
        if k + 2 >= n {
            if k + 1 < n {
                e[k] = m[k * n + k + 1];
            }
            continue;
        }
        let lo = k + 1;
        let x = &m[k * n + lo..(k + 1) * n];
        let norm = x.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm == 0.0 {
            e[k] = 0.0;
            continue;
        }
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let v = &mut v[lo..];
        v.copy_from_slice(x);
        v[0] -= alpha;
        let vn = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        e[k] = alpha;
        if vn == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|t| *t /= vn);
        // w = 2Bv - 2(vᵀBv)v, then B -= v wᵀ + w vᵀ
        let w = &mut w[lo..];
        for (i, wi) in w.iter_mut().enumerate() {
            let row = &m[(lo + i) * n + lo..(lo + i + 1) * n];
            *wi = 2.0 * row.iter().zip(v.iter()).map(|(p, q)| p * q).sum::<f64>();
        }
        let c = v.iter().zip(w.iter()).map(|(p, q)| p * q).sum::<f64>();
        for (wi, vi) in w.iter_mut().zip(v.iter()) {
            *wi -= c * vi;
        }
        for i in 0..v.len() {
            let (vi, wi) = (v[i], w[i]);
            let row = &mut m[(lo + i) * n + lo..(lo + i + 1) * n];
            for ((b, vj), wj) in row.iter_mut().zip(v.iter()).zip(w.iter()) {
                *b -= vi * wj + wi * vj;
            }
        }
    }
    (d, e)
}

/// Full decomposition of the symmetric tridiagonal matrix with the given
/// diagonal and off-diagonal.
pub fn eig_tridiag(diag: &[f64], offdiag: &[f64]) -> Result<EigenDecomposition> {
    let n = diag.len();
    check_tridiag(diag, offdiag)?;
    if n == 0 {
        return Ok(EigenDecomposition::new(vec![], vec![], 0));
    }
    let mut d = diag.to_vec();
    let mut e = offdiag.to_vec();
    e.push(0.0);
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    tql2(n, &mut d, &mut e, Some(&mut v))?;
    Ok(from_row_major_columns(n, d, &v))
}

/// The `count` smallest eigenpairs of a symmetric tridiagonal matrix, by
/// Sturm-sequence bisection and inverse iteration. `O(count · n)` per sweep,
/// which keeps large finite-difference grids cheap.
pub fn tridiag_lowest(diag: &[f64], offdiag: &[f64], count: usize) -> Result<EigenDecomposition> {
    let n = diag.len();
    check_tridiag(diag, offdiag)?;
    if count > n {
        return Err(Error::InvalidParameter(format!(
            "requested {count} eigenvalues of a {n}x{n} matrix"
        )));
    }
    let (mut lo, mut hi) = gershgorin(diag, offdiag);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    lo -= 1e-3 * span;
    hi += 1e-3 * span;

    let mut values = Vec::with_capacity(count);
    for k in 0..count {
        // smallest x with sturm_count(x) > k
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if sturm_count(diag, offdiag, mid) > k {
                b = mid;
            } else {
                a = mid;
            }
        }
        values.push(0.5 * (a + b));
    }

    let mut vectors = Vec::with_capacity(count * n);
    for (k, &lambda) in values.iter().enumerate() {
        let mut x = inverse_iteration(diag, offdiag, lambda, span);
        // re-orthogonalize against earlier vectors in case of near-degeneracy
        for prev in 0..k {
            let p = &vectors[prev * n..(prev + 1) * n];
            let c: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum();
            x.iter_mut().zip(p).for_each(|(xi, pi)| *xi -= c * pi);
        }
        normalize(&mut x);
        vectors.extend_from_slice(&x);
    }
    Ok(EigenDecomposition::new(values, vectors, n))
}

fn check_finite(a: &SymMatrix) -> Result<()> {
    if let Some(pos) = a.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("matrix entry ({}, {})", pos / a.n(), pos % a.n()),
        });
    }
    Ok(())
}

fn check_tridiag(diag: &[f64], offdiag: &[f64]) -> Result<()> {
    let n = diag.len();
    if offdiag.len() + 1 != n.max(1) {
        return Err(Error::DimensionMismatch {
            expected: n.saturating_sub(1),
            got: offdiag.len(),
        });
    }
    if diag.iter().chain(offdiag).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "tridiagonal entries".into(),
        });
    }
    Ok(())
}

fn from_row_major_columns(n: usize, d: Vec<f64>, v: &[f64]) -> EigenDecomposition {
    // tql2 sorts ascending; v holds eigenvectors in its columns
    let mut cols = vec![0.0; n * n];
    for k in 0..n {
        for i in 0..n {
            cols[k * n + i] = v[i * n + k];
        }
    }
    EigenDecomposition::new(d, cols, n)
}

fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r =
            if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// Number of eigenvalues strictly below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let e2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
        q = diag[i] - x - if i > 0 { e2 / q } else { 0.0 };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs() + f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn inverse_iteration(diag: &[f64], off: &[f64], lambda: f64, span: f64) -> Vec<f64> {
    let n = diag.len();
    let shift = lambda + 1e-12 * span.max(1.0);
    // deterministic start vector with no special structure
    let mut x: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.37 * ((i as f64) * 0.618).sin())
        .collect();
    normalize(&mut x);
    for _ in 0..4 {
        x = solve_tridiag_shifted(diag, off, shift, &x);
        normalize(&mut x);
    }
    x
}

/// Solves `(T - s I) x = b` by Gaussian elimination with partial pivoting.
fn solve_tridiag_shifted(diag: &[f64], off: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    if n == 1 {
        let d = diag[0] - s;
        let d = if d == 0.0 { f64::EPSILON } else { d };
        return vec![b[0] / d];
    }
    // rows hold up to three upper-band entries after pivoting: (u0, u1, u2)
    let mut u0: Vec<f64> = (0..n).map(|i| diag[i] - s).collect();
    let mut u1: Vec<f64> = (0..n)
        .map(|i| if i + 1 < n { off[i] } else { 0.0 })
        .collect();
    let mut u2 = vec![0.0; n];
    let mut l: Vec<f64> = (0..n)
        .map(|i| if i > 0 { off[i - 1] } else { 0.0 })
        .collect();
    let mut rhs = b.to_vec();
    let tiny = f64::EPSILON * (u0.iter().map(|v| v.abs()).fold(0.0, f64::max) + 1.0);
    for i in 0..n - 1 {
        let sub = l[i + 1];
        if sub.abs() > u0[i].abs() {
            // swap rows i and i+1
            let (a0, a1, a2, r) = (u0[i], u1[i], u2[i], rhs[i]);
            u0[i] = sub;
            u1[i] = u0[i + 1];
            u2[i] = u1[i + 1];
            rhs[i] = rhs[i + 1];
            l[i + 1] = a0;
            u0[i + 1] = a1;
            u1[i + 1] = a2;
            rhs[i + 1] = r;
        }
        if u0[i].abs() < tiny {
            u0[i] = tiny;
        }
        let m = l[i + 1] / u0[i];
        u0[i + 1] -= m * u1[i];
        u1[i + 1] -= m * u2[i];
        rhs[i + 1] -= m * rhs[i];
    }
    if u0[n - 1].abs() < tiny {
        u0[n - 1] = tiny;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        if i + 1 < n {
            acc -= u1[i] * x[i + 1];
        }
        if i + 2 < n {
            acc -= u2[i] * x[i + 2];
        }
        x[i] = acc / u0[i];
    }
    x
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Householder reduction to tridiagonal form. `v` is row-major and on exit
/// holds the accumulated orthogonal transform; `d` the diagonal and
/// `e[1..]` the subdiagonal.
fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on a symmetric tridiagonal matrix (`d` diagonal, `e[..n-1]`
/// off-diagonal, `e[n-1] == 0`). Rotations are applied to the row-major
/// `v` when given. Eigenvalues come back ascending with `v` columns permuted
/// to match.
fn tql2(n: usize, d: &mut [f64], e: &mut [f64], mut v: Option<&mut [f64]>) -> Result<()> {
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::NoConvergence(format!(
                        "QL iteration stalled at index {l}"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(v) = v.as_deref_mut() {
                        for k in 0..n {
                            let row = k * n;
                            h = v[row + i + 1];
                            v[row + i + 1] = s * v[row + i] + c * h;
                            v[row + i] = c * v[row + i] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // selection sort keeps the column permutation in step
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d.swap(i, k);
            if let Some(v) = v.as_deref_mut() {
                for row in 0..n {
                    v.swap(row * n + i, row * n + k);
                }
            }
        }
    }
    Ok(())
}
