#![allow(dead_code)]

use propkern::kernel::GramMatrix;
use propkern::numerics::{SeededRng, SymMatrix};

/// Exhaustive active-set solve of the ε-SVR dual for tiny problems.
///
/// Each variable is assigned one of five states (at -C, free negative, zero,
/// free positive, at +C). For every assignment the free variables and the
/// bias solve the stationarity system plus `Σβ = 0`; the best feasible
/// candidate is the optimum when K is positive definite.
pub fn exhaustive_dual(k: &[Vec<f64>], y: &[f64], c: f64, eps: f64) -> (Vec<f64>, f64) {
    let m = y.len();
    assert!(m <= 8);
    let total = 5usize.pow(m as u32);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut states = vec![0u8; m];
    for code in 0..total {
        let mut r = code;
        for s in states.iter_mut() {
            *s = (r % 5) as u8;
            r /= 5;
        }
        let Some(beta) = solve_pattern(k, y, c, eps, &states) else {
            continue;
        };
        let obj = objective(k, y, eps, &beta);
        if best.as_ref().is_none_or(|(_, o)| obj > *o) {
            best = Some((beta, obj));
        }
    }
    best.expect("beta = 0 is always feasible")
}

pub fn objective(k: &[Vec<f64>], y: &[f64], eps: f64, beta: &[f64]) -> f64 {
    let m = y.len();
    let mut quad = 0.0;
    for i in 0..m {
        for j in 0..m {
            quad += beta[i] * k[i][j] * beta[j];
        }
    }
    -0.5 * quad - eps * beta.iter().map(|b| b.abs()).sum::<f64>()
        + y.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
}

fn solve_pattern(k: &[Vec<f64>], y: &[f64], c: f64, eps: f64, states: &[u8]) -> Option<Vec<f64>> {
    let m = y.len();
    let mut beta = vec![0.0; m];
    let mut free = Vec::new();
    let mut sign = vec![0.0; m];
    for i in 0..m {
        match states[i] {
            0 => beta[i] = -c,
            1 => {
                free.push(i);
                sign[i] = -1.0;
            }
            2 => {}
            3 => {
                free.push(i);
                sign[i] = 1.0;
            }
            _ => beta[i] = c,
        }
    }
    let fixed_sum: f64 = beta.iter().sum();
    if free.is_empty() {
        return (fixed_sum.abs() < 1e-12).then_some(beta);
    }
    // unknowns: β_F then b
    let nf = free.len();
    let n = nf + 1;
    let mut a = vec![vec![0.0; n + 1]; n];
    for (r, &i) in free.iter().enumerate() {
        for (s, &j) in free.iter().enumerate() {
            a[r][s] = k[i][j];
        }
        a[r][nf] = 1.0;
        let fixed: f64 = (0..m)
            .filter(|j| !free.contains(j))
            .map(|j| k[i][j] * beta[j])
            .sum();
        a[r][n] = y[i] - eps * sign[i] - fixed;
    }
    for s in 0..nf {
        a[nf][s] = 1.0;
    }
    a[nf][n] = -fixed_sum;
    let sol = gauss(a)?;
    for (r, &i) in free.iter().enumerate() {
        let v = sol[r];
        let ok = if sign[i] > 0.0 {
            v > 0.0 && v < c
        } else {
            v < 0.0 && v > -c
        };
        if !ok {
            return None;
        }
        beta[i] = v;
    }
    Some(beta)
}

fn gauss(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for cc in col..=n {
                a[r][cc] -= f * a[col][cc];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|cc| a[r][cc] * x[cc]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    Some(x)
}

/// Random positive definite problem: K = AᵀA/d + 0.1·I with targets in [-2, 2].
pub fn random_problem(rng: &mut SeededRng, m: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = m + 2;
    let a: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..m).map(|_| rng.normal(0.0, 1.0)).collect())
        .collect();
    let k: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let s: f64 = (0..d).map(|r| a[r][i] * a[r][j]).sum::<f64>() / d as f64;
                    s + if i == j { 0.1 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let y = (0..m).map(|_| rng.uniform(-2.0, 2.0)).collect();
    (k, y)
}

pub fn gram(k: &[Vec<f64>]) -> GramMatrix {
    GramMatrix::new(SymMatrix::from_rows(k).unwrap()).unwrap()
}
