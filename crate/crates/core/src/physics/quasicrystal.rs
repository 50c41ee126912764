use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::numerics::{Complex2x2, Complex64, Matrix};

use super::linspace;

/// Fibonacci word: `S₀ = A`, `S₁ = AB`, `S_g = S_{g-1} S_{g-2}`.
pub fn fibonacci_word(generation: usize) -> String {
    let (mut prev, mut cur) = (String::from("A"), String::from("AB"));
    if generation == 0 {
        return prev;
    }
    for _ in 1..generation {
        let next = format!("{cur}{prev}");
        prev = std::mem::replace(&mut cur, next);
    }
    cur
}

/// Delta scatterers on a line with uniform spacing (units ħ²/2m = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterChain {
    pub potentials: Vec<f64>,
    pub spacing: f64,
}

impl ScatterChain {
    pub fn fibonacci(generation: usize, v_a: f64, v_b: f64, spacing: f64) -> Self {
        let potentials = fibonacci_word(generation)
            .chars()
            .map(|c| if c == 'A' { v_a } else { v_b })
            .collect();
        Self {
            potentials,
            spacing,
        }
    }

    /// Composite transfer matrix at energy `e`: sites interleaved with free
    /// propagation over one spacing.
    pub fn transfer_matrix(&self, e: f64) -> Result<Complex2x2> {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "energy must be > 0, got {e}"
            )));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "spacing must be > 0, got {}",
                self.spacing
            )));
        }
        let k = e.sqrt();
        let phase = Complex64::new(0.0, k * self.spacing).exp();
        let hop = Complex2x2::diag(phase, phase.conj());
        let mut m = Complex2x2::identity();
        for (j, &v) in self.potentials.iter().enumerate() {
            if j > 0 {
                m = m * hop;
            }
            m = m * delta_matrix(v, k);
        }
        Ok(m)
    }
}

/// Single delta site `[[1+η, η], [−η, 1−η]]`, `η = V/(2ik)`.
pub fn delta_matrix(v: f64, k: f64) -> Complex2x2 {
    let eta = Complex64::new(v, 0.0) / Complex64::new(0.0, 2.0 * k);
    let one = Complex64::new(1.0, 0.0);
    Complex2x2::new(one + eta, eta, -eta, one - eta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainResponse {
    pub transmission: f64,
    pub reflection: f64,
    pub determinant: Complex64,
}

/// `T = 1/|M₂₂|²`, `R = |M₂₁/M₂₂|²` at energy `e`.
pub fn quasicrystal_transmission(chain: &ScatterChain, e: f64) -> Result<ChainResponse> {
    let m = chain.transfer_matrix(e)?;
    let m22 = m.at(1, 1);
    Ok(ChainResponse {
        transmission: 1.0 / m22.norm_sqr(),
        reflection: (m.at(1, 0) / m22).norm_sqr(),
        determinant: m.det(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuasicrystalParams {
    pub generation: usize,
    pub v_a: f64,
    pub v_b: f64,
    pub n_points: usize,
    pub e_min: f64,
    pub e_max: f64,
    pub spacing: f64,
}

impl Default for QuasicrystalParams {
    fn default() -> Self {
        Self {
            generation: 6,
            v_a: 0.0,
            v_b: 1.5,
            n_points: 300,
            e_min: 0.1,
            e_max: 4.0,
            spacing: 1.0,
        }
    }
}

/// Transmission of a Fibonacci chain on an even energy grid.
pub fn quasicrystal_dataset(p: &QuasicrystalParams, seed: u64) -> Result<Dataset> {
    if p.n_points < 2 || !(p.e_min > 0.0 && p.e_max > p.e_min) {
        return Err(Error::InvalidParameter(format!(
            "bad quasicrystal parameters {p:?}"
        )));
    }
    let chain = ScatterChain::fibonacci(p.generation, p.v_a, p.v_b, p.spacing);
    let energies = linspace(p.e_min, p.e_max, p.n_points);
    let y: Vec<f64> = energies
        .par_iter()
        .map(|&e| quasicrystal_transmission(&chain, e).map(|r| r.transmission))
        .collect::<Result<_>>()?;
    let meta = DatasetMeta {
        generator: "quasicrystal".into(),
        source: "transfer-matrix simulation".into(),
        feature_names: vec!["energy".into()],
        feature_units: vec!["hbar^2/2m = 1".into()],
        target_name: "transmission".into(),
        target_units: "1".into(),
        seed: Some(seed),
        params: serde_json::json!({ "chain": p, "sites": chain.potentials.len() }),
        notes: vec![],
    };
    Dataset::new(
        Matrix::from_row_major(energies.len(), 1, energies)?,
        y,
        meta,
    )
}
