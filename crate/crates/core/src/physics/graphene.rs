use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

/// Conduction branch of a Dirac cone, `E = ħv_F·q` plus Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiracCone {
    pub n: usize,
    /// ħv_F in eV·Å.
    pub slope: f64,
    /// Momentum offset from K, in Å⁻¹.
    pub q_max: f64,
    /// Energy noise, eV.
    pub noise_sd: f64,
    /// Points with `|E|` above this are dropped, eV.
    pub window: f64,
}

impl Default for DiracCone {
    fn default() -> Self {
        Self {
            n: 200,
            slope: 6.0,
            q_max: 1.0 / 6.0,
            noise_sd: 0.02,
            window: 1.0,
        }
    }
}

/// Samples `q` uniformly on `[0, q_max]` and keeps energies inside the window.
pub fn dirac_cone_dataset(p: &DiracCone, seed: u64) -> Result<Dataset> {
    if !(p.slope > 0.0) || !(p.q_max > 0.0) || p.noise_sd < 0.0 || !(p.window > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad Dirac cone parameters {p:?}"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let mut x = Vec::with_capacity(p.n);
    let mut y = Vec::with_capacity(p.n);
    for _ in 0..p.n {
        let q = rng.uniform(0.0, p.q_max);
        let noise = if p.noise_sd > 0.0 {
            rng.normal(0.0, p.noise_sd)
        } else {
            0.0
        };
        let e = p.slope * q + noise;
        if e.abs() <= p.window {
            x.push(q);
            y.push(e);
        }
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no Dirac cone energies inside ±{} eV",
            p.window
        )));
    }
    let dropped = p.n - y.len();
    let meta = DatasetMeta {
        generator: "graphene".into(),
        source: "synthetic".into(),
        feature_names: vec!["q".into()],
        feature_units: vec!["1/angstrom".into()],
        target_name: "energy".into(),
        target_units: "eV".into(),
        seed: Some(seed),
        params: serde_json::json!({ "cone": p, "dropped_outside_window": dropped }),
        notes: vec!["synthetic conduction branch; replaces ab initio band data".into()],
    };
    Dataset::new(Matrix::from_row_major(y.len(), 1, x)?, y, meta)
}
