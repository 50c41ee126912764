use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::numerics::{Complex2x2, Complex64, Matrix};

use super::linspace;

/// `λ[µm] ≈ HC_EV_UM / E[eV]`.
pub const HC_EV_UM: f64 = 1.2398;
pub const SIO2_INDEX: f64 = 1.45;

const SI_A: f64 = 11.6858;
const SI_B: f64 = 0.939816;
const SI_C: f64 = 0.00810461;

/// Silicon dielectric function `A + B/λ² + Cλ²` at photon energy `e` (eV).
pub fn herzberger_epsilon(e: f64) -> Result<f64> {
    if !(e > 0.0 && e.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "photon energy must be > 0, got {e}"
        )));
    }
    let lambda = HC_EV_UM / e;
    let l2 = lambda * lambda;
    Ok(SI_A + SI_B / l2 + SI_C * l2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum RefractiveIndex {
    Constant {
        n: f64,
    },
    /// Silicon, lossless, through [`herzberger_epsilon`].
    Silicon,
}

impl RefractiveIndex {
    pub fn at(&self, e: f64) -> Result<f64> {
        match *self {
            RefractiveIndex::Constant { n } => Ok(n),
            RefractiveIndex::Silicon => Ok(herzberger_epsilon(e)?.sqrt()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub index: RefractiveIndex,
    /// Thickness in µm.
    pub thickness: f64,
}

/// Layers in order of incidence between two semi-infinite media.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub layers: Vec<Layer>,
    pub n_in: f64,
    pub n_out: f64,
}

impl LayerStack {
    pub fn vacuum(layers: Vec<Layer>) -> Self {
        Self {
            layers,
            n_in: 1.0,
            n_out: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_in > 0.0 && self.n_out > 0.0) {
            return Err(Error::InvalidParameter(
                "surrounding indices must be > 0".into(),
            ));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if !(l.thickness > 0.0 && l.thickness.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "layer {i}: thickness must be > 0, got {}",
                    l.thickness
                )));
            }
            if let RefractiveIndex::Constant { n } = l.index {
                if !(n > 0.0 && n.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "layer {i}: index must be > 0, got {n}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Product of the layer characteristic matrices at energy `e`.
    pub fn characteristic_matrix(&self, e: f64) -> Result<Complex2x2> {
        if !(e > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "photon energy must be > 0, got {e}"
            )));
        }
        let lambda = HC_EV_UM / e;
        let i = Complex64::i();
        let mut m = Complex2x2::identity();
        for l in &self.layers {
            let n = l.index.at(e)?;
            let delta = 2.0 * PI * n * l.thickness / lambda;
            let (s, c) = delta.sin_cos();
            let layer = Complex2x2::new(
                Complex64::new(c, 0.0),
                i * (s / n),
                i * (n * s),
                Complex64::new(c, 0.0),
            );
            m = m * layer;
        }
        Ok(m)
    }
}

/// Normal-incidence `(T, R)` of a lossless stack at energy `e` (eV).
pub fn tmm_response(stack: &LayerStack, e: f64) -> Result<(f64, f64)> {
    stack.validate()?;
    let m = stack.characteristic_matrix(e)?;
    let (n0, ns) = (stack.n_in, stack.n_out);
    let b = m.at(0, 0) * n0 + m.at(0, 1) * (n0 * ns);
    let c = m.at(1, 0) + m.at(1, 1) * ns;
    let t = Complex64::new(2.0 * n0, 0.0) / (b + c);
    let r = (b - c) / (b + c);
    Ok(((ns / n0) * t.norm_sqr(), r.norm_sqr()))
}

pub fn tmm_transmission(stack: &LayerStack, e: f64) -> Result<f64> {
    Ok(tmm_response(stack, e)?.0)
}

/// `periods` repetitions of Si/SiO₂, each layer a quarter wave thick at
/// `reference_energy`, in vacuum.
pub fn quarter_wave_stack(periods: usize, reference_energy: f64) -> Result<LayerStack> {
    let lambda = HC_EV_UM / reference_energy;
    let n_si = RefractiveIndex::Silicon.at(reference_energy)?;
    let si = Layer {
        index: RefractiveIndex::Silicon,
        thickness: lambda / (4.0 * n_si),
    };
    let oxide = Layer {
        index: RefractiveIndex::Constant { n: SIO2_INDEX },
        thickness: lambda / (4.0 * SIO2_INDEX),
    };
    Ok(LayerStack::vacuum(
        (0..periods).flat_map(|_| [si, oxide]).collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhotonicParams {
    pub periods: usize,
    /// Quarter-wave design energy, eV.
    pub reference_energy: f64,
    pub n_points: usize,
    pub e_min: f64,
    pub e_max: f64,
}

impl Default for PhotonicParams {
    fn default() -> Self {
        Self {
            periods: 10,
            reference_energy: 1.75,
            n_points: 500,
            e_min: 0.5,
            e_max: 3.0,
        }
    }
}

/// Transmission of the Si/SiO₂ Bragg stack on an even energy grid.
pub fn photonic_dataset(p: &PhotonicParams, seed: u64) -> Result<Dataset> {
    if p.n_points < 2 || !(p.e_min > 0.0 && p.e_max > p.e_min) {
        return Err(Error::InvalidParameter(format!(
            "bad photonic parameters {p:?}"
        )));
    }
    let stack = quarter_wave_stack(p.periods, p.reference_energy)?;
    let energies = linspace(p.e_min, p.e_max, p.n_points);
    let y: Vec<f64> = energies
        .par_iter()
        .map(|&e| tmm_transmission(&stack, e))
        .collect::<Result<_>>()?;
    let meta = DatasetMeta {
        generator: "photonic".into(),
        source: "transfer-matrix simulation".into(),
        feature_names: vec!["energy".into()],
        feature_units: vec!["eV".into()],
        target_name: "transmission".into(),
        target_units: "1".into(),
        seed: Some(seed),
        params: serde_json::to_value(p)?,
        notes: vec![
            "quarter-wave Si/SiO2 layers at the reference energy, vacuum on both sides".into(),
        ],
    };
    Dataset::new(
        Matrix::from_row_major(energies.len(), 1, energies)?,
        y,
        meta,
    )
}
