//! Dataset generators and ingestors for the five physics experiments.
//!
//! Every generator is a pure function of its parameters and seed.

mod conductivity;
mod graphene;
mod oscillator;
mod photonic;
mod quasicrystal;

pub use conductivity::{
    conductivity_target, ingest_materials_csv, synth_conductivity, ConductivityRecord,
    SynthConductivity, BOLTZMANN_EV, MATERIALS_HEADER, ROOM_TEMPERATURE,
};
pub use graphene::{dirac_cone_dataset, DiracCone};
pub use oscillator::{
    anharmonic_dataset, anharmonic_levels, AnharmonicSampling, OscillatorParams, ParamDesign,
};
pub use photonic::{
    herzberger_epsilon, photonic_dataset, quarter_wave_stack, tmm_response, tmm_transmission,
    Layer, LayerStack, PhotonicParams, RefractiveIndex, HC_EV_UM, SIO2_INDEX,
};
pub use quasicrystal::{
    delta_matrix, fibonacci_word, quasicrystal_dataset, quasicrystal_transmission, ChainResponse,
    QuasicrystalParams, ScatterChain,
};

/// `n` evenly spaced points spanning `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}
