use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

/// Boltzmann constant in eV/K.
pub const BOLTZMANN_EV: f64 = 8.617333e-5;
pub const ROOM_TEMPERATURE: f64 = 300.0;
/// Exact header of the materials export.
pub const MATERIALS_HEADER: &str = "material_id,band_gap_eV,density_g_cm3,dos_at_fermi";

/// One material: band gap (eV), density (g/cm³), DOS at the Fermi level
/// (states/eV).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductivityRecord {
    pub band_gap: f64,
    pub density: f64,
    pub dos_at_fermi: f64,
}

impl ConductivityRecord {
    pub fn is_metallic(&self) -> bool {
        self.dos_at_fermi > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.band_gap, self.density, self.dos_at_fermi]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::NonFinite {
                context: "conductivity record".into(),
            });
        }
        if self.band_gap < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "band gap {} < 0",
                self.band_gap
            )));
        }
        if self.dos_at_fermi < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "DOS {} < 0",
                self.dos_at_fermi
            )));
        }
        if self.density <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "density {} must be > 0",
                self.density
            )));
        }
        Ok(())
    }
}

/// `log₁₀` conductivity proxy at 300 K with unit prefactor.
///
/// Metals (`N(E_F) > 0`): `log₁₀(N(E_F)·ρ)`. Otherwise thermally activated:
/// `log₁₀ρ − E_g / (2 k_B T ln 10)`.
pub fn conductivity_target(rec: &ConductivityRecord) -> Result<f64> {
    rec.validate()?;
    if rec.is_metallic() {
        Ok((rec.dos_at_fermi * rec.density).log10())
    } else {
        Ok(rec.density.log10()
            - rec.band_gap / (2.0 * BOLTZMANN_EV * ROOM_TEMPERATURE * std::f64::consts::LN_10))
    }
}

fn meta(
    source: String,
    seed: Option<u64>,
    params: serde_json::Value,
    notes: Vec<String>,
) -> DatasetMeta {
    DatasetMeta {
        generator: "conductivity".into(),
        source,
        feature_names: vec!["band_gap".into(), "density".into()],
        feature_units: vec!["eV".into(), "g/cm^3".into()],
        target_name: "log10_sigma_proxy".into(),
        target_units: "log10(arb)".into(),
        seed,
        params,
        notes,
    }
}

fn build(records: &[ConductivityRecord], meta: DatasetMeta) -> Result<Dataset> {
    let mut x = Vec::with_capacity(records.len() * 2);
    let mut y = Vec::with_capacity(records.len());
    for r in records {
        y.push(conductivity_target(r)?);
        x.extend([r.band_gap, r.density]);
    }
    Dataset::new(Matrix::from_row_major(records.len(), 2, x)?, y, meta)
}

/// Reads a materials export. Rows that are short, non-numeric or violate
/// the record invariants are skipped; the skip count is returned and logged.
pub fn ingest_materials_csv(path: &Path) -> Result<(Dataset, usize)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header.join(",") != MATERIALS_HEADER {
        return Err(Error::Config(format!(
            "{}: expected header '{MATERIALS_HEADER}', found '{}'",
            path.display(),
            header.join(",")
        )));
    }
    let mut records = Vec::new();
    let mut skipped = 0;
    for (line, row) in rdr.records().enumerate() {
        let parsed = row.ok().and_then(|r| {
            if r.len() != 4 {
                return None;
            }
            let f = |i: usize| r.get(i)?.trim().parse::<f64>().ok();
            let rec = ConductivityRecord {
                band_gap: f(1)?,
                density: f(2)?,
                dos_at_fermi: f(3)?,
            };
            rec.validate().ok().map(|_| rec)
        });
        match parsed {
            Some(rec) => records.push(rec),
            None => {
                log::warn!("{}: skipping malformed record {}", path.display(), line + 2);
                skipped += 1;
            }
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "{}: no valid records ({skipped} skipped)",
            path.display()
        )));
    }
    if skipped > 0 {
        log::warn!("{}: {skipped} malformed rows skipped", path.display());
    }
    let m = meta(
        path.display().to_string(),
        None,
        serde_json::json!({ "rows": records.len(), "skipped_rows": skipped }),
        vec![],
    );
    Ok((build(&records, m)?, skipped))
}

/// Synthetic stand-in for a materials export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConductivity {
    pub n: usize,
    pub metallic_fraction: f64,
    /// Semiconductor band gaps are uniform on `(0, max_gap]`.
    pub max_gap: f64,
    pub density_range: (f64, f64),
    /// Metallic DOS at the Fermi level, uniform on this range.
    pub dos_range: (f64, f64),
}

impl Default for SynthConductivity {
    fn default() -> Self {
        Self {
            n: 900,
            metallic_fraction: 0.5,
            max_gap: 6.0,
            density_range: (1.0, 12.0),
            dos_range: (0.5, 5.0),
        }
    }
}

/// Samples `n` records: metals with `E_g = 0` and positive DOS, insulators
/// and semiconductors with a positive gap and zero DOS.
pub fn synth_conductivity(p: &SynthConductivity, seed: u64) -> Result<Dataset> {
    if p.n == 0 {
        return Err(Error::EmptyDataset(
            "synthetic conductivity with n = 0".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p.metallic_fraction) || p.max_gap <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "bad synthetic conductivity parameters {p:?}"
        )));
    }
    let (rlo, rhi) = p.density_range;
    let (dlo, dhi) = p.dos_range;
    if !(rlo > 0.0 && rhi > rlo && dlo > 0.0 && dhi > dlo) {
        return Err(Error::InvalidParameter(format!(
            "bad synthetic conductivity ranges {p:?}"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let records: Vec<ConductivityRecord> = (0..p.n)
        .map(|_| {
            let density = rng.uniform(rlo, rhi);
            if rng.bernoulli(p.metallic_fraction) {
                ConductivityRecord {
                    band_gap: 0.0,
                    density,
                    dos_at_fermi: rng.uniform(dlo, dhi),
                }
            } else {
                ConductivityRecord {
                    band_gap: p.max_gap * (1.0 - rng.uniform(0.0, 1.0)),
                    density,
                    dos_at_fermi: 0.0,
                }
            }
        })
        .collect();
    let m = meta(
        "synthetic".into(),
        Some(seed),
        serde_json::to_value(p)?,
        vec![
            "synthetic stand-in for an exported materials table; distributions are invented".into(),
        ],
    );
    build(&records, m)
}
