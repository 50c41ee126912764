//! Datasets, standardization and the CSV/JSON dataset files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Provenance recorded next to every dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Generator or ingestor name, e.g. `quasicrystal` or `materials_csv`.
    pub generator: String,
    /// Where the numbers came from (`synthetic`, a file path, ...).
    pub source: String,
    pub feature_names: Vec<String>,
    pub feature_units: Vec<String>,
    pub target_name: String,
    pub target_units: String,
    pub seed: Option<u64>,
    /// Generator parameters as given.
    #[serde(default)]
    pub params: serde_json::Value,
    /// Free-form remarks such as modelling assumptions.
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Feature matrix, targets and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Matrix,
    y: Vec<f64>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>, meta: DatasetMeta) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                got: y.len(),
            });
        }
        if x.as_slice().iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("dataset '{}'", meta.generator),
            });
        }
        Ok(Self { x, y, meta })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.x.cols()
    }

    /// Rows at the given indices, metadata kept.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            meta: self.meta.clone(),
        }
    }

    /// Writes `feature_0,...,feature_{D-1},target` plus `<stem>.meta.json`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.dims()).map(|j| format!("feature_{j}")).collect();
        header.push("target".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.x.row(i).iter().map(|v| format!("{v:?}")).collect();
            rec.push(format!("{:?}", self.y[i]));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        let meta = serde_json::to_string_pretty(&self.meta)?;
        let meta_path = meta_path(path);
        fs::write(&meta_path, meta + "\n").map_err(|e| Error::io(meta_path, e))?;
        Ok(())
    }

    /// Reads a dataset CSV written by [`Dataset::write_csv`]. The sidecar
    /// metadata is loaded when present.
    pub fn read_csv(path: &Path) -> Result<Dataset> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let n_cols = header.len();
        if n_cols < 2 || header.get(n_cols - 1) != Some("target") {
            return Err(Error::Config(format!(
                "{}: expected header feature_0,...,target",
                path.display()
            )));
        }
        for (j, h) in header.iter().take(n_cols - 1).enumerate() {
            if h != format!("feature_{j}") {
                return Err(Error::Config(format!(
                    "{}: column {j} is '{h}', expected 'feature_{j}'",
                    path.display()
                )));
            }
        }
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let vals: std::result::Result<Vec<f64>, _> =
                rec.iter().map(|s| s.trim().parse::<f64>()).collect();
            let vals = vals
                .map_err(|e| Error::Config(format!("{}: row {}: {e}", path.display(), line + 1)))?;
            if vals.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    got: vals.len(),
                });
            }
            y.push(vals[n_cols - 1]);
            rows.push(vals[..n_cols - 1].to_vec());
        }
        let x = if rows.is_empty() {
            Matrix::zeros(0, n_cols - 1)
        } else {
            Matrix::from_rows(&rows)?
        };
        let mp = meta_path(path);
        let meta = if mp.exists() {
            let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
            serde_json::from_str(&text)?
        } else {
            DatasetMeta {
                generator: "csv".into(),
                source: path.display().to_string(),
                ..Default::default()
            }
        };
        Dataset::new(x, y, meta)
    }
}

/// `data.csv` → `data.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

/// Per-column standardization fitted on training rows.
///
/// Standard deviations use the population convention (divide by the row
/// count). Constant columns cannot be standardized and are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Indices of the input columns that survive.
    pub kept: Vec<usize>,
    pub n_inputs: usize,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn is_constant(mean: f64, std: f64) -> bool {
    std <= 1e-12 * mean.abs().max(1.0)
}

impl Scaler {
    pub fn fit(x: &Matrix) -> Result<Scaler> {
        if x.rows() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 rows to fit a scaler, got {}",
                x.rows()
            )));
        }
        let mut mean = Vec::new();
        let mut std = Vec::new();
        let mut kept = Vec::new();
        for j in 0..x.cols() {
            let (m, s) = mean_std((0..x.rows()).map(|i| x.get(i, j)));
            if is_constant(m, s) {
                log::warn!("feature column {j} is constant on the training rows; dropped");
                continue;
            }
            mean.push(m);
            std.push(s);
            kept.push(j);
        }
        if kept.is_empty() {
            return Err(Error::InvalidParameter(
                "every feature column is constant on the training rows".into(),
            ));
        }
        Ok(Scaler {
            mean,
            std,
            kept,
            n_inputs: x.cols(),
        })
    }

    /// Pass-through scaler (used when a kernel does its own input mapping).
    pub fn identity(n_inputs: usize) -> Scaler {
        Scaler {
            mean: vec![0.0; n_inputs],
            std: vec![1.0; n_inputs],
            kept: (0..n_inputs).collect(),
            n_inputs,
        }
    }

    pub fn dropped(&self) -> Vec<usize> {
        (0..self.n_inputs)
            .filter(|j| !self.kept.contains(j))
            .collect()
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.n_inputs {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs,
                got: x.cols(),
            });
        }
        Ok(Matrix::from_fn(x.rows(), self.kept.len(), |i, k| {
            (x.get(i, self.kept[k]) - self.mean[k]) / self.std[k]
        }))
    }

    /// Maps standardized columns back to input units (dropped columns are
    /// not recoverable and are omitted).
    pub fn invert(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.kept.len() {
            return Err(Error::DimensionMismatch {
                expected: self.kept.len(),
                got: z.cols(),
            });
        }
        Ok(Matrix::from_fn(z.rows(), z.cols(), |i, k| {
            z.get(i, k) * self.std[k] + self.mean[k]
        }))
    }
}

/// Standardization of the regression target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub mean: f64,
    pub std: f64,
}

impl TargetScaler {
    pub fn fit(y: &[f64]) -> Result<TargetScaler> {
        if y.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 targets to fit a scaler, got {}",
                y.len()
            )));
        }
        let (mean, std) = mean_std(y.iter().copied());
        if is_constant(mean, std) {
            return Err(Error::InvalidParameter(
                "target is constant on the training rows".into(),
            ));
        }
        Ok(TargetScaler { mean, std })
    }

    pub fn identity() -> TargetScaler {
        TargetScaler {
            mean: 0.0,
            std: 1.0,
        }
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.mean) / self.std).collect()
    }

    pub fn invert_one(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|&v| self.invert_one(v)).collect()
    }
}

/// Deterministic shuffled split: the first `round(frac · n)` shuffled rows
/// train, the rest test.
pub fn train_test_split(
    n: usize,
    train_frac: f64,
    rng: &mut crate::numerics::SeededRng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction must lie in (0, 1), got {train_frac}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    let n_train = ((n as f64) * train_frac).round() as usize;
    let n_train = n_train.clamp(1, n.saturating_sub(1).max(1));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}
