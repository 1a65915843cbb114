//! Labeled datasets: Gaussian blobs and CSV ingestion.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::Batch;
use crate::numcore::{Mat, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n x d`.
    pub inputs: Mat,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(inputs: Mat, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.rows(),
                actual: labels.len(),
            });
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::invalid(format!(
                "label {y} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            inputs,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn full_batch(&self) -> Result<Batch> {
        Batch::new(self.inputs.clone(), self.labels.clone())
    }

    pub fn batch(&self, idx: &[usize]) -> Result<Batch> {
        Batch::new(
            self.inputs.select_rows(idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    /// `size` indices drawn uniformly with replacement.
    pub fn sample_batch(&self, rng: &mut Rng, size: usize) -> Result<Batch> {
        let idx: Vec<usize> = (0..size).map(|_| rng.index(self.len())).collect();
        self.batch(&idx)
    }

    /// Writes `x_0..x_{d-1},label` with a header row, floats in 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("x_{j}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, &y) in self.inputs.row_iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| crate::fmt_f64(*v)).collect();
            rec.push(y.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    GaussianBlobs {
        d: usize,
        classes: usize,
        n_points: usize,
        separation: f64,
        scale: f64,
        seed: u64,
    },
    CsvFile {
        path: PathBuf,
        label_column: String,
        /// Defaults to `max label + 1`.
        #[serde(default)]
        classes: Option<usize>,
    },
}

impl DatasetSpec {
    pub fn n_points(&self) -> Option<usize> {
        match self {
            DatasetSpec::GaussianBlobs { n_points, .. } => Some(*n_points),
            DatasetSpec::CsvFile { .. } => None,
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSpec::GaussianBlobs { .. } => synth_blobs(self),
            DatasetSpec::CsvFile {
                path,
                label_column,
                classes,
            } => load_csv(path, label_column, *classes),
        }
    }
}

/// Class `c = i mod C`; `x = mean_c + scale * N(0, I)`.
///
/// Class means are `separation * e_c` when `C <= d`, otherwise
/// `separation * u_c` with `u_c` seeded random unit directions.
pub fn synth_blobs(spec: &DatasetSpec) -> Result<Dataset> {
    let DatasetSpec::GaussianBlobs {
        d,
        classes,
        n_points,
        separation,
        scale,
        seed,
    } = *spec
    else {
        return Err(Error::invalid("synth_blobs needs a gaussian-blobs spec"));
    };
    if d == 0 || classes < 2 || n_points == 0 {
        return Err(Error::Config(format!(
            "invalid blob dimensions: d={d}, classes={classes}, n_points={n_points}"
        )));
    }
    if !separation.is_finite() || !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::Config("separation and scale must be finite, scale >= 0".into()));
    }
    let root = Rng::new(seed);
    let means: Vec<Vec<f64>> = if classes <= d {
        (0..classes)
            .map(|c| {
                let mut m = vec![0.0; d];
                m[c] = separation;
                m
            })
            .collect()
    } else {
        let mut rng = root.split("means");
        (0..classes)
            .map(|_| rng.unit_vector(d).into_iter().map(|x| separation * x).collect())
            .collect()
    };
    let mut rng = root.split("points");
    let mut data = Vec::with_capacity(n_points * d);
    let mut labels = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let c = i % classes;
        for &mu in &means[c] {
            data.push(mu + scale * rng.normal());
        }
        labels.push(c);
    }
    Dataset::new(Mat::from_vec(n_points, d, data)?, labels, classes)
}

/// Reads a headed numeric CSV; every column except `label_col` is a feature.
pub fn load_csv(path: &Path, label_col: &str, classes: Option<usize>) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_col)
        .ok_or_else(|| Error::Config(format!("label column {label_col:?} not in header")))?;
    let d = headers.len() - 1;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let row = r + 1;
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: rec.len().min(headers.len()) + 1,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                column: j + 1,
                message: format!("non-numeric value {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: j + 1,
                    message: "non-finite value".into(),
                });
            }
            if j == label_idx {
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(Error::Parse {
                        row,
                        column: j + 1,
                        message: format!("label {v} is not a nonnegative integer"),
                    });
                }
                labels.push(v as usize);
            } else {
                data.push(v);
            }
        }
    }
    let n = labels.len();
    if n == 0 {
        return Err(Error::Config(format!("{} has no data rows", path.display())));
    }
    let num_classes = match classes {
        Some(c) => c,
        None => labels.iter().copied().max().unwrap_or(0) + 1,
    };
    Dataset::new(Mat::from_vec(n, d, data)?, labels, num_classes)
}
