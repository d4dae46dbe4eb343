//! Dataset ingestion and preparation: CSV loading with strict numeric
//! parsing, per-column standardization fitted on training rows only,
//! train-only Gaussian noise injection, and seeded (optionally stratified)
//! splitting.

use crate::error::{RedError, Result};
use crate::numerics::{Matrix, Rng};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Row-major data matrix with optional binary anomaly labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Matrix,
    pub labels: Option<Vec<bool>>,
    pub column_names: Vec<String>,
    pub source: String,
    /// Rows dropped at load time because they held non-finite values.
    pub rejected_rows: usize,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn from_matrix(x: Matrix) -> Self {
        let names = (0..x.ncols()).map(|j| format!("c{j}")).collect();
        Dataset {
            x,
            labels: None,
            column_names: names,
            source: String::from("memory"),
            rejected_rows: 0,
        }
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels
            .as_ref()
            .map(|l| l.iter().filter(|&&b| b).count())
            .unwrap_or(0)
    }

    fn take_rows(&self, idx: &[usize]) -> Dataset {
        let mut x = Array2::zeros((idx.len(), self.d()));
        for (r, &i) in idx.iter().enumerate() {
            x.row_mut(r).assign(&self.x.row(i));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| idx.iter().map(|&i| l[i]).collect());
        Dataset {
            x,
            labels,
            column_names: self.column_names.clone(),
            source: self.source.clone(),
            rejected_rows: 0,
        }
    }
}

/// Load a CSV of 64-bit reals, optionally splitting out a {0,1} label
/// column by name. Rows containing non-finite numerics are rejected (and
/// counted); anything unparseable is a hard error with its location.
/// Row/column numbers in errors are 1-based over the whole file.
pub fn load_csv(path: &Path, has_header: bool, label_column: Option<&str>) -> Result<Dataset> {
    if label_column.is_some() && !has_header {
        return Err(RedError::Contract(
            "a label column can only be named when the file has a header".into(),
        ));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_path(path)
        .map_err(|e| RedError::Dataset(format!("cannot open {}: {e}", path.display())))?;

    let header: Option<Vec<String>> = if has_header {
        Some(
            reader
                .headers()
                .map_err(|e| RedError::Dataset(format!("header read: {e}")))?
                .iter()
                .map(|s| s.trim().to_string())
                .collect(),
        )
    } else {
        None
    };

    let label_idx: Option<usize> = match (label_column, &header) {
        (Some(name), Some(cols)) => Some(cols.iter().position(|c| c == name).ok_or_else(|| {
            RedError::Dataset(format!("label column '{name}' not present in header"))
        })?),
        _ => None,
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<bool> = Vec::new();
    let mut expected_cols: Option<usize> = None;
    let mut rejected = 0usize;
    let header_offset = if has_header { 1 } else { 0 };

    for (rec_idx, record) in reader.records().enumerate() {
        let file_row = rec_idx + 1 + header_offset;
        let record =
            record.map_err(|e| RedError::Dataset(format!("row {file_row}: {e}")))?;
        let ncols = record.len();
        match expected_cols {
            None => expected_cols = Some(ncols),
            Some(expect) if expect != ncols => {
                return Err(RedError::Data {
                    row: file_row,
                    column: ncols,
                    message: format!("ragged row: expected {expect} fields, found {ncols}"),
                });
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(ncols.saturating_sub(label_idx.map_or(0, |_| 1)));
        let mut label = false;
        let mut nonfinite = false;
        for (col_idx, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| RedError::Data {
                row: file_row,
                column: col_idx + 1,
                message: format!("cannot parse '{}' as a number", field.trim()),
            })?;
            if Some(col_idx) == label_idx {
                label = match value {
                    v if v == 0.0 => false,
                    v if v == 1.0 => true,
                    v => {
                        return Err(RedError::Data {
                            row: file_row,
                            column: col_idx + 1,
                            message: format!("label must be 0 or 1, got {v}"),
                        })
                    }
                };
            } else {
                if !value.is_finite() {
                    nonfinite = true;
                }
                row.push(value);
            }
        }
        if nonfinite {
            rejected += 1;
            continue;
        }
        rows.push(row);
        if label_idx.is_some() {
            labels.push(label);
        }
    }

    let ncols = expected_cols.unwrap_or(0);
    let feature_cols = ncols - label_idx.map_or(0, |_| 1);
    let column_names = match &header {
        Some(cols) => cols
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != label_idx)
            .map(|(_, c)| c.clone())
            .collect(),
        None => (0..feature_cols).map(|j| format!("c{j}")).collect(),
    };

    let n = rows.len();
    let mut x = Array2::zeros((n, feature_cols));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    Ok(Dataset {
        x,
        labels: label_idx.map(|_| labels),
        column_names,
        source: path.display().to_string(),
        rejected_rows: rejected,
    })
}

/// Per-column affine standardizer, fitted on the training split only.
/// Uses the population (1/N) standard deviation, floored at 1e-6.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

pub const STD_FLOOR: f64 = 1e-6;

pub fn fit_standardize(train: &Dataset) -> Result<Scaler> {
    let n = train.n();
    if n < 2 {
        return Err(RedError::Dataset(format!(
            "standardizer needs at least 2 rows, got {n}"
        )));
    }
    let d = train.d();
    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    for j in 0..d {
        let col = train.x.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        means[j] = mean;
        stds[j] = var.sqrt().max(STD_FLOOR);
    }
    Ok(Scaler { means, stds })
}

impl Scaler {
    pub fn d(&self) -> usize {
        self.means.len()
    }

    fn check(&self, m: &Matrix, context: &str) -> Result<()> {
        if m.ncols() != self.d() {
            return Err(RedError::shape(
                format!("{} columns", self.d()),
                format!("{}", m.ncols()),
                context,
            ));
        }
        Ok(())
    }

    pub fn transform_matrix(&self, m: &Matrix) -> Result<Matrix> {
        self.check(m, "scaler transform")?;
        let mut out = m.clone();
        for j in 0..self.d() {
            let (mu, sd) = (self.means[j], self.stds[j]);
            out.column_mut(j).mapv_inplace(|v| (v - mu) / sd);
        }
        Ok(out)
    }

    pub fn inverse_matrix(&self, m: &Matrix) -> Result<Matrix> {
        self.check(m, "scaler inverse")?;
        let mut out = m.clone();
        for j in 0..self.d() {
            let (mu, sd) = (self.means[j], self.stds[j]);
            out.column_mut(j).mapv_inplace(|v| v * sd + mu);
        }
        Ok(out)
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        Ok(Dataset {
            x: self.transform_matrix(&ds.x)?,
            ..ds.clone()
        })
    }
}

/// X + std · (i.i.d. standard normal draws); `std = 0` returns X
/// bit-identically. Training-split-only by pipeline contract.
pub fn add_noise(x: &Matrix, std: f64, rng: &mut Rng) -> Result<Matrix> {
    if std < 0.0 {
        return Err(RedError::Contract("noise std must be >= 0".into()));
    }
    if std == 0.0 {
        return Ok(x.clone());
    }
    let mut out = x.clone();
    for v in out.iter_mut() {
        *v += std * rng.standard_normal();
    }
    Ok(out)
}

/// Largest-remainder allocation of n rows to the three fractions.
fn split_sizes(n: usize, fractions: [f64; 3]) -> Result<[usize; 3]> {
    if fractions.iter().any(|&f| f <= 0.0) {
        return Err(RedError::Contract("split fractions must be positive".into()));
    }
    if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(RedError::Contract("split fractions must sum to 1".into()));
    }
    let raw: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut remaining = n - sizes.iter().sum::<usize>();
    // Distribute leftovers by descending fractional part, ties by order.
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if remaining == 0 {
            break;
        }
        sizes[i] += 1;
        remaining -= 1;
    }
    Ok([sizes[0], sizes[1], sizes[2]])
}

/// Seeded permutation split into (train, val, test). With `stratify`,
/// anomalous and normal rows are split with the same fractions separately,
/// preserving the anomaly proportion to within one instance per split.
pub fn split(
    ds: &Dataset,
    fractions: [f64; 3],
    rng: &mut Rng,
    stratify_labels: bool,
) -> Result<(Dataset, Dataset, Dataset)> {
    let n = ds.n();
    let groups: Vec<Vec<usize>> = if stratify_labels && ds.labels.is_some() {
        let labels = ds.labels.as_ref().unwrap();
        let normal: Vec<usize> = (0..n).filter(|&i| !labels[i]).collect();
        let anomalous: Vec<usize> = (0..n).filter(|&i| labels[i]).collect();
        vec![normal, anomalous]
    } else {
        vec![(0..n).collect()]
    };

    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for group in groups {
        let mut idx = group;
        rng.shuffle(&mut idx);
        let sizes = split_sizes(idx.len(), fractions)?;
        let mut offset = 0;
        for (part, &size) in parts.iter_mut().zip(sizes.iter()) {
            part.extend_from_slice(&idx[offset..offset + size]);
            offset += size;
        }
    }
    if parts.iter().any(|p| p.is_empty()) {
        return Err(RedError::Dataset(format!(
            "split produced an empty part (n = {n}, fractions {fractions:?})"
        )));
    }
    Ok((
        ds.take_rows(&parts[0]),
        ds.take_rows(&parts[1]),
        ds.take_rows(&parts[2]),
    ))
}

/// Column means/stds helper used in tests and reports.
pub fn column_moments(x: &Matrix) -> (Array1<f64>, Array1<f64>) {
    let n = x.nrows() as f64;
    let d = x.ncols();
    let mut means = Array1::zeros(d);
    let mut stds = Array1::zeros(d);
    for j in 0..d {
        let mean = x.column(j).sum() / n;
        let var = x.column(j).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        means[j] = mean;
        stds[j] = var.sqrt();
    }
    (means, stds)
}
