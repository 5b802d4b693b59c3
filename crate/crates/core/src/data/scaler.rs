use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-AP min-max normalization of RSS values into `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    /// Fit on the training fingerprints. Constant columns are accepted and
    /// always map to 0.5.
    pub fn fit(rss: ArrayView2<'_, f64>) -> Result<Self> {
        if rss.nrows() == 0 || rss.ncols() == 0 {
            return Err(Error::invalid("cannot fit a scaler on an empty matrix"));
        }
        let mut min = vec![f64::INFINITY; rss.ncols()];
        let mut max = vec![f64::NEG_INFINITY; rss.ncols()];
        for row in rss.rows() {
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::numeric("non-finite RSS value"));
                }
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        for (j, (lo, hi)) in min.iter().zip(&max).enumerate() {
            if lo == hi {
                log::warn!("RSS column {j} is constant ({lo} dBm); it normalizes to 0.5");
            }
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn constant_columns(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.min[j] == self.max[j]).collect()
    }

    pub fn apply_value(&self, j: usize, v: f64) -> f64 {
        let (lo, hi) = (self.min[j], self.max[j]);
        if hi == lo {
            0.5
        } else {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::invalid(format!(
                "fingerprint has {} values, scaler expects {}",
                row.len(),
                self.dim()
            )));
        }
        Ok(row.iter().enumerate().map(|(j, &v)| self.apply_value(j, v)).collect())
    }

    pub fn apply(&self, rss: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if rss.ncols() != self.dim() {
            return Err(Error::invalid("RSS width does not match scaler"));
        }
        let mut out = rss.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.apply_value(j, *v);
            }
        }
        Ok(out)
    }

    /// Map normalized values back to dBm. Inputs are clipped to `[0, 1]` first
    /// so the result stays inside the fitted range.
    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &u)| self.min[j] + u.clamp(0.0, 1.0) * (self.max[j] - self.min[j]))
            .collect()
    }
}

/// Standardization of coordinates to zero mean and unit (population) standard
/// deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StdScaler {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() || mean.is_empty() {
            return Err(Error::invalid("mean and std must have equal, non-zero length"));
        }
        if std.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("standard deviations must be positive"));
        }
        Ok(Self { mean, std })
    }

    pub fn fit(coords: ArrayView2<'_, f64>) -> Result<Self> {
        if coords.nrows() < 2 {
            return Err(Error::invalid("standardization needs at least two rows"));
        }
        let mean = coords.mean_axis(Axis(0)).expect("non-empty").to_vec();
        let std = coords.std_axis(Axis(0), 0.0).to_vec();
        if let Some(j) = std.iter().position(|&s| s <= 0.0) {
            return Err(Error::invalid(format!("coordinate {j} has zero variance")));
        }
        Self::new(mean, std)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, coords: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(coords.ncols())?;
        let mut out = coords.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        Ok(out)
    }

    pub fn inverse(&self, standardized: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check(standardized.ncols())?;
        let mut out = standardized.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v * self.std[j] + self.mean[j];
            }
        }
        Ok(out)
    }

    pub fn inverse_row(&self, standardized: &[f64]) -> Vec<f64> {
        standardized
            .iter()
            .enumerate()
            .map(|(j, v)| v * self.std[j] + self.mean[j])
            .collect()
    }

    fn check(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::invalid(format!(
                "coordinates have {dim} columns, scaler expects {}",
                self.dim()
            )));
        }
        Ok(())
    }
}
