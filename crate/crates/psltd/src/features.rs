//! Feature-space post-processing between descriptor extraction and the
//! classifier: grouping per-component descriptors into pooled rows, pruning
//! dimensions that carry no information, and range scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions whose nonzero fraction falls below this are prune candidates.
pub const PRUNE_NONZERO_FRACTION: f64 = 0.01;
/// ... and are pruned only when their population variance is also below this.
pub const PRUNE_VARIANCE: f64 = 1e-9;

/// Average component descriptors in groups of `np`, in component order. The
/// final short group (if any) pools on its own; `np = 0` pools the whole
/// page into one row. Row order follows group order.
pub fn poep_pool(rows: &[Vec<f64>], np: usize) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return Vec::new();
    }
    let dim = rows[0].len();
    let group = if np == 0 { rows.len() } else { np };
    rows.chunks(group)
        .map(|chunk| {
            let mut mean = vec![0.0f64; dim];
            for row in chunk {
                debug_assert_eq!(row.len(), dim);
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            let n = chunk.len() as f64;
            for m in &mut mean {
                *m /= n;
            }
            mean
        })
        .collect()
}

/// Which dimensions of the raw descriptor survive pruning. `kept` holds
/// surviving source indices in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneMask {
    pub source_dim: usize,
    pub kept: Vec<usize>,
}

impl PruneMask {
    /// Keep every dimension.
    pub fn identity(dim: usize) -> Self {
        PruneMask {
            source_dim: dim,
            kept: (0..dim).collect(),
        }
    }

    /// Fit on training rows only: a dimension is dropped exactly when its
    /// nonzero fraction is below [`PRUNE_NONZERO_FRACTION`] **and** its
    /// population variance is below [`PRUNE_VARIANCE`]. Either signal alone
    /// keeps the dimension.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        Self::fit_with(rows, PRUNE_NONZERO_FRACTION, PRUNE_VARIANCE)
    }

    /// [`PruneMask::fit`] with explicit thresholds.
    pub fn fit_with(rows: &[Vec<f64>], frac_threshold: f64, var_threshold: f64) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::training("cannot fit a prune mask on zero rows"))?;
        let dim = first.len();
        let n = rows.len() as f64;
        let mut kept = Vec::with_capacity(dim);
        for j in 0..dim {
            let nonzero = rows.iter().filter(|r| r[j] != 0.0).count() as f64;
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            if nonzero / n < frac_threshold && var < var_threshold {
                continue;
            }
            kept.push(j);
        }
        Ok(PruneMask {
            source_dim: dim,
            kept,
        })
    }

    pub fn kept_dim(&self) -> usize {
        self.kept.len()
    }

    /// Project one row onto the surviving dimensions.
    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.source_dim {
            return Err(Error::data(format!(
                "row has {} dims but the prune mask was fit on {}",
                row.len(),
                self.source_dim
            )));
        }
        Ok(self.kept.iter().map(|&j| row[j]).collect())
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

/// Per-dimension range scaling to [0, 1], fit on training rows. Dimensions
/// with zero range map to 0. Rows transformed later with these bounds may
/// fall outside [0, 1]; they are intentionally not clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::training("cannot fit a scaler on zero rows"))?;
        let dim = first.len();
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for row in rows {
            if row.len() != dim {
                return Err(Error::data("ragged feature rows"));
            }
            for j in 0..dim {
                min[j] = min[j].min(row[j]);
                max[j] = max[j].max(row[j]);
            }
        }
        Ok(Scaler { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::data(format!(
                "row has {} dims but the scaler was fit on {}",
                row.len(),
                self.dim()
            )));
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let range = self.max[j] - self.min[j];
                if range > 0.0 {
                    (v - self.min[j]) / range
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}
