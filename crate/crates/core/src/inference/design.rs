//! Design matrices, z-standardization and grouping factors.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ArgusError, Result};

/// Recorded standardization of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZParams {
    pub mean: f64,
    pub sd: f64,
}

impl ZParams {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.sd
    }
}

/// Standardizes to mean 0 and sample SD 1 (n - 1 denominator).
pub fn zscore(name: &str, values: &[f64]) -> Result<(Vec<f64>, ZParams)> {
    if values.len() < 2 {
        return Err(ArgusError::invalid(format!(
            "column {name} needs at least two values to standardize"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ArgusError::invalid(format!(
            "column {name} has non-finite values"
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return Err(ArgusError::invalid(format!(
            "column {name} has zero variance"
        )));
    }
    let p = ZParams { mean, sd };
    Ok((values.iter().map(|&v| p.apply(v)).collect(), p))
}

/// Dense fixed-effect design with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
}

impl DesignMatrix {
    /// Intercept column followed by `columns` in the given order.
    pub fn with_intercept(columns: &[(String, Vec<f64>)]) -> Result<Self> {
        let n = columns
            .first()
            .map(|c| c.1.len())
            .ok_or_else(|| ArgusError::invalid("no predictors"))?;
        let mut names = vec!["Intercept".to_string()];
        for (name, col) in columns {
            if col.len() != n {
                return Err(ArgusError::invalid(format!(
                    "column {name} has {} rows, expected {n}",
                    col.len()
                )));
            }
            if names.contains(name) {
                return Err(ArgusError::invalid(format!("duplicate column {name}")));
            }
            names.push(name.clone());
        }
        Self::intercept_only(n).map(|m| {
            let mut x = m.x.resize_horizontally(names.len(), 0.0);
            for (j, (_, col)) in columns.iter().enumerate() {
                x.set_column(j + 1, &DVector::from_column_slice(col));
            }
            Self { names, x }
        })
    }

    pub fn intercept_only(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(ArgusError::invalid("empty design"));
        }
        Ok(Self {
            names: vec!["Intercept".into()],
            x: DMatrix::from_element(n, 1, 1.0),
        })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(ArgusError::invalid("empty design"));
        }
        if rows.iter().any(|r| r.len() != names.len()) {
            return Err(ArgusError::invalid("ragged design rows"));
        }
        let x = DMatrix::from_fn(rows.len(), names.len(), |i, j| rows[i][j]);
        Ok(Self { names, x })
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(ArgusError::invalid("design matrix has non-finite cells"));
        }
        let collinear = collinear_columns(self);
        if !collinear.is_empty() {
            return Err(ArgusError::RankDeficient { columns: collinear });
        }
        Ok(())
    }
}

/// Columns that lie in the span of the columns before them, found by
/// modified Gram-Schmidt with a relative tolerance.
pub fn collinear_columns(design: &DesignMatrix) -> Vec<String> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut out = Vec::new();
    for j in 0..design.ncols() {
        let mut v = design.x.column(j).into_owned();
        let norm0 = v.norm();
        for q in &basis {
            let proj = q.dot(&v);
            v.axpy(-proj, q, 1.0);
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= 1e-9 * norm0 {
            out.push(design.names[j].clone());
        } else {
            basis.push(v / norm);
        }
    }
    out
}

/// A grouping factor with levels indexed densely in sorted label order, so
/// the indexing does not depend on row order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    pub name: String,
    pub levels: Vec<String>,
    pub index: Vec<usize>,
}

impl Grouping {
    pub fn from_labels(name: impl Into<String>, labels: &[String]) -> Result<Self> {
        let name = name.into();
        if labels.is_empty() {
            return Err(ArgusError::invalid(format!("grouping {name} is empty")));
        }
        let mut ids: BTreeMap<&str, usize> = labels.iter().map(|l| (l.as_str(), 0)).collect();
        for (k, v) in ids.values_mut().enumerate() {
            *v = k;
        }
        let index = labels.iter().map(|l| ids[l.as_str()]).collect();
        let levels = ids.keys().map(|s| s.to_string()).collect();
        Ok(Self {
            name,
            levels,
            index,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }
}
