//! Import of prediction distributions produced by external scorers.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::Deserialize;

use crate::corpus::{Feature, RatingDistribution};
use crate::error::{ArgusError, Result};

const EXACT_TOL: f64 = 1e-6;
const RENORM_TOL: f64 = 1e-3;

#[derive(Deserialize)]
struct PredictionLine {
    item_id: String,
    feature: Feature,
    probs: Vec<f64>,
}

pub type PredictionTable = BTreeMap<(String, Feature), RatingDistribution>;

/// Reads `{"item_id", "feature", "probs"}` lines. Probabilities are listed in
/// support order. Mass off by more than 1e-6 but at most 1e-3 is renormalized.
pub fn import_predictions<R: BufRead>(reader: R) -> Result<PredictionTable> {
    let mut table = PredictionTable::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionLine = serde_json::from_str(&line).map_err(|e| ArgusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let bad = |message: String| ArgusError::InvalidRecord {
            line: line_no,
            message,
        };
        let support = rec.feature.support();
        if rec.probs.len() != support.len() {
            return Err(bad(format!(
                "{} expects {} probabilities, got {}",
                rec.feature,
                support.len(),
                rec.probs.len()
            )));
        }
        if rec.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(bad("probabilities must be finite and non-negative".into()));
        }
        let mass: f64 = rec.probs.iter().sum();
        let probs = if (mass - 1.0).abs() <= EXACT_TOL {
            rec.probs
        } else if (mass - 1.0).abs() <= RENORM_TOL {
            log::warn!("line {line_no}: renormalizing probabilities with mass {mass}");
            rec.probs.iter().map(|p| p / mass).collect()
        } else {
            return Err(bad(format!("probabilities sum to {mass}")));
        };
        let dist = RatingDistribution::new(support, probs).map_err(|e| bad(e.to_string()))?;
        let key = (rec.item_id, rec.feature);
        if table.contains_key(&key) {
            return Err(ArgusError::DuplicateKey {
                line: line_no,
                key: format!("{}/{}", key.0, key.1),
            });
        }
        table.insert(key, dist);
    }
    Ok(table)
}
