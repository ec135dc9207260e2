//! Temperature scaling.
//!
//! A single positive temperature divides every logit before the softmax. It
//! is fitted on a held-out calibration split by minimizing the mean
//! cross-entropy against the full soft targets.

use serde::{Deserialize, Serialize};

use crate::corpus::RatingDistribution;
use crate::error::{ArgusError, Result};

pub const MIN_CALIBRATION_ITEMS: usize = 10;
const LN_T_LOW: f64 = -2.995_732_273_553_991; // ln 0.05
const LN_T_HIGH: f64 = 2.995_732_273_553_991; // ln 20
const LN_T_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureFit {
    pub temperature: f64,
    pub nll_before: f64,
    pub nll_after: f64,
    /// The optimum sits on the edge of the search interval.
    pub at_boundary: bool,
    pub split_seed: Option<u64>,
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

pub fn apply_temperature(
    logits: &[f64],
    temperature: f64,
    support: &[i64],
) -> Result<RatingDistribution> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(ArgusError::invalid(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if logits.len() != support.len() {
        return Err(ArgusError::invalid("logit count does not match support"));
    }
    let scaled: Vec<f64> = logits.iter().map(|z| z / temperature).collect();
    Ok(RatingDistribution::from_normalized(
        support.to_vec(),
        softmax(&scaled),
    ))
}

/// Mean cross-entropy of `targets` under `softmax(logits / t)`.
pub fn temperature_nll(logits: &[Vec<f64>], targets: &[RatingDistribution], t: f64) -> f64 {
    let mut total = 0.0;
    for (z, target) in logits.iter().zip(targets) {
        let scaled: Vec<f64> = z.iter().map(|v| v / t).collect();
        let lp = log_softmax(&scaled);
        total -= target
            .probs()
            .iter()
            .zip(&lp)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, l)| p * l)
            .sum::<f64>();
    }
    total / logits.len() as f64
}

/// Golden-section search over `ln T` in `[ln 0.05, ln 20]`.
pub fn fit_temperature(
    logits: &[Vec<f64>],
    targets: &[RatingDistribution],
) -> Result<TemperatureFit> {
    if logits.len() != targets.len() {
        return Err(ArgusError::invalid("logits and targets differ in length"));
    }
    if logits.len() < MIN_CALIBRATION_ITEMS {
        return Err(ArgusError::invalid(format!(
            "temperature scaling needs at least {MIN_CALIBRATION_ITEMS} calibration items, got {}",
            logits.len()
        )));
    }
    for (z, t) in logits.iter().zip(targets) {
        if z.len() != t.len() {
            return Err(ArgusError::invalid(
                "logit width does not match target support",
            ));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(ArgusError::invalid("non-finite logit"));
        }
    }
    let objective = |ln_t: f64| -> Result<f64> {
        let v = temperature_nll(logits, targets, ln_t.exp());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ArgusError::Numerical(format!(
                "non-finite calibration objective at T = {}",
                ln_t.exp()
            )))
        }
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (LN_T_LOW, LN_T_HIGH);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(c)?;
    let mut fd = objective(d)?;
    while b - a > LN_T_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d)?;
        }
    }
    let mut ln_t = (a + b) / 2.0;
    let mut best = objective(ln_t)?;
    // The interval endpoints themselves are never probed by the bracketing.
    for edge in [LN_T_LOW, LN_T_HIGH] {
        let v = objective(edge)?;
        if v < best {
            best = v;
            ln_t = edge;
        }
    }
    let nll_before = objective(0.0)?;
    if best > nll_before {
        ln_t = 0.0;
        best = nll_before;
    }
    let at_boundary = ln_t - LN_T_LOW < 2.0 * LN_T_TOL || LN_T_HIGH - ln_t < 2.0 * LN_T_TOL;
    if at_boundary {
        log::warn!(
            "temperature fit reached the search boundary (T = {:.4})",
            ln_t.exp()
        );
    }
    Ok(TemperatureFit {
        temperature: ln_t.exp(),
        nll_before,
        nll_after: best,
        at_boundary,
        split_seed: None,
    })
}
