//! Ordinary least squares.

use std::collections::BTreeMap;

use nalgebra::DVector;

use super::design::DesignMatrix;
use super::report::{Coefficient, FitKind, RegressionReport};
use crate::error::{ArgusError, Result};
use crate::stats::t_two_sided_p;

pub fn fit_ols(y: &[f64], design: &DesignMatrix, response: &str) -> Result<RegressionReport> {
    let (n, p) = (design.nrows(), design.ncols());
    if y.len() != n {
        return Err(ArgusError::invalid(
            "response length does not match the design",
        ));
    }
    if n <= p {
        return Err(ArgusError::invalid(format!(
            "OLS needs more rows ({n}) than columns ({p})"
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(ArgusError::invalid("response has non-finite values"));
    }
    design.validate()?;
    let x = &design.x;
    let yv = DVector::from_column_slice(y);
    let xtx = x.tr_mul(x);
    let chol = xtx.cholesky().ok_or_else(|| ArgusError::RankDeficient {
        columns: design.names.clone(),
    })?;
    let beta = chol.solve(&x.tr_mul(&yv));
    let resid = &yv - x * &beta;
    let rss = resid.norm_squared();
    let mean = yv.mean();
    let tss = yv.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    let df = (n - p) as f64;
    let sigma2 = rss / df;
    let inv = chol.inverse();
    let coefficients = design
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let se = (sigma2 * inv[(j, j)]).sqrt();
            let (t, pval) = if se > 0.0 {
                let t = beta[j] / se;
                (t, t_two_sided_p(t, df))
            } else {
                // Exact fit: the estimate carries no sampling error.
                (
                    if beta[j] == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY.copysign(beta[j])
                    },
                    if beta[j] == 0.0 { 1.0 } else { 0.0 },
                )
            };
            let eta = if t.is_finite() {
                t * t / (t * t + df)
            } else {
                1.0
            };
            Coefficient {
                name: name.clone(),
                beta: beta[j],
                se,
                statistic: t,
                p: pval,
                odds_ratio: None,
                partial_eta2: Some(eta),
            }
        })
        .collect();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let adj = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df;
    let nf = n as f64;
    let ll = if rss > 0.0 {
        -0.5 * nf * ((2.0 * std::f64::consts::PI * rss / nf).ln() + 1.0)
    } else {
        f64::INFINITY
    };
    Ok(RegressionReport {
        model_id: None,
        kind: FitKind::Ols,
        response: response.to_string(),
        n,
        coefficients,
        random_effects: Vec::new(),
        r2: Some(r2),
        adj_r2: Some(adj),
        log_likelihood: ll,
        deviance: Some(rss),
        iterations: 1,
        metadata: BTreeMap::new(),
    })
}
