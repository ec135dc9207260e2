//! Logistic regression by iteratively reweighted least squares.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::design::DesignMatrix;
use super::report::{Coefficient, FitKind, RegressionReport};
use crate::error::{ArgusError, Result};
use crate::stats::normal_two_sided_p;

pub const MAX_IRLS_ITER: usize = 100;
pub const DEVIANCE_TOL: f64 = 1e-10;
/// Largest coefficient update accepted at convergence.
pub const STEP_TOL: f64 = 1e-10;
/// Coefficients beyond this magnitude on standardized predictors indicate separation.
pub const SEPARATION_BOUND: f64 = 15.0;

/// `log(1 + exp(x))` without overflow.
pub fn log1pexp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Bernoulli deviance `-2 * sum(y*eta - log(1 + e^eta))`.
pub fn deviance(y: &[bool], eta: &DVector<f64>) -> f64 {
    2.0 * y
        .iter()
        .zip(eta.iter())
        .map(|(&yi, &e)| log1pexp(e) - if yi { e } else { 0.0 })
        .sum::<f64>()
}

/// Converged IRLS state.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub beta: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub deviance: f64,
    pub trace: Vec<f64>,
}

/// Weighted cross-product `X' diag(w) X`.
pub(crate) fn weighted_gram(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let p = x.ncols();
    let mut g = DMatrix::zeros(p, p);
    for (i, &wi) in w.iter().enumerate() {
        for a in 0..p {
            let xa = x[(i, a)] * wi;
            for b in 0..=a {
                g[(a, b)] += xa * x[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            g[(b, a)] = g[(a, b)];
        }
    }
    g
}

pub fn irls(y: &[bool], design: &DesignMatrix) -> Result<LogisticFit> {
    let (n, p) = (design.nrows(), design.ncols());
    if y.len() != n {
        return Err(ArgusError::invalid(
            "response length does not match the design",
        ));
    }
    if n <= p {
        return Err(ArgusError::invalid(format!(
            "logistic fit needs more rows ({n}) than columns ({p})"
        )));
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == n {
        return Err(ArgusError::degenerate("response has a single class"));
    }
    design.validate()?;
    let x = &design.x;
    let mut beta = DVector::zeros(p);
    let mut eta = x * &beta;
    let mut dev = deviance(y, &eta);
    let mut trace = vec![dev];
    let mut converged = false;
    for _ in 0..MAX_IRLS_ITER {
        let mu: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let w: Vec<f64> = mu.iter().map(|m| (m * (1.0 - m)).max(1e-300)).collect();
        let resid = DVector::from_iterator(
            n,
            y.iter()
                .zip(&mu)
                .map(|(&yi, m)| f64::from(u8::from(yi)) - m),
        );
        let chol = weighted_gram(x, &w)
            .cholesky()
            .ok_or_else(|| ArgusError::Numerical("singular Fisher information".into()))?;
        let step = chol.solve(&x.tr_mul(&resid));
        let mut scale = 1.0;
        let (new_beta, new_eta, new_dev) = loop {
            let cand = &beta + &step * scale;
            let cand_eta = x * &cand;
            let cand_dev = deviance(y, &cand_eta);
            // Near the optimum the deviance is flat to rounding, so allow ties at that level.
            if cand_dev.is_finite() && cand_dev <= dev + 1e-12 * dev.abs() {
                break (cand, cand_eta, cand_dev);
            }
            scale *= 0.5;
            if scale < 1e-10 {
                break (beta.clone(), eta.clone(), dev);
            }
        };
        let change = (dev - new_dev).abs() / (new_dev.abs() + 0.1);
        let moved = (&new_beta - &beta).amax();
        beta = new_beta;
        eta = new_eta;
        dev = new_dev;
        trace.push(dev);
        if beta.iter().skip(1).any(|b| b.abs() > SEPARATION_BOUND) {
            return Err(separation(design, &beta));
        }
        // The deviance rule alone can stop one Newton step short of full precision.
        if change < DEVIANCE_TOL && moved < STEP_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ArgusError::NonConvergence {
            iterations: MAX_IRLS_ITER,
            trace,
        });
    }
    // Information at the final estimate.
    let w: Vec<f64> = eta
        .iter()
        .map(|&e| {
            let m = sigmoid(e);
            (m * (1.0 - m)).max(1e-300)
        })
        .collect();
    let covariance = weighted_gram(x, &w).try_inverse().ok_or_else(|| {
        ArgusError::Numerical("singular Fisher information at the optimum".into())
    })?;
    Ok(LogisticFit {
        beta,
        covariance,
        deviance: dev,
        trace,
    })
}

fn separation(design: &DesignMatrix, beta: &DVector<f64>) -> ArgusError {
    let columns = design
        .names
        .iter()
        .zip(beta.iter())
        .skip(1)
        .filter(|(_, b)| b.abs() > SEPARATION_BOUND)
        .map(|(n, _)| n.clone())
        .collect();
    ArgusError::Separation { columns }
}

pub(crate) fn wald_table(
    names: &[String],
    beta: &DVector<f64>,
    cov: &DMatrix<f64>,
) -> Vec<Coefficient> {
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let se = cov[(j, j)].sqrt();
            let z = beta[j] / se;
            Coefficient {
                name: name.clone(),
                beta: beta[j],
                se,
                statistic: z,
                p: normal_two_sided_p(z),
                odds_ratio: Some(beta[j].exp()),
                partial_eta2: None,
            }
        })
        .collect()
}

pub fn fit_logistic(y: &[bool], design: &DesignMatrix, response: &str) -> Result<RegressionReport> {
    let fit = irls(y, design)?;
    Ok(RegressionReport {
        model_id: None,
        kind: FitKind::Logistic,
        response: response.to_string(),
        n: y.len(),
        coefficients: wald_table(&design.names, &fit.beta, &fit.covariance),
        random_effects: Vec::new(),
        r2: None,
        adj_r2: None,
        log_likelihood: -0.5 * fit.deviance,
        deviance: Some(fit.deviance),
        iterations: fit.trace.len() - 1,
        metadata: BTreeMap::new(),
    })
}
