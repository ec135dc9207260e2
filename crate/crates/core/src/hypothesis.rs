//! Rank tests used to compare candidate models on fold-level metrics.

use serde::{Deserialize, Serialize};

use crate::error::{ArgusError, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub p: f64,
    pub df: f64,
}

/// Friedman test on a blocks x treatments table (rows are folds, columns are
/// models). Ranks within each row use average ranks, and the statistic is
/// divided by the usual tie correction.
pub fn friedman_test(table: &[Vec<f64>]) -> Result<FriedmanResult> {
    let n = table.len();
    if n < 2 {
        return Err(ArgusError::invalid(
            "Friedman test needs at least two blocks",
        ));
    }
    let k = table[0].len();
    if k < 2 {
        return Err(ArgusError::invalid(
            "Friedman test needs at least two treatments",
        ));
    }
    if table.iter().any(|r| r.len() != k) {
        return Err(ArgusError::invalid("ragged Friedman table"));
    }
    if table.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ArgusError::invalid("non-finite value in Friedman table"));
    }
    let (nf, kf) = (n as f64, k as f64);
    let mut mean_ranks = vec![0.0; k];
    let mut tie_term = 0.0;
    for row in table {
        for (j, r) in stats::average_ranks(row).into_iter().enumerate() {
            mean_ranks[j] += r / nf;
        }
        tie_term += stats::tie_groups(row)
            .iter()
            .map(|&t| (t * t * t - t) as f64)
            .sum::<f64>();
    }
    let center = (kf + 1.0) / 2.0;
    let raw = 12.0 * nf / (kf * (kf + 1.0))
        * mean_ranks.iter().map(|r| (r - center).powi(2)).sum::<f64>();
    let correction = 1.0 - tie_term / (nf * kf * (kf * kf - 1.0));
    let df = kf - 1.0;
    if correction <= 1e-12 {
        // Every row is constant: no evidence of any difference.
        return Ok(FriedmanResult {
            statistic: 0.0,
            p: 1.0,
            df,
        });
    }
    let statistic = raw / correction;
    Ok(FriedmanResult {
        statistic,
        p: stats::chi2_sf(statistic, df),
        df,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Smaller of the positive and negative rank sums.
    pub statistic: f64,
    pub p: f64,
    /// Non-zero differences used.
    pub n: usize,
    pub exact: bool,
    /// Set when every difference was zero.
    pub no_effect: bool,
}

/// Largest sample size for which the exact null distribution is enumerated.
pub const WILCOXON_EXACT_MAX: usize = 25;

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences
/// are dropped. Exact for `n <= 25` (ties handled by enumerating half-ranks),
/// normal approximation with tie-corrected variance above.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(ArgusError::invalid("Wilcoxon samples differ in length"));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(ArgusError::invalid(
            "non-finite difference in Wilcoxon test",
        ));
    }
    let n = diffs.len();
    if n == 0 {
        log::warn!("Wilcoxon: all paired differences are zero");
        return Ok(WilcoxonResult {
            statistic: 0.0,
            p: 1.0,
            n: 0,
            exact: true,
            no_effect: true,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = stats::average_ranks(&abs);
    let w_plus: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let statistic = w_plus.min(w_minus);

    if n <= WILCOXON_EXACT_MAX {
        // Average ranks are multiples of 1/2, so doubled ranks are integers.
        let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
        let max_sum: usize = doubled.iter().sum();
        let mut counts = vec![0f64; max_sum + 1];
        counts[0] = 1.0;
        for &r in &doubled {
            for s in (r..=max_sum).rev() {
                counts[s] += counts[s - r];
            }
        }
        let target = (statistic * 2.0).round() as usize;
        let all = 2f64.powi(n as i32);
        let lower: f64 = counts[..=target].iter().sum::<f64>() / all;
        let p = (2.0 * lower).min(1.0);
        return Ok(WilcoxonResult {
            statistic,
            p,
            n,
            exact: true,
            no_effect: false,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = stats::tie_groups(&abs)
        .iter()
        .map(|&t| (t * t * t - t) as f64)
        .sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (statistic - mean) / var.sqrt();
    Ok(WilcoxonResult {
        statistic,
        p: stats::normal_two_sided_p(z),
        n,
        exact: false,
        no_effect: false,
    })
}
