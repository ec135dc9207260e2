//! Distributional and classification metrics.
//!
//! Brier score is summed over levels, so it ranges over `[0, 2]`.
//! Wasserstein-1 is measured in rating units: `[0, 1]` on the Story support
//! and `[0, 4]` on the 1..5 Likert support.

use serde::{Deserialize, Serialize};

use crate::corpus::RatingDistribution;
use crate::error::{ArgusError, Result};

fn check_support(a: &RatingDistribution, b: &RatingDistribution) -> Result<()> {
    if a.support() != b.support() {
        return Err(ArgusError::invalid(format!(
            "support mismatch: {:?} vs {:?}",
            a.support(),
            b.support()
        )));
    }
    Ok(())
}

pub fn brier(pred: &RatingDistribution, target: &RatingDistribution) -> Result<f64> {
    check_support(pred, target)?;
    Ok(pred
        .probs()
        .iter()
        .zip(target.probs())
        .map(|(p, t)| (p - t).powi(2))
        .sum())
}

/// Earth mover's distance on an ordered support, via the CDF difference.
pub fn wasserstein1(pred: &RatingDistribution, target: &RatingDistribution) -> Result<f64> {
    check_support(pred, target)?;
    let support = pred.support();
    let mut cdf_p = 0.0;
    let mut cdf_t = 0.0;
    let mut total = 0.0;
    for k in 0..support.len() - 1 {
        cdf_p += pred.probs()[k];
        cdf_t += target.probs()[k];
        total += (cdf_p - cdf_t).abs() * (support[k + 1] - support[k]) as f64;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarErrors {
    pub rmse: f64,
    pub mae: f64,
}

pub fn scalar_errors(pred: &[f64], gold: &[f64]) -> Result<ScalarErrors> {
    if pred.len() != gold.len() {
        return Err(ArgusError::invalid(
            "prediction and gold lists differ in length",
        ));
    }
    if pred.is_empty() {
        return Err(ArgusError::invalid("scalar errors of an empty list"));
    }
    let n = pred.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, g) in pred.iter().zip(gold) {
        se += (p - g).powi(2);
        ae += (p - g).abs();
    }
    Ok(ScalarErrors {
        rmse: (se / n).sqrt(),
        mae: ae / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    /// F1 of the positive class.
    pub f1: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

fn f1_for(pred: &[bool], gold: &[bool], class: bool) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &g) in pred.iter().zip(gold) {
        match (p == class, g == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        log::warn!("F1 for class {class} is ill-defined (zero division); reported as 0");
        return 0.0;
    }
    2.0 * tp as f64 / denom as f64
}

pub fn classification_report(pred: &[bool], gold: &[bool]) -> Result<ClassificationReport> {
    if pred.len() != gold.len() {
        return Err(ArgusError::invalid(
            "prediction and gold lists differ in length",
        ));
    }
    if pred.is_empty() {
        return Err(ArgusError::invalid(
            "classification report of an empty list",
        ));
    }
    let n = pred.len() as f64;
    let accuracy = pred.iter().zip(gold).filter(|(p, g)| p == g).count() as f64 / n;
    let f1_pos = f1_for(pred, gold, true);
    let f1_neg = f1_for(pred, gold, false);
    let support_pos = gold.iter().filter(|&&g| g).count() as f64;
    let support_neg = n - support_pos;
    Ok(ClassificationReport {
        accuracy,
        f1: f1_pos,
        macro_f1: (f1_pos + f1_neg) / 2.0,
        weighted_f1: (f1_pos * support_pos + f1_neg * support_neg) / n,
    })
}

/// Negative log-likelihood of a soft target under a predicted distribution,
/// averaged over items.
pub fn mean_cross_entropy(
    preds: &[RatingDistribution],
    targets: &[RatingDistribution],
) -> Result<f64> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(ArgusError::invalid(
            "cross-entropy needs equal-length non-empty lists",
        ));
    }
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        check_support(p, t)?;
        total -= t
            .probs()
            .iter()
            .zip(p.probs())
            .filter(|(tk, _)| **tk > 0.0)
            .map(|(tk, pk)| tk * pk.max(1e-300).ln())
            .sum::<f64>();
    }
    Ok(total / preds.len() as f64)
}

/// Full evaluation of predicted distributions against gold distributions:
/// distributional metrics, scalar errors on expected scores, and binary
/// metrics after thresholding expected scores at `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionEvaluation {
    pub n: usize,
    pub brier: f64,
    pub wasserstein: f64,
    pub rmse: f64,
    pub mae: f64,
    pub binary: ClassificationReport,
}

pub fn evaluate_distributions(
    preds: &[RatingDistribution],
    gold: &[RatingDistribution],
    threshold: f64,
) -> Result<DistributionEvaluation> {
    if preds.len() != gold.len() || preds.is_empty() {
        return Err(ArgusError::invalid(
            "evaluation needs equal-length non-empty lists",
        ));
    }
    let n = preds.len() as f64;
    let mut b = 0.0;
    let mut w = 0.0;
    for (p, g) in preds.iter().zip(gold) {
        b += brier(p, g)?;
        w += wasserstein1(p, g)?;
    }
    let pe: Vec<f64> = preds.iter().map(RatingDistribution::expected).collect();
    let ge: Vec<f64> = gold.iter().map(RatingDistribution::expected).collect();
    let errs = scalar_errors(&pe, &ge)?;
    let pb: Vec<bool> = pe.iter().map(|&v| v >= threshold).collect();
    let gb: Vec<bool> = ge.iter().map(|&v| v >= threshold).collect();
    Ok(DistributionEvaluation {
        n: preds.len(),
        brier: b / n,
        wasserstein: w / n,
        rmse: errs.rmse,
        mae: errs.mae,
        binary: classification_report(&pb, &gb)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(support: &[i64], probs: &[f64]) -> RatingDistribution {
        RatingDistribution::new(support.to_vec(), probs.to_vec()).unwrap()
    }

    const LIKERT: [i64; 5] = [1, 2, 3, 4, 5];

    #[test]
    fn brier_examples() {
        let a = dist(&LIKERT, &[0.1, 0.2, 0.3, 0.2, 0.2]);
        assert_eq!(brier(&a, &a).unwrap(), 0.0);
        let lo = RatingDistribution::one_hot(LIKERT.to_vec(), 1).unwrap();
        let hi = RatingDistribution::one_hot(LIKERT.to_vec(), 5).unwrap();
        assert_eq!(brier(&lo, &hi).unwrap(), 2.0);
        let half = dist(&[0, 1], &[0.5, 0.5]);
        let zero = dist(&[0, 1], &[1.0, 0.0]);
        assert!((brier(&half, &zero).unwrap() - 0.5).abs() < 1e-15);
        assert!(brier(&half, &lo).is_err());
    }

    #[test]
    fn wasserstein_examples() {
        let lo = RatingDistribution::one_hot(LIKERT.to_vec(), 1).unwrap();
        let hi = RatingDistribution::one_hot(LIKERT.to_vec(), 5).unwrap();
        assert_eq!(wasserstein1(&lo, &lo).unwrap(), 0.0);
        assert_eq!(wasserstein1(&lo, &hi).unwrap(), 4.0);
        let story = dist(&[0, 1], &[0.2, 0.8]);
        assert!(wasserstein1(&story, &lo).is_err());
    }

    #[test]
    fn scalar_error_examples() {
        let e = scalar_errors(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((e.rmse, e.mae), (0.0, 0.0));
        let e = scalar_errors(&[1.0, 3.0], &[2.0, 4.0]).unwrap();
        assert_eq!((e.rmse, e.mae), (1.0, 1.0));
        let e = scalar_errors(&[0.0, 4.0], &[0.0, 0.0]).unwrap();
        assert!((e.rmse - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(e.mae, 2.0);
        assert!(scalar_errors(&[], &[]).is_err());
    }

    #[test]
    fn classification_examples() {
        let gold = [true, false, true, false];
        let r = classification_report(&gold, &gold).unwrap();
        assert_eq!(
            (r.accuracy, r.f1, r.macro_f1, r.weighted_f1),
            (1.0, 1.0, 1.0, 1.0)
        );
        let r = classification_report(&[false; 4], &gold).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.f1, 0.0);
        // tp = 2, fp = 1, fn = 1, tn = 6
        let pred = [
            true, true, true, false, false, false, false, false, false, false,
        ];
        let gold = [
            true, true, false, true, false, false, false, false, false, false,
        ];
        let r = classification_report(&pred, &gold).unwrap();
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    fn arb_dist(levels: usize) -> impl Strategy<Value = RatingDistribution> {
        prop::collection::vec(0.0f64..1.0, levels).prop_filter_map("zero mass", move |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-6)
                .then(|| RatingDistribution::from_normalized((1..=levels as i64).collect(), w))
        })
    }

    proptest! {
        #[test]
        fn symmetry_and_identity(a in arb_dist(5), b in arb_dist(5)) {
            prop_assert!((brier(&a, &b).unwrap() - brier(&b, &a).unwrap()).abs() < 1e-15);
            prop_assert!((wasserstein1(&a, &b).unwrap() - wasserstein1(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert_eq!(brier(&a, &a).unwrap(), 0.0);
            prop_assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
        }

        #[test]
        fn wasserstein_triangle(a in arb_dist(5), b in arb_dist(5), c in arb_dist(5)) {
            let ab = wasserstein1(&a, &b).unwrap();
            let bc = wasserstein1(&b, &c).unwrap();
            let ac = wasserstein1(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn mae_never_exceeds_rmse(pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..50)) {
            let (p, g): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let e = scalar_errors(&p, &g).unwrap();
            prop_assert!(e.mae <= e.rmse + 1e-12);
        }

        #[test]
        fn macro_f1_label_swap(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..40)) {
            let (p, g): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
            let a = classification_report(&p, &g).unwrap();
            let p2: Vec<bool> = p.iter().map(|v| !v).collect();
            let g2: Vec<bool> = g.iter().map(|v| !v).collect();
            let b = classification_report(&p2, &g2).unwrap();
            prop_assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
        }
    }
}
