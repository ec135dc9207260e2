//! Nested cross-validation, model comparison and final calibrated retraining.
//!
//! Outer folds estimate generalization for each candidate model; inner folds
//! pick that candidate's hyperparameters within each outer training set.
//! Candidates are compared by their mean rank across metrics, with Friedman
//! and pairwise Wilcoxon tests on the fold-level values. The winner is
//! retrained on 80% of the data with the mean (continuous) or mode (discrete)
//! of its per-fold hyperparameters and temperature-scaled on the other 20%.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::{featurize, FeatureConfig, FeatureVector};
use super::model::{
    default_grid, train_hard, train_soft, Hyper, LabelMode, SoftClassifier, TrainingExample,
};
use super::split::{complement, stratified_kfold, stratified_split};
use crate::calibration::{fit_temperature, TemperatureFit};
use crate::corpus::{binarize, AnnotationStore, Feature, RatingDistribution};
use crate::error::{ArgusError, Result};
use crate::hypothesis::{friedman_test, wilcoxon_signed_rank, FriedmanResult, WilcoxonResult};
use crate::metrics::{brier, classification_report, scalar_errors, wasserstein1};
use crate::stats;

/// One annotated item: text, soft target, and the binarized label used for
/// stratification (and as the target in hard mode).
#[derive(Debug, Clone, PartialEq)]
pub struct CvItem {
    pub id: String,
    pub text: String,
    pub target: RatingDistribution,
    pub label: bool,
}

/// One item per annotated text: soft label plus binarized mean rating.
pub fn items_from_store(store: &AnnotationStore, feature: Feature) -> Result<Vec<CvItem>> {
    store
        .items_with(feature)
        .into_iter()
        .map(|id| {
            Ok(CvItem {
                id: id.to_string(),
                text: store.text(id).unwrap_or("").to_string(),
                target: store.soft_label(id, feature)?,
                label: binarize(store.mean_rating(id, feature)?, feature)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateModel {
    pub id: String,
    pub features: FeatureConfig,
    pub grid: Vec<Hyper>,
}

/// Word n-grams plus character n-grams, word n-grams only, character n-grams only.
pub fn default_candidates() -> Vec<CandidateModel> {
    vec![
        CandidateModel {
            id: "word+char".into(),
            features: FeatureConfig::default(),
            grid: default_grid(),
        },
        CandidateModel {
            id: "word".into(),
            features: FeatureConfig::words_only(),
            grid: default_grid(),
        },
        CandidateModel {
            id: "char".into(),
            features: FeatureConfig::chars_only(),
            grid: default_grid(),
        },
    ]
}

/// Word and character n-grams with two regularization strengths and shorter
/// training; for quick runs on small corpora.
pub fn compact_candidates() -> Vec<CandidateModel> {
    let grid = vec![
        Hyper {
            lambda: 1e-3,
            learning_rate: 0.5,
            epochs: 100,
        },
        Hyper {
            lambda: 1e-2,
            learning_rate: 0.5,
            epochs: 100,
        },
    ];
    vec![
        CandidateModel {
            id: "word".into(),
            features: FeatureConfig::words_only(),
            grid: grid.clone(),
        },
        CandidateModel {
            id: "char".into(),
            features: FeatureConfig::chars_only(),
            grid,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub feature: Feature,
    pub mode: LabelMode,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub seed: u64,
    /// Share of the data used to retrain the selected model; the rest calibrates it.
    pub retrain_fraction: f64,
}

impl CvConfig {
    pub fn new(feature: Feature, mode: LabelMode, seed: u64) -> Self {
        Self {
            feature,
            mode,
            outer_folds: 5,
            inner_folds: 3,
            seed,
            retrain_fraction: 0.8,
        }
    }
}

pub const SOFT_METRICS: [&str; 4] = ["brier", "wasserstein", "rmse", "mae"];
pub const HARD_METRICS: [&str; 4] = ["accuracy", "f1", "macro_f1", "weighted_f1"];

pub fn metric_names(mode: LabelMode) -> &'static [&'static str; 4] {
    match mode {
        LabelMode::Soft => &SOFT_METRICS,
        LabelMode::Hard => &HARD_METRICS,
    }
}

pub fn higher_is_better(metric: &str) -> bool {
    HARD_METRICS.contains(&metric)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub model_id: String,
    pub fold: usize,
    pub hyper: Hyper,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseWilcoxon {
    pub metric: String,
    pub model_a: String,
    pub model_b: String,
    pub result: WilcoxonResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub feature: Feature,
    pub mode: LabelMode,
    pub stratified_on: String,
    pub n_items: usize,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub seed: u64,
    pub fold_results: Vec<FoldResult>,
    /// Mean outer-fold value per model and metric.
    pub mean_metrics: BTreeMap<String, BTreeMap<String, f64>>,
    /// Mean rank across metrics, in candidate order.
    pub mean_ranks: Vec<(String, f64)>,
    pub selected_model: String,
    pub friedman: BTreeMap<String, FriedmanResult>,
    pub wilcoxon: Vec<PairwiseWilcoxon>,
    pub final_hyper: Hyper,
    pub n_retrain: usize,
    pub n_calibration: usize,
    pub calibration: TemperatureFit,
    pub calibration_targets: String,
}

pub struct CvOutcome {
    pub report: CvReport,
    pub model: SoftClassifier,
}

fn examples(features: &[FeatureVector], items: &[CvItem], idx: &[usize]) -> Vec<TrainingExample> {
    idx.iter()
        .map(|&i| TrainingExample {
            features: features[i].clone(),
            target: items[i].target.clone(),
        })
        .collect()
}

fn fit(
    cfg: &CvConfig,
    features: &[FeatureVector],
    items: &[CvItem],
    idx: &[usize],
    fc: &FeatureConfig,
    hyper: Hyper,
) -> Result<SoftClassifier> {
    match cfg.mode {
        LabelMode::Soft => train_soft(
            cfg.feature,
            &examples(features, items, idx),
            fc,
            hyper,
            cfg.seed,
        ),
        LabelMode::Hard => {
            let first = items[idx[0]].label;
            if idx.iter().all(|&i| items[i].label == first) {
                return Err(ArgusError::invalid(
                    "training fold contains a single class under hard labels",
                ));
            }
            let data: Vec<(FeatureVector, bool)> = idx
                .iter()
                .map(|&i| (features[i].clone(), items[i].label))
                .collect();
            train_hard(cfg.feature, &data, fc, hyper, cfg.seed)
        }
    }
}

/// Metric values of `model` on the items in `idx`.
pub fn evaluate(
    model: &SoftClassifier,
    mode: LabelMode,
    features: &[FeatureVector],
    items: &[CvItem],
    idx: &[usize],
) -> Result<BTreeMap<String, f64>> {
    let preds: Vec<RatingDistribution> = idx
        .iter()
        .map(|&i| model.predict_features(&features[i]))
        .collect();
    let mut out = BTreeMap::new();
    match mode {
        LabelMode::Soft => {
            let n = idx.len() as f64;
            let mut b = 0.0;
            let mut w = 0.0;
            for (p, &i) in preds.iter().zip(idx) {
                b += brier(p, &items[i].target)?;
                w += wasserstein1(p, &items[i].target)?;
            }
            let pe: Vec<f64> = preds.iter().map(RatingDistribution::expected).collect();
            let ge: Vec<f64> = idx.iter().map(|&i| items[i].target.expected()).collect();
            let e = scalar_errors(&pe, &ge)?;
            out.insert("brier".into(), b / n);
            out.insert("wasserstein".into(), w / n);
            out.insert("rmse".into(), e.rmse);
            out.insert("mae".into(), e.mae);
        }
        LabelMode::Hard => {
            let threshold = model.feature().threshold();
            let pb: Vec<bool> = preds.iter().map(|p| p.expected() >= threshold).collect();
            let gb: Vec<bool> = idx.iter().map(|&i| items[i].label).collect();
            let r = classification_report(&pb, &gb)?;
            out.insert("accuracy".into(), r.accuracy);
            out.insert("f1".into(), r.f1);
            out.insert("macro_f1".into(), r.macro_f1);
            out.insert("weighted_f1".into(), r.weighted_f1);
        }
    }
    Ok(out)
}

/// Mean rank across metrics for each row of `values` (rows are candidates,
/// each a metric -> value map). Rank 1 is best; ties share average ranks.
pub fn mean_rank_across_metrics(values: &[BTreeMap<String, f64>], metrics: &[&str]) -> Vec<f64> {
    let mut total = vec![0.0; values.len()];
    for m in metrics {
        let col: Vec<f64> = values
            .iter()
            .map(|v| {
                let x = v[*m];
                if higher_is_better(m) {
                    -x
                } else {
                    x
                }
            })
            .collect();
        for (t, r) in total.iter_mut().zip(stats::average_ranks(&col)) {
            *t += r / metrics.len() as f64;
        }
    }
    total
}

/// Index of the smallest value; the earliest wins ties.
pub fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

fn mean_maps(maps: &[BTreeMap<String, f64>]) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for m in maps {
        for (k, v) in m {
            *out.entry(k.clone()).or_default() += v / maps.len() as f64;
        }
    }
    out
}

/// Inner-loop hyperparameter choice on the training part of one outer fold.
fn select_hyper(
    cfg: &CvConfig,
    cand: &CandidateModel,
    features: &[FeatureVector],
    items: &[CvItem],
    train_idx: &[usize],
    fold_seed: u64,
) -> Result<Hyper> {
    if cand.grid.len() == 1 {
        return Ok(cand.grid[0]);
    }
    let labels: Vec<bool> = train_idx.iter().map(|&i| items[i].label).collect();
    let inner = stratified_kfold(&labels, cfg.inner_folds, fold_seed)?;
    let scores: Vec<BTreeMap<String, f64>> = cand
        .grid
        .par_iter()
        .map(|&hyper| {
            let per_fold = inner
                .iter()
                .map(|test_local| {
                    let test: Vec<usize> = test_local.iter().map(|&j| train_idx[j]).collect();
                    let fit_idx: Vec<usize> = complement(train_idx.len(), test_local)
                        .into_iter()
                        .map(|j| train_idx[j])
                        .collect();
                    let model = fit(cfg, features, items, &fit_idx, &cand.features, hyper)?;
                    evaluate(&model, cfg.mode, features, items, &test)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(mean_maps(&per_fold))
        })
        .collect::<Result<_>>()?;
    let ranks = mean_rank_across_metrics(&scores, metric_names(cfg.mode));
    Ok(cand.grid[argmin_first(&ranks)])
}

/// Mean learning rate and lambda, modal epoch count (earliest on ties).
pub fn aggregate_hypers(hypers: &[Hyper]) -> Hyper {
    let n = hypers.len() as f64;
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for h in hypers {
        match counts.iter_mut().find(|(e, _)| *e == h.epochs) {
            Some(c) => c.1 += 1,
            None => counts.push((h.epochs, 1)),
        }
    }
    let mut mode = counts[0];
    for c in &counts {
        if c.1 > mode.1 {
            mode = *c;
        }
    }
    Hyper {
        lambda: hypers.iter().map(|h| h.lambda).sum::<f64>() / n,
        learning_rate: hypers.iter().map(|h| h.learning_rate).sum::<f64>() / n,
        epochs: mode.0,
    }
}

pub const MIN_ITEMS_PER_CLASS: usize = 15;

pub fn nested_cv(
    items: &[CvItem],
    candidates: &[CandidateModel],
    cfg: &CvConfig,
) -> Result<CvOutcome> {
    if candidates.is_empty() {
        return Err(ArgusError::invalid("empty model grid"));
    }
    if candidates.iter().any(|c| c.grid.is_empty()) {
        return Err(ArgusError::invalid(
            "candidate with an empty hyperparameter grid",
        ));
    }
    if cfg.mode == LabelMode::Hard && !cfg.feature.is_story() {
        return Err(ArgusError::invalid(
            "hard-label training is defined for Story only",
        ));
    }
    let support = cfg.feature.support();
    if items
        .iter()
        .any(|it| it.target.support() != support.as_slice())
    {
        return Err(ArgusError::invalid(format!(
            "targets must lie on the {} support",
            cfg.feature
        )));
    }
    let positives = items.iter().filter(|i| i.label).count();
    let negatives = items.len() - positives;
    if positives.min(negatives) < MIN_ITEMS_PER_CLASS {
        return Err(ArgusError::invalid(format!(
            "nested CV needs at least {MIN_ITEMS_PER_CLASS} items per class (got {positives} positive, {negatives} negative)"
        )));
    }

    let labels: Vec<bool> = items.iter().map(|i| i.label).collect();
    let outer = stratified_kfold(&labels, cfg.outer_folds, cfg.seed)?;
    let metrics = metric_names(cfg.mode);

    let feature_sets: Vec<Vec<FeatureVector>> = candidates
        .iter()
        .map(|c| {
            items
                .par_iter()
                .map(|it| featurize(&it.text, &c.features))
                .collect()
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..outer.len()).map(move |f| (c, f)))
        .collect();
    let fold_results: Vec<FoldResult> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let cand = &candidates[c];
            let feats = &feature_sets[c];
            let test = &outer[f];
            let train = complement(items.len(), test);
            let fold_seed = cfg.seed.wrapping_add(1 + f as u64);
            let hyper = select_hyper(cfg, cand, feats, items, &train, fold_seed)?;
            let model = fit(cfg, feats, items, &train, &cand.features, hyper)?;
            let metrics = evaluate(&model, cfg.mode, feats, items, test)?;
            Ok(FoldResult {
                model_id: cand.id.clone(),
                fold: f,
                hyper,
                metrics,
            })
        })
        .collect::<Result<_>>()?;

    // Fold results are in (candidate, fold) job order.
    let by_candidate: Vec<&[FoldResult]> = (0..candidates.len())
        .map(|c| &fold_results[c * outer.len()..(c + 1) * outer.len()])
        .collect();

    let mean_metrics_list: Vec<BTreeMap<String, f64>> = by_candidate
        .iter()
        .map(|rs| mean_maps(&rs.iter().map(|r| r.metrics.clone()).collect::<Vec<_>>()))
        .collect();
    let ranks = mean_rank_across_metrics(&mean_metrics_list, metrics);
    let winner = argmin_first(&ranks);

    let mut friedman = BTreeMap::new();
    let mut wilcoxon = Vec::new();
    if candidates.len() >= 2 {
        for m in metrics {
            let table: Vec<Vec<f64>> = (0..outer.len())
                .map(|f| by_candidate.iter().map(|rs| rs[f].metrics[*m]).collect())
                .collect();
            friedman.insert(m.to_string(), friedman_test(&table)?);
            for a in 0..candidates.len() {
                for b in (a + 1)..candidates.len() {
                    let va: Vec<f64> = by_candidate[a].iter().map(|r| r.metrics[*m]).collect();
                    let vb: Vec<f64> = by_candidate[b].iter().map(|r| r.metrics[*m]).collect();
                    wilcoxon.push(PairwiseWilcoxon {
                        metric: m.to_string(),
                        model_a: candidates[a].id.clone(),
                        model_b: candidates[b].id.clone(),
                        result: wilcoxon_signed_rank(&va, &vb)?,
                    });
                }
            }
        }
    }

    let chosen = &candidates[winner];
    let final_hyper = aggregate_hypers(
        &by_candidate[winner]
            .iter()
            .map(|r| r.hyper)
            .collect::<Vec<_>>(),
    );
    let (model, calibration, n_retrain, n_calibration) =
        retrain_and_calibrate(items, &chosen.features, final_hyper, cfg)?;

    let report = CvReport {
        feature: cfg.feature,
        mode: cfg.mode,
        stratified_on: "binarized label".into(),
        n_items: items.len(),
        outer_folds: cfg.outer_folds,
        inner_folds: cfg.inner_folds,
        seed: cfg.seed,
        mean_metrics: candidates
            .iter()
            .map(|c| c.id.clone())
            .zip(mean_metrics_list)
            .collect(),
        mean_ranks: candidates.iter().map(|c| c.id.clone()).zip(ranks).collect(),
        selected_model: chosen.id.clone(),
        friedman,
        wilcoxon,
        final_hyper,
        n_retrain,
        n_calibration,
        calibration,
        calibration_targets: "soft".into(),
        fold_results,
    };
    Ok(CvOutcome { report, model })
}

/// Trains on a stratified `retrain_fraction` share and fits the temperature
/// on the remainder against the soft targets.
pub fn retrain_and_calibrate(
    items: &[CvItem],
    features: &FeatureConfig,
    hyper: Hyper,
    cfg: &CvConfig,
) -> Result<(SoftClassifier, TemperatureFit, usize, usize)> {
    let labels: Vec<bool> = items.iter().map(|i| i.label).collect();
    let split = stratified_split(&labels, cfg.retrain_fraction, cfg.seed)?;
    let feats: Vec<FeatureVector> = items
        .par_iter()
        .map(|it| featurize(&it.text, features))
        .collect();
    let mut model = fit(cfg, &feats, items, &split.train, features, hyper)?;
    let logits: Vec<Vec<f64>> = split
        .heldout
        .iter()
        .map(|&i| model.logits(&feats[i]))
        .collect();
    let targets: Vec<RatingDistribution> = split
        .heldout
        .iter()
        .map(|&i| items[i].target.clone())
        .collect();
    let mut calibration = fit_temperature(&logits, &targets)?;
    calibration.split_seed = Some(cfg.seed);
    model.set_temperature(calibration.temperature)?;
    Ok((model, calibration, split.train.len(), split.heldout.len()))
}
