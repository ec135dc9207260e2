//! Inter-annotator reliability.
//!
//! Category-level agreement (Fleiss' and Cohen's kappa), grouping of
//! annotators by pairwise kappa, strictness-ranking consistency across random
//! halves of the data, and the Likert reliability pair ADI / ICC(3,k).

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotationStore, Feature};
use crate::error::{ArgusError, Result};
use crate::stats;

const DEGENERATE_EPS: f64 = 1e-12;

/// Fleiss' kappa over an items x raters label table. Every item must carry
/// the same number of labels.
pub fn fleiss_kappa(rows: &[Vec<i64>]) -> Result<f64> {
    if rows.len() < 2 {
        return Err(ArgusError::invalid(
            "Fleiss' kappa needs at least two items",
        ));
    }
    let n = rows[0].len();
    if n < 2 {
        return Err(ArgusError::invalid(
            "Fleiss' kappa needs at least two ratings per item",
        ));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(ArgusError::invalid(
            "every item must be rated by the same number of annotators",
        ));
    }
    let categories: BTreeSet<i64> = rows.iter().flatten().copied().collect();
    let nf = n as f64;
    let mut totals: BTreeMap<i64, f64> = categories.iter().map(|&c| (c, 0.0)).collect();
    let mut p_bar = 0.0;
    for row in rows {
        let mut counts: BTreeMap<i64, f64> = BTreeMap::new();
        for &label in row {
            *counts.entry(label).or_default() += 1.0;
        }
        let agreeing: f64 = counts.values().map(|c| c * (c - 1.0)).sum();
        p_bar += agreeing / (nf * (nf - 1.0));
        for (label, c) in counts {
            *totals.get_mut(&label).unwrap() += c;
        }
    }
    p_bar /= rows.len() as f64;
    let grand = rows.len() as f64 * nf;
    let p_e: f64 = totals.values().map(|t| (t / grand).powi(2)).sum();
    if 1.0 - p_e < DEGENERATE_EPS {
        return Err(ArgusError::degenerate(
            "all labels fall into one category (chance agreement is 1)",
        ));
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

pub fn cohen_kappa(a: &[i64], b: &[i64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(ArgusError::invalid("label sequences differ in length"));
    }
    if a.len() < 2 {
        return Err(ArgusError::invalid(
            "Cohen's kappa needs at least two paired labels",
        ));
    }
    let n = a.len() as f64;
    let p_o = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut marg_a: BTreeMap<i64, f64> = BTreeMap::new();
    let mut marg_b: BTreeMap<i64, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *marg_a.entry(x).or_default() += 1.0 / n;
        *marg_b.entry(y).or_default() += 1.0 / n;
    }
    let p_e: f64 = marg_a
        .iter()
        .map(|(k, pa)| pa * marg_b.get(k).copied().unwrap_or(0.0))
        .sum();
    if 1.0 - p_e < DEGENERATE_EPS {
        return Err(ArgusError::degenerate(
            "both raters use a single category (chance agreement is 1)",
        ));
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Cohen's kappa for every annotator pair of a complete items x raters table.
/// The diagonal is set to 1.
pub fn pairwise_cohen(rows: &[Vec<i64>]) -> Result<Vec<Vec<f64>>> {
    let k = rows.first().map(Vec::len).unwrap_or(0);
    let column = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<_>>();
    let mut m = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let v = cohen_kappa(&column(i), &column(j))?;
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    Ok(m)
}

/// Average-linkage agglomerative clustering on distance `1 - kappa`, merged
/// until `n_clusters` groups remain. Ties merge the lowest-index pair first.
/// Groups are returned sorted by their smallest member.
pub fn cluster_annotators(kappa: &[Vec<f64>], n_clusters: usize) -> Result<Vec<Vec<usize>>> {
    let k = kappa.len();
    if kappa.iter().any(|row| row.len() != k) {
        return Err(ArgusError::invalid("kappa matrix must be square"));
    }
    if n_clusters == 0 || n_clusters > k {
        return Err(ArgusError::invalid(format!(
            "n_clusters must lie in [1, {k}]"
        )));
    }
    for i in 0..k {
        for j in 0..k {
            if i != j && !kappa[i][j].is_finite() {
                return Err(ArgusError::invalid(format!(
                    "non-finite kappa at ({i}, {j})"
                )));
            }
        }
    }
    let dist = |i: usize, j: usize| 1.0 - kappa[i][j];
    let mut clusters: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
    while clusters.len() > n_clusters {
        let mut best = (0, 1, f64::INFINITY);
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let mut total = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        total += dist(i, j);
                    }
                }
                let d = total / (clusters[a].len() * clusters[b].len()) as f64;
                if d < best.2 {
                    best = (a, b, d);
                }
            }
        }
        let merged = clusters.remove(best.1);
        clusters[best.0].extend(merged);
        clusters[best.0].sort_unstable();
    }
    clusters.sort_by_key(|c| c[0]);
    Ok(clusters)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub rho: f64,
    pub p: f64,
}

/// Spearman's rank correlation with average ranks for ties. The p-value uses
/// the t approximation with `n - 2` degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(ArgusError::invalid("spearman inputs differ in length"));
    }
    if x.len() < 3 {
        return Err(ArgusError::invalid(
            "spearman needs at least three observations",
        ));
    }
    let rho =
        stats::pearson(&stats::average_ranks(x), &stats::average_ranks(y)).ok_or_else(|| {
            ArgusError::degenerate("zero rank variance; spearman correlation undefined")
        })?;
    let df = x.len() as f64 - 2.0;
    let p = if (1.0 - rho.abs()) < 1e-15 {
        0.0
    } else {
        stats::t_two_sided_p(rho * (df / (1.0 - rho * rho)).sqrt(), df)
    };
    Ok(Correlation { rho, p })
}

/// Exact two-sided permutation p-value for Spearman's rho, enumerating all
/// `n!` orderings of `y`. Limited to `n <= 10`.
pub fn spearman_exact_p(x: &[f64], y: &[f64]) -> Result<f64> {
    let observed = spearman(x, y)?.rho;
    let n = x.len();
    if n > 10 {
        return Err(ArgusError::invalid(
            "exact spearman p-value limited to n <= 10",
        ));
    }
    let rx = stats::average_ranks(x);
    let mut ry = stats::average_ranks(y);
    let mut extreme = 0u64;
    let mut total = 0u64;
    // Heap's algorithm over ry.
    let mut c = vec![0usize; n];
    let mut visit = |ry: &[f64]| {
        total += 1;
        if let Some(r) = stats::pearson(&rx, ry) {
            if r.abs() >= observed.abs() - 1e-12 {
                extreme += 1;
            }
        }
    };
    visit(&ry);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                ry.swap(0, i);
            } else {
                ry.swap(c[i], i);
            }
            visit(&ry);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(extreme as f64 / total as f64)
}

/// Assignment of items to two halves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemSplit {
    pub half_a: BTreeSet<String>,
    pub half_b: BTreeSet<String>,
}

impl ItemSplit {
    /// Uniform random halving of `items` (sorted first, so input order is
    /// irrelevant). Half A receives `floor(n / 2)` items.
    pub fn random<'a>(items: impl IntoIterator<Item = &'a str>, seed: u64) -> Self {
        let mut all: Vec<&str> = items
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        all.shuffle(&mut rng);
        let cut = all.len() / 2;
        Self {
            half_a: all[..cut].iter().map(|s| s.to_string()).collect(),
            half_b: all[cut..].iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictnessReport {
    pub annotators: Vec<String>,
    pub strictness_full: Vec<f64>,
    pub strictness_a: Vec<f64>,
    pub strictness_b: Vec<f64>,
    pub full_vs_a: Correlation,
    pub full_vs_b: Correlation,
    pub a_vs_b: Correlation,
    pub split_seed: Option<u64>,
}

/// Story labels per annotator, keyed by item.
pub type LabelsByAnnotator = BTreeMap<String, BTreeMap<String, bool>>;

pub fn story_labels(store: &AnnotationStore) -> LabelsByAnnotator {
    let mut out: LabelsByAnnotator = BTreeMap::new();
    for r in store
        .records()
        .iter()
        .filter(|r| r.feature == Feature::Story)
    {
        out.entry(r.annotator_id.clone())
            .or_default()
            .insert(r.item_id.clone(), r.rating == 1);
    }
    out
}

/// Ranks annotators by strictness (share of items labelled as a story) on
/// the full data and on two random halves, and correlates the rankings.
pub fn strictness_consistency(
    labels: &LabelsByAnnotator,
    split_seed: u64,
) -> Result<StrictnessReport> {
    let items = labels.values().flat_map(|m| m.keys().map(String::as_str));
    let split = ItemSplit::random(items, split_seed);
    let mut report = strictness_with_split(labels, &split)?;
    report.split_seed = Some(split_seed);
    Ok(report)
}

pub fn strictness_with_split(
    labels: &LabelsByAnnotator,
    split: &ItemSplit,
) -> Result<StrictnessReport> {
    let share = |m: &BTreeMap<String, bool>, keep: &dyn Fn(&str) -> bool| -> Option<f64> {
        let picked: Vec<bool> = m.iter().filter(|(k, _)| keep(k)).map(|(_, &v)| v).collect();
        if picked.is_empty() {
            None
        } else {
            Some(picked.iter().filter(|&&v| v).count() as f64 / picked.len() as f64)
        }
    };
    let mut report = StrictnessReport {
        annotators: Vec::new(),
        strictness_full: Vec::new(),
        strictness_a: Vec::new(),
        strictness_b: Vec::new(),
        full_vs_a: Correlation {
            rho: f64::NAN,
            p: f64::NAN,
        },
        full_vs_b: Correlation {
            rho: f64::NAN,
            p: f64::NAN,
        },
        a_vs_b: Correlation {
            rho: f64::NAN,
            p: f64::NAN,
        },
        split_seed: None,
    };
    for (annotator, m) in labels {
        let full = share(m, &|_| true)
            .ok_or_else(|| ArgusError::invalid(format!("annotator {annotator} has no labels")))?;
        let a = share(m, &|k| split.half_a.contains(k)).ok_or_else(|| {
            ArgusError::invalid(format!("annotator {annotator} has no items in half A"))
        })?;
        let b = share(m, &|k| split.half_b.contains(k)).ok_or_else(|| {
            ArgusError::invalid(format!("annotator {annotator} has no items in half B"))
        })?;
        report.annotators.push(annotator.clone());
        report.strictness_full.push(full);
        report.strictness_a.push(a);
        report.strictness_b.push(b);
    }
    report.full_vs_a = spearman(&report.strictness_full, &report.strictness_a)?;
    report.full_vs_b = spearman(&report.strictness_full, &report.strictness_b)?;
    report.a_vs_b = spearman(&report.strictness_a, &report.strictness_b)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Center {
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiResult {
    pub value: f64,
    pub items_used: usize,
    pub items_excluded: usize,
}

/// Average Deviation Index: mean absolute deviation of each item's ratings
/// from the item center, averaged over items. Rows may have different
/// lengths; rows with fewer than two ratings are skipped.
pub fn adi(rows: &[Vec<f64>], center: Center) -> Result<AdiResult> {
    let mut total = 0.0;
    let mut used = 0;
    let mut excluded = 0;
    for row in rows {
        if row.len() < 2 {
            excluded += 1;
            continue;
        }
        let c = match center {
            Center::Mean => stats::mean(row),
            Center::Median => stats::median(row),
        };
        total += row.iter().map(|x| (x - c).abs()).sum::<f64>() / row.len() as f64;
        used += 1;
    }
    if excluded > 0 {
        log::warn!("ADI: {excluded} item(s) with fewer than two ratings excluded");
    }
    if used == 0 {
        return Err(ArgusError::invalid(
            "ADI needs at least one item with two or more ratings",
        ));
    }
    Ok(AdiResult {
        value: total / used as f64,
        items_used: used,
        items_excluded: excluded,
    })
}

/// ICC(3,k): two-way mixed effects, consistency, average of k raters,
/// `(MS_rows - MS_error) / MS_rows`.
pub fn icc3k(rows: &[Vec<f64>]) -> Result<f64> {
    let n = rows.len();
    if n < 2 {
        return Err(ArgusError::invalid("ICC needs at least two items"));
    }
    let k = rows[0].len();
    if k < 2 {
        return Err(ArgusError::invalid("ICC needs at least two raters"));
    }
    if rows.iter().any(|r| r.len() != k) {
        return Err(ArgusError::invalid("ICC needs a complete rating matrix"));
    }
    let (nf, kf) = (n as f64, k as f64);
    let grand = rows.iter().flatten().sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = rows.iter().map(|r| stats::mean(r)).collect();
    let col_means: Vec<f64> = (0..k)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / nf)
        .collect();
    let ss_rows: f64 = kf * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_cols: f64 = nf * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_total: f64 = rows.iter().flatten().map(|x| (x - grand).powi(2)).sum();
    let ss_error = (ss_total - ss_rows - ss_cols).max(0.0);
    let ms_rows = ss_rows / (nf - 1.0);
    let ms_error = ss_error / ((nf - 1.0) * (kf - 1.0));
    if ms_rows <= DEGENERATE_EPS * (1.0 + ss_total) {
        return Err(ArgusError::degenerate(
            "no between-item variance (MS_rows = 0)",
        ));
    }
    Ok((ms_rows - ms_error) / ms_rows)
}

fn to_f64(rows: &[Vec<i64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| r.iter().map(|&v| v as f64).collect())
        .collect()
}

/// Everything the `agreement` command reports for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub feature: Feature,
    pub items: usize,
    pub annotators: Vec<String>,
    pub complete_items: usize,
    pub fleiss_kappa: Option<f64>,
    pub pairwise_cohen: Option<Vec<Vec<f64>>>,
    pub clusters: Option<Vec<Vec<String>>>,
    pub cluster_fleiss: Option<Vec<Option<f64>>>,
    pub strictness: Option<StrictnessReport>,
    pub adi_mean: Option<AdiResult>,
    pub adi_median: Option<AdiResult>,
    pub icc3k: Option<f64>,
    pub notes: Vec<String>,
}

/// Runs the statistics that apply to `feature`: kappa family, clustering and
/// strictness for Story; ADI and ICC(3,k) for Likert features.
pub fn analyze_feature(
    store: &AnnotationStore,
    feature: Feature,
    n_clusters: usize,
    split_seed: u64,
    center: Option<Center>,
) -> Result<AgreementReport> {
    let matrix = store.ratings_matrix(feature);
    let complete = matrix.complete_rows();
    let mut report = AgreementReport {
        feature,
        items: matrix.items.len(),
        annotators: matrix.annotators.clone(),
        complete_items: complete.len(),
        fleiss_kappa: None,
        pairwise_cohen: None,
        clusters: None,
        cluster_fleiss: None,
        strictness: None,
        adi_mean: None,
        adi_median: None,
        icc3k: None,
        notes: Vec::new(),
    };
    if matrix.items.is_empty() {
        return Err(ArgusError::invalid(format!("no annotations for {feature}")));
    }
    if feature.is_story() {
        report.fleiss_kappa = Some(fleiss_kappa(&complete)?);
        let kappa = pairwise_cohen(&complete)?;
        let groups = cluster_annotators(&kappa, n_clusters.min(matrix.annotators.len()))?;
        report.cluster_fleiss = Some(
            groups
                .iter()
                .map(|g| {
                    if g.len() < 2 {
                        return None;
                    }
                    let sub: Vec<Vec<i64>> = complete
                        .iter()
                        .map(|r| g.iter().map(|&j| r[j]).collect())
                        .collect();
                    fleiss_kappa(&sub).ok()
                })
                .collect(),
        );
        report.clusters = Some(
            groups
                .iter()
                .map(|g| g.iter().map(|&j| matrix.annotators[j].clone()).collect())
                .collect(),
        );
        report.pairwise_cohen = Some(kappa);
        match strictness_consistency(&story_labels(store), split_seed) {
            Ok(s) => report.strictness = Some(s),
            Err(e) => report
                .notes
                .push(format!("strictness consistency skipped: {e}")),
        }
    } else {
        let observed = to_f64(&matrix.observed_rows());
        let centers = match center {
            Some(c) => vec![c],
            None => vec![Center::Mean, Center::Median],
        };
        for c in centers {
            let r = adi(&observed, c)?;
            match c {
                Center::Mean => report.adi_mean = Some(r),
                Center::Median => report.adi_median = Some(r),
            }
        }
        match icc3k(&to_f64(&complete)) {
            Ok(v) => report.icc3k = Some(v),
            Err(e) => report.notes.push(format!("ICC(3,k) skipped: {e}")),
        }
    }
    Ok(report)
}
