//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use argus_core::agreement::{adi, cohen_kappa, fleiss_kappa, icc3k, spearman, Center};
use argus_core::calibration::{fit_temperature, softmax, temperature_nll};
use argus_core::corpus::{Feature, RatingDistribution};
use argus_core::hypothesis::{friedman_test, wilcoxon_signed_rank};
use argus_core::inference::{
    fit_glmm, fit_logistic, fit_ols, irls, preset, run_preset, AnalysisFrame, DesignMatrix,
    FitKind, FrameOptions, GlmmOptions, PRESET_IDS,
};
use argus_core::metrics::{brier, scalar_errors, wasserstein1};
use argus_core::scoring::model::SoftmaxObjective;
use argus_core::scoring::{
    featurize, stratified_split, train_hard, train_soft, FeatureConfig, Hyper, TrainingExample,
};
use argus_core::synth::{
    annotated_corpus, annotator_noise_items, cv_items, glmm_data, m5_corpus, CorpusSpec, M5Effects,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

// ---------------------------------------------------------------- oracles

fn fleiss_oracle(rows: &[Vec<i64>]) -> Option<f64> {
    let n = rows.len() as f64;
    let m = rows[0].len() as f64;
    let mut cats: Vec<i64> = rows.iter().flatten().copied().collect();
    cats.sort_unstable();
    cats.dedup();
    let mut p_bar = 0.0;
    let mut totals = vec![0.0; cats.len()];
    for r in rows {
        let mut agree = 0.0;
        for (j, c) in cats.iter().enumerate() {
            let nij = r.iter().filter(|v| *v == c).count() as f64;
            totals[j] += nij;
            agree += nij * (nij - 1.0);
        }
        p_bar += agree / (m * (m - 1.0));
    }
    p_bar /= n;
    let pe: f64 = totals.iter().map(|t| (t / (n * m)).powi(2)).sum();
    if (1.0 - pe).abs() < 1e-9 {
        return None;
    }
    Some((p_bar - pe) / (1.0 - pe))
}

fn cohen_oracle(a: &[i64], b: &[i64]) -> Option<f64> {
    let n = a.len() as f64;
    let mut cats: Vec<i64> = a.iter().chain(b).copied().collect();
    cats.sort_unstable();
    cats.dedup();
    let po = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let pe: f64 = cats
        .iter()
        .map(|c| {
            let pa = a.iter().filter(|v| *v == c).count() as f64 / n;
            let pb = b.iter().filter(|v| *v == c).count() as f64 / n;
            pa * pb
        })
        .sum();
    if (1.0 - pe).abs() < 1e-9 {
        return None;
    }
    Some((po - pe) / (1.0 - pe))
}

/// Rank by counting: below + (ties + 1) / 2.
fn count_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let below = x.iter().filter(|u| *u < v).count() as f64;
            let ties = x.iter().filter(|u| *u == v).count() as f64;
            below + (ties + 1.0) / 2.0
        })
        .collect()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

fn adi_oracle(rows: &[Vec<f64>], median: bool) -> f64 {
    let used: Vec<&Vec<f64>> = rows.iter().filter(|r| r.len() >= 2).collect();
    let mut total = 0.0;
    for r in &used {
        let c = if median {
            let mut s = (*r).clone();
            s.sort_by(f64::total_cmp);
            let k = s.len();
            if k % 2 == 1 {
                s[k / 2]
            } else {
                (s[k / 2 - 1] + s[k / 2]) / 2.0
            }
        } else {
            r.iter().sum::<f64>() / r.len() as f64
        };
        total += r.iter().map(|v| (v - c).abs()).sum::<f64>() / r.len() as f64;
    }
    total / used.len() as f64
}

/// ICC(3,k) from residuals of the additive two-way fit.
fn icc_oracle(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let k = rows[0].len();
    let grand = rows.iter().flatten().sum::<f64>() / (n * k) as f64;
    let rm: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().sum::<f64>() / k as f64)
        .collect();
    let cm: Vec<f64> = (0..k)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut sse = 0.0;
    for i in 0..n {
        for j in 0..k {
            sse += (rows[i][j] - rm[i] - cm[j] + grand).powi(2);
        }
    }
    let msr = k as f64 * rm.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n - 1) as f64;
    let mse = sse / ((n - 1) * (k - 1)) as f64;
    (msr - mse) / msr
}

/// North-west corner transport between two distributions on 1..=5; on a line
/// the monotone coupling is optimal.
fn transport_oracle(p: &[f64], q: &[f64]) -> f64 {
    let (mut p, mut q) = (p.to_vec(), q.to_vec());
    let (mut i, mut j) = (0, 0);
    let mut cost = 0.0;
    while i < p.len() && j < q.len() {
        let m = p[i].min(q[j]);
        cost += m * (i as f64 - j as f64).abs();
        p[i] -= m;
        q[j] -= m;
        if p[i] <= 1e-15 {
            i += 1;
        } else {
            j += 1;
        }
    }
    cost
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

fn design_rows(d: &DesignMatrix) -> Vec<Vec<f64>> {
    (0..d.nrows())
        .map(|i| (0..d.ncols()).map(|j| d.x[(i, j)]).collect())
        .collect()
}

fn newton_logistic(x: &[Vec<f64>], y: &[bool]) -> Vec<f64> {
    let p = x[0].len();
    let mut beta = vec![0.0; p];
    for _ in 0..100 {
        let mut h = vec![vec![0.0; p]; p];
        let mut g = vec![0.0; p];
        for (xi, &yi) in x.iter().zip(y) {
            let eta: f64 = xi.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = 1.0 / (1.0 + (-eta).exp());
            for r in 0..p {
                g[r] += xi[r] * (f64::from(u8::from(yi)) - mu);
                for c in 0..p {
                    h[r][c] += mu * (1.0 - mu) * xi[r] * xi[c];
                }
            }
        }
        let step = solve(h, g);
        beta.iter_mut().zip(&step).for_each(|(b, s)| *b += s);
        if step.iter().all(|s| s.abs() < 1e-14) {
            break;
        }
    }
    beta
}

// ---------------------------------------------------------------- criteria

fn c1_agreement_oracles() -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut done = 0;
    let mut worst: f64 = 0.0;
    while done < 25 {
        let n = rng.random_range(6..30);
        let k = rng.random_range(2..7);
        let cats = rng.random_range(2..6);
        let labels: Vec<Vec<i64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.random_range(0..cats)).collect())
            .collect();
        let likert: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.random_range(1..=5) as f64).collect())
            .collect();
        let a: Vec<i64> = labels.iter().map(|r| r[0]).collect();
        let b: Vec<i64> = labels.iter().map(|r| r[1]).collect();
        let (Some(fo), Some(co)) = (fleiss_oracle(&labels), cohen_oracle(&a, &b)) else {
            continue;
        };
        let x: Vec<f64> = likert.iter().map(|r| r[0]).collect();
        let y: Vec<f64> = likert.iter().map(|r| r[1]).collect();
        let mut ragged = likert.clone();
        ragged[0].truncate(1);
        ragged[1].truncate(2);
        let pairs = [
            (
                fleiss_kappa(&labels).map_err(|e| e.to_string())?,
                fo,
                "fleiss",
            ),
            (cohen_kappa(&a, &b).map_err(|e| e.to_string())?, co, "cohen"),
            (
                spearman(&x, &y).map_err(|e| e.to_string())?.rho,
                pearson(&count_ranks(&x), &count_ranks(&y)),
                "spearman",
            ),
            (
                adi(&ragged, Center::Mean).map_err(|e| e.to_string())?.value,
                adi_oracle(&ragged, false),
                "adi mean",
            ),
            (
                adi(&ragged, Center::Median)
                    .map_err(|e| e.to_string())?
                    .value,
                adi_oracle(&ragged, true),
                "adi median",
            ),
            (
                icc3k(&likert).map_err(|e| e.to_string())?,
                icc_oracle(&likert),
                "icc3k",
            ),
        ];
        for (got, want, name) in pairs {
            let d = (got - want).abs();
            worst = worst.max(d);
            ensure(d < 1e-10, format!("{name}: {got} vs oracle {want}"))?;
        }
        done += 1;
    }
    let el = t.elapsed();
    ensure(el < Duration::from_secs(5), format!("took {el:?}"))?;
    Ok(format!(
        "25 matrices, max |diff| {worst:.1e}, {:.2}s",
        el.as_secs_f64()
    ))
}

fn c2_hand_statistics() -> Check {
    let e = |x: argus_core::ArgusError| x.to_string();
    let fk = fleiss_kappa(&[vec![0, 1], vec![0, 1]]).map_err(e)?;
    ensure((fk + 1.0).abs() < 1e-9, format!("fleiss {fk}"))?;
    let rho = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0])
        .map_err(e)?
        .rho;
    ensure((rho - 0.8).abs() < 1e-9, format!("spearman {rho}"))?;
    let a = adi(&[vec![1.0, 2.0, 3.0], vec![2.0, 2.0, 2.0]], Center::Mean)
        .map_err(e)?
        .value;
    ensure((a - 1.0 / 3.0).abs() < 1e-9, format!("adi {a}"))?;
    let table: Vec<Vec<f64>> = (0..5)
        .map(|f| vec![0.9 - 0.01 * f as f64, 0.8, 0.7 + 0.001 * f as f64])
        .collect();
    let fr = friedman_test(&table).map_err(e)?;
    ensure(
        (fr.statistic - 10.0).abs() < 1e-9,
        format!("friedman {}", fr.statistic),
    )?;
    ensure(
        (fr.p - (-5.0f64).exp()).abs() < 1e-9,
        format!("friedman p {}", fr.p),
    )?;
    let w =
        wilcoxon_signed_rank(&[1.5, 2.5, 3.5, 4.5, 5.5], &[1.0, 2.0, 3.0, 4.0, 5.0]).map_err(e)?;
    ensure(
        w.exact && (w.p - 0.0625).abs() < 1e-9,
        format!("wilcoxon {w:?}"),
    )?;
    Ok(format!("friedman 10 (p {:.4}), wilcoxon p {}", fr.p, w.p))
}

fn c3_soft_training() -> Check {
    let store = annotated_corpus(&CorpusSpec::default());
    let items = cv_items(&store, Feature::Story).map_err(|e| e.to_string())?;
    let cfg = FeatureConfig {
        hash_bits: 10,
        ..FeatureConfig::words_only()
    };
    let ex: Vec<TrainingExample> = items
        .iter()
        .take(40)
        .map(|i| TrainingExample {
            features: featurize(&i.text, &cfg),
            target: i.target.clone(),
        })
        .collect();
    let obj = SoftmaxObjective::new(&ex, 1e-2, cfg.bias_index()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params: Vec<f64> = (0..obj.n_params())
        .map(|_| 0.3 * normal(&mut rng))
        .collect();
    let g = obj.gradient(&params);
    let h = 1e-6;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for j in 0..params.len() {
        let mut p = params.clone();
        p[j] += h;
        let up = obj.loss(&p);
        p[j] -= 2.0 * h;
        let fd = (up - obj.loss(&p)) / (2.0 * h);
        num += (g[j] - fd).powi(2);
        den += fd.powi(2);
    }
    let rel = (num / den).sqrt();
    ensure(rel < 1e-5, format!("gradient rel error {rel:.2e}"))?;

    let full: Vec<TrainingExample> = items
        .iter()
        .map(|i| TrainingExample {
            features: featurize(&i.text, &FeatureConfig::default()),
            target: i.target.clone(),
        })
        .collect();
    let m = train_soft(
        Feature::Story,
        &full,
        &FeatureConfig::default(),
        Hyper::default(),
        0,
    )
    .map_err(|e| e.to_string())?;
    let hist = &m.loss_history;
    ensure(
        hist.len() > 1 && hist.windows(2).all(|w| w[1] <= w[0]),
        "loss history increases",
    )?;

    let target = RatingDistribution::new(vec![0, 1], vec![0.3, 0.7]).map_err(|e| e.to_string())?;
    let constant: Vec<TrainingExample> = full
        .iter()
        .map(|e| TrainingExample {
            features: e.features.clone(),
            target: target.clone(),
        })
        .collect();
    let mc = train_soft(
        Feature::Story,
        &constant,
        &FeatureConfig::default(),
        Hyper::default(),
        0,
    )
    .map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for i in items.iter().take(50) {
        let p = mc.predict_distribution(&i.text);
        worst = worst.max((p.probs()[1] - 0.7).abs());
    }
    ensure(worst < 1e-3, format!("constant target off by {worst:.2e}"))?;
    Ok(format!(
        "gradient rel {rel:.1e}; loss {:.4} -> {:.4} over {} epochs; prior error {worst:.1e}",
        hist[0],
        hist.last().unwrap(),
        hist.len()
    ))
}

fn c4_soft_beats_hard() -> Check {
    let t = Instant::now();
    let mut wins = 0;
    let mut margins = Vec::new();
    for seed in 0..10 {
        let items = annotator_noise_items(1000, 5, seed);
        let labels: Vec<bool> = items.iter().map(|i| i.label).collect();
        let split = stratified_split(&labels, 0.8, seed).map_err(|e| e.to_string())?;
        let cfg = FeatureConfig::default();
        let feats: Vec<_> = items.iter().map(|i| featurize(&i.text, &cfg)).collect();
        let soft: Vec<TrainingExample> = split
            .train
            .iter()
            .map(|&i| TrainingExample {
                features: feats[i].clone(),
                target: items[i].target.clone(),
            })
            .collect();
        let hard: Vec<_> = split
            .train
            .iter()
            .map(|&i| (feats[i].clone(), items[i].label))
            .collect();
        let ms = train_soft(Feature::Story, &soft, &cfg, Hyper::default(), seed)
            .map_err(|e| e.to_string())?;
        let mh = train_hard(Feature::Story, &hard, &cfg, Hyper::default(), seed)
            .map_err(|e| e.to_string())?;
        let score = |m: &argus_core::scoring::SoftClassifier| {
            split
                .heldout
                .iter()
                .map(|&i| brier(&m.predict_features(&feats[i]), &items[i].target).unwrap())
                .sum::<f64>()
                / split.heldout.len() as f64
        };
        let (s, h) = (score(&ms), score(&mh));
        margins.push(h - s);
        if s <= h {
            wins += 1;
        }
    }
    let el = t.elapsed();
    ensure(el < Duration::from_secs(120), format!("took {el:?}"))?;
    ensure(
        wins >= 8,
        format!("soft won {wins}/10, margins {margins:.4?}"),
    )?;
    Ok(format!(
        "soft <= hard in {wins}/10 seeds, {:.1}s",
        el.as_secs_f64()
    ))
}

fn c5_temperature() -> Check {
    let mut temps = Vec::new();
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut draw = |n: usize| {
            let mut logits = Vec::new();
            let mut targets = Vec::new();
            for _ in 0..n {
                let z: Vec<f64> = (0..3).map(|_| 1.5 * normal(&mut rng)).collect();
                let p = softmax(&z);
                let u: f64 = rng.random();
                let level = if u < p[0] {
                    0
                } else if u < p[0] + p[1] {
                    1
                } else {
                    2
                };
                targets.push(RatingDistribution::one_hot(vec![0, 1, 2], level).unwrap());
                logits.push(z.iter().map(|v| 3.0 * v).collect::<Vec<f64>>());
            }
            (logits, targets)
        };
        let (cal_z, cal_t) = draw(2000);
        let (test_z, test_t) = draw(2000);
        let fit = fit_temperature(&cal_z, &cal_t).map_err(|e| e.to_string())?;
        let t = fit.temperature;
        ensure((2.5..=3.5).contains(&t), format!("seed {seed}: T = {t}"))?;
        let (after, before) = (
            temperature_nll(&test_z, &test_t, t),
            temperature_nll(&test_z, &test_t, 1.0),
        );
        ensure(
            after < before,
            format!("seed {seed}: held-out NLL {after} vs {before}"),
        )?;
        temps.push(t);
    }
    let lo = temps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = temps.iter().copied().fold(0.0, f64::max);
    Ok(format!("10/10 seeds, T in [{lo:.3}, {hi:.3}]"))
}

fn c6_metrics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let support: Vec<i64> = (1..=5).collect();
    let draw = |rng: &mut ChaCha8Rng| {
        let w: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        let s: f64 = w.iter().sum();
        RatingDistribution::new(support.clone(), w.iter().map(|v| v / s).collect()).unwrap()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (p, q) = (draw(&mut rng), draw(&mut rng));
        let got = wasserstein1(&p, &q).map_err(|e| e.to_string())?;
        let want = transport_oracle(p.probs(), q.probs());
        worst = worst.max((got - want).abs());
    }
    ensure(
        worst < 1e-9,
        format!("wasserstein vs transport {worst:.2e}"),
    )?;
    let one = RatingDistribution::one_hot(support.clone(), 1).unwrap();
    let five = RatingDistribution::one_hot(support.clone(), 5).unwrap();
    let b_same = brier(&one, &one).map_err(|e| e.to_string())?;
    let b_far = brier(&one, &five).map_err(|e| e.to_string())?;
    ensure(
        b_same == 0.0 && (b_far - 2.0).abs() < 1e-12,
        format!("brier extremes {b_same} {b_far}"),
    )?;
    for _ in 0..200 {
        let n = rng.random_range(1..50);
        let p: Vec<f64> = (0..n).map(|_| 5.0 * rng.random::<f64>()).collect();
        let g: Vec<f64> = (0..n).map(|_| 5.0 * rng.random::<f64>()).collect();
        let e = scalar_errors(&p, &g).map_err(|e| e.to_string())?;
        ensure(
            e.mae <= e.rmse + 1e-15,
            format!("MAE {} > RMSE {}", e.mae, e.rmse),
        )?;
    }
    Ok(format!(
        "wasserstein max |diff| {worst:.1e}; brier 0 and {b_far}; MAE <= RMSE on 200 draws"
    ))
}

fn c7_regression_recovery() -> Check {
    let y: Vec<bool> = (0..100).map(|i| i < 75).collect();
    let r = fit_logistic(
        &y,
        &DesignMatrix::intercept_only(100).map_err(|e| e.to_string())?,
        "y",
    )
    .map_err(|e| e.to_string())?;
    let b0 = r.coefficients[0].beta;
    ensure((b0 - 3f64.ln()).abs() < 1e-8, format!("intercept {b0}"))?;

    let (truth_l, truth_o) = ([-1.0, 0.8, -0.4], [0.5, 1.2, -0.7]);
    let (mut cov_l, mut cov_o) = (0, 0);
    let mut worst: f64 = 0.0;
    for seed in 0..40u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
        let n = 5000;
        let x1: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let x2: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let d =
            DesignMatrix::with_intercept(&[("x1".into(), x1.clone()), ("x2".into(), x2.clone())])
                .map_err(|e| e.to_string())?;
        let yl: Vec<bool> = (0..n)
            .map(|i| {
                let eta = truth_l[0] + truth_l[1] * x1[i] + truth_l[2] * x2[i];
                rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())
            })
            .collect();
        let yo: Vec<f64> = (0..n)
            .map(|i| truth_o[0] + truth_o[1] * x1[i] + truth_o[2] * x2[i] + normal(&mut rng))
            .collect();
        let fl = fit_logistic(&yl, &d, "y").map_err(|e| e.to_string())?;
        let oracle = newton_logistic(&design_rows(&d), &yl);
        for (c, o) in fl.coefficients.iter().zip(&oracle) {
            worst = worst.max((c.beta - o).abs());
        }
        if fl
            .coefficients
            .iter()
            .zip(truth_l)
            .all(|(c, t)| (c.beta - t).abs() < 3.0 * c.se)
        {
            cov_l += 1;
        }
        let fo = fit_ols(&yo, &d, "y").map_err(|e| e.to_string())?;
        if fo
            .coefficients
            .iter()
            .zip(truth_o)
            .all(|(c, t)| (c.beta - t).abs() < 3.0 * c.se)
        {
            cov_o += 1;
        }
    }
    ensure(worst < 1e-8, format!("IRLS vs Newton {worst:.2e}"))?;
    ensure(
        cov_l >= 38 && cov_o >= 38,
        format!("coverage logistic {cov_l}/40, OLS {cov_o}/40"),
    )?;
    Ok(format!(
        "ln 3 error {:.1e}; coverage logistic {cov_l}/40, OLS {cov_o}/40; Newton {worst:.1e}",
        (b0 - 3f64.ln()).abs()
    ))
}

fn c8_glmm() -> Check {
    let t = Instant::now();
    let small = glmm_data(3000, 600, 80, (-2.0, 0.5), 1.0, 0.5, 2);
    let pinned = GlmmOptions {
        fixed_sigmas: Some(vec![0.0, 0.0]),
        ..Default::default()
    };
    let g = fit_glmm(&small.y, &small.design, &small.groups, &pinned).map_err(|e| e.to_string())?;
    let l = irls(&small.y, &small.design).map_err(|e| e.to_string())?;
    let pin_diff = (0..2)
        .map(|j| (g.beta[j] - l.beta[j]).abs())
        .fold(0.0, f64::max);
    ensure(pin_diff < 1e-6, format!("pinned vs GLM {pin_diff:.2e}"))?;

    let data = glmm_data(10_000, 2000, 300, (-2.0, 0.5), 1.0, 0.5, 8);
    let fit = fit_glmm(&data.y, &data.design, &data.groups, &GlmmOptions::default())
        .map_err(|e| e.to_string())?;
    let el = t.elapsed();
    let (b0, b1, sa) = (fit.beta[0], fit.beta[1], fit.sigmas[0]);
    ensure(
        (b0 + 2.0).abs() <= 0.1 && (b1 - 0.5).abs() <= 0.1,
        format!("beta ({b0:.3}, {b1:.3})"),
    )?;
    ensure((sa - 1.0).abs() <= 0.15, format!("sigma_author {sa:.3}"))?;
    ensure(el < Duration::from_secs(300), format!("took {el:?}"))?;
    Ok(format!(
        "pinned diff {pin_diff:.1e}; beta ({b0:.3}, {b1:.3}), sigma_author {sa:.3}, sigma_op {:.3}; {:.1}s",
        fit.sigmas[1],
        el.as_secs_f64()
    ))
}

fn c9_presets() -> Check {
    let story = |f: &str| f.to_string();
    let six = [
        "Agency",
        "EventSequencing",
        "WorldMaking",
        "Suspense",
        "Curiosity",
        "Surprise",
    ];
    let five = [
        "Agency",
        "EventSequencing",
        "Surprise",
        "Suspense",
        "Curiosity",
    ];
    let with_len = |v: Vec<String>| {
        v.into_iter()
            .chain(["Text_length".to_string()])
            .collect::<Vec<_>>()
    };
    let expected: BTreeMap<&str, (FitKind, &str, Vec<String>, bool)> = [
        (
            "T3",
            (
                FitKind::Ols,
                "Story_scalar",
                with_len(six.iter().map(|f| format!("{f}_scalar")).collect()),
                false,
            ),
        ),
        (
            "T4",
            (
                FitKind::Logistic,
                "Story_binary",
                with_len(six.iter().map(|f| format!("{f}_scalar")).collect()),
                false,
            ),
        ),
        (
            "M1",
            (
                FitKind::Glmm,
                "Delta",
                with_len(vec![story("Story_scalar")]),
                true,
            ),
        ),
        (
            "M2",
            (
                FitKind::Glmm,
                "Delta",
                with_len(vec![story("Story_binary")]),
                true,
            ),
        ),
        (
            "M3",
            (
                FitKind::Ols,
                "Story_scalar",
                with_len(vec![story("Structural_score"), story("Response_score")]),
                false,
            ),
        ),
        (
            "M4",
            (
                FitKind::Logistic,
                "Story_binary",
                with_len(vec![story("Structural_score"), story("Response_score")]),
                false,
            ),
        ),
        (
            "M5",
            (
                FitKind::Glmm,
                "Delta",
                with_len(vec![story("Structural_score"), story("Response_score")]),
                true,
            ),
        ),
        (
            "M6",
            (
                FitKind::Glmm,
                "Delta",
                with_len(vec![story("Structural_binary"), story("Response_binary")]),
                true,
            ),
        ),
        (
            "M7",
            (
                FitKind::Glmm,
                "Delta",
                with_len(five.iter().map(|f| format!("{f}_scalar")).collect()),
                true,
            ),
        ),
        (
            "M8",
            (
                FitKind::Glmm,
                "Delta",
                with_len(five.iter().map(|f| format!("{f}_binary")).collect()),
                true,
            ),
        ),
    ]
    .into_iter()
    .collect();
    ensure(
        PRESET_IDS.len() == 10 && PRESET_IDS.iter().all(|id| expected.contains_key(id)),
        "preset id list",
    )?;

    let ann = AnalysisFrame::from_annotations(
        &annotated_corpus(&CorpusSpec::default()),
        FrameOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let (scored, comments) = m5_corpus(4000, 800, 120, M5Effects::default(), 21);
    let delta = AnalysisFrame::from_scored(&scored, &comments, FrameOptions::default())
        .map_err(|e| e.to_string())?;
    let re = vec!["Author".to_string(), "OPAuthor".to_string()];
    for id in PRESET_IDS {
        let (kind, response, preds, has_re) = &expected[id];
        let p = preset(id).map_err(|e| e.to_string())?;
        ensure(
            p.kind == *kind && p.response == *response,
            format!("{id}: kind/response"),
        )?;
        ensure(
            &p.predictors == preds,
            format!("{id}: predictors {:?}", p.predictors),
        )?;
        let want_re = if *has_re { re.clone() } else { vec![] };
        ensure(
            p.random_effects == want_re,
            format!("{id}: random effects {:?}", p.random_effects),
        )?;
        let frame = if *kind == FitKind::Glmm { &delta } else { &ann };
        let r = run_preset(id, frame, &GlmmOptions::default()).map_err(|e| format!("{id}: {e}"))?;
        let names: Vec<&str> = r.coefficients.iter().map(|c| c.name.as_str()).collect();
        let want: Vec<&str> = std::iter::once("Intercept")
            .chain(preds.iter().map(String::as_str))
            .collect();
        ensure(names == want, format!("{id}: table rows {names:?}"))?;
        let groups: Vec<String> = r.random_effects.iter().map(|v| v.group.clone()).collect();
        ensure(groups == want_re, format!("{id}: variance rows {groups:?}"))?;
        let schema: [&str; 6] = if *kind == FitKind::Ols {
            ["Predictor", "beta", "SE", "t", "p", "eta2"]
        } else {
            ["Predictor", "beta", "SE", "z", "p", "OR"]
        };
        ensure(
            r.columns() == schema,
            format!("{id}: columns {:?}", r.columns()),
        )?;
    }
    let m5 = run_preset("M5", &delta, &GlmmOptions::default()).map_err(|e| e.to_string())?;
    let resp = m5
        .coefficient("Response_score")
        .ok_or("no Response_score row")?;
    ensure(
        resp.beta > 0.0 && resp.p < 0.01,
        format!("Response beta {} p {}", resp.beta, resp.p),
    )?;
    Ok(format!(
        "10 presets structural and schema checks; M5 Response beta {:.3} (p {:.1e})",
        resp.beta, resp.p
    ))
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            walk(&p, out);
        } else {
            out.push(p);
        }
    }
}

fn sha256_hex(path: &Path) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

/// Every file is listed, with a matching hash, by the manifest of its
/// nearest ancestor that has one; every manifest's inputs hash correctly.
fn check_manifests(root: &Path) -> Result<usize, String> {
    let mut files = Vec::new();
    walk(root, &mut files);
    let mut listed: BTreeMap<PathBuf, String> = BTreeMap::new();
    let manifests: Vec<&PathBuf> = files
        .iter()
        .filter(|p| p.file_name().unwrap() == "manifest.json")
        .collect();
    for m in &manifests {
        let dir = m.parent().unwrap();
        let v: Value = serde_json::from_str(&std::fs::read_to_string(m).unwrap())
            .map_err(|e| e.to_string())?;
        for section in ["inputs", "outputs"] {
            for entry in v[section]
                .as_array()
                .ok_or(format!("{}: no {section}", m.display()))?
            {
                let path = dir.join(entry["path"].as_str().unwrap());
                let want = entry["sha256"].as_str().unwrap();
                ensure(
                    path.exists(),
                    format!("{} lists missing {}", m.display(), path.display()),
                )?;
                ensure(
                    sha256_hex(&path) == want,
                    format!("hash mismatch for {}", path.display()),
                )?;
                if section == "outputs" {
                    listed.insert(std::path::absolute(&path).unwrap(), m.display().to_string());
                }
            }
        }
    }
    for f in &files {
        if f.file_name().unwrap() == "manifest.json" && f.parent() == Some(root) {
            continue;
        }
        let has_manifest = f
            .ancestors()
            .skip(1)
            .take_while(|a| a.starts_with(root))
            .any(|a| a.join("manifest.json").exists());
        ensure(
            has_manifest,
            format!("{} has no manifest above it", f.display()),
        )?;
        ensure(
            listed.contains_key(&std::path::absolute(f).unwrap()),
            format!("{} is not listed", f.display()),
        )?;
    }
    Ok(manifests.len())
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = Vec::new();
    walk(root, &mut files);
    files
        .into_iter()
        .map(|f| {
            (
                f.strip_prefix(root).unwrap().to_path_buf(),
                std::fs::read(&f).unwrap(),
            )
        })
        .collect()
}

fn c10_demo() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut times = Vec::new();
    let mut roots = Vec::new();
    for run in ["a", "b"] {
        let root = tmp.path().join(run);
        let t = Instant::now();
        let out = Command::new(env!("CARGO_BIN_EXE_argus"))
            .args([
                "--seed",
                "0",
                "--quiet",
                "--out-dir",
                root.to_str().unwrap(),
                "demo",
            ])
            .output()
            .map_err(|e| e.to_string())?;
        let el = t.elapsed();
        ensure(
            out.status.success(),
            format!("demo failed: {}", String::from_utf8_lossy(&out.stderr)),
        )?;
        ensure(el < Duration::from_secs(60), format!("demo took {el:?}"))?;
        times.push(el.as_secs_f64());
        roots.push(root);
    }
    let split: Value = serde_json::from_str(
        &std::fs::read_to_string(roots[0].join("03_split/split.json")).unwrap(),
    )
    .map_err(|e| e.to_string())?;
    ensure(
        split["n_train"] == 496 && split["n_test"] == 124,
        format!("split {} / {}", split["n_train"], split["n_test"]),
    )?;
    for step in [
        "01_ingest",
        "04_cv",
        "10_score",
        "11_analyze/tables/M1.json",
        "12_plot/plot_presence.csv",
    ] {
        ensure(roots[0].join(step).exists(), format!("missing {step}"))?;
    }
    let n = check_manifests(&roots[0])?;
    let (ta, tb) = (tree(&roots[0]), tree(&roots[1]));
    ensure(
        ta.keys().eq(tb.keys()),
        "the two runs wrote different file sets",
    )?;
    if let Some((p, _)) = ta.iter().find(|(p, bytes)| tb[*p] != **bytes) {
        return Err(format!("{} differs between runs", p.display()));
    }
    Ok(format!(
        "{} files, {n} manifests, identical across runs; {:.1}s / {:.1}s",
        ta.len(),
        times[0],
        times[1]
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("agreement oracle suite", c1_agreement_oracles),
        ("hand-derived statistics", c2_hand_statistics),
        ("soft-label training", c3_soft_training),
        ("soft beats hard on annotator noise", c4_soft_beats_hard),
        ("temperature scaling", c5_temperature),
        ("metric oracles", c6_metrics),
        ("logistic and OLS recovery", c7_regression_recovery),
        ("crossed random-intercept GLMM", c8_glmm),
        ("preset fidelity", c9_presets),
        ("end-to-end demo", c10_demo),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.iter().any(|s| *s == id.to_string()) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or(p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
