//! One function per subcommand. Each writes into its own output directory
//! and finishes with a manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use argus_core::agreement::{analyze_feature, Center};
use argus_core::calibration::fit_temperature;
use argus_core::corpus::{
    ingest_annotations, ingest_threads, read_scored, AnnotationStore, CommentTable, Feature,
    FilterPolicy, RatingDistribution, ScoredComment,
};
use argus_core::inference::{preset, run_preset, AnalysisFrame, FrameOptions, GlmmOptions};
use argus_core::metrics::{evaluate_distributions, DistributionEvaluation};
use argus_core::scoring::{
    compact_candidates, default_candidates, featurize, import_predictions, items_from_store,
    nested_cv, stratified_split, train_hard, train_soft, CvConfig, FeatureConfig, Hyper, LabelMode,
    SoftClassifier, TrainingExample,
};
use argus_llmprobe::{
    binarized_kappa, dry_run, probe_batch, read_items, ProbeConfig, ProbeMode, ProbeRow,
    SystemClock, UreqTransport, TOKEN_ENV,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::*;
use crate::error::{CliError, Result};
use crate::manifest::{open, Run};
use crate::plot::{self, PlotKind};

#[derive(Debug, Clone)]
pub struct Ctx {
    pub out_dir: PathBuf,
    pub seed: u64,
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| CliError::usage(format!("missing --{flag}")))
}

/// File-name form of a feature, e.g. `event_sequencing`.
pub fn slug(f: Feature) -> String {
    let mut out = String::new();
    for (i, c) in f.name().chars().enumerate() {
        if c.is_uppercase() && i > 0 {
            out.push('_');
        }
        out.extend(c.to_lowercase());
    }
    out
}

pub fn load_annotations(path: &Path) -> Result<AnnotationStore> {
    Ok(ingest_annotations(open(path)?)?)
}

pub fn load_comments(path: &Path) -> Result<CommentTable> {
    Ok(ingest_threads(open(path)?, &FilterPolicy::default())?)
}

fn load_model(path: &Path) -> Result<SoftClassifier> {
    Ok(SoftClassifier::read_json(open(path)?)?)
}

#[derive(Serialize)]
struct AnnotationLine<'a> {
    item_id: &'a str,
    annotator_id: &'a str,
    feature: Feature,
    rating: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<&'a str>,
}

/// Annotation lines for the items accepted by `keep`, text on first mention.
fn annotation_lines<'a>(
    store: &'a AnnotationStore,
    keep: impl Fn(&str) -> bool,
) -> Vec<AnnotationLine<'a>> {
    let mut seen = std::collections::HashSet::new();
    store
        .records()
        .iter()
        .filter(|r| keep(&r.item_id))
        .map(|r| AnnotationLine {
            item_id: &r.item_id,
            annotator_id: &r.annotator_id,
            feature: r.feature,
            rating: r.rating,
            text: if seen.insert(r.item_id.as_str()) {
                store.text(&r.item_id)
            } else {
                None
            },
        })
        .collect()
}

pub fn ingest(ctx: &Ctx, a: &IngestArgs) -> Result<PathBuf> {
    if a.annotations.is_none() && a.comments.is_none() {
        return Err(CliError::usage(
            "ingest needs --annotations and/or --comments",
        ));
    }
    let mut run = Run::new(&ctx.out_dir, "ingest", ctx.seed, a)?;
    let mut report = serde_json::Map::new();
    if let Some(path) = &a.annotations {
        run.input("annotations", path)?;
        let store = load_annotations(path)?;
        let per_feature: BTreeMap<String, serde_json::Value> = Feature::ALL
            .iter()
            .filter(|&&f| !store.items_with(f).is_empty())
            .map(|&f| {
                (
                    f.name().to_string(),
                    json!({"items": store.items_with(f).len(), "annotators": store.annotators(f)}),
                )
            })
            .collect();
        report.insert(
            "annotations".into(),
            json!({"records": store.len(), "items": store.items().count(), "features": per_feature}),
        );
        run.write_jsonl(
            "annotations",
            "annotations.jsonl",
            &annotation_lines(&store, |_| true),
        )?;
    }
    if let Some(path) = &a.comments {
        run.input("comments", path)?;
        let policy = FilterPolicy {
            drop_excluded_threads: !a.keep_excluded_threads,
            ..Default::default()
        };
        let table = ingest_threads(open(path)?, &policy)?;
        let threads: std::collections::BTreeSet<&str> = table
            .comments
            .iter()
            .map(|c| c.thread_id.as_str())
            .collect();
        let authors: std::collections::BTreeSet<&str> = table
            .comments
            .iter()
            .map(|c| c.author_id.as_str())
            .collect();
        report.insert(
            "comments".into(),
            json!({
                "kept": table.len(),
                "excluded": table.excluded,
                "unknown_thread_warnings": table.unknown_thread_warnings,
                "threads": threads.len(),
                "authors": authors.len(),
                "deltas": table.comments.iter().filter(|c| c.delta_awarded).count(),
            }),
        );
        run.write_jsonl("comments", "comments.jsonl", &table.comments)?;
    }
    run.write_json("report", "ingest_report.json", &report)?;
    run.finish()
}

pub fn agreement(ctx: &Ctx, a: &AgreementArgs) -> Result<PathBuf> {
    let path = need(&a.annotations, "annotations")?;
    let mut run = Run::new(&ctx.out_dir, "agreement", ctx.seed, a)?;
    run.input("annotations", path)?;
    let store = load_annotations(path)?;
    let center: Option<Center> = a.center.map(Into::into);
    let report = analyze_feature(&store, a.feature, a.clusters, ctx.seed, center)?;
    let name = a
        .out
        .clone()
        .unwrap_or_else(|| format!("agreement_{}.json", slug(a.feature)));
    run.write_json("report", &name, &report)?;
    run.finish()
}

#[derive(Serialize, Deserialize)]
pub struct SplitRecord {
    pub feature: Feature,
    pub fraction: f64,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

pub fn split(ctx: &Ctx, a: &SplitArgs) -> Result<PathBuf> {
    let path = need(&a.annotations, "annotations")?;
    if !(a.fraction > 0.0 && a.fraction < 1.0) {
        return Err(CliError::usage(
            "--fraction must lie strictly between 0 and 1",
        ));
    }
    let mut run = Run::new(&ctx.out_dir, "split", ctx.seed, a)?;
    run.input("annotations", path)?;
    let store = load_annotations(path)?;
    let items = items_from_store(&store, a.feature)?;
    let unrated = store.items().count() - items.len();
    if unrated > 0 {
        run.note(format!(
            "{unrated} items without {} ratings are in neither part",
            a.feature
        ));
    }
    let labels: Vec<bool> = items.iter().map(|i| i.label).collect();
    let s = stratified_split(&labels, a.fraction, ctx.seed)?;
    let ids = |idx: &[usize]| -> Vec<String> { idx.iter().map(|&i| items[i].id.clone()).collect() };
    let record = SplitRecord {
        feature: a.feature,
        fraction: a.fraction,
        seed: ctx.seed,
        n_train: s.train.len(),
        n_test: s.heldout.len(),
        train: ids(&s.train),
        test: ids(&s.heldout),
    };
    let train: std::collections::HashSet<&str> = record.train.iter().map(String::as_str).collect();
    let test: std::collections::HashSet<&str> = record.test.iter().map(String::as_str).collect();
    run.write_jsonl(
        "train",
        "train.jsonl",
        &annotation_lines(&store, |id| train.contains(id)),
    )?;
    run.write_jsonl(
        "test",
        "test.jsonl",
        &annotation_lines(&store, |id| test.contains(id)),
    )?;
    run.write_json("split", "split.json", &record)?;
    run.finish()
}

fn feature_config(set: FeatureSet) -> FeatureConfig {
    match set {
        FeatureSet::WordChar => FeatureConfig::default(),
        FeatureSet::Word => FeatureConfig::words_only(),
        FeatureSet::Char => FeatureConfig::chars_only(),
    }
}

fn write_model(run: &mut Run, name: &str, model: &SoftClassifier) -> Result<PathBuf> {
    run.write_with("model", name, |w| Ok(model.write_json(w)?))
}

pub fn train(ctx: &Ctx, a: &TrainArgs) -> Result<PathBuf> {
    let path = need(&a.annotations, "annotations")?;
    let mut run = Run::new(&ctx.out_dir, "train", ctx.seed, a)?;
    run.input("annotations", path)?;
    let store = load_annotations(path)?;
    let items = items_from_store(&store, a.feature)?;
    if items.is_empty() {
        return Err(CliError::usage(format!("no items rated on {}", a.feature)));
    }
    let cfg = feature_config(a.features);
    let hyper = Hyper {
        lambda: a.lambda,
        learning_rate: a.learning_rate,
        epochs: a.epochs,
    };
    let model = match LabelMode::from(a.mode) {
        LabelMode::Soft => {
            let ex: Vec<TrainingExample> = items
                .iter()
                .map(|it| TrainingExample {
                    features: featurize(&it.text, &cfg),
                    target: it.target.clone(),
                })
                .collect();
            train_soft(a.feature, &ex, &cfg, hyper, ctx.seed)?
        }
        LabelMode::Hard => {
            if !a.feature.is_story() {
                return Err(CliError::usage(
                    "hard-label training is defined for Story only",
                ));
            }
            let ex: Vec<_> = items
                .iter()
                .map(|it| (featurize(&it.text, &cfg), it.label))
                .collect();
            train_hard(a.feature, &ex, &cfg, hyper, ctx.seed)?
        }
    };
    let name = a
        .out
        .clone()
        .unwrap_or_else(|| format!("model_{}.json", slug(a.feature)));
    write_model(&mut run, &name, &model)?;
    run.finish()
}

pub fn cv(ctx: &Ctx, a: &CvArgs) -> Result<PathBuf> {
    let path = need(&a.annotations, "annotations")?;
    let mut run = Run::new(&ctx.out_dir, "cv", ctx.seed, a)?;
    run.input("annotations", path)?;
    let store = load_annotations(path)?;
    let items = items_from_store(&store, a.feature)?;
    let candidates = match a.grid {
        GridArg::Default => default_candidates(),
        GridArg::Small => compact_candidates(),
    };
    let mut cfg = CvConfig::new(a.feature, a.mode.into(), ctx.seed);
    cfg.outer_folds = a.outer_folds;
    cfg.inner_folds = a.inner_folds;
    let out = nested_cv(&items, &candidates, &cfg)?;
    let s = slug(a.feature);
    run.write_json("report", &format!("cv_{s}.json"), &out.report)?;
    write_model(&mut run, &format!("model_{s}.json"), &out.model)?;
    run.finish()
}

pub fn calibrate(ctx: &Ctx, a: &CalibrateArgs) -> Result<PathBuf> {
    let model_path = need(&a.model, "model")?;
    let calib = need(&a.calib, "calib")?;
    let mut run = Run::new(&ctx.out_dir, "calibrate", ctx.seed, a)?;
    run.input("model", model_path)?;
    run.input("calibration", calib)?;
    let mut model = load_model(model_path)?;
    let store = load_annotations(calib)?;
    let items = items_from_store(&store, model.feature())?;
    let logits: Vec<Vec<f64>> = items
        .iter()
        .map(|it| model.logits(&model.featurize(&it.text)))
        .collect();
    let targets: Vec<RatingDistribution> = items.iter().map(|it| it.target.clone()).collect();
    let fit = fit_temperature(&logits, &targets)?;
    model.set_temperature(fit.temperature)?;
    let name = match &a.out {
        Some(n) => n.clone(),
        None => model_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("model_{}.json", slug(model.feature()))),
    };
    write_model(&mut run, &name, &model)?;
    run.write_json(
        "calibration",
        &format!("calibration_{}.json", slug(model.feature())),
        &json!({"feature": model.feature(), "n_items": items.len(), "targets": "soft", "fit": fit}),
    )?;
    run.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub item_id: String,
    pub feature: Feature,
    pub probs: Vec<f64>,
}

#[derive(Serialize)]
struct EvaluationReport {
    features: BTreeMap<String, DistributionEvaluation>,
    thresholds: BTreeMap<String, f64>,
    n_predictions: usize,
    /// Predictions whose item has no gold ratings for that feature.
    n_unmatched: usize,
}

pub fn evaluate(ctx: &Ctx, a: &EvaluateArgs) -> Result<PathBuf> {
    let preds_path = need(&a.preds, "preds")?;
    let gold_path = need(&a.gold, "gold")?;
    let mut run = Run::new(&ctx.out_dir, "evaluate", ctx.seed, a)?;
    run.input("predictions", preds_path)?;
    run.input("gold", gold_path)?;
    let table = import_predictions(open(preds_path)?)?;
    let gold = load_annotations(gold_path)?;
    let mut by_feature: BTreeMap<Feature, (Vec<RatingDistribution>, Vec<RatingDistribution>)> =
        BTreeMap::new();
    let mut unmatched = 0;
    for ((item, f), dist) in &table {
        if gold.ratings(item, *f).is_empty() {
            unmatched += 1;
            continue;
        }
        let entry = by_feature.entry(*f).or_default();
        entry.0.push(dist.clone());
        entry.1.push(gold.soft_label(item, *f)?);
    }
    if by_feature.is_empty() {
        return Err(CliError::usage("no prediction matches a gold item"));
    }
    let mut report = EvaluationReport {
        features: BTreeMap::new(),
        thresholds: BTreeMap::new(),
        n_predictions: table.len(),
        n_unmatched: unmatched,
    };
    for (f, (p, g)) in &by_feature {
        report.features.insert(
            f.name().into(),
            evaluate_distributions(p, g, f.threshold())?,
        );
        report.thresholds.insert(f.name().into(), f.threshold());
    }
    run.write_json("metrics", &a.out, &report)?;
    run.finish()
}

pub fn score(ctx: &Ctx, a: &ScoreArgs) -> Result<PathBuf> {
    if a.models.is_empty() {
        return Err(CliError::usage("missing --model"));
    }
    if a.comments.is_some() == a.annotations.is_some() {
        return Err(CliError::usage(
            "score needs exactly one of --comments or --annotations",
        ));
    }
    let mut run = Run::new(&ctx.out_dir, "score", ctx.seed, a)?;
    let mut models: BTreeMap<Feature, SoftClassifier> = BTreeMap::new();
    for p in &a.models {
        run.input("model", p)?;
        let m = load_model(p)?;
        if models.insert(m.feature(), m).is_some() {
            return Err(CliError::usage(format!(
                "two models given for the same feature ({})",
                p.display()
            )));
        }
    }
    let mut preds = Vec::new();
    if let Some(path) = &a.comments {
        run.input("comments", path)?;
        let needed: Vec<Feature> = std::iter::once(Feature::Story)
            .chain(Feature::SCORED)
            .collect();
        let missing: Vec<&str> = needed
            .iter()
            .filter(|f| !models.contains_key(f))
            .map(|f| f.name())
            .collect();
        if !missing.is_empty() {
            return Err(CliError::usage(format!(
                "scoring comments needs models for {}",
                missing.join(", ")
            )));
        }
        let table = load_comments(path)?;
        let mut scored = Vec::with_capacity(table.len());
        for c in &table.comments {
            let mut dists: BTreeMap<Feature, RatingDistribution> = BTreeMap::new();
            for f in &needed {
                let d = models[f].predict_distribution(&c.text);
                preds.push(PredictionRow {
                    item_id: c.comment_id.clone(),
                    feature: *f,
                    probs: d.probs().to_vec(),
                });
                dists.insert(*f, d);
            }
            let features = Feature::SCORED
                .iter()
                .map(|f| (*f, dists[f].expected()))
                .collect();
            scored.push(ScoredComment::new(
                c.comment_id.clone(),
                dists[&Feature::Story].expected(),
                features,
            )?);
        }
        run.write_jsonl("scored", &a.out, &scored)?;
    }
    if let Some(path) = &a.annotations {
        run.input("annotations", path)?;
        let store = load_annotations(path)?;
        for (f, m) in &models {
            for item in store.items_with(*f) {
                let d = m.predict_distribution(store.text(item).unwrap_or(""));
                preds.push(PredictionRow {
                    item_id: item.into(),
                    feature: *f,
                    probs: d.probs().to_vec(),
                });
            }
        }
    }
    run.write_jsonl("predictions", &a.predictions, &preds)?;
    run.finish()
}

pub fn analyze(ctx: &Ctx, a: &AnalyzeArgs) -> Result<PathBuf> {
    let presets = a
        .models
        .iter()
        .map(|id| preset(id.trim()))
        .collect::<argus_core::Result<Vec<_>>>()?;
    if presets.is_empty() {
        return Err(CliError::usage("no models requested"));
    }
    let mut run = Run::new(&ctx.out_dir, "analyze", ctx.seed, a)?;
    let opts = FrameOptions {
        log_length: a.log_length,
    };
    let needs_scored = presets
        .iter()
        .any(|p| p.response == "Delta" || a.annotations.is_none());
    let scored_frame = if needs_scored {
        let sp = need(&a.scored, "scored")?;
        let cp = need(&a.comments, "comments")?;
        run.input("scored", sp)?;
        run.input("comments", cp)?;
        let scored = read_scored(open(sp)?)?;
        Some(AnalysisFrame::from_scored(
            &scored,
            &load_comments(cp)?,
            opts,
        )?)
    } else {
        None
    };
    let annotation_frame = match &a.annotations {
        Some(p) => {
            run.input("annotations", p)?;
            Some(AnalysisFrame::from_annotations(
                &load_annotations(p)?,
                opts,
            )?)
        }
        None => None,
    };
    let glmm = GlmmOptions::default();
    for p in &presets {
        let frame = if p.response == "Delta" {
            scored_frame.as_ref()
        } else {
            annotation_frame.as_ref().or(scored_frame.as_ref())
        };
        let frame = frame.expect("frame loaded above");
        log::info!("fitting {} on {} rows", p.id, frame.len());
        let mut report = run_preset(&p.id, frame, &glmm)?;
        let source = if p.response != "Delta" && annotation_frame.is_some() {
            "annotations"
        } else {
            "scored"
        };
        report.metadata.insert("data".into(), source.into());
        run.write_json("table", &format!("{}/{}.json", a.out, p.id), &report)?;
        run.write_text(
            "table",
            &format!("{}/{}.txt", a.out, p.id),
            &report.to_text(),
        )?;
    }
    run.finish()
}

fn read_probe_rows(path: &Path) -> Result<Vec<ProbeRow>> {
    use std::io::BufRead;
    let mut rows = Vec::new();
    for line in open(path)?.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            rows.push(serde_json::from_str(&line)?);
        }
    }
    Ok(rows)
}

pub fn llm_probe(ctx: &Ctx, a: &LlmProbeArgs) -> Result<PathBuf> {
    let items_path = need(&a.items, "items")?;
    if !(a.timeout > 0.0) {
        return Err(CliError::usage("--timeout must be positive"));
    }
    let mut run = Run::new(&ctx.out_dir, "llm-probe", ctx.seed, a)?;
    run.input("items", items_path)?;
    let items = read_items(open(items_path)?)?;
    let mut cfg = ProbeConfig::new(
        a.endpoint.clone().unwrap_or_default(),
        a.model.clone(),
        a.feature,
        a.mode,
    );
    cfg.timeout = Duration::from_secs_f64(a.timeout);
    cfg.max_retries = a.max_retries;
    cfg.rate_limit = a.rate_limit;
    cfg.validate()?;
    let tag = format!("{}_{}", slug(a.feature), a.mode);
    if a.dry_run {
        run.write_jsonl(
            "prompts",
            &format!("prompts_{tag}.jsonl"),
            &dry_run(&cfg, &items),
        )?;
        run.note("dry run: no requests were sent");
        return run.finish();
    }
    if a.endpoint.as_deref().unwrap_or("").is_empty() {
        return Err(CliError::usage("missing --endpoint (or use --dry-run)"));
    }
    run.note(format!(
        "auth token from {TOKEN_ENV}: {}",
        if cfg.token.is_some() {
            "set"
        } else {
            "not set"
        }
    ));
    let mut transport = UreqTransport::new(&cfg);
    let out = probe_batch(&cfg, &items, &mut transport, &mut SystemClock::default())?;
    let mut meta = json!({
        "settings": cfg.metadata(),
        "items": items.len(),
        "answered": out.rows.len(),
        "failed": out.failures.len(),
    });
    if let Some(other) = &a.compare {
        run.input("compare", other)?;
        let previous = read_probe_rows(other)?;
        let (k, n) = match a.mode {
            ProbeMode::Presence => binarized_kappa(&out.rows, &previous)?,
            ProbeMode::Rating => binarized_kappa(&previous, &out.rows)?,
        };
        meta["presence_vs_binarized_kappa"] = json!({"kappa": k, "items": n});
    }
    run.write_jsonl("rows", &format!("probe_{tag}.jsonl"), &out.rows)?;
    run.write_jsonl("failures", &format!("failures_{tag}.jsonl"), &out.failures)?;
    run.write_json("summary", &format!("probe_{tag}_summary.json"), &meta)?;
    run.finish()
}

pub fn plot_data(ctx: &Ctx, a: &PlotArgs) -> Result<PathBuf> {
    let sp = need(&a.scored, "scored")?;
    let mut run = Run::new(&ctx.out_dir, "plot-data", ctx.seed, a)?;
    run.input("scored", sp)?;
    let scored = read_scored(open(sp)?)?;
    let mut kinds = a.kind.clone();
    kinds.dedup();
    for kind in kinds {
        match kind {
            PlotKind::Presence => {
                run.write_text(
                    "plot",
                    "plot_presence.csv",
                    &plot::to_csv(&plot::presence(&scored)?)?,
                )?;
            }
            PlotKind::Strength => {
                run.write_text(
                    "plot",
                    "plot_strength.csv",
                    &plot::to_csv(&plot::strength(&scored)?)?,
                )?;
            }
            PlotKind::ScoreByDelta => {
                let cp = need(&a.comments, "comments")
                    .map_err(|_| CliError::usage("score_by_delta needs --comments"))?;
                run.input("comments", cp)?;
                let (bins, medians) = plot::score_by_delta(&scored, &load_comments(cp)?)?;
                run.write_text("plot", "plot_score_by_delta.csv", &plot::to_csv(&bins)?)?;
                run.write_text(
                    "plot",
                    "plot_score_by_delta_medians.csv",
                    &plot::to_csv(&medians)?,
                )?;
            }
        }
    }
    run.finish()
}
