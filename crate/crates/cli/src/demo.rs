//! The whole pipeline on generated data, one numbered directory per step.

use std::path::PathBuf;

use argus_core::corpus::Feature;
use argus_core::synth::{annotation_lines, thread_lines, CorpusSpec, ThreadSpec};
use serde_json::json;

use crate::args::*;
use crate::commands::{self, slug, Ctx, SplitRecord};
use crate::error::Result;
use crate::manifest::{open, Run};

pub fn demo(ctx: &Ctx, a: &DemoArgs) -> Result<PathBuf> {
    let root = ctx.out_dir.clone();
    let step = |name: &str| Ctx {
        out_dir: root.join(name),
        seed: ctx.seed,
    };
    let mut manifests: Vec<PathBuf> = Vec::new();

    let mut data = Run::new(
        &root.join("00_data"),
        "demo-data",
        ctx.seed,
        json!({"items": a.items, "comments": a.comments}),
    )?;
    let spec = CorpusSpec {
        items: a.items,
        seed: ctx.seed,
        ..Default::default()
    };
    let raw_ann = data.write_text(
        "annotations",
        "annotations.jsonl",
        &(annotation_lines(&spec).join("\n") + "\n"),
    )?;
    let threads = ThreadSpec {
        comments: a.comments,
        seed: ctx.seed,
        ..Default::default()
    };
    let raw_com = data.write_text(
        "comments",
        "comments.jsonl",
        &(thread_lines(&threads).join("\n") + "\n"),
    )?;
    manifests.push(data.finish()?);

    log::info!("ingest");
    let ingest = step("01_ingest");
    manifests.push(commands::ingest(
        &ingest,
        &IngestArgs {
            annotations: Some(raw_ann),
            comments: Some(raw_com),
            keep_excluded_threads: false,
        },
    )?);
    let ann = ingest.out_dir.join("annotations.jsonl");
    let com = ingest.out_dir.join("comments.jsonl");

    log::info!("agreement");
    for f in Feature::ALL {
        manifests.push(commands::agreement(
            &step(&format!("02_agreement/{}", slug(f))),
            &AgreementArgs {
                annotations: Some(ann.clone()),
                feature: f,
                center: None,
                clusters: 2,
                out: None,
            },
        )?);
    }

    log::info!("split");
    let split = step("03_split");
    manifests.push(commands::split(
        &split,
        &SplitArgs {
            annotations: Some(ann.clone()),
            feature: Feature::Story,
            fraction: 0.8,
        },
    )?);
    let record: SplitRecord = serde_json::from_reader(open(&split.out_dir.join("split.json"))?)?;
    log::info!(
        "{} training and {} test items",
        record.n_train,
        record.n_test
    );
    let train = split.out_dir.join("train.jsonl");
    let test = split.out_dir.join("test.jsonl");

    log::info!("cv (Story)");
    let cv = step("04_cv");
    manifests.push(commands::cv(
        &cv,
        &CvArgs {
            annotations: Some(train.clone()),
            feature: Feature::Story,
            mode: ModeArg::Soft,
            grid: GridArg::Small,
            outer_folds: 5,
            inner_folds: 3,
        },
    )?);
    let mut models = vec![cv.out_dir.join("model_story.json")];

    // The five scored features get fixed hyperparameters, trained on part of
    // the training items and calibrated on the rest.
    log::info!("train and calibrate the scored features");
    let inner = step("05_calibration_split");
    manifests.push(commands::split(
        &inner,
        &SplitArgs {
            annotations: Some(train.clone()),
            feature: Feature::Story,
            fraction: 0.8,
        },
    )?);
    for f in Feature::SCORED {
        let s = slug(f);
        let t = step(&format!("06_train/{s}"));
        manifests.push(commands::train(
            &t,
            &TrainArgs {
                annotations: Some(inner.out_dir.join("train.jsonl")),
                feature: f,
                mode: ModeArg::Soft,
                features: FeatureSet::Char,
                lambda: 1e-3,
                learning_rate: 0.5,
                epochs: 100,
                out: None,
            },
        )?);
        let c = step(&format!("07_calibrate/{s}"));
        manifests.push(commands::calibrate(
            &c,
            &CalibrateArgs {
                model: Some(t.out_dir.join(format!("model_{s}.json"))),
                calib: Some(inner.out_dir.join("test.jsonl")),
                out: None,
            },
        )?);
        models.push(c.out_dir.join(format!("model_{s}.json")));
    }

    log::info!("evaluate on the test items");
    let predict = step("08_predict");
    manifests.push(commands::score(
        &predict,
        &ScoreArgs {
            models: models.clone(),
            comments: None,
            annotations: Some(test.clone()),
            out: "scored.jsonl".into(),
            predictions: "predictions.jsonl".into(),
        },
    )?);
    manifests.push(commands::evaluate(
        &step("09_evaluate"),
        &EvaluateArgs {
            preds: Some(predict.out_dir.join("predictions.jsonl")),
            gold: Some(test),
            out: "metrics.json".into(),
        },
    )?);

    log::info!("score comments");
    let score = step("10_score");
    manifests.push(commands::score(
        &score,
        &ScoreArgs {
            models,
            comments: Some(com.clone()),
            annotations: None,
            out: "scored.jsonl".into(),
            predictions: "predictions.jsonl".into(),
        },
    )?);
    let scored = score.out_dir.join("scored.jsonl");

    log::info!("analyze M1");
    manifests.push(commands::analyze(
        &step("11_analyze"),
        &AnalyzeArgs {
            scored: Some(scored.clone()),
            comments: Some(com.clone()),
            annotations: None,
            models: vec!["M1".into()],
            out: "tables".into(),
            log_length: false,
        },
    )?);

    log::info!("plot data");
    manifests.push(commands::plot_data(
        &step("12_plot"),
        &PlotArgs {
            kind: crate::plot::PlotKind::ALL.to_vec(),
            scored: Some(scored),
            comments: Some(com),
        },
    )?);

    let mut run = Run::new(&root, "demo", ctx.seed, a)?;
    for m in &manifests {
        run.record("step manifest", m)?;
    }
    run.note(format!(
        "split: {} training / {} test items",
        record.n_train, record.n_test
    ));
    run.note("Story uses nested CV on the compact grid; the five scored features use fixed hyperparameters");
    run.finish()
}
