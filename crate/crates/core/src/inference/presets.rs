//! Named model specifications and the analysis table they run on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::design::{zscore, DesignMatrix, Grouping};
use super::glmm::{fit_glmm_logistic, GlmmOptions};
use super::logistic::fit_logistic;
use super::ols::fit_ols;
use super::report::{FitKind, RegressionReport};
use crate::corpus::{
    binarize, AnnotationStore, CommentTable, Feature, ScoredComment, FEATURE_THRESHOLD,
};
use crate::error::{ArgusError, Result};

pub const TEXT_LENGTH: &str = "Text_length";
pub const DELTA: &str = "Delta";
pub const STORY_SCALAR: &str = "Story_scalar";
pub const STORY_BINARY: &str = "Story_binary";
pub const STRUCTURAL_SCORE: &str = "Structural_score";
pub const RESPONSE_SCORE: &str = "Response_score";
pub const STRUCTURAL_BINARY: &str = "Structural_binary";
pub const RESPONSE_BINARY: &str = "Response_binary";
pub const AUTHOR: &str = "Author";
pub const OP_AUTHOR: &str = "OPAuthor";

pub fn scalar_column(f: Feature) -> String {
    format!("{}_scalar", f.name())
}

pub fn binary_column(f: Feature) -> String {
    format!("{}_binary", f.name())
}

fn is_binary(column: &str) -> bool {
    column.ends_with("_binary") || column == DELTA
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrameOptions {
    /// Use `ln(1 + words)` instead of the raw word count.
    pub log_length: bool,
}

/// Column-oriented analysis table: numeric columns plus grouping labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalysisFrame {
    pub ids: Vec<String>,
    pub columns: BTreeMap<String, Vec<f64>>,
    pub groups: BTreeMap<String, Vec<String>>,
    pub metadata: BTreeMap<String, String>,
}

fn flag(b: bool) -> f64 {
    f64::from(u8::from(b))
}

fn length_value(words: usize, opts: FrameOptions) -> f64 {
    if opts.log_length {
        (words as f64).ln_1p()
    } else {
        words as f64
    }
}

impl AnalysisFrame {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| ArgusError::invalid(format!("missing variable {name}")))
    }

    fn push(&mut self, name: &str, v: f64) {
        self.columns.entry(name.to_string()).or_default().push(v);
    }

    fn base_metadata(&mut self, opts: FrameOptions) {
        let length = if opts.log_length {
            "ln(1 + word count)"
        } else {
            "word count"
        };
        self.metadata.insert(TEXT_LENGTH.into(), length.into());
        self.metadata.insert(
            "composite_binary".into(),
            format!("composite score >= {FEATURE_THRESHOLD}"),
        );
    }

    /// Joins classifier scores with discussion metadata by comment id.
    /// Scored comments missing from the table are skipped with a warning.
    pub fn from_scored(
        scored: &[ScoredComment],
        comments: &CommentTable,
        opts: FrameOptions,
    ) -> Result<Self> {
        let by_id: BTreeMap<&str, usize> = comments
            .comments
            .iter()
            .enumerate()
            .map(|(i, c)| (c.comment_id.as_str(), i))
            .collect();
        let mut frame = Self::default();
        frame.base_metadata(opts);
        let mut skipped = 0usize;
        for s in scored {
            let Some(&ci) = by_id.get(s.comment_id.as_str()) else {
                skipped += 1;
                continue;
            };
            let c = &comments.comments[ci];
            frame.ids.push(s.comment_id.clone());
            frame.push(STORY_SCALAR, s.story_score);
            frame.push(STORY_BINARY, flag(s.story_present));
            for f in Feature::SCORED {
                let score = *s.feature_scores.get(&f).ok_or_else(|| {
                    ArgusError::invalid(format!("comment {} lacks a {f} score", s.comment_id))
                })?;
                frame.push(&scalar_column(f), score);
                frame.push(&binary_column(f), flag(binarize(score, f)?));
            }
            frame.push(STRUCTURAL_SCORE, s.structural_score);
            frame.push(RESPONSE_SCORE, s.response_score);
            frame.push(
                STRUCTURAL_BINARY,
                flag(s.structural_score >= FEATURE_THRESHOLD),
            );
            frame.push(RESPONSE_BINARY, flag(s.response_score >= FEATURE_THRESHOLD));
            frame.push(TEXT_LENGTH, length_value(c.text_length, opts));
            frame.push(DELTA, flag(c.delta_awarded));
            frame
                .groups
                .entry(AUTHOR.into())
                .or_default()
                .push(c.author_id.clone());
            frame
                .groups
                .entry(OP_AUTHOR.into())
                .or_default()
                .push(c.op_author_id.clone());
        }
        if skipped > 0 {
            log::warn!("{skipped} scored comments have no discussion record and were skipped");
            frame
                .metadata
                .insert("skipped_unmatched".into(), skipped.to_string());
        }
        Ok(frame)
    }

    /// Annotator means per item for items rated on every feature.
    pub fn from_annotations(store: &AnnotationStore, opts: FrameOptions) -> Result<Self> {
        let mut frame = Self::default();
        frame.base_metadata(opts);
        let items: Vec<String> = store.items().map(str::to_string).collect();
        for item in items {
            if Feature::ALL
                .iter()
                .any(|&f| store.ratings(&item, f).is_empty())
            {
                continue;
            }
            frame.ids.push(item.clone());
            let story = store.mean_rating(&item, Feature::Story)?;
            frame.push(STORY_SCALAR, story);
            frame.push(STORY_BINARY, flag(binarize(story, Feature::Story)?));
            let mut scores = BTreeMap::new();
            for f in Feature::ALL.into_iter().filter(|f| !f.is_story()) {
                let m = store.mean_rating(&item, f)?;
                frame.push(&scalar_column(f), m);
                frame.push(&binary_column(f), flag(binarize(m, f)?));
                if Feature::SCORED.contains(&f) {
                    scores.insert(f, m);
                }
            }
            let (structural, response) = crate::corpus::composite_scores(&scores)?;
            frame.push(STRUCTURAL_SCORE, structural);
            frame.push(RESPONSE_SCORE, response);
            frame.push(STRUCTURAL_BINARY, flag(structural >= FEATURE_THRESHOLD));
            frame.push(RESPONSE_BINARY, flag(response >= FEATURE_THRESHOLD));
            let words = crate::corpus::word_count(store.text(&item).unwrap_or(""));
            frame.push(TEXT_LENGTH, length_value(words, opts));
        }
        Ok(frame)
    }
}

/// A fixed regression specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub id: String,
    pub kind: FitKind,
    pub response: String,
    pub predictors: Vec<String>,
    pub random_effects: Vec<String>,
}

pub const PRESET_IDS: [&str; 10] = ["T3", "T4", "M1", "M2", "M3", "M4", "M5", "M6", "M7", "M8"];

pub fn preset(id: &str) -> Result<Preset> {
    let s = |v: &[&str]| -> Vec<String> { v.iter().map(|x| x.to_string()).collect() };
    let six: Vec<Feature> = vec![
        Feature::Agency,
        Feature::EventSequencing,
        Feature::WorldMaking,
        Feature::Suspense,
        Feature::Curiosity,
        Feature::Surprise,
    ];
    let five = [
        Feature::Agency,
        Feature::EventSequencing,
        Feature::Surprise,
        Feature::Suspense,
        Feature::Curiosity,
    ];
    let with_length = |mut v: Vec<String>| {
        v.push(TEXT_LENGTH.to_string());
        v
    };
    let re = s(&[AUTHOR, OP_AUTHOR]);
    let (kind, response, predictors, random_effects) = match id {
        "T3" => (
            FitKind::Ols,
            STORY_SCALAR,
            with_length(six.iter().map(|&f| scalar_column(f)).collect()),
            vec![],
        ),
        "T4" => (
            FitKind::Logistic,
            STORY_BINARY,
            with_length(six.iter().map(|&f| scalar_column(f)).collect()),
            vec![],
        ),
        "M1" => (FitKind::Glmm, DELTA, s(&[STORY_SCALAR, TEXT_LENGTH]), re),
        "M2" => (FitKind::Glmm, DELTA, s(&[STORY_BINARY, TEXT_LENGTH]), re),
        "M3" => (
            FitKind::Ols,
            STORY_SCALAR,
            s(&[STRUCTURAL_SCORE, RESPONSE_SCORE, TEXT_LENGTH]),
            vec![],
        ),
        "M4" => (
            FitKind::Logistic,
            STORY_BINARY,
            s(&[STRUCTURAL_SCORE, RESPONSE_SCORE, TEXT_LENGTH]),
            vec![],
        ),
        "M5" => (
            FitKind::Glmm,
            DELTA,
            s(&[STRUCTURAL_SCORE, RESPONSE_SCORE, TEXT_LENGTH]),
            re,
        ),
        "M6" => (
            FitKind::Glmm,
            DELTA,
            s(&[STRUCTURAL_BINARY, RESPONSE_BINARY, TEXT_LENGTH]),
            re,
        ),
        "M7" => (
            FitKind::Glmm,
            DELTA,
            with_length(five.iter().map(|&f| scalar_column(f)).collect()),
            re,
        ),
        "M8" => (
            FitKind::Glmm,
            DELTA,
            with_length(five.iter().map(|&f| binary_column(f)).collect()),
            re,
        ),
        other => return Err(ArgusError::invalid(format!("unknown model id {other}"))),
    };
    Ok(Preset {
        id: id.to_string(),
        kind,
        response: response.to_string(),
        predictors,
        random_effects,
    })
}

impl Preset {
    /// lme4-style formula string.
    pub fn formula(&self) -> String {
        let mut terms = self.predictors.clone();
        terms.extend(self.random_effects.iter().map(|g| format!("(1|{g})")));
        format!("{} ~ {}", self.response, terms.join(" + "))
    }

    /// Predictors that are z-standardized before fitting.
    pub fn standardized(&self) -> Vec<&str> {
        self.predictors
            .iter()
            .map(String::as_str)
            .filter(|p| !is_binary(p))
            .collect()
    }
}

pub fn run_preset(id: &str, frame: &AnalysisFrame, glmm: &GlmmOptions) -> Result<RegressionReport> {
    run(&preset(id)?, frame, glmm)
}

pub fn run(preset: &Preset, frame: &AnalysisFrame, glmm: &GlmmOptions) -> Result<RegressionReport> {
    let mut columns = Vec::new();
    let mut metadata = frame.metadata.clone();
    let mut standardized = Vec::new();
    for p in &preset.predictors {
        let raw = frame.column(p)?;
        if is_binary(p) {
            columns.push((p.clone(), raw.to_vec()));
        } else {
            let (z, params) = zscore(p, raw)?;
            standardized.push(format!("{p}(mean={:.6}, sd={:.6})", params.mean, params.sd));
            columns.push((p.clone(), z));
        }
    }
    let y = frame.column(&preset.response)?;
    let design = DesignMatrix::with_intercept(&columns)?;
    let mut report = match preset.kind {
        FitKind::Ols => {
            let (z, params) = zscore(&preset.response, y)?;
            standardized.push(format!(
                "{}(mean={:.6}, sd={:.6})",
                preset.response, params.mean, params.sd
            ));
            fit_ols(&z, &design, &preset.response)?
        }
        FitKind::Logistic => {
            fit_logistic(&to_bool(&preset.response, y)?, &design, &preset.response)?
        }
        FitKind::Glmm => {
            let groups = preset
                .random_effects
                .iter()
                .map(|g| {
                    let labels = frame.groups.get(g).ok_or_else(|| {
                        ArgusError::invalid(format!("missing grouping variable {g}"))
                    })?;
                    Grouping::from_labels(g.clone(), labels)
                })
                .collect::<Result<Vec<_>>>()?;
            fit_glmm_logistic(
                &to_bool(&preset.response, y)?,
                &design,
                &groups,
                glmm,
                &preset.response,
            )?
        }
    };
    metadata.insert("formula".into(), preset.formula());
    metadata.insert("standardized".into(), standardized.join("; "));
    metadata.extend(std::mem::take(&mut report.metadata));
    report.metadata = metadata;
    report.model_id = Some(preset.id.clone());
    Ok(report)
}

fn to_bool(name: &str, v: &[f64]) -> Result<Vec<bool>> {
    v.iter()
        .map(|&x| {
            if x == 0.0 {
                Ok(false)
            } else if x == 1.0 {
                Ok(true)
            } else {
                Err(ArgusError::invalid(format!(
                    "{name} must be 0/1, found {x}"
                )))
            }
        })
        .collect()
}
