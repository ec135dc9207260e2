//! Canonical data model and ingestion.
//!
//! Annotation files and discussion dumps are JSONL. Ratings are collected per
//! `(item, feature)`, turned into soft labels (empirical rating distributions)
//! and binarized with the presence thresholds used throughout the crate:
//! a mean Story rating of at least 0.5, or a mean feature rating of at least 2.5.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ArgusError, Result};

/// Presence threshold on the mean Story rating.
pub const STORY_THRESHOLD: f64 = 0.5;
/// Presence threshold on mean Likert feature ratings.
pub const FEATURE_THRESHOLD: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    Story,
    Agency,
    EventSequencing,
    WorldMaking,
    Suspense,
    Curiosity,
    Surprise,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::Story,
        Feature::Agency,
        Feature::EventSequencing,
        Feature::WorldMaking,
        Feature::Suspense,
        Feature::Curiosity,
        Feature::Surprise,
    ];

    /// Features carried by scored comments. World Making is annotated but
    /// not scored.
    pub const SCORED: [Feature; 5] = [
        Feature::Agency,
        Feature::EventSequencing,
        Feature::Suspense,
        Feature::Curiosity,
        Feature::Surprise,
    ];

    /// Text-oriented features averaged into the structural score.
    pub const STRUCTURAL: [Feature; 2] = [Feature::Agency, Feature::EventSequencing];
    /// Reader-oriented features averaged into the response score.
    pub const RESPONSE: [Feature; 3] = [Feature::Suspense, Feature::Curiosity, Feature::Surprise];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Story => "Story",
            Feature::Agency => "Agency",
            Feature::EventSequencing => "EventSequencing",
            Feature::WorldMaking => "WorldMaking",
            Feature::Suspense => "Suspense",
            Feature::Curiosity => "Curiosity",
            Feature::Surprise => "Surprise",
        }
    }

    /// Human-readable name, e.g. "Event Sequencing".
    pub fn display_name(self) -> &'static str {
        match self {
            Feature::EventSequencing => "Event Sequencing",
            Feature::WorldMaking => "World Making",
            other => other.name(),
        }
    }

    pub fn is_story(self) -> bool {
        self == Feature::Story
    }

    pub fn min_rating(self) -> i64 {
        if self.is_story() {
            0
        } else {
            1
        }
    }

    pub fn max_rating(self) -> i64 {
        if self.is_story() {
            1
        } else {
            5
        }
    }

    /// Ordinal support: `{0, 1}` for Story, `{1..5}` otherwise.
    pub fn support(self) -> Vec<i64> {
        (self.min_rating()..=self.max_rating()).collect()
    }

    pub fn threshold(self) -> f64 {
        if self.is_story() {
            STORY_THRESHOLD
        } else {
            FEATURE_THRESHOLD
        }
    }

    pub fn is_valid_rating(self, rating: i64) -> bool {
        (self.min_rating()..=self.max_rating()).contains(&rating)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = ArgusError;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "story" => Ok(Feature::Story),
            "agency" => Ok(Feature::Agency),
            "eventsequencing" | "eventsequence" => Ok(Feature::EventSequencing),
            "worldmaking" => Ok(Feature::WorldMaking),
            "suspense" => Ok(Feature::Suspense),
            "curiosity" => Ok(Feature::Curiosity),
            "surprise" => Ok(Feature::Surprise),
            _ => Err(ArgusError::invalid(format!("unknown feature '{s}'"))),
        }
    }
}

impl Serialize for Feature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Feature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Probability vector over an ordered integer support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct RatingDistribution {
    support: Vec<i64>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDistribution {
    support: Vec<i64>,
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for RatingDistribution {
    type Error = ArgusError;
    fn try_from(raw: RawDistribution) -> Result<Self> {
        RatingDistribution::new(raw.support, raw.probs)
    }
}

const MASS_TOLERANCE: f64 = 1e-9;

impl RatingDistribution {
    pub fn new(support: Vec<i64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(ArgusError::invalid("empty support"));
        }
        if support.len() != probs.len() {
            return Err(ArgusError::invalid(format!(
                "support has {} levels but {} probabilities were given",
                support.len(),
                probs.len()
            )));
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ArgusError::invalid("support must be strictly increasing"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(ArgusError::invalid(
                "probabilities must be finite and non-negative",
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(ArgusError::invalid(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { support, probs })
    }

    /// Point mass at `level`.
    pub fn one_hot(support: Vec<i64>, level: i64) -> Result<Self> {
        let probs = support
            .iter()
            .map(|&s| if s == level { 1.0 } else { 0.0 })
            .collect();
        if !support.contains(&level) {
            return Err(ArgusError::invalid(format!("level {level} not in support")));
        }
        Self::new(support, probs)
    }

    /// Softmax outputs are normalized by construction; this only removes ulp drift.
    pub(crate) fn from_normalized(support: Vec<i64>, mut probs: Vec<f64>) -> Self {
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        Self { support, probs }
    }

    pub fn support(&self) -> &[i64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability-weighted mean of the support levels.
    pub fn expected(&self) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .map(|(&s, &p)| s as f64 * p)
            .sum()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = k;
            }
        }
        best
    }
}

/// Empirical distribution of `ratings` over `support`.
pub fn soft_label(ratings: &[i64], support: &[i64]) -> Result<RatingDistribution> {
    if ratings.is_empty() {
        return Err(ArgusError::invalid("soft label needs at least one rating"));
    }
    let mut counts = vec![0usize; support.len()];
    for &r in ratings {
        let k = support.iter().position(|&s| s == r).ok_or_else(|| {
            ArgusError::invalid(format!("rating {r} outside support {support:?}"))
        })?;
        counts[k] += 1;
    }
    let n = ratings.len() as f64;
    let probs = counts.into_iter().map(|c| c as f64 / n).collect();
    RatingDistribution::new(support.to_vec(), probs)
}

pub fn mean_rating(ratings: &[i64]) -> Result<f64> {
    if ratings.is_empty() {
        return Err(ArgusError::invalid("mean of empty rating list"));
    }
    Ok(ratings.iter().sum::<i64>() as f64 / ratings.len() as f64)
}

/// Presence decision for a mean rating; ties at the threshold count as present.
pub fn binarize(mean: f64, feature: Feature) -> Result<bool> {
    let (lo, hi) = (feature.min_rating() as f64, feature.max_rating() as f64);
    if !mean.is_finite() || mean < lo - 1e-9 || mean > hi + 1e-9 {
        return Err(ArgusError::invalid(format!(
            "mean {mean} outside the {feature} range [{lo}, {hi}]"
        )));
    }
    Ok(mean >= feature.threshold())
}

/// Structural (Agency, Event Sequencing) and response (Suspense, Curiosity,
/// Surprise) composites.
pub fn composite_scores(scores: &BTreeMap<Feature, f64>) -> Result<(f64, f64)> {
    let mean_of = |group: &[Feature]| -> Result<f64> {
        let mut total = 0.0;
        for f in group {
            total += scores
                .get(f)
                .ok_or_else(|| ArgusError::invalid(format!("missing {f} score")))?;
        }
        Ok(total / group.len() as f64)
    };
    Ok((mean_of(&Feature::STRUCTURAL)?, mean_of(&Feature::RESPONSE)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub item_id: String,
    pub annotator_id: String,
    pub feature: Feature,
    pub rating: i64,
}

#[derive(Deserialize)]
struct AnnotationLine {
    item_id: String,
    annotator_id: String,
    feature: String,
    rating: i64,
    #[serde(default)]
    text: Option<String>,
}

/// Validated annotation records indexed by `(item, feature)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationStore {
    records: Vec<AnnotationRecord>,
    by_item_feature: BTreeMap<(String, Feature), Vec<usize>>,
    texts: BTreeMap<String, String>,
}

impl AnnotationStore {
    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn text(&self, item_id: &str) -> Option<&str> {
        self.texts.get(item_id).map(String::as_str)
    }

    /// Item ids in lexicographic order.
    pub fn items(&self) -> impl Iterator<Item = &str> {
        self.texts.keys().map(String::as_str)
    }

    pub fn items_with(&self, feature: Feature) -> Vec<&str> {
        self.by_item_feature
            .keys()
            .filter(|(_, f)| *f == feature)
            .map(|(item, _)| item.as_str())
            .collect()
    }

    pub fn annotators(&self, feature: Feature) -> Vec<&str> {
        let set: BTreeSet<&str> = self
            .records
            .iter()
            .filter(|r| r.feature == feature)
            .map(|r| r.annotator_id.as_str())
            .collect();
        set.into_iter().collect()
    }

    /// Ratings for one item and feature, in ingestion order.
    pub fn ratings(&self, item_id: &str, feature: Feature) -> Vec<i64> {
        self.by_item_feature
            .get(&(item_id.to_string(), feature))
            .map(|idx| idx.iter().map(|&i| self.records[i].rating).collect())
            .unwrap_or_default()
    }

    pub fn soft_label(&self, item_id: &str, feature: Feature) -> Result<RatingDistribution> {
        soft_label(&self.ratings(item_id, feature), &feature.support())
    }

    pub fn mean_rating(&self, item_id: &str, feature: Feature) -> Result<f64> {
        mean_rating(&self.ratings(item_id, feature))
    }

    /// Item x annotator table for one feature; `None` where an annotator did
    /// not rate an item. Rows follow [`Self::items_with`], columns
    /// [`Self::annotators`].
    pub fn ratings_matrix(&self, feature: Feature) -> RatingsMatrix {
        let items: Vec<String> = self
            .items_with(feature)
            .into_iter()
            .map(String::from)
            .collect();
        let annotators: Vec<String> = self
            .annotators(feature)
            .into_iter()
            .map(String::from)
            .collect();
        let col: BTreeMap<&str, usize> = annotators
            .iter()
            .enumerate()
            .map(|(i, a)| (a.as_str(), i))
            .collect();
        let cells = items
            .iter()
            .map(|item| {
                let mut row = vec![None; annotators.len()];
                for &i in &self.by_item_feature[&(item.clone(), feature)] {
                    let r = &self.records[i];
                    row[col[r.annotator_id.as_str()]] = Some(r.rating);
                }
                row
            })
            .collect();
        RatingsMatrix {
            items,
            annotators,
            cells,
        }
    }
}

/// Items by annotators, with missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsMatrix {
    pub items: Vec<String>,
    pub annotators: Vec<String>,
    pub cells: Vec<Vec<Option<i64>>>,
}

impl RatingsMatrix {
    /// Rows rated by every annotator.
    pub fn complete_rows(&self) -> Vec<Vec<i64>> {
        self.cells
            .iter()
            .filter_map(|row| row.iter().copied().collect::<Option<Vec<i64>>>())
            .collect()
    }

    /// Observed ratings per row, missing cells dropped.
    pub fn observed_rows(&self) -> Vec<Vec<i64>> {
        self.cells
            .iter()
            .map(|row| row.iter().flatten().copied().collect())
            .collect()
    }
}

fn non_empty_lines<R: BufRead>(
    reader: R,
) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
}

/// Reads `annotations.jsonl`. Line numbers in errors are 1-based.
pub fn ingest_annotations<R: BufRead>(reader: R) -> Result<AnnotationStore> {
    let mut store = AnnotationStore::default();
    let mut keys: BTreeSet<(String, String, Feature)> = BTreeSet::new();
    for (line_no, line) in non_empty_lines(reader) {
        let line = line?;
        let raw: AnnotationLine = serde_json::from_str(&line).map_err(|e| ArgusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let feature: Feature =
            raw.feature
                .parse()
                .map_err(|e: ArgusError| ArgusError::InvalidRecord {
                    line: line_no,
                    message: e.to_string(),
                })?;
        if !feature.is_valid_rating(raw.rating) {
            return Err(ArgusError::InvalidRecord {
                line: line_no,
                message: format!(
                    "rating {} for {feature} outside [{}, {}]",
                    raw.rating,
                    feature.min_rating(),
                    feature.max_rating()
                ),
            });
        }
        let key = (raw.item_id.clone(), raw.annotator_id.clone(), feature);
        if !keys.insert(key) {
            return Err(ArgusError::DuplicateKey {
                line: line_no,
                key: format!("({}, {}, {feature})", raw.item_id, raw.annotator_id),
            });
        }
        if !store.texts.contains_key(&raw.item_id) {
            let text = raw.text.ok_or_else(|| ArgusError::InvalidRecord {
                line: line_no,
                message: format!("first occurrence of item {} carries no text", raw.item_id),
            })?;
            store.texts.insert(raw.item_id.clone(), text);
        }
        let idx = store.records.len();
        store
            .by_item_feature
            .entry((raw.item_id.clone(), feature))
            .or_default()
            .push(idx);
        store.records.push(AnnotationRecord {
            item_id: raw.item_id,
            annotator_id: raw.annotator_id,
            feature,
            rating: raw.rating,
        });
    }
    Ok(store)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuthorRole {
    User,
    Moderator,
    System,
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub comment_id: String,
    pub thread_id: String,
    pub author_id: String,
    pub op_author_id: String,
    pub author_role: AuthorRole,
    pub delta_awarded: bool,
    pub text: String,
    pub text_length: usize,
}

#[derive(Deserialize)]
struct CommentLine {
    comment_id: String,
    thread_id: String,
    author_id: String,
    op_author_id: String,
    author_role: AuthorRole,
    delta_awarded: bool,
    text: String,
}

/// Which comments survive ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub excluded_roles: BTreeSet<AuthorRole>,
    /// Author ids treated as deleted accounts regardless of role.
    pub deleted_author_ids: BTreeSet<String>,
    /// Drop whole threads whose root post has an excluded role.
    pub drop_excluded_threads: bool,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            excluded_roles: [
                AuthorRole::Moderator,
                AuthorRole::System,
                AuthorRole::Deleted,
            ]
            .into_iter()
            .collect(),
            deleted_author_ids: ["[deleted]".to_string()].into_iter().collect(),
            drop_excluded_threads: true,
        }
    }
}

impl FilterPolicy {
    fn excludes(&self, c: &CommentLine) -> bool {
        self.excluded_roles.contains(&c.author_role)
            || self.deleted_author_ids.contains(&c.author_id)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommentTable {
    pub comments: Vec<CommentRecord>,
    pub excluded: usize,
    /// Comments kept although their thread has no root post in the file.
    pub unknown_thread_warnings: usize,
}

impl CommentTable {
    pub fn get(&self, comment_id: &str) -> Option<&CommentRecord> {
        self.comments.iter().find(|c| c.comment_id == comment_id)
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }
}

/// Whitespace-delimited token count.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Reads `comments.jsonl`, dropping moderator, system and deleted authors.
///
/// A thread is known when the file contains its root post (a record whose
/// `comment_id` equals its `thread_id`).
pub fn ingest_threads<R: BufRead>(reader: R, policy: &FilterPolicy) -> Result<CommentTable> {
    let mut lines = Vec::new();
    for (line_no, line) in non_empty_lines(reader) {
        let line = line?;
        let raw: CommentLine = serde_json::from_str(&line).map_err(|e| ArgusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        lines.push(raw);
    }
    let roots: BTreeMap<&str, &CommentLine> = lines
        .iter()
        .filter(|c| c.comment_id == c.thread_id)
        .map(|c| (c.thread_id.as_str(), c))
        .collect();
    let dropped_threads: BTreeSet<&str> = if policy.drop_excluded_threads {
        roots
            .iter()
            .filter(|(_, c)| policy.excludes(c))
            .map(|(t, _)| *t)
            .collect()
    } else {
        BTreeSet::new()
    };

    let mut table = CommentTable::default();
    for c in &lines {
        if policy.excludes(c) || dropped_threads.contains(c.thread_id.as_str()) {
            table.excluded += 1;
            continue;
        }
        if !roots.contains_key(c.thread_id.as_str()) {
            log::warn!(
                "comment {} references unknown thread {}",
                c.comment_id,
                c.thread_id
            );
            table.unknown_thread_warnings += 1;
        }
        table.comments.push(CommentRecord {
            comment_id: c.comment_id.clone(),
            thread_id: c.thread_id.clone(),
            author_id: c.author_id.clone(),
            op_author_id: c.op_author_id.clone(),
            author_role: c.author_role,
            delta_awarded: c.delta_awarded,
            text_length: word_count(&c.text),
            text: c.text.clone(),
        });
    }
    Ok(table)
}

/// Per-comment scores produced by the classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredComment {
    pub comment_id: String,
    pub story_score: f64,
    pub feature_scores: BTreeMap<Feature, f64>,
    pub structural_score: f64,
    pub response_score: f64,
    pub story_present: bool,
    pub feature_present: BTreeMap<Feature, bool>,
}

impl ScoredComment {
    /// Builds a scored comment from a narrativity score in `[0, 1]` and the
    /// five expected feature scores in `[1, 5]`.
    pub fn new(
        comment_id: impl Into<String>,
        story_score: f64,
        feature_scores: BTreeMap<Feature, f64>,
    ) -> Result<Self> {
        for f in Feature::SCORED {
            if !feature_scores.contains_key(&f) {
                return Err(ArgusError::invalid(format!("missing {f} score")));
            }
        }
        if let Some(extra) = feature_scores.keys().find(|f| !Feature::SCORED.contains(f)) {
            return Err(ArgusError::invalid(format!(
                "{extra} is not a scored feature"
            )));
        }
        let (structural_score, response_score) = composite_scores(&feature_scores)?;
        let story_present = binarize(story_score, Feature::Story)?;
        let feature_present = feature_scores
            .iter()
            .map(|(&f, &s)| binarize(s, f).map(|b| (f, b)))
            .collect::<Result<_>>()?;
        Ok(Self {
            comment_id: comment_id.into(),
            story_score,
            feature_scores,
            structural_score,
            response_score,
            story_present,
            feature_present,
        })
    }
}

pub fn read_scored<R: BufRead>(reader: R) -> Result<Vec<ScoredComment>> {
    let mut out = Vec::new();
    for (line_no, line) in non_empty_lines(reader) {
        let line = line?;
        let s: ScoredComment = serde_json::from_str(&line).map_err(|e| ArgusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(s);
    }
    Ok(out)
}

pub fn write_jsonl<W: std::io::Write, T: Serialize>(mut w: W, rows: &[T]) -> Result<()> {
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(item: &str, ann: &str, feature: &str, rating: i64) -> String {
        format!(
            r#"{{"item_id":"{item}","annotator_id":"{ann}","feature":"{feature}","rating":{rating},"text":"t {item}"}}"#
        )
    }

    #[test]
    fn ingests_valid_lines() {
        let data = [
            line("i1", "a1", "Story", 1),
            line("i1", "a2", "Story", 0),
            line("i2", "a1", "Agency", 4),
        ]
        .join("\n");
        let store = ingest_annotations(data.as_bytes()).unwrap();
        assert_eq!(store.len(), 3);
        assert_eq!(store.ratings("i1", Feature::Story), vec![1, 0]);
        assert_eq!(store.text("i2"), Some("t i2"));
    }

    #[test]
    fn rejects_out_of_range_rating_with_line_number() {
        let data = [
            line("i1", "a1", "Story", 1),
            line("i1", "a1", "Suspense", 6),
        ]
        .join("\n");
        match ingest_annotations(data.as_bytes()) {
            Err(ArgusError::InvalidRecord { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("Suspense"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_key() {
        let data = [line("i1", "a1", "Story", 1), line("i1", "a1", "Story", 0)].join("\n");
        assert!(matches!(
            ingest_annotations(data.as_bytes()),
            Err(ArgusError::DuplicateKey { line: 2, .. })
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let data = format!("{}\n{{not json", line("i1", "a1", "Story", 1));
        assert!(matches!(
            ingest_annotations(data.as_bytes()),
            Err(ArgusError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn text_required_on_first_occurrence() {
        let data = r#"{"item_id":"i1","annotator_id":"a1","feature":"Story","rating":1}"#;
        assert!(matches!(
            ingest_annotations(data.as_bytes()),
            Err(ArgusError::InvalidRecord { .. })
        ));
    }

    #[test]
    fn soft_label_examples() {
        let d = soft_label(&[1, 1, 0], &[0, 1]).unwrap();
        assert!((d.probs()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((d.probs()[1] - 2.0 / 3.0).abs() < 1e-15);
        let d = soft_label(&[3, 4, 4, 5], &Feature::Agency.support()).unwrap();
        assert_eq!(d.probs(), &[0.0, 0.0, 0.25, 0.5, 0.25]);
        let d = soft_label(&[2], &Feature::Agency.support()).unwrap();
        assert_eq!(d.probs(), &[0.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(soft_label(&[], &[0, 1]).is_err());
        assert!(soft_label(&[7], &[0, 1]).is_err());
    }

    #[test]
    fn binarize_boundaries() {
        assert!(binarize(0.5, Feature::Story).unwrap());
        assert!(binarize(2.5, Feature::Agency).unwrap());
        assert!(!binarize(2.49, Feature::Suspense).unwrap());
        assert!(binarize(7.0, Feature::Suspense).is_err());
    }

    #[test]
    fn composites() {
        let mut s = BTreeMap::new();
        s.insert(Feature::Agency, 2.0);
        s.insert(Feature::EventSequencing, 4.0);
        s.insert(Feature::Suspense, 2.0);
        s.insert(Feature::Curiosity, 3.0);
        s.insert(Feature::Surprise, 5.0);
        let (structural, response) = composite_scores(&s).unwrap();
        assert_eq!(structural, 3.0);
        assert!((response - 10.0 / 3.0).abs() < 1e-12);
        for f in Feature::RESPONSE {
            s.insert(f, 1.0);
        }
        assert_eq!(composite_scores(&s).unwrap().1, 1.0);
        s.remove(&Feature::Curiosity);
        assert!(composite_scores(&s).is_err());
    }

    fn comment(id: &str, author: &str, role: &str, text: &str) -> String {
        format!(
            r#"{{"comment_id":"{id}","thread_id":"t1","author_id":"{author}","op_author_id":"op","author_role":"{role}","delta_awarded":false,"text":"{text}"}}"#
        )
    }

    #[test]
    fn thread_ingestion_filters_roles() {
        let data = [
            comment("t1", "op", "user", "root post"),
            comment("c1", "u1", "user", "a b  c"),
            comment("c2", "u2", "moderator", "removed"),
            comment("c3", "[deleted]", "user", "x"),
            comment("c4", "u3", "user", "y"),
        ]
        .join("\n");
        let table = ingest_threads(data.as_bytes(), &FilterPolicy::default()).unwrap();
        assert_eq!(table.len(), 3);
        assert_eq!(table.excluded, 2);
        assert_eq!(table.get("c1").unwrap().text_length, 3);
        assert_eq!(table.unknown_thread_warnings, 0);
    }

    #[test]
    fn unknown_thread_is_kept_with_warning() {
        let data = comment("c1", "u1", "user", "hello there");
        let table = ingest_threads(data.as_bytes(), &FilterPolicy::default()).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.unknown_thread_warnings, 1);
    }

    #[test]
    fn moderator_threads_are_dropped() {
        let data = [
            comment("t1", "mod", "moderator", "rules"),
            comment("c1", "u1", "user", "reply"),
        ]
        .join("\n");
        let table = ingest_threads(data.as_bytes(), &FilterPolicy::default()).unwrap();
        assert!(table.is_empty());
    }

    #[test]
    fn ingestion_is_idempotent() {
        let data = [
            line("i1", "a1", "Story", 1),
            line("i2", "a2", "Curiosity", 3),
        ]
        .join("\n");
        let a = ingest_annotations(data.as_bytes()).unwrap();
        let b = ingest_annotations(data.as_bytes()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn feature_names_parse_leniently() {
        assert_eq!(
            "Event Sequencing".parse::<Feature>().unwrap(),
            Feature::EventSequencing
        );
        assert_eq!(
            "world_making".parse::<Feature>().unwrap(),
            Feature::WorldMaking
        );
        assert!("Plot".parse::<Feature>().is_err());
    }

    proptest! {
        #[test]
        fn soft_label_is_a_distribution(ratings in prop::collection::vec(1i64..=5, 1..40)) {
            let d = soft_label(&ratings, &Feature::Curiosity.support()).unwrap();
            prop_assert!(d.probs().iter().all(|&p| p >= 0.0));
            prop_assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!((d.expected() - mean_rating(&ratings).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn raising_a_rating_never_removes_presence(
            ratings in prop::collection::vec(1i64..=5, 1..10),
            idx in 0usize..10,
        ) {
            let idx = idx % ratings.len();
            let before = binarize(mean_rating(&ratings).unwrap(), Feature::Agency).unwrap();
            let mut raised = ratings.clone();
            raised[idx] = (raised[idx] + 1).min(5);
            let after = binarize(mean_rating(&raised).unwrap(), Feature::Agency).unwrap();
            prop_assert!(!before || after);
        }
    }
}
