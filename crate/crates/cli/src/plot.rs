//! Plot-ready tables for the score distributions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use argus_core::corpus::{CommentTable, Feature, ScoredComment};
use argus_core::stats::median;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const LIKERT_BIN: f64 = 0.25;
pub const STORY_BIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Presence,
    Strength,
    ScoreByDelta,
}

impl PlotKind {
    pub const ALL: [PlotKind; 3] = [
        PlotKind::Presence,
        PlotKind::Strength,
        PlotKind::ScoreByDelta,
    ];
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlotKind::Presence => "presence",
            PlotKind::Strength => "strength",
            PlotKind::ScoreByDelta => "score_by_delta",
        })
    }
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "presence" => Ok(PlotKind::Presence),
            "strength" => Ok(PlotKind::Strength),
            "score_by_delta" => Ok(PlotKind::ScoreByDelta),
            _ => Err(format!(
                "unknown plot kind '{s}' (presence, strength, score_by_delta)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub feature: String,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinRow {
    pub group: String,
    pub bin_start: String,
    pub bin_end: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianRow {
    pub group: String,
    pub n: usize,
    pub median: f64,
}

fn non_empty(scored: &[ScoredComment]) -> Result<()> {
    if scored.is_empty() {
        return Err(CliError::usage("scored table is empty"));
    }
    Ok(())
}

/// Share of comments where Story and each feature are present.
pub fn presence(scored: &[ScoredComment]) -> Result<Vec<RateRow>> {
    non_empty(scored)?;
    let n = scored.len() as f64;
    let mut rows = vec![RateRow {
        feature: Feature::Story.name().into(),
        rate: scored.iter().filter(|s| s.story_present).count() as f64 / n,
    }];
    for f in Feature::SCORED {
        let k = scored
            .iter()
            .filter(|s| s.feature_present.get(&f).copied().unwrap_or(false))
            .count();
        rows.push(RateRow {
            feature: f.name().into(),
            rate: k as f64 / n,
        });
    }
    Ok(rows)
}

/// Counts per fixed-width bin over `[lo, hi]`; the top edge joins the last bin.
pub fn histogram(values: &[f64], lo: f64, hi: f64, width: f64) -> Vec<usize> {
    let bins = ((hi - lo) / width).round() as usize;
    let mut counts = vec![0; bins];
    for &v in values {
        // Nudge so that values sitting on an edge are not lost to rounding.
        let idx = ((v - lo) / width + 1e-9).floor();
        let idx = idx.clamp(0.0, (bins - 1) as f64) as usize;
        counts[idx] += 1;
    }
    counts
}

fn bin_rows(group: &str, values: &[f64], lo: f64, hi: f64, width: f64) -> Vec<BinRow> {
    histogram(values, lo, hi, width)
        .into_iter()
        .enumerate()
        .map(|(i, count)| BinRow {
            group: group.into(),
            bin_start: format!("{:.2}", lo + i as f64 * width),
            bin_end: format!("{:.2}", lo + (i + 1) as f64 * width),
            count,
        })
        .collect()
}

pub fn strength(scored: &[ScoredComment]) -> Result<Vec<BinRow>> {
    non_empty(scored)?;
    let story: Vec<f64> = scored.iter().map(|s| s.story_score).collect();
    let mut rows = bin_rows(Feature::Story.name(), &story, 0.0, 1.0, STORY_BIN);
    for f in Feature::SCORED {
        let v: Vec<f64> = scored
            .iter()
            .filter_map(|s| s.feature_scores.get(&f).copied())
            .collect();
        rows.extend(bin_rows(f.name(), &v, 1.0, 5.0, LIKERT_BIN));
    }
    Ok(rows)
}

/// Story score histograms and medians for Delta and Non-Delta comments.
pub fn score_by_delta(
    scored: &[ScoredComment],
    comments: &CommentTable,
) -> Result<(Vec<BinRow>, Vec<MedianRow>)> {
    non_empty(scored)?;
    let delta: BTreeMap<&str, bool> = comments
        .comments
        .iter()
        .map(|c| (c.comment_id.as_str(), c.delta_awarded))
        .collect();
    let (mut yes, mut no) = (Vec::new(), Vec::new());
    let mut missing = 0;
    for s in scored {
        match delta.get(s.comment_id.as_str()) {
            Some(true) => yes.push(s.story_score),
            Some(false) => no.push(s.story_score),
            None => missing += 1,
        }
    }
    if missing > 0 {
        log::warn!("{missing} scored comments have no discussion record and were left out");
    }
    let mut bins = Vec::new();
    let mut medians = Vec::new();
    for (group, v) in [("Delta", &yes), ("Non-Delta", &no)] {
        bins.extend(bin_rows(group, v, 0.0, 1.0, STORY_BIN));
        medians.push(MedianRow {
            group: group.into(),
            n: v.len(),
            median: if v.is_empty() { f64::NAN } else { median(v) },
        });
    }
    Ok((bins, medians))
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use argus_core::corpus::CommentRecord;

    pub fn scored(id: &str, story: f64, feature: f64) -> ScoredComment {
        let scores = Feature::SCORED.iter().map(|&f| (f, feature)).collect();
        ScoredComment::new(id, story, scores).unwrap()
    }

    #[test]
    fn saturated_presence() {
        let rows = presence(&[scored("a", 0.2, 3.0), scored("b", 0.9, 4.0)]).unwrap();
        assert_eq!(
            rows[0],
            RateRow {
                feature: "Story".into(),
                rate: 0.5
            }
        );
        assert!(rows.iter().find(|r| r.feature == "Agency").unwrap().rate == 1.0);
    }

    #[test]
    fn story_rate_row() {
        let table: Vec<ScoredComment> = (0..100)
            .map(|i| scored(&format!("c{i}"), if i < 43 { 0.8 } else { 0.1 }, 1.0))
            .collect();
        let csv = to_csv(&presence(&table).unwrap()).unwrap();
        assert!(csv.lines().any(|l| l == "Story,0.43"), "{csv}");
        assert!(csv.starts_with("feature,rate\n"));
    }

    #[test]
    fn edges() {
        assert_eq!(
            histogram(&[0.0, 0.1, 0.3, 0.9999, 1.0], 0.0, 1.0, 0.1),
            vec![1, 1, 0, 1, 0, 0, 0, 0, 0, 2]
        );
        assert_eq!(histogram(&[1.0, 1.25, 5.0], 1.0, 5.0, 0.25).len(), 16);
    }

    #[test]
    fn constant_group_median() {
        let comments = CommentTable {
            comments: (0..4)
                .map(|i| CommentRecord {
                    comment_id: format!("c{i}"),
                    thread_id: "t".into(),
                    author_id: "a".into(),
                    op_author_id: "o".into(),
                    author_role: argus_core::corpus::AuthorRole::User,
                    delta_awarded: i == 0,
                    text: String::new(),
                    text_length: 0,
                })
                .collect(),
            ..Default::default()
        };
        let s: Vec<ScoredComment> = (0..4)
            .map(|i| scored(&format!("c{i}"), if i == 0 { 0.7 } else { 0.1 }, 2.0))
            .collect();
        let (bins, med) = score_by_delta(&s, &comments).unwrap();
        assert_eq!(
            med[1],
            MedianRow {
                group: "Non-Delta".into(),
                n: 3,
                median: 0.1
            }
        );
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 4);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(presence(&[]).is_err());
        assert!(strength(&[]).is_err());
    }
}
