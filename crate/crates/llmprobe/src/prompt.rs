//! Prompt construction and response parsing.

use std::fmt;
use std::str::FromStr;

use argus_core::corpus::Feature;
use serde::{Deserialize, Serialize};

use crate::ProbeError;

pub const SYSTEM_PROMPT: &str = "You are a narrative analysis expert.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeMode {
    /// Binary decision, answer is a single digit.
    Presence,
    /// Real-valued strength within the feature's scale.
    Rating,
}

impl fmt::Display for ProbeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProbeMode::Presence => "presence",
            ProbeMode::Rating => "rating",
        })
    }
}

impl FromStr for ProbeMode {
    type Err = ProbeError;

    fn from_str(s: &str) -> Result<Self, ProbeError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "presence" => Ok(ProbeMode::Presence),
            "rating" => Ok(ProbeMode::Rating),
            other => Err(ProbeError::Config(format!(
                "unknown probe mode {other:?}; expected presence or rating"
            ))),
        }
    }
}

/// Codebook descriptions. Story has no codebook row, so its wording is ours.
pub fn definition(feature: Feature) -> &'static str {
    match feature {
        Feature::Story => {
            "A text that recounts a sequence of connected events involving one or more characters, \
             told from some point of view."
        }
        Feature::Agency => {
            "Extent to which a narrative centers on consistent, clearly defined characters driving the action."
        }
        Feature::EventSequencing => "Temporal arrangement of events within the narrative.",
        Feature::WorldMaking => "Construction of a fictional or realistic world through narrative elements.",
        Feature::Suspense => {
            "Presentation of information that suggests future events, thereby creating a delay in resolution."
        }
        Feature::Curiosity => {
            "Presentation of information related to past events, leaving the reader intrigued by missing details."
        }
        Feature::Surprise => {
            "Introduction of unexpected information about an event, eliciting a need for revising previous \
             knowledge about the story."
        }
    }
}

/// Rating bounds substituted into the rating template.
pub fn bounds(feature: Feature) -> (f64, f64) {
    if feature.is_story() {
        (0.0, 1.0)
    } else {
        (1.0, 5.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

pub fn build_prompt(feature: Feature, mode: ProbeMode, text: &str) -> Vec<Message> {
    let name = feature.display_name();
    let def = definition(feature);
    let user = match mode {
        ProbeMode::Presence => format!(
            "Determine whether the following text contains a {name}. Output only a single digit, 0 if the text \
             does not include a {name} and 1 if the text includes a {name}.\n{name} definition:\n{def}\nText:\n{text}"
        ),
        ProbeMode::Rating => {
            let (lo, hi) = bounds(feature);
            format!(
                "Rate the {name} strength in the following text as a real number between {lo} and {hi}. \
                 Output only the number.\n{name} definition: {def}\nText:\n{text}"
            )
        }
    };
    vec![
        Message {
            role: "system".into(),
            content: SYSTEM_PROMPT.into(),
        },
        Message {
            role: "user".into(),
            content: user,
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbeValue {
    Presence(bool),
    Rating(f64),
}

impl ProbeValue {
    pub fn as_f64(self) -> f64 {
        match self {
            ProbeValue::Presence(b) => f64::from(u8::from(b)),
            ProbeValue::Rating(v) => v,
        }
    }
}

pub fn parse_response(
    feature: Feature,
    mode: ProbeMode,
    raw: &str,
) -> Result<ProbeValue, ProbeError> {
    let t = raw.trim();
    let bad = |why: &str| ProbeError::Parse {
        raw: raw.to_string(),
        message: why.to_string(),
    };
    match mode {
        ProbeMode::Presence => match t {
            "0" => Ok(ProbeValue::Presence(false)),
            "1" => Ok(ProbeValue::Presence(true)),
            _ => Err(bad("expected a single digit 0 or 1")),
        },
        ProbeMode::Rating => {
            let v: f64 = t.parse().map_err(|_| bad("not a number"))?;
            let (lo, hi) = bounds(feature);
            if !v.is_finite() || v < lo || v > hi {
                return Err(bad(&format!("outside [{lo}, {hi}]")));
            }
            Ok(ProbeValue::Rating(v))
        }
    }
}
