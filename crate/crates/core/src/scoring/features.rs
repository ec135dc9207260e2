//! Hashed n-gram featurization.

use std::collections::BTreeMap;
use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

pub const DEFAULT_HASH_BITS: u32 = 20;

/// Which n-gram families are hashed into the feature space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub hash_bits: u32,
    pub word_unigrams: bool,
    pub word_bigrams: bool,
    /// Inclusive character n-gram length range; `None` disables them.
    pub char_ngrams: Option<(usize, usize)>,
    /// Scale the non-bias part to unit L2 norm.
    pub normalize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            hash_bits: DEFAULT_HASH_BITS,
            word_unigrams: true,
            word_bigrams: true,
            char_ngrams: Some((3, 5)),
            normalize: true,
        }
    }
}

impl FeatureConfig {
    pub fn words_only() -> Self {
        Self {
            char_ngrams: None,
            ..Self::default()
        }
    }

    pub fn chars_only() -> Self {
        Self {
            word_unigrams: false,
            word_bigrams: false,
            ..Self::default()
        }
    }

    /// Index of the always-on bias slot, one past the hashed space.
    pub fn bias_index(&self) -> u32 {
        1u32 << self.hash_bits
    }
}

/// Sparse vector with sorted, unique indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: u32) -> Option<f64> {
        self.entries
            .binary_search_by_key(&index, |(i, _)| *i)
            .ok()
            .map(|k| self.entries[k].1)
    }
}

fn hash_token(namespace: u8, token: &str, mask: u32) -> u32 {
    let mut h = FnvHasher::default();
    h.write(&[namespace]);
    h.write(token.as_bytes());
    (h.finish() as u32) & mask
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Lowercased word unigrams and bigrams plus character n-grams, hashed into
/// `2^hash_bits` slots. Each slot holds `1 + ln(tf)`; the bias slot is 1.
pub fn featurize(text: &str, config: &FeatureConfig) -> FeatureVector {
    let mask = config.bias_index() - 1;
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    let tokens = words(text);
    if config.word_unigrams {
        for w in &tokens {
            *counts.entry(hash_token(b'w', w, mask)).or_default() += 1.0;
        }
    }
    if config.word_bigrams {
        for pair in tokens.windows(2) {
            let bigram = format!("{} {}", pair[0], pair[1]);
            *counts.entry(hash_token(b'b', &bigram, mask)).or_default() += 1.0;
        }
    }
    if let Some((lo, hi)) = config.char_ngrams {
        let squashed = text
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase();
        if !squashed.is_empty() {
            let chars: Vec<char> = format!(" {squashed} ").chars().collect();
            for n in lo..=hi {
                for gram in chars.windows(n) {
                    let s: String = gram.iter().collect();
                    *counts.entry(hash_token(b'c', &s, mask)).or_default() += 1.0;
                }
            }
        }
    }
    let mut entries: Vec<(u32, f64)> = counts
        .into_iter()
        .map(|(i, tf)| (i, 1.0 + tf.ln()))
        .collect();
    if config.normalize {
        let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
    }
    entries.push((config.bias_index(), 1.0));
    FeatureVector { entries }
}
