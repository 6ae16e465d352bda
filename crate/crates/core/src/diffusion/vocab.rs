//! Fixed token vocabulary for the toy text encoder.
//!
//! Covers shapes, colors, relation words, counts, function words and
//! background terms. Unknown words map to a dedicated UNK id; captions longer
//! than the model maximum are truncated.

use crate::palette::{ColorName, ShapeKind};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Maximum text length consumed by the model.
pub const MAX_TEXT_LEN: usize = 24;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        let mut tokens: Vec<String> = vec![PAD_TOKEN.into(), UNK_TOKEN.into()];
        let words: &[&str] = &[
            // counts and articles
            "a", "an", "one", "two", "three", "four", "five", "six",
            // relation words
            "to", "the", "left", "right", "of", "above", "below", "on", "top", "in", "front",
            "behind", "hidden",
            // function / background terms
            "and", "plain", "gray", "background",
        ];
        for w in words {
            tokens.push((*w).to_string());
        }
        for c in ColorName::ALL {
            tokens.push(c.word().to_string());
        }
        for s in ShapeKind::ALL {
            tokens.push(s.noun().to_string());
            tokens.push(s.plural().to_string());
        }
        Self::from_tokens(tokens)
    }
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { tokens, index }
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn pad_id(&self) -> u32 {
        0
    }

    pub fn unk_id(&self) -> u32 {
        1
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    fn words(text: &str) -> impl Iterator<Item = String> + '_ {
        text.to_lowercase()
            .split_whitespace()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_string())
            .filter(|w| !w.is_empty())
            .collect::<Vec<_>>()
            .into_iter()
    }

    /// Token ids, unknown words mapped to UNK, truncated to [`MAX_TEXT_LEN`].
    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        Self::words(text)
            .map(|w| self.index.get(&w).copied().unwrap_or(self.unk_id()))
            .take(MAX_TEXT_LEN)
            .collect()
    }

    /// True iff every word of `text` is a known token.
    pub fn covers(&self, text: &str) -> bool {
        Self::words(text).all(|w| self.index.contains_key(&w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_vocab_covers_the_grammar() {
        let v = Vocabulary::default();
        for text in [
            "a red circle to the left of a blue square",
            "three green triangles",
            "six magenta squares on a plain gray background",
            "an orange triangle hidden behind a cyan circle",
        ] {
            assert!(v.covers(text), "{text}");
            let ids = v.tokenize(text);
            assert!(ids.iter().all(|&id| id != v.unk_id()));
        }
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let v = Vocabulary::default();
        assert!(!v.covers("a purple hexagon"));
        let ids = v.tokenize("a purple hexagon");
        assert_eq!(ids[2], v.unk_id());
        assert_ne!(ids[1], v.unk_id(), "purple itself is in the palette");
    }

    #[test]
    fn tokenization_truncates_at_max_len() {
        let v = Vocabulary::default();
        let long = "a red circle ".repeat(20);
        assert_eq!(v.tokenize(&long).len(), MAX_TEXT_LEN);
    }

    #[test]
    fn ids_are_stable_across_instances() {
        let a = Vocabulary::default();
        let b = Vocabulary::default();
        assert_eq!(a.tokenize("two blue circles"), b.tokenize("two blue circles"));
    }
}
