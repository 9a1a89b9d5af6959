//! Dictionary lookup of disease and drug mentions.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::text::{normalize_phrase, words};
use super::{Experiencer, Mention, Temporality};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityType {
    Disease,
    Drug,
}

impl EntityType {
    fn parse(raw: &str) -> Option<Self> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "disease" => Some(EntityType::Disease),
            "drug" | "chemical" => Some(EntityType::Drug),
            _ => None,
        }
    }
}

const FIXTURE_GAZETTEER: &str = include_str!("../../resources/gazetteer_fixture.tsv");

/// Phrase dictionary keyed by normalized (lowercase, single-spaced) text.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: HashMap<String, EntityType>,
    max_words: usize,
}

impl Gazetteer {
    pub fn new() -> Self {
        Gazetteer::default()
    }

    /// The small lexicon shipped with the crate.
    pub fn fixture() -> Self {
        Gazetteer::from_tsv(FIXTURE_GAZETTEER, "gazetteer_fixture.tsv").expect("shipped gazetteer")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Gazetteer::from_tsv(&text, &path.display().to_string())
    }

    /// Parses `phrase<TAB>disease|drug` lines. Blank lines and `#` comments are skipped.
    pub fn from_tsv(text: &str, source_name: &str) -> Result<Self> {
        let mut gazetteer = Gazetteer::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (phrase, kind) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(source_name, n + 1, "expected phrase<TAB>type"))?;
            let kind = EntityType::parse(kind)
                .ok_or_else(|| Error::format(source_name, n + 1, format!("unknown entity type {kind:?}")))?;
            gazetteer
                .insert(phrase, kind)
                .map_err(|msg| Error::format(source_name, n + 1, msg))?;
        }
        Ok(gazetteer)
    }

    pub fn insert(&mut self, phrase: &str, kind: EntityType) -> std::result::Result<(), String> {
        let key = normalize_phrase(phrase);
        if key.is_empty() {
            return Err(format!("phrase {phrase:?} has no words"));
        }
        if self.entries.contains_key(&key) {
            return Err(format!("duplicate phrase {key:?}"));
        }
        self.max_words = self.max_words.max(key.split(' ').count());
        self.entries.insert(key, kind);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, phrase: &str) -> Option<EntityType> {
        self.entries.get(&normalize_phrase(phrase)).copied()
    }

    /// Leftmost-longest matches on word boundaries, modifiers at their defaults.
    pub fn extract_mentions(&self, sentence: &str) -> Vec<Mention> {
        let words = words(sentence);
        let mut mentions = Vec::new();
        let mut i = 0;
        while i < words.len() {
            let longest = (1..=self.max_words.min(words.len() - i)).rev().find_map(|len| {
                let key = words[i..i + len]
                    .iter()
                    .map(|w| w.lower.as_str())
                    .collect::<Vec<_>>()
                    .join(" ");
                self.entries.get(&key).map(|&kind| (len, kind))
            });
            match longest {
                Some((len, entity_type)) => {
                    let (start, end) = (words[i].start, words[i + len - 1].end);
                    mentions.push(Mention {
                        surface: sentence[start..end].to_string(),
                        span: (start, end),
                        entity_type,
                        negated: false,
                        temporality: Temporality::Current,
                        experiencer: Experiencer::Patient,
                    });
                    i += len;
                }
                None => i += 1,
            }
        }
        mentions
    }
}

/// Free-function form of [`Gazetteer::extract_mentions`].
pub fn extract_mentions(sentence: &str, gazetteer: &Gazetteer) -> Vec<Mention> {
    gazetteer.extract_mentions(sentence)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaz(phrases: &[&str]) -> Gazetteer {
        let mut g = Gazetteer::new();
        for p in phrases {
            g.insert(p, EntityType::Disease).unwrap();
        }
        g
    }

    #[test]
    fn longest_match_wins() {
        let g = gaz(&["myasthenia", "myasthenia gravis"]);
        let m = g.extract_mentions("myasthenia gravis suspected");
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].surface, "myasthenia gravis");
        assert_eq!(m[0].span, (0, 17));
    }

    #[test]
    fn fixture_finds_tearing() {
        let m = Gazetteer::fixture().extract_mentions("no pus or tearing in the affected area");
        let surfaces: Vec<_> = m.iter().map(|m| m.surface.as_str()).collect();
        assert_eq!(surfaces, ["tearing"]);
        assert!(!m[0].negated);
        assert_eq!(m[0].temporality, Temporality::Current);
        assert_eq!(m[0].experiencer, Experiencer::Patient);
    }

    #[test]
    fn empty_sentence() {
        assert!(Gazetteer::fixture().extract_mentions("").is_empty());
    }

    #[test]
    fn respects_word_boundaries() {
        let g = gaz(&["dm"]);
        assert!(g.extract_mentions("on admission").is_empty());
        assert_eq!(g.extract_mentions("Type-2 DM.")[0].surface, "DM");
    }

    #[test]
    fn hyphen_separates_words() {
        let g = gaz(&["tinea pedis"]);
        let m = g.extract_mentions("confirmed tinea-pedis");
        assert_eq!(m[0].surface, "tinea-pedis");
    }

    #[test]
    fn leftmost_match_blocks_overlaps() {
        let g = gaz(&["heart failure", "failure to thrive"]);
        let m = g.extract_mentions("heart failure to thrive");
        let surfaces: Vec<_> = m.iter().map(|m| m.surface.as_str()).collect();
        assert_eq!(surfaces, ["heart failure"]);
    }

    #[test]
    fn tsv_errors_carry_line_numbers() {
        let err = Gazetteer::from_tsv("ok\tdisease\nbroken line\n", "g.tsv").unwrap_err();
        assert!(err.to_string().contains("g.tsv:2"), "{err}");
        let err = Gazetteer::from_tsv("a\tdisease\nA\tdrug\n", "g.tsv").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        assert!(Gazetteer::from_tsv("x\tsymptom\n", "g.tsv").is_err());
    }
}
