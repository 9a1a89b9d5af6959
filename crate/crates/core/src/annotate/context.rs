//! ConText-style modifier assignment.
//!
//! Trigger phrases are matched leftmost-longest on word boundaries. Forward
//! triggers (pre-negation, historical, family) govern mentions from the end of
//! the trigger up to the end of the sentence; post-negation triggers govern
//! mentions before them back to the start of the sentence. A scope is cut by a
//! termination trigger or by another trigger of the same category. Pseudo
//! triggers have no scope: because matching is longest-first they swallow the
//! negation cue they contain ("no change").

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::text::{normalize_phrase, words, Word};
use super::{Experiencer, Mention, Temporality};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TriggerCategory {
    NegPre,
    NegPost,
    PseudoNeg,
    Historical,
    Family,
    Termination,
}

impl TriggerCategory {
    pub fn parse(raw: &str) -> Option<Self> {
        let category = match raw.trim().to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "negpre" => TriggerCategory::NegPre,
            "negpost" => TriggerCategory::NegPost,
            "pseudoneg" => TriggerCategory::PseudoNeg,
            "historical" => TriggerCategory::Historical,
            "family" => TriggerCategory::Family,
            "termination" => TriggerCategory::Termination,
            _ => return None,
        };
        Some(category)
    }
}

const DEFAULT_TRIGGERS: &str = include_str!("../../resources/triggers.tsv");

#[derive(Debug, Clone, Default)]
pub struct TriggerLexicon {
    entries: HashMap<String, Vec<TriggerCategory>>,
    max_words: usize,
}

impl TriggerLexicon {
    /// The seed lexicon shipped with the crate.
    pub fn shipped() -> Self {
        TriggerLexicon::from_tsv(DEFAULT_TRIGGERS, "triggers.tsv").expect("shipped trigger lexicon")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TriggerLexicon::from_tsv(&text, &path.display().to_string())
    }

    /// Parses `phrase<TAB>category` lines.
    pub fn from_tsv(text: &str, source_name: &str) -> Result<Self> {
        let mut lexicon = TriggerLexicon::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (phrase, category) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(source_name, n + 1, "expected phrase<TAB>category"))?;
            let category = TriggerCategory::parse(category)
                .ok_or_else(|| Error::format(source_name, n + 1, format!("unknown category {category:?}")))?;
            lexicon
                .insert(phrase, category)
                .map_err(|msg| Error::format(source_name, n + 1, msg))?;
        }
        Ok(lexicon)
    }

    pub fn insert(&mut self, phrase: &str, category: TriggerCategory) -> std::result::Result<(), String> {
        let key = normalize_phrase(phrase);
        if key.is_empty() {
            return Err(format!("trigger {phrase:?} has no words"));
        }
        let categories = self.entries.entry(key.clone()).or_default();
        if categories.contains(&category) {
            return Err(format!("duplicate trigger {key:?} ({category:?})"));
        }
        categories.push(category);
        self.max_words = self.max_words.max(key.split(' ').count());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Leftmost-longest trigger occurrences as word ranges, skipping words
    /// covered by a mention.
    fn find(&self, words: &[Word], blocked: &[bool]) -> Vec<TriggerHit> {
        let mut hits = Vec::new();
        let mut i = 0;
        while i < words.len() {
            if blocked[i] {
                i += 1;
                continue;
            }
            let longest = (1..=self.max_words.min(words.len() - i)).rev().find_map(|len| {
                if blocked[i..i + len].iter().any(|&b| b) {
                    return None;
                }
                let key = words[i..i + len]
                    .iter()
                    .map(|w| w.lower.as_str())
                    .collect::<Vec<_>>()
                    .join(" ");
                self.entries.get(&key).map(|cats| (len, cats))
            });
            match longest {
                Some((len, categories)) => {
                    for &category in categories {
                        hits.push(TriggerHit {
                            first: i,
                            end: i + len,
                            category,
                        });
                    }
                    i += len;
                }
                None => i += 1,
            }
        }
        hits
    }
}

#[derive(Debug, Clone, Copy)]
struct TriggerHit {
    /// First word index.
    first: usize,
    /// One past the last word index.
    end: usize,
    category: TriggerCategory,
}

/// Scope options.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScopeOptions {
    /// Maximum number of words a scope reaches from its trigger; `None`
    /// bounds scopes by the sentence only.
    pub max_words: Option<usize>,
}

fn word_range(words: &[Word], span: (usize, usize)) -> (usize, usize) {
    let first = words.iter().position(|w| w.start >= span.0).unwrap_or(words.len());
    let end = words.iter().rposition(|w| w.end <= span.1).map_or(first, |i| i + 1);
    (first, end.max(first))
}

/// Resolves negation, temporality and experiencer for mentions of one sentence.
pub fn apply_context(sentence: &str, mentions: &[Mention], triggers: &TriggerLexicon) -> Vec<Mention> {
    apply_context_with(sentence, mentions, triggers, ScopeOptions::default())
}

pub fn apply_context_with(
    sentence: &str,
    mentions: &[Mention],
    triggers: &TriggerLexicon,
    options: ScopeOptions,
) -> Vec<Mention> {
    let words = words(sentence);
    let ranges: Vec<(usize, usize)> = mentions.iter().map(|m| word_range(&words, m.span)).collect();
    let mut blocked = vec![false; words.len()];
    for &(first, end) in &ranges {
        blocked[first..end].iter_mut().for_each(|b| *b = true);
    }
    let hits = triggers.find(&words, &blocked);

    let reach = |len: usize| options.max_words.map_or(len, |m| len.min(m));

    // Forward scope of a trigger: [end, cut) where cut is the next terminator
    // or same-category trigger.
    let forward_scope = |idx: usize| -> (usize, usize) {
        let hit = hits[idx];
        let cut = hits[idx + 1..]
            .iter()
            .find(|h| h.category == TriggerCategory::Termination || h.category == hit.category)
            .map_or(words.len(), |h| h.first);
        (hit.end, hit.end + reach(cut - hit.end))
    };
    let backward_scope = |idx: usize| -> (usize, usize) {
        let hit = hits[idx];
        let cut = hits[..idx]
            .iter()
            .rev()
            .find(|h| h.category == TriggerCategory::Termination || h.category == hit.category)
            .map_or(0, |h| h.end);
        (hit.first - reach(hit.first - cut), hit.first)
    };

    let mut resolved = mentions.to_vec();
    for (idx, hit) in hits.iter().enumerate() {
        let scope = match hit.category {
            TriggerCategory::NegPre | TriggerCategory::Historical | TriggerCategory::Family => forward_scope(idx),
            TriggerCategory::NegPost => backward_scope(idx),
            TriggerCategory::PseudoNeg | TriggerCategory::Termination => continue,
        };
        for (mention, &(first, end)) in resolved.iter_mut().zip(&ranges) {
            if first >= scope.0 && end <= scope.1 && first < end {
                match hit.category {
                    TriggerCategory::NegPre | TriggerCategory::NegPost => mention.negated = true,
                    TriggerCategory::Historical => mention.temporality = Temporality::Historical,
                    TriggerCategory::Family => mention.experiencer = Experiencer::Family,
                    _ => {}
                }
            }
        }
    }
    resolved
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::Gazetteer;

    fn resolve(sentence: &str) -> Vec<Mention> {
        let mentions = Gazetteer::fixture().extract_mentions(sentence);
        apply_context(sentence, &mentions, &TriggerLexicon::shipped())
    }

    fn find<'a>(mentions: &'a [Mention], surface: &str) -> &'a Mention {
        mentions
            .iter()
            .find(|m| m.surface.eq_ignore_ascii_case(surface))
            .unwrap_or_else(|| panic!("no mention {surface:?} in {mentions:?}"))
    }

    #[test]
    fn pre_negation_reaches_sentence_end() {
        let m = resolve("There is no pus or tearing in the affected area");
        assert!(find(&m, "tearing").negated);
    }

    #[test]
    fn negated_history() {
        let m = resolve("has no positive history for any underlying disease such as DM");
        let dm = find(&m, "DM");
        assert!(dm.negated);
        assert_eq!(dm.temporality, Temporality::Historical);
    }

    #[test]
    fn family_history() {
        let m = resolve("family history is positive for hyperlipidemia in her mother");
        let h = find(&m, "hyperlipidemia");
        assert_eq!(h.experiencer, Experiencer::Family);
        assert!(!h.negated);
    }

    #[test]
    fn termination_cuts_scope() {
        let m = resolve("no asthma but hypertension");
        assert!(find(&m, "asthma").negated);
        assert!(!find(&m, "hypertension").negated);
    }

    #[test]
    fn post_negation_looks_backward() {
        let m = resolve("asthma but hypertension was ruled out");
        assert!(!find(&m, "asthma").negated);
        assert!(find(&m, "hypertension").negated);
    }

    #[test]
    fn pseudo_negation_blocks_trigger() {
        let m = resolve("no change in asthma");
        assert!(!find(&m, "asthma").negated);
        let m = resolve("no increase of warfarin");
        assert!(!find(&m, "warfarin").negated);
    }

    #[test]
    fn scope_window() {
        let sentence = "no cough fever rash asthma";
        let mentions = Gazetteer::fixture().extract_mentions(sentence);
        let narrow = apply_context_with(
            sentence,
            &mentions,
            &TriggerLexicon::shipped(),
            ScopeOptions { max_words: Some(2) },
        );
        assert!(!find(&narrow, "asthma").negated);
        assert!(find(&resolve(sentence), "asthma").negated);
    }

    #[test]
    fn triggers_never_change_spans() {
        let sentence = "Patients who are not smoking, no history of diabetes";
        let mentions = Gazetteer::fixture().extract_mentions(sentence);
        let resolved = resolve(sentence);
        let spans: Vec<_> = mentions.iter().map(|m| m.span).collect();
        let resolved_spans: Vec<_> = resolved.iter().map(|m| m.span).collect();
        assert_eq!(spans, resolved_spans);
    }

    #[test]
    fn lexicon_parsing() {
        assert!(TriggerLexicon::from_tsv("no\tNegPre\nno\tnegpre\n", "t").is_err());
        assert!(TriggerLexicon::from_tsv("no\tsometimes\n", "t").is_err());
        let lex = TriggerLexicon::from_tsv("no\tNegPre\nno\tPseudoNeg\n", "t").unwrap();
        assert_eq!(lex.len(), 2);
    }
}
