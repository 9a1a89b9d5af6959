//! Entity extraction with ConText modifiers and enrichment-token generation.
//!
//! A document's eligibility criteria (or a patient description) is reduced to a
//! [`KeywordSet`]: six lists of entity phrases keyed by polarity (affirmative
//! or negated) and section (current condition, past condition, family
//! history). Mentions from exclusion criteria have their polarity flipped
//! before routing so inclusion and exclusion collapse into one set. Each
//! phrase is then emitted as a single prefixed token such as
//! `pmc_no_myasthenia_gravis`.

mod context;
mod gazetteer;
mod text;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use context::{apply_context, apply_context_with, ScopeOptions, TriggerCategory, TriggerLexicon};
pub use gazetteer::{extract_mentions, EntityType, Gazetteer};
pub use text::{normalize_phrase, split_sentences, words, SentenceSplitter, Word};

use crate::corpus::CriteriaLists;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Temporality {
    Current,
    Historical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Experiencer {
    Patient,
    Family,
}

/// An extracted entity span with its modifiers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub surface: String,
    /// Byte offsets into the source sentence.
    pub span: (usize, usize),
    pub entity_type: EntityType,
    pub negated: bool,
    pub temporality: Temporality,
    pub experiencer: Experiencer,
}

impl Mention {
    pub fn phrase(&self) -> String {
        normalize_phrase(&self.surface)
    }
}

/// Current medical condition, past medical condition, family medical history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Cmc,
    Pmc,
    Fmh,
}

impl Section {
    pub const ALL: [Section; 3] = [Section::Cmc, Section::Pmc, Section::Fmh];

    pub fn prefix(self) -> &'static str {
        match self {
            Section::Cmc => "cmc",
            Section::Pmc => "pmc",
            Section::Fmh => "fmh",
        }
    }
}

/// Family outranks temporality.
pub fn classify_section(mention: &Mention) -> Section {
    match (mention.experiencer, mention.temporality) {
        (Experiencer::Family, _) => Section::Fmh,
        (Experiencer::Patient, Temporality::Historical) => Section::Pmc,
        (Experiencer::Patient, Temporality::Current) => Section::Cmc,
    }
}

/// Flips every mention's negation flag; order and other fields are kept.
pub fn swap_exclusion_polarity(mentions: &[Mention]) -> Vec<Mention> {
    mentions
        .iter()
        .map(|m| Mention {
            negated: !m.negated,
            ..m.clone()
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordSet {
    pub a_cmc: Vec<String>,
    pub a_pmc: Vec<String>,
    pub a_fmh: Vec<String>,
    pub n_cmc: Vec<String>,
    pub n_pmc: Vec<String>,
    pub n_fmh: Vec<String>,
}

impl KeywordSet {
    pub fn list(&self, section: Section, negated: bool) -> &[String] {
        match (negated, section) {
            (false, Section::Cmc) => &self.a_cmc,
            (false, Section::Pmc) => &self.a_pmc,
            (false, Section::Fmh) => &self.a_fmh,
            (true, Section::Cmc) => &self.n_cmc,
            (true, Section::Pmc) => &self.n_pmc,
            (true, Section::Fmh) => &self.n_fmh,
        }
    }

    fn list_mut(&mut self, section: Section, negated: bool) -> &mut Vec<String> {
        match (negated, section) {
            (false, Section::Cmc) => &mut self.a_cmc,
            (false, Section::Pmc) => &mut self.a_pmc,
            (false, Section::Fmh) => &mut self.a_fmh,
            (true, Section::Cmc) => &mut self.n_cmc,
            (true, Section::Pmc) => &mut self.n_pmc,
            (true, Section::Fmh) => &mut self.n_fmh,
        }
    }

    /// Adds a resolved mention to the list chosen by its polarity and section,
    /// unless that list already holds the phrase.
    pub fn add(&mut self, mention: &Mention) {
        let phrase = mention.phrase();
        if phrase.is_empty() {
            return;
        }
        let list = self.list_mut(classify_section(mention), mention.negated);
        if !list.contains(&phrase) {
            list.push(phrase);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lists().all(|(_, _, l)| l.is_empty())
    }

    /// `(negated, section, list)` in emission order.
    pub fn lists(&self) -> impl Iterator<Item = (bool, Section, &[String])> {
        [false, true]
            .into_iter()
            .flat_map(|neg| Section::ALL.into_iter().map(move |s| (neg, s)))
            .map(|(neg, s)| (neg, s, self.list(s, neg)))
    }

    /// Enrichment tokens for the sections enabled in `flags`.
    pub fn enrichment_tokens(&self, flags: EnrichmentFlags) -> Vec<String> {
        self.lists()
            .filter(|(_, section, _)| flags.contains(*section))
            .flat_map(|(negated, section, list)| list.iter().filter_map(move |p| enrichment_token(section, negated, p)))
            .collect()
    }
}

/// Merges inclusion mentions with polarity-swapped exclusion mentions.
pub fn build_keyword_set(inclusion: &[Mention], exclusion: &[Mention]) -> KeywordSet {
    let mut ks = KeywordSet::default();
    for m in inclusion.iter().chain(swap_exclusion_polarity(exclusion).iter()) {
        ks.add(m);
    }
    ks
}

/// `{section}_{no_}?{words joined by _}`; words keep only ASCII letters and digits.
pub fn enrichment_token(section: Section, negated: bool, phrase: &str) -> Option<String> {
    let words: Vec<String> = phrase
        .split_whitespace()
        .map(|w| {
            w.chars()
                .filter(char::is_ascii_alphanumeric)
                .map(|c| c.to_ascii_lowercase())
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
        .collect();
    if words.is_empty() {
        return None;
    }
    let negation = if negated { "no_" } else { "" };
    Some(format!("{}_{negation}{}", section.prefix(), words.join("_")))
}

/// All six lists in the order a_cmc, a_pmc, a_fmh, n_cmc, n_pmc, n_fmh.
pub fn emit_enrichment_tokens(ks: &KeywordSet) -> Vec<String> {
    ks.enrichment_tokens(EnrichmentFlags::ALL)
}

/// Which entity sections contribute enrichment tokens, written as a subset
/// of the letters `c` (current), `p` (past) and `f` (family).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct EnrichmentFlags {
    pub current: bool,
    pub past: bool,
    pub family: bool,
}

impl EnrichmentFlags {
    pub const NONE: EnrichmentFlags = EnrichmentFlags {
        current: false,
        past: false,
        family: false,
    };
    pub const ALL: EnrichmentFlags = EnrichmentFlags {
        current: true,
        past: true,
        family: true,
    };

    pub fn contains(self, section: Section) -> bool {
        match section {
            Section::Cmc => self.current,
            Section::Pmc => self.past,
            Section::Fmh => self.family,
        }
    }

    pub fn is_empty(self) -> bool {
        self == EnrichmentFlags::NONE
    }
}

impl FromStr for EnrichmentFlags {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut flags = EnrichmentFlags::NONE;
        for c in s.chars().filter(|c| !c.is_whitespace() && *c != ',') {
            match c.to_ascii_lowercase() {
                'c' => flags.current = true,
                'p' => flags.past = true,
                'f' => flags.family = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown enrichment flag {other:?} (expected c, p or f)"
                    )))
                }
            }
        }
        Ok(flags)
    }
}

impl fmt::Display for EnrichmentFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (on, c) in [(self.current, 'c'), (self.past, 'p'), (self.family, 'f')] {
            if on {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

impl Serialize for EnrichmentFlags {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EnrichmentFlags {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Gazetteer, trigger lexicon and sentence splitter bundled for annotating
/// whole documents.
#[derive(Debug, Clone)]
pub struct Annotator {
    pub gazetteer: Gazetteer,
    pub triggers: TriggerLexicon,
    pub splitter: SentenceSplitter,
    pub scope: ScopeOptions,
}

impl Annotator {
    pub fn new(gazetteer: Gazetteer, triggers: TriggerLexicon) -> Self {
        Annotator {
            gazetteer,
            triggers,
            splitter: SentenceSplitter::default(),
            scope: ScopeOptions::default(),
        }
    }

    /// Shipped fixture gazetteer and trigger lexicon.
    pub fn fixture() -> Self {
        Annotator::new(Gazetteer::fixture(), TriggerLexicon::shipped())
    }

    /// Resolved mentions for every sentence of `text`, in order. Spans are
    /// relative to their sentence.
    pub fn mentions(&self, text: &str) -> Vec<Mention> {
        self.splitter
            .split(text)
            .into_iter()
            .flat_map(|sentence| {
                let found = self.gazetteer.extract_mentions(sentence);
                apply_context_with(sentence, &found, &self.triggers, self.scope)
            })
            .collect()
    }

    /// Keywords of free text with no exclusion semantics (patient descriptions).
    pub fn keywords_for_text(&self, text: &str) -> KeywordSet {
        build_keyword_set(&self.mentions(text), &[])
    }

    pub fn keywords_for_criteria(&self, criteria: &CriteriaLists) -> KeywordSet {
        let collect =
            |items: &[String]| -> Vec<Mention> { items.iter().flat_map(|item| self.mentions(item)).collect() };
        build_keyword_set(&collect(&criteria.inclusion), &collect(&criteria.exclusion))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mention(surface: &str, negated: bool, temporality: Temporality, experiencer: Experiencer) -> Mention {
        Mention {
            surface: surface.into(),
            span: (0, surface.len()),
            entity_type: EntityType::Disease,
            negated,
            temporality,
            experiencer,
        }
    }

    fn current(surface: &str, negated: bool) -> Mention {
        mention(surface, negated, Temporality::Current, Experiencer::Patient)
    }

    #[test]
    fn section_precedence() {
        let fam_hist = mention("x", false, Temporality::Historical, Experiencer::Family);
        assert_eq!(classify_section(&fam_hist), Section::Fmh);
        let past = mention("x", false, Temporality::Historical, Experiencer::Patient);
        assert_eq!(classify_section(&past), Section::Pmc);
        assert_eq!(classify_section(&current("x", false)), Section::Cmc);
    }

    #[test]
    fn swap_flips_only_negation() {
        let input = vec![current("smoking", true), current("diabetes", false)];
        let swapped = swap_exclusion_polarity(&input);
        assert!(!swapped[0].negated);
        assert!(swapped[1].negated);
        assert_eq!(swapped[0].surface, "smoking");
        assert_eq!(swap_exclusion_polarity(&swapped), input);
    }

    #[test]
    fn not_smoking_exclusion_becomes_smoking() {
        let annotator = Annotator::fixture();
        let criteria = CriteriaLists {
            inclusion: vec![],
            exclusion: vec!["Patients who are not smoking".into()],
        };
        let ks = annotator.keywords_for_criteria(&criteria);
        assert_eq!(ks.a_cmc, ["smoking"]);
        assert!(ks.n_cmc.is_empty());
    }

    #[test]
    fn routing_with_swap() {
        let ks = build_keyword_set(&[current("diabetes", false)], &[current("pregnancy", false)]);
        assert_eq!(ks.a_cmc, ["diabetes"]);
        assert_eq!(ks.n_cmc, ["pregnancy"]);
        assert_eq!(build_keyword_set(&[], &[]), KeywordSet::default());
    }

    #[test]
    fn duplicates_keep_first_and_conflicts_keep_both() {
        let ks = build_keyword_set(
            &[
                current("Asthma", false),
                current("asthma", false),
                current("asthma", true),
            ],
            &[],
        );
        assert_eq!(ks.a_cmc, ["asthma"]);
        assert_eq!(ks.n_cmc, ["asthma"]);
    }

    #[test]
    fn token_format() {
        let ks = KeywordSet {
            n_pmc: vec!["myasthenia gravis".into(), "shortness of breath".into()],
            ..Default::default()
        };
        assert_eq!(
            emit_enrichment_tokens(&ks),
            ["pmc_no_myasthenia_gravis", "pmc_no_shortness_of_breath"]
        );
        let ks = KeywordSet {
            a_fmh: vec!["hyperlipidemia".into()],
            ..Default::default()
        };
        assert_eq!(emit_enrichment_tokens(&ks), ["fmh_hyperlipidemia"]);
        assert!(emit_enrichment_tokens(&KeywordSet::default()).is_empty());
    }

    #[test]
    fn token_order_and_flags() {
        let ks = KeywordSet {
            a_cmc: vec!["a".into()],
            a_pmc: vec!["b".into()],
            a_fmh: vec!["c".into()],
            n_cmc: vec!["d".into()],
            n_pmc: vec!["e".into()],
            n_fmh: vec!["f".into()],
        };
        assert_eq!(
            emit_enrichment_tokens(&ks),
            ["cmc_a", "pmc_b", "fmh_c", "cmc_no_d", "pmc_no_e", "fmh_no_f"]
        );
        let cf: EnrichmentFlags = "cf".parse().unwrap();
        assert_eq!(ks.enrichment_tokens(cf), ["cmc_a", "fmh_c", "cmc_no_d", "fmh_no_f"]);
        assert!(ks.enrichment_tokens(EnrichmentFlags::NONE).is_empty());
    }

    #[test]
    fn non_ascii_letters_are_dropped_from_tokens() {
        assert_eq!(
            enrichment_token(Section::Cmc, false, "sjögren syndrome").as_deref(),
            Some("cmc_sjgren_syndrome")
        );
        assert_eq!(enrichment_token(Section::Cmc, false, "ö"), None);
    }

    #[test]
    fn flag_parsing() {
        let flags: EnrichmentFlags = "cfp".parse().unwrap();
        assert_eq!(flags, EnrichmentFlags::ALL);
        assert_eq!(flags.to_string(), "cpf");
        assert_eq!("".parse::<EnrichmentFlags>().unwrap(), EnrichmentFlags::NONE);
        assert!("cx".parse::<EnrichmentFlags>().is_err());
    }
}
