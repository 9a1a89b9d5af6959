//! Immutable inverted index over configurable trial sections.

mod persist;
mod scoring;
mod tokenize;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use persist::{read_header, read_index, write_index, IndexHeader, INDEX_FORMAT_VERSION, INDEX_MAGIC};
pub use scoring::{
    bm25plus_weight, inexpb2_weight, score, search, tfidf_weight, Model, BM25_B, BM25_DELTA, BM25_K1, INEXPB2_C,
};
pub use tokenize::{tokenize, Stopwords, TokenStream};

use crate::annotate::{EnrichmentFlags, KeywordSet};
use crate::corpus::ClinicalTrial;
use crate::error::{Error, Result};

/// A trial section that can feed the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialField {
    BriefTitle,
    OfficialTitle,
    Description,
    Summary,
    Conditions,
    Inclusion,
    Exclusion,
    Criteria,
}

impl TrialField {
    pub const ALL: [TrialField; 8] = [
        TrialField::BriefTitle,
        TrialField::OfficialTitle,
        TrialField::Description,
        TrialField::Summary,
        TrialField::Conditions,
        TrialField::Inclusion,
        TrialField::Exclusion,
        TrialField::Criteria,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrialField::BriefTitle => "brief_title",
            TrialField::OfficialTitle => "official_title",
            TrialField::Description => "description",
            TrialField::Summary => "summary",
            TrialField::Conditions => "conditions",
            TrialField::Inclusion => "inclusion",
            TrialField::Exclusion => "exclusion",
            TrialField::Criteria => "criteria",
        }
    }

    /// Raw text of this section of `trial`.
    pub fn text(self, trial: &ClinicalTrial) -> String {
        match self {
            TrialField::BriefTitle => trial.brief_title.clone(),
            TrialField::OfficialTitle => trial.official_title.clone(),
            TrialField::Description => trial.description.clone(),
            TrialField::Summary => trial.summary.clone(),
            TrialField::Conditions => trial.conditions.join("\n"),
            TrialField::Inclusion => trial.criteria().inclusion.join("\n"),
            TrialField::Exclusion => trial.criteria().exclusion.join("\n"),
            TrialField::Criteria => trial.criteria_text.clone(),
        }
    }
}

impl FromStr for TrialField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        TrialField::ALL
            .into_iter()
            .find(|f| f.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown trial section {s:?}")))
    }
}

impl fmt::Display for TrialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which sections form a document, in order, and which entity sections
/// contribute enrichment tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionConfig {
    pub sections: Vec<TrialField>,
    #[serde(default)]
    pub enrichment: EnrichmentFlags,
}

impl SectionConfig {
    pub fn new(sections: Vec<TrialField>, enrichment: EnrichmentFlags) -> Result<Self> {
        let cfg = SectionConfig { sections, enrichment };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sections.is_empty() {
            return Err(Error::Config("section list must not be empty".into()));
        }
        Ok(())
    }

    /// Parses `"summary+description+brief_title"` style section lists.
    pub fn parse_sections(spec: &str) -> Result<Vec<TrialField>> {
        spec.split(['+', ','])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect()
    }
}

/// Token stream of one trial: configured sections in order, then enrichment tokens.
pub fn document_tokens(
    trial: &ClinicalTrial,
    keywords: &KeywordSet,
    cfg: &SectionConfig,
    stopwords: &Stopwords,
) -> TokenStream {
    let mut stream = TokenStream::default();
    let criteria = cfg
        .sections
        .iter()
        .any(|f| matches!(f, TrialField::Inclusion | TrialField::Exclusion))
        .then(|| trial.criteria());
    for &field in &cfg.sections {
        let text = match (field, &criteria) {
            (TrialField::Inclusion, Some(c)) => c.inclusion.join("\n"),
            (TrialField::Exclusion, Some(c)) => c.exclusion.join("\n"),
            _ => field.text(trial),
        };
        stream.extend_text(&text, stopwords);
    }
    stream.extend_verbatim(keywords.enrichment_tokens(cfg.enrichment));
    stream
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermEntry {
    pub cf: u64,
    /// Sorted by document ordinal.
    pub postings: Vec<Posting>,
}

impl TermEntry {
    pub fn df(&self) -> u32 {
        self.postings.len() as u32
    }

    pub fn tf(&self, doc: u32) -> u32 {
        self.postings
            .binary_search_by_key(&doc, |p| p.doc)
            .map_or(0, |i| self.postings[i].tf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    doc_ids: Vec<String>,
    doc_lens: Vec<u32>,
    terms: BTreeMap<String, TermEntry>,
    avgdl: f64,
    config: SectionConfig,
    stopwords_digest: String,
}

impl Index {
    /// Builds from pre-tokenized documents.
    pub fn from_streams(
        docs: Vec<(String, TokenStream)>,
        config: SectionConfig,
        stopwords_digest: String,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for (id, _) in &docs {
            if !seen.insert(id.as_str()) {
                return Err(Error::Data(format!("duplicate document id {id}")));
            }
        }
        if docs.len() > u32::MAX as usize {
            return Err(Error::Data("too many documents".into()));
        }

        let mut terms: BTreeMap<String, TermEntry> = BTreeMap::new();
        let mut doc_ids = Vec::with_capacity(docs.len());
        let mut doc_lens = Vec::with_capacity(docs.len());
        for (ordinal, (id, stream)) in docs.into_iter().enumerate() {
            doc_lens.push(stream.len() as u32);
            for (term, tf) in stream.term_counts() {
                let entry = terms.entry(term.to_string()).or_insert_with(|| TermEntry {
                    cf: 0,
                    postings: Vec::new(),
                });
                entry.cf += u64::from(tf);
                entry.postings.push(Posting {
                    doc: ordinal as u32,
                    tf,
                });
            }
            doc_ids.push(id);
        }
        Ok(Index::assemble(doc_ids, doc_lens, terms, config, stopwords_digest))
    }

    fn assemble(
        doc_ids: Vec<String>,
        doc_lens: Vec<u32>,
        terms: BTreeMap<String, TermEntry>,
        config: SectionConfig,
        stopwords_digest: String,
    ) -> Self {
        let total: u64 = doc_lens.iter().map(|&l| u64::from(l)).sum();
        let avgdl = if doc_lens.is_empty() {
            0.0
        } else {
            total as f64 / doc_lens.len() as f64
        };
        Index {
            doc_ids,
            doc_lens,
            terms,
            avgdl,
            config,
            stopwords_digest,
        }
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_id(&self, ordinal: u32) -> &str {
        &self.doc_ids[ordinal as usize]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_len(&self, ordinal: u32) -> u32 {
        self.doc_lens[ordinal as usize]
    }

    pub fn ordinal(&self, doc_id: &str) -> Option<u32> {
        self.doc_ids.iter().position(|d| d == doc_id).map(|i| i as u32)
    }

    pub fn term(&self, term: &str) -> Option<&TermEntry> {
        self.terms.get(term)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &TermEntry)> {
        self.terms.iter().map(|(t, e)| (t.as_str(), e))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn df(&self, term: &str) -> u32 {
        self.terms.get(term).map_or(0, TermEntry::df)
    }

    pub fn cf(&self, term: &str) -> u64 {
        self.terms.get(term).map_or(0, |e| e.cf)
    }

    pub fn config(&self) -> &SectionConfig {
        &self.config
    }

    pub fn stopwords_digest(&self) -> &str {
        &self.stopwords_digest
    }

    /// Refuses an index built with different sections, enrichment or stopwords.
    pub fn check_compatible(&self, config: &SectionConfig, stopwords: &Stopwords) -> Result<()> {
        if &self.config != config {
            return Err(Error::Config(format!(
                "stale index: built for sections [{}] with enrichment {:?}, but the run \
                 configuration asks for sections [{}] with enrichment {:?}; rebuild the index",
                join_fields(&self.config.sections),
                self.config.enrichment.to_string(),
                join_fields(&config.sections),
                config.enrichment.to_string(),
            )));
        }
        if self.stopwords_digest != stopwords.digest() {
            return Err(Error::Config(
                "stale index: built with a different stopword list; rebuild the index".into(),
            ));
        }
        Ok(())
    }
}

fn join_fields(fields: &[TrialField]) -> String {
    fields.iter().map(|f| f.name()).collect::<Vec<_>>().join("+")
}

/// Tokenizes every trial (in parallel) and builds the index.
pub fn build_index(
    trials: &[(ClinicalTrial, KeywordSet)],
    cfg: &SectionConfig,
    stopwords: &Stopwords,
) -> Result<Index> {
    cfg.validate()?;
    let docs: Vec<(String, TokenStream)> = trials
        .par_iter()
        .map(|(trial, ks)| (trial.nct_id.clone(), document_tokens(trial, ks, cfg, stopwords)))
        .collect();
    Index::from_streams(docs, cfg.clone(), stopwords.digest())
}
