//! Patient descriptions: topic files, demographics and enriched queries.

use std::collections::HashSet;
use std::sync::LazyLock;

use quick_xml::events::Event;
use quick_xml::Reader;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::annotate::{
    apply_context, words, Annotator, EnrichmentFlags, EntityType, Experiencer, KeywordSet, Mention, SentenceSplitter,
    Temporality, TriggerLexicon,
};
use crate::error::{Error, Result};
use crate::index::{tokenize, Stopwords, TokenStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    Male,
    Female,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub age_years: Option<f64>,
    pub gender: Option<Sex>,
    pub smoker: Option<bool>,
    pub drinker: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientTopic {
    pub topic_id: String,
    pub text: String,
    pub age_years: Option<f64>,
    pub gender: Option<Sex>,
    pub smoker: Option<bool>,
    pub drinker: Option<bool>,
    pub keywords: KeywordSet,
}

impl PatientTopic {
    /// Runs demographic extraction and entity annotation over `text`.
    pub fn from_text(topic_id: &str, text: &str, annotator: &Annotator) -> Self {
        let demo = extract_demographics_with(text, &annotator.triggers, &annotator.splitter);
        PatientTopic {
            topic_id: topic_id.to_string(),
            text: text.to_string(),
            age_years: demo.age_years,
            gender: demo.gender,
            smoker: demo.smoker,
            drinker: demo.drinker,
            keywords: annotator.keywords_for_text(text),
        }
    }

    pub fn demographics(&self) -> Demographics {
        Demographics {
            age_years: self.age_years,
            gender: self.gender,
            smoker: self.smoker,
            drinker: self.drinker,
        }
    }
}

/// Reads a topic file: XML (`<topic number="1">text</topic>`) when the first
/// non-blank character is `<`, otherwise TSV `id<TAB>text`.
pub fn parse_topics(bytes: &[u8]) -> Result<Vec<(String, String)>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Data(format!("topic file is not UTF-8: {e}")))?;
    let topics = if text.trim_start().starts_with('<') {
        parse_xml_topics(text)?
    } else {
        parse_tsv_topics(text)?
    };
    let mut seen = HashSet::new();
    for (id, _) in &topics {
        if !seen.insert(id.as_str()) {
            return Err(Error::format("topics", 0, format!("duplicate topic id {id}")));
        }
    }
    Ok(topics)
}

fn parse_tsv_topics(text: &str) -> Result<Vec<(String, String)>> {
    let mut topics = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, body) = line
            .split_once('\t')
            .ok_or_else(|| Error::format("topics", n + 1, "expected id<TAB>text"))?;
        let id = id.trim();
        if id.is_empty() {
            return Err(Error::format("topics", n + 1, "empty topic id"));
        }
        topics.push((id.to_string(), body.trim().to_string()));
    }
    Ok(topics)
}

fn parse_xml_topics(text: &str) -> Result<Vec<(String, String)>> {
    let mut reader = Reader::from_str(text);
    let mut topics = Vec::new();
    let mut current: Option<(String, String)> = None;
    let xml_err = |reader: &Reader<&[u8]>, message: String| Error::Xml {
        offset: reader.error_position(),
        message,
    };
    loop {
        match reader.read_event().map_err(|e| xml_err(&reader, e.to_string()))? {
            Event::Start(start) if start.local_name().as_ref() == b"topic" => {
                let mut id = None;
                for attr in start.attributes() {
                    let attr = attr.map_err(|e| xml_err(&reader, e.to_string()))?;
                    if matches!(attr.key.local_name().as_ref(), b"number" | b"id") {
                        let value = attr.unescape_value().map_err(|e| xml_err(&reader, e.to_string()))?;
                        id = Some(value.trim().to_string());
                    }
                }
                let id = id.filter(|i| !i.is_empty()).ok_or_else(|| Error::Xml {
                    offset: reader.buffer_position(),
                    message: "<topic> without a number attribute".into(),
                })?;
                current = Some((id, String::new()));
            }
            Event::Text(t) => {
                if let Some((_, body)) = current.as_mut() {
                    body.push_str(&t.unescape().map_err(|e| xml_err(&reader, e.to_string()))?);
                }
            }
            Event::CData(t) => {
                if let Some((_, body)) = current.as_mut() {
                    body.push_str(&String::from_utf8_lossy(&t));
                }
            }
            Event::End(end) if end.local_name().as_ref() == b"topic" => {
                if let Some((id, body)) = current.take() {
                    topics.push((id, body.trim().to_string()));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(topics)
}

static AGE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(\d{1,3}(?:\.\d+)?)[\s-]*(years|year|yrs|yr|y/o|y\.o\.|yo|months|month|mos|mo|weeks|week|wks|wk|days|day)([\s-]*old)?",
    )
    .unwrap()
});

const PERSON_NOUNS: &[&str] = &[
    "man",
    "woman",
    "male",
    "female",
    "boy",
    "girl",
    "patient",
    "pt",
    "infant",
    "baby",
    "child",
    "lady",
    "gentleman",
    "adolescent",
    "toddler",
    "newborn",
    "neonate",
    "person",
    "individual",
];

fn age_from_match(text: &str, caps: &regex::Captures<'_>) -> Option<f64> {
    let whole = caps.get(0)?;
    let after = &text[whole.end()..];
    if after.starts_with(|c: char| c.is_alphanumeric()) {
        return None;
    }
    let value: f64 = caps[1].parse().ok()?;
    let unit = caps[2].to_ascii_lowercase();

    let explicit_old = caps.get(3).is_some() || matches!(unit.as_str(), "y/o" | "y.o." | "yo");
    let before = text[..whole.start()].trim_end().to_ascii_lowercase();
    let age_cue = before.ends_with("age") || before.ends_with("aged") || before.ends_with("age:");
    let next_word: String = after
        .trim_start_matches(|c: char| c.is_whitespace() || c == '-')
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    let person_cue = PERSON_NOUNS.contains(&next_word.as_str());
    if !(explicit_old || age_cue || person_cue) {
        return None;
    }

    let years = match unit.as_str() {
        "years" | "year" | "yrs" | "yr" | "y/o" | "y.o." | "yo" => value,
        "months" | "month" | "mos" | "mo" => value / 12.0,
        "weeks" | "week" | "wks" | "wk" => value * 7.0 / 365.25,
        _ => value / 365.25,
    };
    (0.0..=120.0).contains(&years).then_some(years)
}

const MALE_CUES: &[&str] = &["man", "male", "he", "him", "his", "himself", "boy", "gentleman", "mr"];
const FEMALE_CUES: &[&str] = &[
    "woman", "female", "she", "her", "hers", "herself", "girl", "lady", "mrs", "ms",
];

fn gender_of(text: &str) -> Option<Sex> {
    let (mut male, mut female) = (0usize, 0usize);
    for w in words(text) {
        if MALE_CUES.contains(&w.lower.as_str()) {
            male += 1;
        } else if FEMALE_CUES.contains(&w.lower.as_str()) {
            female += 1;
        }
    }
    match male.cmp(&female) {
        std::cmp::Ordering::Greater => Some(Sex::Male),
        std::cmp::Ordering::Less => Some(Sex::Female),
        std::cmp::Ordering::Equal => None,
    }
}

pub(crate) const SMOKING_PATTERNS: &[&str] = &[
    "smoke",
    "smokes",
    "smoker",
    "smokers",
    "smoking",
    "cigarettes",
    "tobacco use",
];
pub(crate) const DRINKING_PATTERNS: &[&str] = &[
    "drinks",
    "drinker",
    "drinkers",
    "alcohol use",
    "alcohol",
    "beer",
    "wine",
];

/// Finds lifestyle cue phrases in a sentence and reports, for each, whether it
/// is negated (by a pre-negation trigger or a preceding "non").
pub(crate) fn cue_polarities(sentence: &str, patterns: &[&str], triggers: &TriggerLexicon) -> Vec<bool> {
    let ws = words(sentence);
    let mut cues = Vec::new();
    let mut i = 0;
    while i < ws.len() {
        let hit = patterns.iter().find_map(|p| {
            let parts: Vec<&str> = p.split(' ').collect();
            let fits = i + parts.len() <= ws.len() && parts.iter().zip(&ws[i..]).all(|(p, w)| *p == w.lower);
            fits.then_some(parts.len())
        });
        match hit {
            Some(len) => {
                let non = i > 0 && ws[i - 1].lower == "non";
                cues.push((ws[i].start, ws[i + len - 1].end, non));
                i += len;
            }
            None => i += 1,
        }
    }
    let mentions: Vec<Mention> = cues
        .iter()
        .map(|&(start, end, _)| Mention {
            surface: sentence[start..end].to_string(),
            span: (start, end),
            entity_type: EntityType::Disease,
            negated: false,
            temporality: Temporality::Current,
            experiencer: Experiencer::Patient,
        })
        .collect();
    apply_context(sentence, &mentions, triggers)
        .iter()
        .zip(&cues)
        .filter(|(m, _)| m.experiencer == Experiencer::Patient)
        .map(|(m, &(_, _, non))| m.negated || non)
        .collect()
}

fn lifestyle(sentences: &[&str], patterns: &[&str], triggers: &TriggerLexicon) -> Option<bool> {
    let polarities: Vec<bool> = sentences
        .iter()
        .flat_map(|s| cue_polarities(s, patterns, triggers))
        .collect();
    if polarities.iter().any(|negated| !negated) {
        Some(true)
    } else if polarities.is_empty() {
        None
    } else {
        Some(false)
    }
}

/// Age, gender and smoking/drinking status of a patient description, using
/// the shipped trigger lexicon.
pub fn extract_demographics(text: &str) -> Demographics {
    extract_demographics_with(text, &TriggerLexicon::shipped(), &SentenceSplitter::default())
}

pub fn extract_demographics_with(text: &str, triggers: &TriggerLexicon, splitter: &SentenceSplitter) -> Demographics {
    let age_years = AGE_RE.captures_iter(text).find_map(|caps| age_from_match(text, &caps));
    let sentences = splitter.split(text);
    Demographics {
        age_years,
        gender: gender_of(text),
        smoker: lifestyle(&sentences, SMOKING_PATTERNS, triggers),
        drinker: lifestyle(&sentences, DRINKING_PATTERNS, triggers),
    }
}

/// Tokenized description followed by enrichment tokens for the enabled sections.
pub fn build_query(topic: &PatientTopic, flags: EnrichmentFlags, stopwords: &Stopwords) -> TokenStream {
    let mut query = tokenize(&topic.text, stopwords);
    query.extend_verbatim(topic.keywords.enrichment_tokens(flags));
    query
}
