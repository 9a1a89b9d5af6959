//! Clinical trial records: XML parsing and eligibility criteria splitting.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use quick_xml::events::Event;
use quick_xml::Reader;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which sexes a trial admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum TrialGender {
    #[default]
    All,
    Male,
    Female,
}

impl TrialGender {
    /// Unknown values admit everyone.
    pub fn parse(raw: &str) -> Self {
        match raw.trim().to_ascii_lowercase().as_str() {
            "male" | "males" | "m" => TrialGender::Male,
            "female" | "females" | "f" => TrialGender::Female,
            _ => TrialGender::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalTrial {
    pub nct_id: String,
    pub brief_title: String,
    pub official_title: String,
    pub summary: String,
    pub description: String,
    pub conditions: Vec<String>,
    pub criteria_text: String,
    /// Fractional years.
    pub min_age: Option<f64>,
    /// Fractional years.
    pub max_age: Option<f64>,
    pub gender: TrialGender,
}

impl ClinicalTrial {
    pub fn criteria(&self) -> CriteriaLists {
        split_criteria(&self.criteria_text)
    }
}

/// Element paths used to locate trial fields inside a record.
///
/// A path such as `eligibility/minimum_age` matches any element whose
/// ancestry (relative to the record root) ends with those segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldPaths {
    pub nct_id: String,
    pub brief_title: String,
    pub official_title: String,
    pub summary: String,
    pub description: String,
    pub condition: String,
    pub criteria: String,
    pub minimum_age: String,
    pub maximum_age: String,
    pub gender: String,
}

impl Default for FieldPaths {
    fn default() -> Self {
        FieldPaths {
            nct_id: "id_info/nct_id".into(),
            brief_title: "brief_title".into(),
            official_title: "official_title".into(),
            summary: "brief_summary".into(),
            description: "detailed_description".into(),
            condition: "condition".into(),
            criteria: "eligibility/criteria/textblock".into(),
            minimum_age: "eligibility/minimum_age".into(),
            maximum_age: "eligibility/maximum_age".into(),
            gender: "eligibility/gender".into(),
        }
    }
}

/// One element of a parsed record with all of its descendant text.
struct Element {
    path: Vec<String>,
    text: String,
}

struct XmlRecord {
    elements: Vec<Element>,
}

impl XmlRecord {
    fn matching<'a>(&'a self, path: &str) -> impl Iterator<Item = &'a str> + 'a {
        let want: Vec<String> = path.split('/').filter(|s| !s.is_empty()).map(str::to_string).collect();
        self.elements.iter().filter_map(move |el| {
            if !want.is_empty() && el.path.len() >= want.len() {
                let tail = &el.path[el.path.len() - want.len()..];
                if tail.iter().zip(&want).all(|(a, b)| a == b) {
                    return Some(el.text.as_str());
                }
            }
            None
        })
    }

    fn first(&self, path: &str) -> Option<&str> {
        self.matching(path).next()
    }
}

/// Splits a byte stream holding one or more concatenated XML records.
fn read_records(bytes: &[u8]) -> Result<Vec<XmlRecord>> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().trim_text(false);
    reader.config_mut().check_end_names = true;

    let mut records = Vec::new();
    let mut elements: Vec<Element> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    let mut buf = Vec::new();

    let xml_err = |reader: &Reader<&[u8]>, message: String| Error::Xml {
        offset: reader.error_position(),
        message,
    };

    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| xml_err(&reader, e.to_string()))?;
        match event {
            Event::Start(start) => {
                let name = String::from_utf8_lossy(start.local_name().as_ref()).into_owned();
                names.push(name);
                // The record root itself is not part of any field path.
                let path = names[1..].to_vec();
                elements.push(Element {
                    path,
                    text: String::new(),
                });
                stack.push(elements.len() - 1);
            }
            Event::Empty(start) => {
                if names.is_empty() {
                    records.push(XmlRecord { elements: Vec::new() });
                    continue;
                }
                let name = String::from_utf8_lossy(start.local_name().as_ref()).into_owned();
                let mut path = names[1..].to_vec();
                path.push(name);
                elements.push(Element {
                    path,
                    text: String::new(),
                });
            }
            Event::End(_) => {
                names.pop();
                stack.pop();
                if names.is_empty() {
                    records.push(XmlRecord {
                        elements: std::mem::take(&mut elements),
                    });
                }
            }
            Event::Text(text) => {
                let text = text.unescape().map_err(|e| xml_err(&reader, e.to_string()))?;
                if stack.is_empty() {
                    if !text.trim().is_empty() {
                        return Err(Error::Xml {
                            offset: reader.buffer_position(),
                            message: "text outside of a record element".into(),
                        });
                    }
                    continue;
                }
                for &i in &stack {
                    elements[i].text.push_str(&text);
                }
            }
            Event::CData(data) => {
                let text = String::from_utf8_lossy(&data).into_owned();
                for &i in &stack {
                    elements[i].text.push_str(&text);
                }
            }
            Event::Eof => {
                if !names.is_empty() {
                    return Err(Error::Xml {
                        offset: reader.buffer_position(),
                        message: format!("unexpected end of input inside <{}>", names.join("/")),
                    });
                }
                break;
            }
            _ => {}
        }
        buf.clear();
    }
    Ok(records)
}

static AGE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*(\d+(?:\.\d+)?)\s*(year|month|week|day)s?\s*$").unwrap());

/// Normalizes an age field such as `18 Years` or `6 Months` to fractional years.
///
/// `N/A`, empty strings and unrecognized units yield `None`.
pub fn parse_age(raw: &str) -> Option<f64> {
    let caps = AGE_RE.captures(raw)?;
    let value: f64 = caps[1].parse().ok()?;
    let years = match caps[2].to_ascii_lowercase().as_str() {
        "year" => value,
        "month" => value / 12.0,
        "week" => value * 7.0 / 365.25,
        "day" => value / 365.25,
        _ => return None,
    };
    Some(years)
}

fn record_to_trial(record: &XmlRecord, fields: &FieldPaths) -> Result<ClinicalTrial> {
    let text = |path: &str| record.first(path).map(|s| s.trim().to_string()).unwrap_or_default();

    let nct_id = text(&fields.nct_id);
    if nct_id.is_empty() {
        return Err(Error::Structure(format!(
            "record has no <{}> identifier",
            fields.nct_id
        )));
    }
    let conditions = record
        .matching(&fields.condition)
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    let criteria_text = record.first(&fields.criteria).map(str::to_string).unwrap_or_default();
    let min_age = record.first(&fields.minimum_age).and_then(parse_age);
    let max_age = record.first(&fields.maximum_age).and_then(parse_age);
    if let (Some(lo), Some(hi)) = (min_age, max_age) {
        if lo > hi {
            return Err(Error::Structure(format!(
                "{nct_id}: minimum age {lo} exceeds maximum age {hi}"
            )));
        }
    }
    let gender = record.first(&fields.gender).map(TrialGender::parse).unwrap_or_default();

    Ok(ClinicalTrial {
        brief_title: text(&fields.brief_title),
        official_title: text(&fields.official_title),
        summary: text(&fields.summary),
        description: text(&fields.description),
        conditions,
        criteria_text,
        min_age,
        max_age,
        gender,
        nct_id,
    })
}

/// Parses a single trial record.
pub fn parse_trial(xml: &[u8]) -> Result<ClinicalTrial> {
    parse_trial_with(xml, &FieldPaths::default())
}

pub fn parse_trial_with(xml: &[u8], fields: &FieldPaths) -> Result<ClinicalTrial> {
    let records = read_records(xml)?;
    match records.as_slice() {
        [record] => record_to_trial(record, fields),
        [] => Err(Error::Structure("no XML record found".into())),
        _ => Err(Error::Structure(format!(
            "expected one record, found {}",
            records.len()
        ))),
    }
}

/// Parses every record of a concatenated multi-record stream.
pub fn parse_trials(xml: &[u8], fields: &FieldPaths) -> Result<Vec<ClinicalTrial>> {
    read_records(xml)?.iter().map(|r| record_to_trial(r, fields)).collect()
}

fn xml_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            xml_files(&path, out)?;
        } else if path.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("xml")) {
            out.push(path);
        }
    }
    Ok(())
}

/// Loads a corpus from a directory of XML files (searched recursively, in
/// path order) or from one file of concatenated records.
pub fn load_corpus(path: &Path, fields: &FieldPaths) -> Result<Vec<ClinicalTrial>> {
    let files = if path.is_dir() {
        let mut files = Vec::new();
        xml_files(path, &mut files)?;
        files.sort();
        files
    } else {
        vec![path.to_path_buf()]
    };

    let mut trials = Vec::new();
    let mut seen = HashSet::new();
    for file in files {
        let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
        let parsed = parse_trials(&bytes, fields).map_err(|e| Error::in_file(&file, e))?;
        for trial in parsed {
            if !seen.insert(trial.nct_id.clone()) {
                return Err(Error::in_file(
                    &file,
                    Error::Structure(format!("duplicate trial id {}", trial.nct_id)),
                ));
            }
            trials.push(trial);
        }
    }
    Ok(trials)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriteriaLists {
    pub inclusion: Vec<String>,
    pub exclusion: Vec<String>,
}

static HEADER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(inclusion|exclusion)\s+criteria\b\s*:?").unwrap());

static ITEM_PREFIX_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:[-*•·]+\s*|\d{1,3}[.)]\s*|[a-z][.)]\s+|\(\w{1,3}\)\s*)").unwrap());

const BULLETS: [char; 3] = ['-', '*', '•'];

fn strip_item_prefix(mut item: &str) -> &str {
    item = item.trim();
    while let Some(m) = ITEM_PREFIX_RE.find(item) {
        if m.end() == 0 {
            break;
        }
        // "1.5 mg" is a value, not an enumeration.
        let rest = &item[m.end()..];
        if m.as_str().trim_end().ends_with('.')
            && m.as_str().len() == m.as_str().trim_end().len()
            && rest.starts_with(|c: char| c.is_ascii_digit())
        {
            break;
        }
        item = rest.trim();
    }
    item
}

fn push_item(out: &mut Vec<String>, raw: &str) {
    let item = strip_item_prefix(raw);
    if item.chars().count() >= 3 {
        out.push(item.to_string());
    }
}

fn itemize(region: &str, out: &mut Vec<String>) {
    let lines: Vec<&str> = region.lines().filter(|l| !l.trim().is_empty()).collect();
    for line in &lines {
        let trimmed = line.trim();
        // Flattened lists put every bullet on one line: "- a - b - c".
        let inline_bullet = BULLETS.iter().find(|&&b| trimmed.starts_with(b) && lines.len() == 1);
        match inline_bullet {
            Some(&bullet) => {
                let sep = format!(" {bullet} ");
                for piece in trimmed.split(sep.as_str()) {
                    push_item(out, piece);
                }
            }
            None => push_item(out, trimmed),
        }
    }
}

/// Splits eligibility text into inclusion and exclusion criteria.
///
/// Text is assigned to the list named by the closest preceding header; text
/// before the first header is ignored and headerless text yields empty lists.
pub fn split_criteria(criteria_text: &str) -> CriteriaLists {
    let mut inclusion_at = None;
    let mut exclusion_at = None;
    for caps in HEADER_RE.captures_iter(criteria_text) {
        let whole = caps.get(0).unwrap();
        let slot = if caps[1].eq_ignore_ascii_case("inclusion") {
            &mut inclusion_at
        } else {
            &mut exclusion_at
        };
        if slot.is_none() {
            *slot = Some((whole.start(), whole.end()));
        }
    }

    let region = |own: Option<(usize, usize)>, other: Option<(usize, usize)>| -> &str {
        let Some((_, body_start)) = own else {
            return "";
        };
        let end = match other {
            Some((other_start, _)) if other_start >= body_start => other_start,
            _ => criteria_text.len(),
        };
        &criteria_text[body_start..end]
    };

    let mut lists = CriteriaLists::default();
    itemize(region(inclusion_at, exclusion_at), &mut lists.inclusion);
    itemize(region(exclusion_at, inclusion_at), &mut lists.exclusion);
    lists
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIAL: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<clinical_study>
  <id_info><nct_id>NCT00000001</nct_id></id_info>
  <brief_title>Aspirin in Adults</brief_title>
  <official_title>A Study of Aspirin</official_title>
  <brief_summary><textblock>Summary text.</textblock></brief_summary>
  <detailed_description><textblock>Longer description.</textblock></detailed_description>
  <condition>Heart Disease</condition>
  <condition>Stroke</condition>
  <eligibility>
    <criteria><textblock>
      Inclusion Criteria:
        - Adults with heart disease
      Exclusion Criteria:
        - Pregnancy
    </textblock></criteria>
    <gender>Female</gender>
    <minimum_age>18 Years</minimum_age>
    <maximum_age>65 Years</maximum_age>
  </eligibility>
</clinical_study>
"#;

    #[test]
    fn parses_all_sections() {
        let trial = parse_trial(TRIAL.as_bytes()).unwrap();
        assert_eq!(trial.nct_id, "NCT00000001");
        assert_eq!(trial.brief_title, "Aspirin in Adults");
        assert_eq!(trial.official_title, "A Study of Aspirin");
        assert_eq!(trial.summary, "Summary text.");
        assert_eq!(trial.description, "Longer description.");
        assert_eq!(trial.conditions, vec!["Heart Disease", "Stroke"]);
        assert_eq!(trial.gender, TrialGender::Female);
        assert_eq!(trial.min_age, Some(18.0));
        assert_eq!(trial.max_age, Some(65.0));
        let lists = trial.criteria();
        assert_eq!(lists.inclusion, vec!["Adults with heart disease"]);
        assert_eq!(lists.exclusion, vec!["Pregnancy"]);
    }

    #[test]
    fn months_become_fractional_years() {
        let xml = "<s><id_info><nct_id>N1</nct_id></id_info>\
                   <eligibility><minimum_age>6 Months</minimum_age></eligibility></s>";
        let trial = parse_trial(xml.as_bytes()).unwrap();
        assert_eq!(trial.min_age, Some(0.5));
    }

    #[test]
    fn not_applicable_ages_are_absent() {
        let xml = "<s><id_info><nct_id>N1</nct_id></id_info>\
                   <eligibility><minimum_age>N/A</minimum_age></eligibility></s>";
        let trial = parse_trial(xml.as_bytes()).unwrap();
        assert_eq!(trial.min_age, None);
        assert_eq!(trial.max_age, None);
    }

    #[test]
    fn age_units() {
        assert_eq!(parse_age("2 Weeks"), Some(14.0 / 365.25));
        assert_eq!(parse_age("30 days"), Some(30.0 / 365.25));
        assert_eq!(parse_age("1 Year"), Some(1.0));
        assert_eq!(parse_age("3 Hours"), None);
        assert_eq!(parse_age(""), None);
    }

    #[test]
    fn missing_sections_are_empty() {
        let trial = parse_trial(b"<s><id_info><nct_id>N1</nct_id></id_info></s>").unwrap();
        assert!(trial.brief_title.is_empty());
        assert!(trial.conditions.is_empty());
        assert!(trial.criteria_text.is_empty());
        assert_eq!(trial.gender, TrialGender::All);
    }

    #[test]
    fn unknown_gender_admits_all() {
        let xml = "<s><id_info><nct_id>N1</nct_id></id_info>\
                   <eligibility><gender>Both</gender></eligibility></s>";
        assert_eq!(parse_trial(xml.as_bytes()).unwrap().gender, TrialGender::All);
    }

    #[test]
    fn missing_id_is_structural_error() {
        let err = parse_trial(b"<s><brief_title>x</brief_title></s>").unwrap_err();
        assert!(matches!(err, Error::Structure(_)), "{err}");
    }

    #[test]
    fn inverted_age_bounds_rejected() {
        let xml = "<s><id_info><nct_id>N1</nct_id></id_info><eligibility>\
                   <minimum_age>50 Years</minimum_age><maximum_age>18 Years</maximum_age>\
                   </eligibility></s>";
        assert!(matches!(parse_trial(xml.as_bytes()), Err(Error::Structure(_))));
    }

    #[test]
    fn malformed_xml_reports_offset() {
        let xml = b"<s><id_info><nct_id>N1</nct_id></id_info><brief_title>x</wrong></s>";
        match parse_trial(xml) {
            Err(Error::Xml { offset, .. }) => assert!(offset > 0),
            other => panic!("expected XML error, got {other:?}"),
        }
        assert!(matches!(parse_trial(b"<s><id_info>"), Err(Error::Xml { .. })));
    }

    #[test]
    fn concatenated_records() {
        let xml = format!("{TRIAL}\n{}", TRIAL.replace("NCT00000001", "NCT00000002"));
        let trials = parse_trials(xml.as_bytes(), &FieldPaths::default()).unwrap();
        let ids: Vec<_> = trials.iter().map(|t| t.nct_id.as_str()).collect();
        assert_eq!(ids, ["NCT00000001", "NCT00000002"]);
    }

    #[test]
    fn custom_field_paths() {
        let xml = b"<trial><id>T9</id><title>Hello</title></trial>";
        let fields = FieldPaths {
            nct_id: "id".into(),
            brief_title: "title".into(),
            ..FieldPaths::default()
        };
        let trial = parse_trial_with(xml, &fields).unwrap();
        assert_eq!(trial.nct_id, "T9");
        assert_eq!(trial.brief_title, "Hello");
    }

    #[test]
    fn split_inline_bullets() {
        let lists = split_criteria("Inclusion Criteria: - adult patients - ECOG ≤ 2 Exclusion Criteria: - pregnancy");
        assert_eq!(lists.inclusion, vec!["adult patients", "ECOG ≤ 2"]);
        assert_eq!(lists.exclusion, vec!["pregnancy"]);
    }

    #[test]
    fn headerless_text_yields_nothing() {
        let lists = split_criteria("Patients must be adults.\nNo pregnancy.");
        assert!(lists.inclusion.is_empty() && lists.exclusion.is_empty());
        assert_eq!(split_criteria(""), CriteriaLists::default());
    }

    #[test]
    fn numbered_and_lettered_items() {
        let text = "INCLUSION CRITERIA\n1. Age over 18\n2) Signed consent\n a) sub item here\n\
                    exclusion criteria:\n* Prior chemotherapy\n• HIV\n-\nok";
        let lists = split_criteria(text);
        assert_eq!(lists.inclusion, vec!["Age over 18", "Signed consent", "sub item here"]);
        // "ok" and the lone bullet are shorter than three characters.
        assert_eq!(lists.exclusion, vec!["Prior chemotherapy", "HIV"]);
    }

    #[test]
    fn decimal_values_are_not_enumerations() {
        let lists = split_criteria("Inclusion criteria:\n2.5 mg/dL creatinine or lower");
        assert_eq!(lists.inclusion, vec!["2.5 mg/dL creatinine or lower"]);
    }

    #[test]
    fn exclusion_before_inclusion() {
        let lists = split_criteria("Exclusion Criteria:\n- smokers\nInclusion Criteria:\n- adults");
        assert_eq!(lists.inclusion, vec!["adults"]);
        assert_eq!(lists.exclusion, vec!["smokers"]);
    }
}
