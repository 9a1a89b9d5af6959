//! Post-retrieval removal of trials a patient cannot enter.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::annotate::TriggerLexicon;
use crate::corpus::{ClinicalTrial, TrialGender};
use crate::error::{Error, Result};
use crate::eval::RunEntry;
use crate::topics::{cue_polarities, Demographics, Sex, DRINKING_PATTERNS, SMOKING_PATTERNS};

/// Enabled filters, written as a subset of `A` (age), `G` (gender),
/// `S` (smoking) and `D` (drinking).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct FilterConfig {
    pub age: bool,
    pub gender: bool,
    pub smoking: bool,
    pub drinking: bool,
}

impl FilterConfig {
    pub const NONE: FilterConfig = FilterConfig {
        age: false,
        gender: false,
        smoking: false,
        drinking: false,
    };

    pub fn is_empty(self) -> bool {
        self == FilterConfig::NONE
    }
}

impl FromStr for FilterConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut cfg = FilterConfig::NONE;
        for c in s.chars().filter(|c| !c.is_whitespace() && *c != ',' && *c != '+') {
            match c.to_ascii_uppercase() {
                'A' => cfg.age = true,
                'G' => cfg.gender = true,
                'S' => cfg.smoking = true,
                'D' => cfg.drinking = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown filter flag {other:?} (expected A, G, S or D)"
                    )))
                }
            }
        }
        Ok(cfg)
    }
}

impl fmt::Display for FilterConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (on, c) in [
            (self.age, 'A'),
            (self.gender, 'G'),
            (self.smoking, 'S'),
            (self.drinking, 'D'),
        ] {
            if on {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

impl Serialize for FilterConfig {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FilterConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// The trial-side facts the filters consult.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrialEligibility {
    pub min_age: Option<f64>,
    pub max_age: Option<f64>,
    pub gender: TrialGender,
    /// An exclusion criterion names smoking affirmatively.
    pub excludes_smokers: bool,
    /// An exclusion criterion names alcohol use affirmatively.
    pub excludes_drinkers: bool,
}

impl TrialEligibility {
    pub fn from_trial(trial: &ClinicalTrial, triggers: &TriggerLexicon) -> Self {
        let exclusion = trial.criteria().exclusion;
        let excludes = |patterns: &[&str]| {
            exclusion
                .iter()
                .any(|item| cue_polarities(item, patterns, triggers).iter().any(|neg| !neg))
        };
        TrialEligibility {
            min_age: trial.min_age,
            max_age: trial.max_age,
            gender: trial.gender,
            excludes_smokers: excludes(SMOKING_PATTERNS),
            excludes_drinkers: excludes(DRINKING_PATTERNS),
        }
    }
}

fn lookup<'a>(trials: &'a HashMap<String, TrialEligibility>, doc_id: &str) -> Result<&'a TrialEligibility> {
    trials
        .get(doc_id)
        .ok_or_else(|| Error::Data(format!("ranked document {doc_id} is not in the corpus")))
}

fn renumber(mut kept: Vec<RunEntry>) -> Vec<RunEntry> {
    for (i, entry) in kept.iter_mut().enumerate() {
        entry.rank = i + 1;
    }
    kept
}

fn violates_demographics(patient: &Demographics, trial: &TrialEligibility, cfg: FilterConfig) -> bool {
    let age_out = cfg.age
        && patient
            .age_years
            .is_some_and(|age| trial.min_age.is_some_and(|lo| age < lo) || trial.max_age.is_some_and(|hi| age > hi));
    let gender_out = cfg.gender
        && matches!(
            (patient.gender, trial.gender),
            (Some(Sex::Male), TrialGender::Female) | (Some(Sex::Female), TrialGender::Male)
        );
    age_out || gender_out
}

fn violates_lifestyle(patient: &Demographics, trial: &TrialEligibility, cfg: FilterConfig) -> bool {
    (cfg.smoking && patient.smoker == Some(true) && trial.excludes_smokers)
        || (cfg.drinking && patient.drinker == Some(true) && trial.excludes_drinkers)
}

/// Age and gender filtering. Returns the surviving ranking (ranks renumbered
/// from 1) and the fraction of the input that was removed.
pub fn demographic_filter(
    ranking: &[RunEntry],
    patient: &Demographics,
    trials: &HashMap<String, TrialEligibility>,
    cfg: FilterConfig,
) -> Result<(Vec<RunEntry>, f64)> {
    let mut kept = Vec::with_capacity(ranking.len());
    for entry in ranking {
        if !violates_demographics(patient, lookup(trials, &entry.doc_id)?, cfg) {
            kept.push(entry.clone());
        }
    }
    let fraction = removed_fraction(ranking.len(), kept.len());
    Ok((renumber(kept), fraction))
}

/// Smoking and drinking filtering.
pub fn lifestyle_filter(
    ranking: &[RunEntry],
    patient: &Demographics,
    trials: &HashMap<String, TrialEligibility>,
    cfg: FilterConfig,
) -> Result<Vec<RunEntry>> {
    let mut kept = Vec::with_capacity(ranking.len());
    for entry in ranking {
        if !violates_lifestyle(patient, lookup(trials, &entry.doc_id)?, cfg) {
            kept.push(entry.clone());
        }
    }
    Ok(renumber(kept))
}

fn removed_fraction(original: usize, kept: usize) -> f64 {
    if original == 0 {
        0.0
    } else {
        (original - kept) as f64 / original as f64
    }
}

/// One line of the per-topic filter report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub topic_id: String,
    pub flags: FilterConfig,
    pub retrieved: usize,
    pub removed: usize,
    pub removed_fraction: f64,
}

/// Applies every enabled filter and reports what was removed.
pub fn apply_filters(
    topic_id: &str,
    ranking: &[RunEntry],
    patient: &Demographics,
    trials: &HashMap<String, TrialEligibility>,
    cfg: FilterConfig,
) -> Result<(Vec<RunEntry>, FilterReport)> {
    let (kept, _) = demographic_filter(ranking, patient, trials, cfg)?;
    let kept = lifestyle_filter(&kept, patient, trials, cfg)?;
    let removed = ranking.len() - kept.len();
    let report = FilterReport {
        topic_id: topic_id.to_string(),
        flags: cfg,
        retrieved: ranking.len(),
        removed,
        removed_fraction: removed_fraction(ranking.len(), kept.len()),
    };
    Ok((kept, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(doc: &str, rank: usize) -> RunEntry {
        RunEntry {
            doc_id: doc.into(),
            rank,
            score: 10.0 - rank as f64,
            tag: "t".into(),
        }
    }

    fn ids(entries: &[RunEntry]) -> Vec<(&str, usize)> {
        entries.iter().map(|e| (e.doc_id.as_str(), e.rank)).collect()
    }

    fn trial(min: Option<f64>, max: Option<f64>, gender: TrialGender) -> TrialEligibility {
        TrialEligibility {
            min_age: min,
            max_age: max,
            gender,
            ..Default::default()
        }
    }

    fn patient(age: Option<f64>, gender: Option<Sex>) -> Demographics {
        Demographics {
            age_years: age,
            gender,
            ..Default::default()
        }
    }

    #[test]
    fn age_bounds() {
        let trials = HashMap::from([
            ("old".to_string(), trial(Some(50.0), None, TrialGender::All)),
            ("edge".to_string(), trial(Some(41.0), Some(41.0), TrialGender::All)),
            ("young".to_string(), trial(None, Some(30.0), TrialGender::All)),
        ]);
        let ranking = vec![entry("old", 1), entry("edge", 2), entry("young", 3)];
        let cfg: FilterConfig = "A".parse().unwrap();
        let (kept, fraction) = demographic_filter(&ranking, &patient(Some(41.0), None), &trials, cfg).unwrap();
        assert_eq!(ids(&kept), [("edge", 1)]);
        assert!((fraction - 2.0 / 3.0).abs() < 1e-12);

        let (kept, fraction) = demographic_filter(&ranking, &patient(None, None), &trials, cfg).unwrap();
        assert_eq!(kept, ranking);
        assert_eq!(fraction, 0.0);
    }

    #[test]
    fn gender_rules() {
        let trials = HashMap::from([
            ("all".to_string(), trial(None, None, TrialGender::All)),
            ("female".to_string(), trial(None, None, TrialGender::Female)),
            ("male".to_string(), trial(None, None, TrialGender::Male)),
        ]);
        let ranking = vec![entry("female", 1), entry("all", 2), entry("male", 3)];
        let cfg: FilterConfig = "G".parse().unwrap();
        let (kept, _) = demographic_filter(&ranking, &patient(None, Some(Sex::Male)), &trials, cfg).unwrap();
        assert_eq!(ids(&kept), [("all", 1), ("male", 2)]);
        let (kept, _) = demographic_filter(&ranking, &patient(None, None), &trials, cfg).unwrap();
        assert_eq!(kept.len(), 3);
    }

    #[test]
    fn lifestyle_rules() {
        let triggers = TriggerLexicon::shipped();
        let mut t = ClinicalTrial {
            nct_id: "X".into(),
            brief_title: String::new(),
            official_title: String::new(),
            summary: String::new(),
            description: String::new(),
            conditions: vec![],
            criteria_text: "Inclusion Criteria:\n- adults\nExclusion Criteria:\n- current smokers\n- alcohol abuse"
                .into(),
            min_age: None,
            max_age: None,
            gender: TrialGender::All,
        };
        let strict = TrialEligibility::from_trial(&t, &triggers);
        assert!(strict.excludes_smokers && strict.excludes_drinkers);
        t.criteria_text = "Exclusion Criteria:\n- non-smokers".into();
        assert!(!TrialEligibility::from_trial(&t, &triggers).excludes_smokers);

        let trials = HashMap::from([("X".to_string(), strict)]);
        let ranking = vec![entry("X", 1)];
        let cfg: FilterConfig = "SD".parse().unwrap();
        let smoker = Demographics {
            smoker: Some(true),
            ..Default::default()
        };
        assert!(lifestyle_filter(&ranking, &smoker, &trials, cfg).unwrap().is_empty());
        let unknown = Demographics::default();
        assert_eq!(lifestyle_filter(&ranking, &unknown, &trials, cfg).unwrap(), ranking);
        let sober = Demographics {
            drinker: Some(false),
            ..Default::default()
        };
        assert_eq!(lifestyle_filter(&ranking, &sober, &trials, cfg).unwrap(), ranking);
    }

    #[test]
    fn unknown_document_is_data_error() {
        let err = demographic_filter(
            &[entry("ghost", 1)],
            &Demographics::default(),
            &HashMap::new(),
            FilterConfig::NONE,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn flag_parsing() {
        let cfg: FilterConfig = "agsd".parse().unwrap();
        assert_eq!(cfg.to_string(), "AGSD");
        assert!(FilterConfig::from_str("AX").is_err());
        assert!("".parse::<FilterConfig>().unwrap().is_empty());
    }

    #[test]
    fn report_counts() {
        let trials = HashMap::from([
            ("a".to_string(), trial(Some(60.0), None, TrialGender::All)),
            ("b".to_string(), trial(None, None, TrialGender::All)),
        ]);
        let ranking = vec![entry("a", 1), entry("b", 2)];
        let (kept, report) = apply_filters(
            "7",
            &ranking,
            &patient(Some(20.0), None),
            &trials,
            "AGSD".parse().unwrap(),
        )
        .unwrap();
        assert_eq!(ids(&kept), [("b", 1)]);
        assert_eq!(report.removed, 1);
        assert_eq!(report.retrieved, 2);
        assert_eq!(report.removed_fraction, 0.5);
    }
}
