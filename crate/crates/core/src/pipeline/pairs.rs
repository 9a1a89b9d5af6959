use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{jsonl, load_trials, read_qrels_file, read_run_file, trials_by_id, write_output, RunConfig};
use crate::corpus::ClinicalTrial;
use crate::error::{Error, Result};
use crate::eval::{RunEntry, TopicJudgments};
use crate::topics::parse_topics;

/// Which relevance distinction a training pair teaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// Topically relevant (grade 1 or 2) against not relevant or unjudged.
    Topical,
    /// Eligible (grade 2) against excluded (grade 1).
    Criteria,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Topical => "topical",
            Phase::Criteria => "criteria",
        }
    }

    /// `Some(true)` for a positive, `Some(false)` for a negative, `None` when
    /// the document takes no part in this phase.
    fn label(self, grade: Option<u8>) -> Option<bool> {
        match (self, grade) {
            (Phase::Topical, Some(1 | 2)) => Some(true),
            (Phase::Topical, _) => Some(false),
            (Phase::Criteria, Some(2)) => Some(true),
            (Phase::Criteria, Some(1)) => Some(false),
            (Phase::Criteria, _) => None,
        }
    }

    /// The document text shown to the re-ranker in this phase.
    pub fn doc_text(self, trial: &ClinicalTrial) -> String {
        match self {
            Phase::Topical => {
                let mut parts = vec![
                    trial.summary.as_str(),
                    trial.description.as_str(),
                    trial.brief_title.as_str(),
                    trial.official_title.as_str(),
                ];
                parts.extend(trial.conditions.iter().map(String::as_str));
                parts
                    .into_iter()
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .collect::<Vec<_>>()
                    .join("\n")
            }
            Phase::Criteria => trial.criteria_text.trim().to_string(),
        }
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "topical" => Ok(Phase::Topical),
            "criteria" | "eligibility" => Ok(Phase::Criteria),
            _ => Err(Error::Config(format!(
                "unknown phase {s:?} (expected topical or criteria)"
            ))),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Pos,
    Neg,
}

/// One line of a training-pair file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub topic_id: String,
    pub topic_text: String,
    pub doc_id: String,
    pub doc_text: String,
    pub label: Label,
    pub phase: Phase,
}

/// Labels the documents of one ranking for `phase`, in rank order. Returns
/// `(doc_id, is_positive)` pairs, or nothing when no positive was retrieved.
pub fn pairs_for_topic(ranking: &[RunEntry], judged: Option<&TopicJudgments>, phase: Phase) -> Vec<(String, bool)> {
    let labelled: Vec<(String, bool)> = ranking
        .iter()
        .filter_map(|e| {
            let grade = judged.and_then(|j| j.get(&e.doc_id).copied());
            phase.label(grade).map(|pos| (e.doc_id.clone(), pos))
        })
        .collect();
    if labelled.iter().any(|(_, pos)| *pos) {
        labelled
    } else {
        Vec::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairsOutcome {
    pub path: PathBuf,
    pub records: usize,
    pub skipped_topics: Vec<String>,
}

/// Writes `pairs_<phase>.jsonl` from the final run, the qrels and the corpus.
///
/// Only documents present in the run take part. Topics without a retrieved
/// positive are skipped with a warning.
pub fn export_pairs(cfg: &RunConfig, phase: Phase) -> Result<PairsOutcome> {
    let qrels = read_qrels_file(cfg.qrels_path()?)?;
    let run = read_run_file(&cfg.final_run())?;
    let trials = load_trials(cfg)?;
    let by_id = trials_by_id(&trials);
    let topics_path = &cfg.inputs.topics;
    let bytes = std::fs::read(topics_path).map_err(|e| Error::io(topics_path, e))?;
    let topic_text: HashMap<String, String> = parse_topics(&bytes)
        .map_err(|e| Error::in_file(topics_path, e))?
        .into_iter()
        .collect();

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (topic, ranking) in &run.topics {
        let labelled = pairs_for_topic(ranking, qrels.topic(topic), phase);
        if labelled.is_empty() {
            log::warn!("topic {topic}: no retrieved positives for the {phase} phase, skipped");
            skipped.push(topic.clone());
            continue;
        }
        let text = topic_text
            .get(topic)
            .ok_or_else(|| Error::Data(format!("run topic {topic} is not in the topics file")))?;
        for (doc_id, pos) in labelled {
            let trial = by_id
                .get(doc_id.as_str())
                .ok_or_else(|| Error::Data(format!("document {doc_id} of topic {topic} is not in the corpus")))?;
            records.push(PairRecord {
                topic_id: topic.clone(),
                topic_text: text.clone(),
                doc_id,
                doc_text: phase.doc_text(trial),
                label: if pos { Label::Pos } else { Label::Neg },
                phase,
            });
        }
    }
    let path = cfg.outputs.pairs_dir().join(format!("pairs_{phase}.jsonl"));
    write_output(&path, jsonl(&records, "training pair")?)?;
    Ok(PairsOutcome {
        path,
        records: records.len(),
        skipped_topics: skipped,
    })
}
