//! Stage drivers shared by the command-line tool and the end-to-end tests.
//!
//! Every stage reads only the inputs named in its [`RunConfig`] and writes
//! only its declared outputs, so stages can be re-run in any order once their
//! inputs exist.

mod config;
mod pairs;
mod rerank;
mod stages;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

pub use config::{
    AblationSet, EvalOptions, Inputs, Outputs, RerankOptions, RunConfig, DEFAULT_CUTOFF_DEPTH, DEFAULT_DEPTH,
    DEFAULT_RERANK_DEPTH,
};
pub use pairs::{export_pairs, pairs_for_topic, Label, PairRecord, PairsOutcome, Phase};
pub use rerank::{apply_rerank_scores, read_score_sidecar, rerank_apply, RerankScores};
pub use stages::{
    ablation, annotate, eval, filter, index, search, AblationRow, AnnotateOutcome, DocAnnotation, EvalOutcome,
    FilterOutcome, QueryDump, TopicAnnotation,
};

use crate::annotate::{Annotator, Gazetteer, KeywordSet, TriggerLexicon};
use crate::corpus::{load_corpus, ClinicalTrial};
use crate::error::{Error, Result};
use crate::eval::{read_qrels, read_run, Qrels, RunFile};
use crate::index::Stopwords;
use crate::topics::{parse_topics, PatientTopic};

/// Lexicons and stopwords a run uses, loaded once.
#[derive(Debug, Clone)]
pub struct Resources {
    pub annotator: Annotator,
    pub stopwords: Stopwords,
}

impl Resources {
    /// Loads the configured lexicons, falling back to the shipped ones.
    pub fn load(inputs: &Inputs) -> Result<Self> {
        let gazetteer = match &inputs.gazetteer {
            Some(path) => Gazetteer::load(path)?,
            None => Gazetteer::fixture(),
        };
        let triggers = match &inputs.triggers {
            Some(path) => TriggerLexicon::load(path)?,
            None => TriggerLexicon::shipped(),
        };
        let stopwords = match &inputs.stopwords {
            Some(path) => Stopwords::load(path)?,
            None => Stopwords::shipped(),
        };
        Ok(Resources {
            annotator: Annotator::new(gazetteer, triggers),
            stopwords,
        })
    }
}

pub fn load_trials(cfg: &RunConfig) -> Result<Vec<ClinicalTrial>> {
    load_corpus(&cfg.inputs.corpus, &cfg.fields)
}

/// Criteria keywords of every trial, in corpus order.
pub fn annotate_trials(trials: Vec<ClinicalTrial>, annotator: &Annotator) -> Vec<(ClinicalTrial, KeywordSet)> {
    trials
        .into_par_iter()
        .map(|trial| {
            let keywords = annotator.keywords_for_criteria(&trial.criteria());
            (trial, keywords)
        })
        .collect()
}

pub fn load_topics(path: &Path, annotator: &Annotator) -> Result<Vec<PatientTopic>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let raw = parse_topics(&bytes).map_err(|e| Error::in_file(path, e))?;
    Ok(raw
        .par_iter()
        .map(|(id, text)| PatientTopic::from_text(id, text, annotator))
        .collect())
}

pub fn read_run_file(path: &Path) -> Result<RunFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_run(&text, &path.display().to_string())
}

pub fn read_qrels_file(path: &Path) -> Result<Qrels> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_qrels(&text, &path.display().to_string())
}

/// Writes `bytes` to `path`, creating parent directories as needed.
pub fn write_output(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn to_json_line<T: serde::Serialize>(value: &T, context: &str) -> Result<String> {
    let mut line = serde_json::to_string(value).map_err(|source| Error::Json {
        context: context.to_string(),
        source,
    })?;
    line.push('\n');
    Ok(line)
}

fn jsonl<T: serde::Serialize>(records: &[T], context: &str) -> Result<String> {
    records.iter().map(|r| to_json_line(r, context)).collect()
}

fn trials_by_id(trials: &[ClinicalTrial]) -> HashMap<&str, &ClinicalTrial> {
    trials.iter().map(|t| (t.nct_id.as_str(), t)).collect()
}
