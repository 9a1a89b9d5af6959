use std::collections::HashMap;
use std::fs;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    annotate_trials, jsonl, load_topics, load_trials, read_qrels_file, read_run_file, write_output, Resources,
    RunConfig,
};
use crate::annotate::{EnrichmentFlags, KeywordSet};
use crate::error::{Error, Result};
use crate::eval::{
    compare, count_at_cutoffs, evaluate_run, run_to_string, Comparison, CutoffCounts, Evaluation, Qrels, RunFile,
};
use crate::filter::{apply_filters, FilterReport, TrialEligibility};
use crate::index::{build_index, read_index, search as rank, write_index, Index, Model, Stopwords};
use crate::topics::{build_query, extract_demographics_with, parse_topics, PatientTopic, Sex};

/// One record of the trial annotation sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocAnnotation {
    pub nct_id: String,
    #[serde(flatten)]
    pub keywords: KeywordSet,
}

/// One record of the topic annotation sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicAnnotation {
    pub topic_id: String,
    pub age_years: Option<f64>,
    pub gender: Option<Sex>,
    pub smoker: Option<bool>,
    pub drinker: Option<bool>,
    #[serde(flatten)]
    pub keywords: KeywordSet,
}

impl From<&PatientTopic> for TopicAnnotation {
    fn from(t: &PatientTopic) -> Self {
        TopicAnnotation {
            topic_id: t.topic_id.clone(),
            age_years: t.age_years,
            gender: t.gender,
            smoker: t.smoker,
            drinker: t.drinker,
            keywords: t.keywords.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotateOutcome {
    pub documents: usize,
    pub topics: usize,
}

/// Writes the trial and topic annotation sidecars.
pub fn annotate(cfg: &RunConfig) -> Result<AnnotateOutcome> {
    let res = Resources::load(&cfg.inputs)?;
    let annotated = annotate_trials(load_trials(cfg)?, &res.annotator);
    let docs: Vec<DocAnnotation> = annotated
        .into_iter()
        .map(|(trial, keywords)| DocAnnotation {
            nct_id: trial.nct_id,
            keywords,
        })
        .collect();
    let topics = load_topics(&cfg.inputs.topics, &res.annotator)?;
    let topic_records: Vec<TopicAnnotation> = topics.iter().map(TopicAnnotation::from).collect();
    write_output(&cfg.outputs.doc_annotations(), jsonl(&docs, "trial annotation")?)?;
    write_output(
        &cfg.outputs.topic_annotations(),
        jsonl(&topic_records, "topic annotation")?,
    )?;
    Ok(AnnotateOutcome {
        documents: docs.len(),
        topics: topic_records.len(),
    })
}

/// Builds the index for the configured sections and enrichment and writes it.
pub fn index(cfg: &RunConfig) -> Result<Index> {
    let res = Resources::load(&cfg.inputs)?;
    let section_cfg = cfg.section_config()?;
    let annotated = annotate_trials(load_trials(cfg)?, &res.annotator);
    let index = build_index(&annotated, &section_cfg, &res.stopwords)?;
    let mut bytes = Vec::new();
    write_index(&index, &mut bytes)?;
    write_output(&cfg.outputs.index(), bytes)?;
    Ok(index)
}

/// One record of the enriched-query debug dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDump {
    pub topic_id: String,
    pub tokens: Vec<String>,
}

fn rank_topics(
    index: &Index,
    topics: &[PatientTopic],
    model: Model,
    k: usize,
    flags: EnrichmentFlags,
    stopwords: &Stopwords,
    tag: &str,
) -> (RunFile, Vec<QueryDump>) {
    let ranked: Vec<(QueryDump, Vec<(String, f64)>)> = topics
        .par_iter()
        .map(|topic| {
            let query = build_query(topic, flags, stopwords);
            let hits = rank(model, index, &query, k);
            let dump = QueryDump {
                topic_id: topic.topic_id.clone(),
                tokens: query.tokens,
            };
            (dump, hits)
        })
        .collect();
    let mut run = RunFile::default();
    let mut dumps = Vec::with_capacity(ranked.len());
    for (dump, hits) in ranked {
        run.push_topic(&dump.topic_id, &hits, tag);
        dumps.push(dump);
    }
    (run, dumps)
}

/// Ranks every topic against the stored index and writes the run file.
///
/// The index must have been built with this configuration's sections,
/// enrichment flags and stopwords.
pub fn search(cfg: &RunConfig) -> Result<RunFile> {
    let res = Resources::load(&cfg.inputs)?;
    let section_cfg = cfg.section_config()?;
    let path = cfg.outputs.index();
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let index = read_index(std::io::BufReader::new(file)).map_err(|e| Error::in_file(&path, e))?;
    index
        .check_compatible(&section_cfg, &res.stopwords)
        .map_err(|e| Error::in_file(&path, e))?;
    let topics = load_topics(&cfg.inputs.topics, &res.annotator)?;
    let (run, dumps) = rank_topics(
        &index,
        &topics,
        cfg.model,
        cfg.k,
        cfg.enrichment,
        &res.stopwords,
        &cfg.tag,
    );
    write_output(&cfg.outputs.queries(), jsonl(&dumps, "query dump")?)?;
    write_output(&cfg.outputs.run(), run_to_string(&run))?;
    Ok(run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub run: RunFile,
    pub reports: Vec<FilterReport>,
}

impl FilterOutcome {
    /// Mean over topics of the fraction of retrieved trials removed.
    pub fn mean_removed_fraction(&self) -> f64 {
        if self.reports.is_empty() {
            return 0.0;
        }
        self.reports.iter().map(|r| r.removed_fraction).sum::<f64>() / self.reports.len() as f64
    }
}

/// Applies the configured filters to the run and writes the filtered run and
/// the per-topic report. With no filters enabled the run is copied verbatim.
pub fn filter(cfg: &RunConfig) -> Result<FilterOutcome> {
    let run_path = cfg.outputs.run();
    let run_bytes = fs::read(&run_path).map_err(|e| Error::io(&run_path, e))?;
    let run = read_run_file(&run_path)?;

    if cfg.filters.is_empty() {
        let reports = run
            .topics
            .iter()
            .map(|(topic, entries)| FilterReport {
                topic_id: topic.clone(),
                flags: cfg.filters,
                retrieved: entries.len(),
                removed: 0,
                removed_fraction: 0.0,
            })
            .collect::<Vec<_>>();
        write_output(&cfg.outputs.filtered_run(), &run_bytes)?;
        write_output(&cfg.outputs.filter_report(), jsonl(&reports, "filter report")?)?;
        return Ok(FilterOutcome { run, reports });
    }

    let res = Resources::load(&cfg.inputs)?;
    let trials = load_trials(cfg)?;
    let triggers = &res.annotator.triggers;
    let eligibility: HashMap<String, TrialEligibility> = trials
        .par_iter()
        .map(|t| (t.nct_id.clone(), TrialEligibility::from_trial(t, triggers)))
        .collect();
    let topics_path = &cfg.inputs.topics;
    let topic_bytes = fs::read(topics_path).map_err(|e| Error::io(topics_path, e))?;
    let patients: HashMap<String, _> = parse_topics(&topic_bytes)
        .map_err(|e| Error::in_file(topics_path, e))?
        .into_iter()
        .map(|(id, text)| {
            let demo = extract_demographics_with(&text, triggers, &res.annotator.splitter);
            (id, demo)
        })
        .collect();

    let mut filtered = RunFile::default();
    let mut reports = Vec::with_capacity(run.topics.len());
    for (topic, entries) in &run.topics {
        let patient = patients
            .get(topic)
            .ok_or_else(|| Error::Data(format!("run topic {topic} is not in the topics file")))?;
        let (kept, report) = apply_filters(topic, entries, patient, &eligibility, cfg.filters)
            .map_err(|e| Error::in_file(&run_path, e))?;
        filtered.topics.insert(topic.clone(), kept);
        reports.push(report);
    }
    write_output(&cfg.outputs.filtered_run(), run_to_string(&filtered))?;
    write_output(&cfg.outputs.filter_report(), jsonl(&reports, "filter report")?)?;
    Ok(FilterOutcome { run: filtered, reports })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub relevance_threshold: u8,
    pub evaluation: Evaluation,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoffs: Option<CutoffCounts>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub comparisons: Vec<Comparison>,
}

/// Scores the final run against the qrels and writes the TSV, JSON and
/// cutoff reports. A configured baseline run adds paired t-tests.
pub fn eval(cfg: &RunConfig) -> Result<EvalOutcome> {
    let qrels = read_qrels_file(cfg.qrels_path()?)?;
    let run = read_run_file(&cfg.final_run())?;
    let evaluation = evaluate_run(&run, &qrels, &cfg.metrics, cfg.relevance_threshold);
    let cutoffs = count_at_cutoffs(&run, &qrels, cfg.eval.cutoff_depth);
    let comparisons = match &cfg.eval.baseline {
        Some(path) => {
            let baseline = read_run_file(path)?;
            let base_eval = evaluate_run(&baseline, &qrels, &cfg.metrics, cfg.relevance_threshold);
            compare(&evaluation, &base_eval)?
        }
        None => Vec::new(),
    };
    let outcome = EvalOutcome {
        relevance_threshold: cfg.relevance_threshold,
        evaluation,
        cutoffs: Some(cutoffs),
        comparisons,
    };
    let mut json = serde_json::to_string_pretty(&outcome).map_err(|source| Error::Json {
        context: "evaluation report".into(),
        source,
    })?;
    json.push('\n');
    write_output(&cfg.outputs.eval_tsv(), outcome.evaluation.to_tsv())?;
    write_output(&cfg.outputs.eval_json(), json)?;
    if let Some(c) = &outcome.cutoffs {
        write_output(&cfg.outputs.cutoffs(), c.to_csv())?;
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub sections: String,
    pub enrichment: EnrichmentFlags,
    pub mean: Vec<f64>,
}

/// Builds one in-memory index per configured section set, ranks every topic
/// and writes one row of mean metrics per set, in configuration order.
pub fn ablation(cfg: &RunConfig) -> Result<Vec<AblationRow>> {
    if cfg.ablation.is_empty() {
        return Err(Error::Config(
            "ablation needs at least one [[ablation]] section set".into(),
        ));
    }
    let qrels = read_qrels_file(cfg.qrels_path()?)?;
    let res = Resources::load(&cfg.inputs)?;
    let annotated = annotate_trials(load_trials(cfg)?, &res.annotator);
    let topics = load_topics(&cfg.inputs.topics, &res.annotator)?;
    let rows = cfg
        .ablation
        .iter()
        .map(|set| ablation_row(cfg, set, &annotated, &topics, &qrels, &res.stopwords))
        .collect::<Result<Vec<_>>>()?;
    write_output(&cfg.outputs.ablation(), ablation_tsv(cfg, &rows))?;
    Ok(rows)
}

fn ablation_row(
    cfg: &RunConfig,
    set: &super::AblationSet,
    annotated: &[(crate::corpus::ClinicalTrial, KeywordSet)],
    topics: &[PatientTopic],
    qrels: &Qrels,
    stopwords: &Stopwords,
) -> Result<AblationRow> {
    let section_cfg = set.section_config()?;
    let index = build_index(annotated, &section_cfg, stopwords)?;
    let (run, _) = rank_topics(&index, topics, cfg.model, cfg.k, set.enrichment, stopwords, &set.name);
    let evaluation = evaluate_run(&run, qrels, &cfg.metrics, cfg.relevance_threshold);
    Ok(AblationRow {
        name: set.name.clone(),
        sections: set.sections.iter().map(|f| f.name()).collect::<Vec<_>>().join("+"),
        enrichment: set.enrichment,
        mean: evaluation.mean,
    })
}

fn ablation_tsv(cfg: &RunConfig, rows: &[AblationRow]) -> String {
    let mut out = String::from("run\tsections\tenrichment");
    for m in &cfg.metrics {
        out.push_str(&format!("\t{m}"));
    }
    out.push('\n');
    for row in rows {
        let flags = match row.enrichment.to_string() {
            f if f.is_empty() => "-".to_string(),
            f => f,
        };
        out.push_str(&format!("{}\t{}\t{flags}", row.name, row.sections));
        for v in &row.mean {
            out.push_str(&format!("\t{v:.6}"));
        }
        out.push('\n');
    }
    out
}
