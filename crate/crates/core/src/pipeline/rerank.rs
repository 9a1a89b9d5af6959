use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::{read_run_file, write_output, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{run_to_string, RunEntry, RunFile};

/// Externally produced re-ranker scores keyed by `(topic_id, doc_id)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RerankScores {
    scores: HashMap<(String, String), (f64, f64)>,
}

impl RerankScores {
    pub fn insert(&mut self, topic_id: &str, doc_id: &str, stage1: f64, stage2: f64) -> bool {
        self.scores
            .insert((topic_id.to_string(), doc_id.to_string()), (stage1, stage2))
            .is_none()
    }

    pub fn get(&self, topic_id: &str, doc_id: &str) -> Option<(f64, f64)> {
        self.scores.get(&(topic_id.to_string(), doc_id.to_string())).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

#[derive(Deserialize)]
struct SidecarRecord {
    topic_id: String,
    doc_id: String,
    stage1_score: f64,
    stage2_score: f64,
}

/// Reads a score sidecar. Lines starting with `{` are JSON records; other
/// lines are `topic_id doc_id stage1_score stage2_score` separated by tabs or
/// spaces. A leading header line naming `topic_id` is skipped.
pub fn read_score_sidecar(text: &str, source_name: &str) -> Result<RerankScores> {
    let mut scores = RerankScores::default();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || (n == 0 && trimmed.starts_with("topic_id")) {
            continue;
        }
        let rec = if trimmed.starts_with('{') {
            serde_json::from_str::<SidecarRecord>(trimmed)
                .map_err(|e| Error::format(source_name, line_no, e.to_string()))?
        } else {
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let [topic, doc, s1, s2] = fields[..] else {
                return Err(Error::format(
                    source_name,
                    line_no,
                    "expected 4 fields: topic_id doc_id stage1_score stage2_score",
                ));
            };
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::format(source_name, line_no, format!("bad score {s:?}")))
            };
            SidecarRecord {
                topic_id: topic.to_string(),
                doc_id: doc.to_string(),
                stage1_score: num(s1)?,
                stage2_score: num(s2)?,
            }
        };
        if !rec.stage1_score.is_finite() || !rec.stage2_score.is_finite() {
            return Err(Error::format(source_name, line_no, "scores must be finite"));
        }
        if !scores.insert(&rec.topic_id, &rec.doc_id, rec.stage1_score, rec.stage2_score) {
            return Err(Error::format(
                source_name,
                line_no,
                format!("duplicate scores for topic {}, document {}", rec.topic_id, rec.doc_id),
            ));
        }
    }
    Ok(scores)
}

/// Reorders the top `k` of every topic with the sidecar scores.
///
/// Without a fusion weight the block is sorted by stage-1 score, then that
/// order is sorted by stage-2 score, each sort stable so ties keep the
/// incoming order; the block's scores become the stage-2 scores. With weight
/// `w` the block is sorted once by `w * stage1 + (1 - w) * stage2`. Entries
/// below rank `k` keep their order, and their scores are shifted to sit below
/// the re-ranked block.
pub fn apply_rerank_scores(
    run: &RunFile,
    scores: &RerankScores,
    k: usize,
    fusion_weight: Option<f64>,
) -> Result<RunFile> {
    let mut out = RunFile::default();
    for (topic, entries) in &run.topics {
        let cut = k.min(entries.len());
        let mut block = entries[..cut]
            .iter()
            .map(|e| {
                scores
                    .get(topic, &e.doc_id)
                    .map(|s| (e, s))
                    .ok_or_else(|| Error::Data(format!("no re-ranker scores for topic {topic}, document {}", e.doc_id)))
            })
            .collect::<Result<Vec<_>>>()?;
        let final_score = |(s1, s2): (f64, f64)| match fusion_weight {
            Some(w) => w * s1 + (1.0 - w) * s2,
            None => s2,
        };
        match fusion_weight {
            Some(_) => block.sort_by(|a, b| final_score(b.1).total_cmp(&final_score(a.1))),
            None => {
                block.sort_by(|a, b| b.1 .0.total_cmp(&a.1 .0));
                block.sort_by(|a, b| b.1 .1.total_cmp(&a.1 .1));
            }
        }
        let mut ranked: Vec<RunEntry> = block
            .iter()
            .map(|(e, s)| RunEntry {
                doc_id: e.doc_id.clone(),
                rank: 0,
                score: final_score(*s),
                tag: e.tag.clone(),
            })
            .collect();
        let tail = &entries[cut..];
        if let (Some(last), Some(first_tail)) = (ranked.last(), tail.first()) {
            let shift = last.score - 1.0 - first_tail.score;
            ranked.extend(tail.iter().map(|e| RunEntry {
                score: e.score + shift,
                ..e.clone()
            }));
        } else {
            ranked.extend(tail.iter().cloned());
        }
        for (i, e) in ranked.iter_mut().enumerate() {
            e.rank = i + 1;
        }
        out.topics.insert(topic.clone(), ranked);
    }
    Ok(out)
}

/// Applies a score sidecar to the final run and writes the re-ranked run.
pub fn rerank_apply(cfg: &RunConfig, sidecar: &Path) -> Result<RunFile> {
    let text = std::fs::read_to_string(sidecar).map_err(|e| Error::io(sidecar, e))?;
    let scores = read_score_sidecar(&text, &sidecar.display().to_string())?;
    let run = read_run_file(&cfg.final_run())?;
    let reranked = apply_rerank_scores(&run, &scores, cfg.rerank.k, cfg.rerank.fusion_weight)?;
    reranked.validate()?;
    write_output(&cfg.outputs.reranked_run(), run_to_string(&reranked))?;
    Ok(reranked)
}
