//! TREC qrels and run files.

use std::collections::HashSet;
use std::io::Write;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Judgments of one topic: document id to grade.
pub type TopicJudgments = IndexMap<String, u8>;

/// Graded judgments: 0 not relevant, 1 excluded, 2 eligible.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    pub topics: IndexMap<String, TopicJudgments>,
}

impl Qrels {
    pub fn topic(&self, topic_id: &str) -> Option<&TopicJudgments> {
        self.topics.get(topic_id)
    }

    pub fn grade(&self, topic_id: &str, doc_id: &str) -> Option<u8> {
        self.topics.get(topic_id)?.get(doc_id).copied()
    }

    pub fn insert(&mut self, topic_id: &str, doc_id: &str, grade: u8) -> Result<()> {
        if grade > 2 {
            return Err(Error::Data(format!("grade {grade} outside 0..=2")));
        }
        self.topics
            .entry(topic_id.to_string())
            .or_default()
            .insert(doc_id.to_string(), grade);
        Ok(())
    }
}

/// `topic iteration doc grade` per line.
pub fn read_qrels(text: &str, source_name: &str) -> Result<Qrels> {
    let mut qrels = Qrels::default();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [topic, _iteration, doc, grade] = fields[..] else {
            return Err(Error::format(
                source_name,
                line_no,
                "expected 4 fields: topic iter doc grade",
            ));
        };
        let grade: u8 = match grade.parse() {
            Ok(g @ 0..=2) => g,
            _ => {
                return Err(Error::format(
                    source_name,
                    line_no,
                    format!("grade {grade:?} is not one of 0, 1, 2"),
                ))
            }
        };
        let judged = qrels.topics.entry(topic.to_string()).or_default();
        if judged.insert(doc.to_string(), grade).is_some() {
            return Err(Error::format(
                source_name,
                line_no,
                format!("duplicate judgment for topic {topic}, document {doc}"),
            ));
        }
    }
    Ok(qrels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub doc_id: String,
    pub rank: usize,
    pub score: f64,
    pub tag: String,
}

/// Ranked results per topic, topics in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunFile {
    pub topics: IndexMap<String, Vec<RunEntry>>,
}

impl RunFile {
    pub fn ranking(&self, topic_id: &str) -> &[RunEntry] {
        self.topics.get(topic_id).map_or(&[], Vec::as_slice)
    }

    /// Builds a topic's ranking from scored documents already in rank order.
    pub fn push_topic(&mut self, topic_id: &str, scored: &[(String, f64)], tag: &str) {
        let entries = scored
            .iter()
            .enumerate()
            .map(|(i, (doc, score))| RunEntry {
                doc_id: doc.clone(),
                rank: i + 1,
                score: *score,
                tag: tag.to_string(),
            })
            .collect();
        self.topics.insert(topic_id.to_string(), entries);
    }

    /// Checks contiguous ranks, non-increasing scores and unique documents.
    pub fn validate(&self) -> Result<()> {
        for (topic, entries) in &self.topics {
            check_topic(topic, entries).map_err(Error::Data)?;
        }
        Ok(())
    }
}

fn check_topic(topic: &str, entries: &[RunEntry]) -> std::result::Result<(), String> {
    let mut docs = HashSet::new();
    for (i, e) in entries.iter().enumerate() {
        if e.rank != i + 1 {
            return Err(format!("topic {topic}: expected rank {}, found {}", i + 1, e.rank));
        }
        if !docs.insert(e.doc_id.as_str()) {
            return Err(format!("topic {topic}: document {} ranked twice", e.doc_id));
        }
        if i > 0 && e.score > entries[i - 1].score {
            return Err(format!(
                "topic {topic}: score at rank {} exceeds the score at rank {}",
                e.rank,
                e.rank - 1
            ));
        }
    }
    Ok(())
}

/// `topic Q0 doc rank score tag` per line.
pub fn read_run(text: &str, source_name: &str) -> Result<RunFile> {
    let mut lines_by_topic: IndexMap<String, Vec<(usize, RunEntry)>> = IndexMap::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [topic, _q0, doc, rank, score, tag] = fields[..] else {
            return Err(Error::format(
                source_name,
                line_no,
                "expected 6 fields: topic Q0 doc rank score tag",
            ));
        };
        let rank: usize = rank
            .parse()
            .map_err(|_| Error::format(source_name, line_no, format!("bad rank {rank:?}")))?;
        let score: f64 = score
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| Error::format(source_name, line_no, format!("bad score {score:?}")))?;
        lines_by_topic.entry(topic.to_string()).or_default().push((
            line_no,
            RunEntry {
                doc_id: doc.to_string(),
                rank,
                score,
                tag: tag.to_string(),
            },
        ));
    }

    let mut run = RunFile::default();
    for (topic, mut lines) in lines_by_topic {
        lines.sort_by_key(|(_, e)| e.rank);
        let mut docs = HashSet::new();
        for (i, (line_no, e)) in lines.iter().enumerate() {
            if e.rank != i + 1 {
                return Err(Error::format(
                    source_name,
                    *line_no,
                    format!(
                        "topic {topic}: ranks are not contiguous (expected {}, found {})",
                        i + 1,
                        e.rank
                    ),
                ));
            }
            if !docs.insert(e.doc_id.as_str()) {
                return Err(Error::format(
                    source_name,
                    *line_no,
                    format!("topic {topic}: document {} ranked twice", e.doc_id),
                ));
            }
            if i > 0 && e.score > lines[i - 1].1.score {
                return Err(Error::format(
                    source_name,
                    *line_no,
                    format!("topic {topic}: score increases at rank {}", e.rank),
                ));
            }
        }
        run.topics.insert(topic, lines.into_iter().map(|(_, e)| e).collect());
    }
    Ok(run)
}

/// Writes topics in run order and entries in rank order.
pub fn write_run<W: Write>(run: &RunFile, mut w: W) -> std::io::Result<()> {
    for (topic, entries) in &run.topics {
        for e in entries {
            writeln!(w, "{topic} Q0 {} {} {} {}", e.doc_id, e.rank, e.score, e.tag)?;
        }
    }
    w.flush()
}

pub fn run_to_string(run: &RunFile) -> String {
    let mut buf = Vec::new();
    write_run(run, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("run files are UTF-8")
}
