use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::trec::{Qrels, RunFile, TopicJudgments};
use crate::error::{Error, Result};

/// Minimum grade that counts as relevant for precision and reciprocal rank.
pub const DEFAULT_RELEVANCE_THRESHOLD: u8 = 2;

fn grade_of(judged: &TopicJudgments, doc: &str) -> u8 {
    judged.get(doc).copied().unwrap_or(0)
}

/// nDCG with raw-grade gain and `log2(i+1)` discount; unjudged documents
/// count as grade 0.
pub fn ndcg_at_k<S: AsRef<str>>(ranking: &[S], judged: &TopicJudgments, k: usize) -> f64 {
    assert!(k >= 1, "cutoff must be at least 1");
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, doc)| f64::from(grade_of(judged, doc.as_ref())) / (i as f64 + 2.0).log2())
        .sum();
    let mut ideal: Vec<u8> = judged.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| f64::from(g) / (i as f64 + 2.0).log2())
        .sum();
    if idcg == 0.0 || dcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Fraction of the top `k` that is relevant; the denominator is always `k`.
pub fn precision_at_k<S: AsRef<str>>(ranking: &[S], judged: &TopicJudgments, k: usize, threshold: u8) -> f64 {
    assert!(k >= 1, "cutoff must be at least 1");
    let hits = ranking
        .iter()
        .take(k)
        .filter(|d| grade_of(judged, d.as_ref()) >= threshold)
        .count();
    hits as f64 / k as f64
}

pub fn reciprocal_rank<S: AsRef<str>>(ranking: &[S], judged: &TopicJudgments, threshold: u8) -> f64 {
    ranking
        .iter()
        .position(|d| grade_of(judged, d.as_ref()) >= threshold)
        .map_or(0.0, |i| 1.0 / (i as f64 + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Ndcg(usize),
    Precision(usize),
    ReciprocalRank,
}

impl Metric {
    pub fn compute<S: AsRef<str>>(self, ranking: &[S], judged: &TopicJudgments, threshold: u8) -> f64 {
        match self {
            Metric::Ndcg(k) => ndcg_at_k(ranking, judged, k),
            Metric::Precision(k) => precision_at_k(ranking, judged, k, threshold),
            Metric::ReciprocalRank => reciprocal_rank(ranking, judged, threshold),
        }
    }

    /// The four measures reported throughout: nDCG@5, nDCG@10, P@10, RR.
    pub fn standard() -> Vec<Metric> {
        vec![
            Metric::Ndcg(5),
            Metric::Ndcg(10),
            Metric::Precision(10),
            Metric::ReciprocalRank,
        ]
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let cutoff = |rest: &str| -> Result<usize> {
            rest.parse::<usize>()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| Error::Config(format!("bad cutoff in metric {s:?}")))
        };
        if let Some(rest) = lower.strip_prefix("ndcg@").or_else(|| lower.strip_prefix("ndcg_cut_")) {
            return Ok(Metric::Ndcg(cutoff(rest)?));
        }
        if let Some(rest) = lower.strip_prefix("p@").or_else(|| lower.strip_prefix("p_")) {
            return Ok(Metric::Precision(cutoff(rest)?));
        }
        match lower.as_str() {
            "rr" | "mrr" | "recip_rank" => Ok(Metric::ReciprocalRank),
            _ => Err(Error::Config(format!("unknown metric {s:?}"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Ndcg(k) => write!(f, "ndcg@{k}"),
            Metric::Precision(k) => write!(f, "p@{k}"),
            Metric::ReciprocalRank => f.write_str("rr"),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

pub fn parse_metrics(list: &str) -> Result<Vec<Metric>> {
    list.split(',')
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .map(str::parse)
        .collect()
}

/// Per-topic metric values and their means over the judged topics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: Vec<Metric>,
    pub topics: Vec<TopicScores>,
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicScores {
    pub topic_id: String,
    pub values: Vec<f64>,
}

impl Evaluation {
    pub fn column(&self, metric: Metric) -> Option<Vec<f64>> {
        let i = self.metrics.iter().position(|&m| m == metric)?;
        Some(self.topics.iter().map(|t| t.values[i]).collect())
    }

    pub fn mean_of(&self, metric: Metric) -> Option<f64> {
        let i = self.metrics.iter().position(|&m| m == metric)?;
        Some(self.mean[i])
    }

    /// Tab-separated table: one row per topic, then an `all` row of means.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("topic");
        for m in &self.metrics {
            out.push('\t');
            out.push_str(&m.to_string());
        }
        out.push('\n');
        let mut row = |label: &str, values: &[f64]| {
            out.push_str(label);
            for v in values {
                out.push_str(&format!("\t{v:.6}"));
            }
            out.push('\n');
        };
        for t in &self.topics {
            row(&t.topic_id, &t.values);
        }
        row("all", &self.mean);
        out
    }
}

/// Evaluates every topic present in `qrels`; topics absent from the run
/// score zero.
pub fn evaluate_run(run: &RunFile, qrels: &Qrels, metrics: &[Metric], threshold: u8) -> Evaluation {
    let topics: Vec<TopicScores> = qrels
        .topics
        .iter()
        .map(|(topic, judged)| {
            let ranking: Vec<&str> = run.ranking(topic).iter().map(|e| e.doc_id.as_str()).collect();
            TopicScores {
                topic_id: topic.clone(),
                values: metrics.iter().map(|m| m.compute(&ranking, judged, threshold)).collect(),
            }
        })
        .collect();
    let mean = (0..metrics.len())
        .map(|i| {
            if topics.is_empty() {
                0.0
            } else {
                topics.iter().map(|t| t.values[i]).sum::<f64>() / topics.len() as f64
            }
        })
        .collect();
    Evaluation {
        metrics: metrics.to_vec(),
        topics,
        mean,
    }
}

/// Mean number of eligible (grade 2) and excluded (grade 1) documents within
/// the top k, for k = 1..=max_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffCounts {
    pub eligible: Vec<f64>,
    pub excluded: Vec<f64>,
}

impl CutoffCounts {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,eligible,excluded\n");
        for (i, (e, x)) in self.eligible.iter().zip(&self.excluded).enumerate() {
            out.push_str(&format!("{},{e:.6},{x:.6}\n", i + 1));
        }
        out
    }
}

pub fn count_at_cutoffs(run: &RunFile, qrels: &Qrels, max_k: usize) -> CutoffCounts {
    assert!(max_k >= 1, "max_k must be at least 1");
    let mut eligible = vec![0.0; max_k];
    let mut excluded = vec![0.0; max_k];
    for (topic, judged) in &qrels.topics {
        let ranking = run.ranking(topic);
        let (mut e, mut x) = (0u32, 0u32);
        for k in 0..max_k {
            if let Some(entry) = ranking.get(k) {
                match grade_of(judged, &entry.doc_id) {
                    2 => e += 1,
                    1 => x += 1,
                    _ => {}
                }
            }
            eligible[k] += f64::from(e);
            excluded[k] += f64::from(x);
        }
    }
    let n = qrels.topics.len().max(1) as f64;
    eligible.iter_mut().chain(excluded.iter_mut()).for_each(|v| *v /= n);
    CutoffCounts { eligible, excluded }
}
