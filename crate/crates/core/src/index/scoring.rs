//! BM25+, TF-IDF and In_expB2 scoring.
//!
//! All three models sum per-term weights over the distinct query terms,
//! multiplied by the term's count in the query. Terms unknown to the
//! collection contribute nothing.
//!
//! ```text
//! BM25+   : ln((N+1)/df) * ( (k1+1)*tf / (k1*(1-b+b*dl/avgdl) + tf) + delta )
//! TF-IDF  : tf * ln(N/df)
//! In_expB2: tfn = tf * log2(1 + c*avgdl/dl)
//!           ne  = N * (1 - (1 - df/N)^cf)
//!           (cf+1)/(df*(tfn+1)) * tfn * log2((N+1)/(ne+0.5))
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Index, TokenStream};
use crate::error::Error;

pub const BM25_K1: f64 = 1.5;
pub const BM25_B: f64 = 0.75;
pub const BM25_DELTA: f64 = 1.0;
pub const INEXPB2_C: f64 = 1.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Model {
    #[default]
    Bm25Plus,
    TfIdf,
    InExpB2,
}

impl Serialize for Model {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Model {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric() || *c == '+')
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "bm25plus" | "bm25+" => Ok(Model::Bm25Plus),
            "tfidf" => Ok(Model::TfIdf),
            "inexpb2" => Ok(Model::InExpB2),
            _ => Err(Error::Config(format!(
                "unknown retrieval model {s:?} (expected bm25plus, tfidf or inexpb2)"
            ))),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Bm25Plus => "bm25plus",
            Model::TfIdf => "tfidf",
            Model::InExpB2 => "inexpb2",
        })
    }
}

pub fn bm25plus_weight(tf: u32, df: u32, dl: u32, avgdl: f64, n: usize) -> f64 {
    if tf == 0 || df == 0 {
        return 0.0;
    }
    let idf = ((n as f64 + 1.0) / f64::from(df)).ln();
    let tf = f64::from(tf);
    let norm = BM25_K1 * (1.0 - BM25_B + BM25_B * f64::from(dl) / avgdl);
    idf * ((BM25_K1 + 1.0) * tf / (norm + tf) + BM25_DELTA)
}

pub fn tfidf_weight(tf: u32, df: u32, n: usize) -> f64 {
    if tf == 0 || df == 0 {
        return 0.0;
    }
    f64::from(tf) * (n as f64 / f64::from(df)).ln()
}

pub fn inexpb2_weight(tf: u32, df: u32, cf: u64, dl: u32, avgdl: f64, n: usize) -> f64 {
    if tf == 0 || df == 0 {
        return 0.0;
    }
    let n = n as f64;
    let df = f64::from(df);
    let cf = cf as f64;
    let tfn = f64::from(tf) * (1.0 + INEXPB2_C * avgdl / f64::from(dl)).log2();
    let expected_df = n * (1.0 - (1.0 - df / n).powf(cf));
    let after_effect = (cf + 1.0) / (df * (tfn + 1.0));
    after_effect * tfn * ((n + 1.0) / (expected_df + 0.5)).log2()
}

impl Model {
    fn weight(self, index: &Index, term: &super::TermEntry, tf: u32, doc: u32) -> f64 {
        let n = index.num_docs();
        match self {
            Model::Bm25Plus => bm25plus_weight(tf, term.df(), index.doc_len(doc), index.avgdl(), n),
            Model::TfIdf => tfidf_weight(tf, term.df(), n),
            Model::InExpB2 => inexpb2_weight(tf, term.df(), term.cf, index.doc_len(doc), index.avgdl(), n),
        }
    }
}

/// Score of one document for `query`.
///
/// Panics if `doc` is not a valid ordinal of `index`.
pub fn score(model: Model, index: &Index, query: &TokenStream, doc: u32) -> f64 {
    assert!((doc as usize) < index.num_docs(), "document ordinal {doc} out of range");
    let mut total = 0.0;
    for (term, qtf) in query.term_counts() {
        let Some(entry) = index.term(term) else {
            continue;
        };
        let tf = entry.tf(doc);
        if tf > 0 {
            total += f64::from(qtf) * model.weight(index, entry, tf, doc);
        }
    }
    total
}

/// Top `k` documents with a positive score, best first; ties go to the
/// lexicographically smaller document id.
pub fn search(model: Model, index: &Index, query: &TokenStream, k: usize) -> Vec<(String, f64)> {
    let mut acc = vec![0.0f64; index.num_docs()];
    let mut touched = Vec::new();
    // Same term order and accumulation as `score`, so results agree bit for bit.
    for (term, qtf) in query.term_counts() {
        let Some(entry) = index.term(term) else {
            continue;
        };
        for posting in &entry.postings {
            let slot = &mut acc[posting.doc as usize];
            if *slot == 0.0 {
                touched.push(posting.doc);
            }
            *slot += f64::from(qtf) * model.weight(index, entry, posting.tf, posting.doc);
        }
    }
    touched.sort_unstable();
    touched.dedup();

    let mut hits: Vec<(u32, f64)> = touched
        .into_iter()
        .map(|d| (d, acc[d as usize]))
        .filter(|&(_, s)| s > 0.0)
        .collect();
    hits.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| index.doc_id(a.0).cmp(index.doc_id(b.0)))
    });
    hits.truncate(k);
    hits.into_iter()
        .map(|(d, s)| (index.doc_id(d).to_string(), s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::EnrichmentFlags;
    use crate::index::{SectionConfig, TrialField};

    fn index(docs: &[(&str, &str)]) -> Index {
        let streams = docs
            .iter()
            .map(|(id, text)| {
                let tokens = text.split_whitespace().map(str::to_string).collect();
                (id.to_string(), TokenStream::new(tokens))
            })
            .collect();
        let cfg = SectionConfig::new(vec![TrialField::Summary], EnrichmentFlags::NONE).unwrap();
        Index::from_streams(streams, cfg, String::new()).unwrap()
    }

    fn q(text: &str) -> TokenStream {
        TokenStream::new(text.split_whitespace().map(str::to_string).collect())
    }

    #[test]
    fn bm25plus_hand_computed() {
        let idx = index(&[("D1", "aspirin heart")]);
        let s = score(Model::Bm25Plus, &idx, &q("aspirin"), 0);
        assert!((s - 2.0 * 2f64.ln()).abs() < 1e-9, "{s}");
        assert!((s - 1.386294).abs() < 1e-6);
    }

    #[test]
    fn unknown_terms_score_zero() {
        let idx = index(&[("D1", "aspirin heart"), ("D2", "heart")]);
        for model in [Model::Bm25Plus, Model::TfIdf, Model::InExpB2] {
            assert_eq!(score(model, &idx, &q("zebra"), 0), 0.0);
            assert!(search(model, &idx, &q("zebra"), 10).is_empty());
        }
    }

    #[test]
    fn identical_documents_tie_on_id() {
        let idx = index(&[("B", "x y"), ("A", "x y"), ("C", "z")]);
        for model in [Model::Bm25Plus, Model::TfIdf, Model::InExpB2] {
            let hits = search(model, &idx, &q("x"), 10);
            let ids: Vec<_> = hits.iter().map(|h| h.0.as_str()).collect();
            assert_eq!(ids, ["A", "B"], "{model}");
            assert_eq!(hits[0].1, hits[1].1);
        }
    }

    #[test]
    fn higher_tf_ranks_first() {
        let idx = index(&[("D2", "aspirin x"), ("D1", "aspirin aspirin")]);
        let hits = search(Model::Bm25Plus, &idx, &q("aspirin"), 10);
        assert_eq!(hits[0].0, "D1");
        assert_eq!(hits.len(), 2);
    }

    #[test]
    fn k_truncates() {
        let idx = index(&[("A", "x"), ("B", "x"), ("C", "x")]);
        assert_eq!(search(Model::Bm25Plus, &idx, &q("x"), 2).len(), 2);
        assert_eq!(search(Model::Bm25Plus, &idx, &q("x"), 5).len(), 3);
    }

    #[test]
    fn tfidf_drops_terms_in_every_document() {
        let idx = index(&[("A", "x"), ("B", "x y")]);
        assert!(search(Model::TfIdf, &idx, &q("x"), 5).is_empty());
        assert_eq!(search(Model::TfIdf, &idx, &q("x y"), 5)[0].0, "B");
    }

    #[test]
    fn query_multiplicity_counts() {
        let idx = index(&[("A", "x y"), ("B", "y z")]);
        let once = score(Model::Bm25Plus, &idx, &q("x"), 0);
        let twice = score(Model::Bm25Plus, &idx, &q("x x"), 0);
        assert!((twice - 2.0 * once).abs() < 1e-12);
    }

    #[test]
    fn search_matches_score() {
        let idx = index(&[("A", "x y y"), ("B", "y z"), ("C", "x z z z")]);
        let query = q("z y x y");
        for model in [Model::Bm25Plus, Model::TfIdf, Model::InExpB2] {
            for (id, s) in search(model, &idx, &query, 10) {
                let doc = idx.ordinal(&id).unwrap();
                assert_eq!(s.to_bits(), score(model, &idx, &query, doc).to_bits());
            }
        }
    }

    #[test]
    fn model_names() {
        assert_eq!("BM25+".parse::<Model>().unwrap(), Model::Bm25Plus);
        assert_eq!("In_expB2".parse::<Model>().unwrap(), Model::InExpB2);
        assert_eq!("tf-idf".parse::<Model>().unwrap(), Model::TfIdf);
        assert!("lm-dirichlet".parse::<Model>().unwrap_err().is_config());
    }
}
