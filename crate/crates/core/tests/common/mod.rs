//! Independent reference implementations and fixture helpers shared by the
//! integration and acceptance tests. The oracles never call into the
//! library's scoring or metric code.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleModel {
    Bm25Plus,
    TfIdf,
    InExpB2,
}

/// Score of document `d` for `query`, computed straight from raw token lists.
pub fn oracle_score(model: OracleModel, docs: &[Vec<String>], query: &[String], d: usize) -> f64 {
    let n = docs.len() as f64;
    let total: usize = docs.iter().map(Vec::len).sum();
    let avgdl = total as f64 / n;
    let dl = docs[d].len() as f64;

    let mut qtf: Vec<(&str, f64)> = Vec::new();
    for t in query {
        match qtf.iter_mut().find(|(s, _)| *s == t.as_str()) {
            Some(entry) => entry.1 += 1.0,
            None => qtf.push((t.as_str(), 1.0)),
        }
    }

    let mut sum = 0.0;
    for (term, q) in qtf {
        let tf = docs[d].iter().filter(|t| t.as_str() == term).count() as f64;
        let df = docs.iter().filter(|doc| doc.iter().any(|t| t == term)).count() as f64;
        let cf: f64 = docs
            .iter()
            .map(|doc| doc.iter().filter(|t| t.as_str() == term).count() as f64)
            .sum();
        if tf == 0.0 || df == 0.0 {
            continue;
        }
        let w = match model {
            OracleModel::Bm25Plus => {
                let (k1, b, delta) = (1.5, 0.75, 1.0);
                let idf = ((n + 1.0) / df).ln();
                idf * ((k1 + 1.0) * tf / (k1 * (1.0 - b + b * dl / avgdl) + tf) + delta)
            }
            OracleModel::TfIdf => tf * (n / df).ln(),
            OracleModel::InExpB2 => {
                let tfn = tf * (1.0 + avgdl / dl).ln() / std::f64::consts::LN_2;
                let ne = n * (1.0 - (1.0 - df / n).powf(cf));
                let inf = ((n + 1.0) / (ne + 0.5)).ln() / std::f64::consts::LN_2;
                (cf + 1.0) / (df * (tfn + 1.0)) * tfn * inf
            }
        };
        sum += q * w;
    }
    sum
}

fn grade(judged: &HashMap<String, u8>, doc: &str) -> u8 {
    *judged.get(doc).unwrap_or(&0)
}

/// nDCG@k with the ideal ordering written out grade by grade.
pub fn oracle_ndcg(ranking: &[String], judged: &HashMap<String, u8>, k: usize) -> f64 {
    let mut dcg = 0.0;
    for (i, doc) in ranking.iter().enumerate() {
        if i >= k {
            break;
        }
        dcg += f64::from(grade(judged, doc)) / ((i + 2) as f64).ln() * std::f64::consts::LN_2;
    }
    let twos = judged.values().filter(|&&g| g == 2).count();
    let ones = judged.values().filter(|&&g| g == 1).count();
    let mut ideal = vec![2.0; twos];
    ideal.extend(std::iter::repeat_n(1.0, ones));
    let mut idcg = 0.0;
    for (i, g) in ideal.iter().enumerate() {
        if i >= k {
            break;
        }
        idcg += g / ((i + 2) as f64).ln() * std::f64::consts::LN_2;
    }
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

pub fn oracle_precision(ranking: &[String], judged: &HashMap<String, u8>, k: usize, threshold: u8) -> f64 {
    let mut hits = 0;
    for i in 0..k {
        if let Some(doc) = ranking.get(i) {
            if grade(judged, doc) >= threshold {
                hits += 1;
            }
        }
    }
    hits as f64 / k as f64
}

pub fn oracle_rr(ranking: &[String], judged: &HashMap<String, u8>, threshold: u8) -> f64 {
    for (i, doc) in ranking.iter().enumerate() {
        if grade(judged, doc) >= threshold {
            return 1.0 / (i + 1) as f64;
        }
    }
    0.0
}

/// Lanczos approximation of ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Two-sided paired t-test p-value by Simpson integration of the t density.
pub fn oracle_paired_p(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    let t = (mean / (var / n).sqrt()).abs();
    let nu = n - 1.0;
    let log_c = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln();
    let density = |x: f64| (log_c - (nu + 1.0) / 2.0 * (1.0 + x * x / nu).ln()).exp();
    let steps = 200_000;
    let h = t / steps as f64;
    let mut s = density(0.0) + density(t);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * density(i as f64 * h);
    }
    let central = s * h / 3.0;
    1.0 - 2.0 * central
}

/// Runs every stage on the fixtures into `out` and returns each output file
/// with its bytes, sorted by file name.
pub fn run_full_pipeline(out: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    use trialrank::index::TrialField;
    use trialrank::pipeline::{self, AblationSet, Phase, RunConfig};

    let fx = fixtures_dir();
    let mut cfg = RunConfig::new(fx.join("corpus"), fx.join("topics.xml"));
    cfg.inputs.qrels = Some(fx.join("qrels.txt"));
    cfg.outputs.dir = out.to_path_buf();
    cfg.enrichment = "cpf".parse().unwrap();
    cfg.filters = "AG".parse().unwrap();
    cfg.ablation = vec![
        AblationSet {
            name: "6".into(),
            sections: vec![TrialField::Inclusion],
            enrichment: Default::default(),
        },
        AblationSet {
            name: "7".into(),
            sections: vec![TrialField::Exclusion],
            enrichment: Default::default(),
        },
    ];
    cfg.validate().unwrap();
    pipeline::annotate(&cfg).unwrap();
    pipeline::index(&cfg).unwrap();
    pipeline::search(&cfg).unwrap();
    pipeline::filter(&cfg).unwrap();
    pipeline::eval(&cfg).unwrap();
    pipeline::ablation(&cfg).unwrap();
    pipeline::export_pairs(&cfg, Phase::Topical).unwrap();
    pipeline::export_pairs(&cfg, Phase::Criteria).unwrap();

    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}
