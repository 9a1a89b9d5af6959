use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::metrics::{Evaluation, Metric};
use crate::error::{Error, Result};

/// Two-sided p-value of the paired t-test on `a[i] - b[i]`.
///
/// Identical samples give 1.0. A constant nonzero difference gives 0.0.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Data(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Data("paired t-test needs at least two pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Ok(if mean == 0.0 { 1.0 } else { 0.0 });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::Data(format!("t distribution: {e}")))?;
    Ok((2.0 * dist.cdf(-t.abs())).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: Metric,
    pub run_mean: f64,
    pub baseline_mean: f64,
    pub p_value: f64,
}

/// Per-metric paired comparison of two evaluations over the same topics.
pub fn compare(run: &Evaluation, baseline: &Evaluation) -> Result<Vec<Comparison>> {
    let run_topics: Vec<&str> = run.topics.iter().map(|t| t.topic_id.as_str()).collect();
    let base_topics: Vec<&str> = baseline.topics.iter().map(|t| t.topic_id.as_str()).collect();
    if run_topics != base_topics {
        return Err(Error::Data("evaluations cover different topics".into()));
    }
    run.metrics
        .iter()
        .map(|&metric| {
            let a = run.column(metric).expect("metric of this evaluation");
            let b = baseline
                .column(metric)
                .ok_or_else(|| Error::Data(format!("baseline lacks metric {metric}")))?;
            Ok(Comparison {
                metric,
                run_mean: run.mean_of(metric).unwrap_or(0.0),
                baseline_mean: baseline.mean_of(metric).unwrap_or(0.0),
                p_value: paired_t_test(&a, &b)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_cases() {
        assert_eq!(paired_t_test(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(paired_t_test(&[2.0, 3.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(paired_t_test(&[1.0], &[1.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn symmetric_in_argument_order() {
        let a = [0.3, 0.5, 0.9, 0.1];
        let b = [0.2, 0.6, 0.4, 0.0];
        let p = paired_t_test(&a, &b).unwrap();
        assert!((p - paired_t_test(&b, &a).unwrap()).abs() < 1e-15);
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn known_value() {
        // diffs 1,2,3,4,5: t = 3 / sqrt(2.5/5) = 4.2426, df 4
        let p = paired_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).unwrap();
        assert!((p - 0.013236).abs() < 1e-5, "{p}");
    }
}
