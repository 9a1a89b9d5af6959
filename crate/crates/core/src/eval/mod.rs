//! Run files, relevance judgments, metrics and significance testing.

mod metrics;
mod stats;
mod trec;

pub use metrics::{
    count_at_cutoffs, evaluate_run, ndcg_at_k, parse_metrics, precision_at_k, reciprocal_rank, CutoffCounts,
    Evaluation, Metric, TopicScores, DEFAULT_RELEVANCE_THRESHOLD,
};
pub use stats::{compare, paired_t_test, Comparison};
pub use trec::{read_qrels, read_run, run_to_string, write_run, Qrels, RunEntry, RunFile, TopicJudgments};
