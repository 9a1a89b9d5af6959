use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotate::EnrichmentFlags;
use crate::corpus::FieldPaths;
use crate::error::{Error, Result};
use crate::eval::{Metric, DEFAULT_RELEVANCE_THRESHOLD};
use crate::filter::FilterConfig;
use crate::index::{Model, SectionConfig, TrialField};

pub const DEFAULT_DEPTH: usize = 1000;
pub const DEFAULT_RERANK_DEPTH: usize = 50;
pub const DEFAULT_CUTOFF_DEPTH: usize = 20;

/// Everything one experiment run needs. Relative paths are resolved against
/// the directory of the configuration file by [`RunConfig::resolve_paths`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Run tag written in the last column of run files.
    #[serde(default = "default_tag")]
    pub tag: String,
    #[serde(default)]
    pub model: Model,
    #[serde(default = "default_sections")]
    pub sections: Vec<TrialField>,
    #[serde(default)]
    pub enrichment: EnrichmentFlags,
    #[serde(default)]
    pub filters: FilterConfig,
    #[serde(default = "default_depth")]
    pub k: usize,
    #[serde(default = "Metric::standard")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_threshold")]
    pub relevance_threshold: u8,
    pub inputs: Inputs,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub fields: FieldPaths,
    #[serde(default)]
    pub eval: EvalOptions,
    #[serde(default)]
    pub rerank: RerankOptions,
    #[serde(default)]
    pub ablation: Vec<AblationSet>,
}

fn default_tag() -> String {
    "trialrank".into()
}

fn default_sections() -> Vec<TrialField> {
    vec![
        TrialField::Summary,
        TrialField::Description,
        TrialField::BriefTitle,
        TrialField::OfficialTitle,
        TrialField::Conditions,
        TrialField::Inclusion,
    ]
}

fn default_depth() -> usize {
    DEFAULT_DEPTH
}

fn default_threshold() -> u8 {
    DEFAULT_RELEVANCE_THRESHOLD
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub corpus: PathBuf,
    pub topics: PathBuf,
    #[serde(default)]
    pub qrels: Option<PathBuf>,
    /// Gazetteer TSV; the shipped fixture lexicon when absent.
    #[serde(default)]
    pub gazetteer: Option<PathBuf>,
    /// Trigger TSV; the shipped trigger set when absent.
    #[serde(default)]
    pub triggers: Option<PathBuf>,
    /// Stopword list; the shipped English list when absent.
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
}

/// Output locations. Unset paths default to fixed names under `dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    pub doc_annotations: Option<PathBuf>,
    pub topic_annotations: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub run: Option<PathBuf>,
    pub filtered_run: Option<PathBuf>,
    pub filter_report: Option<PathBuf>,
    pub eval_tsv: Option<PathBuf>,
    pub eval_json: Option<PathBuf>,
    pub cutoffs: Option<PathBuf>,
    pub ablation: Option<PathBuf>,
    pub pairs_dir: Option<PathBuf>,
    pub reranked_run: Option<PathBuf>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            dir: default_out_dir(),
            doc_annotations: None,
            topic_annotations: None,
            queries: None,
            index: None,
            run: None,
            filtered_run: None,
            filter_report: None,
            eval_tsv: None,
            eval_json: None,
            cutoffs: None,
            ablation: None,
            pairs_dir: None,
            reranked_run: None,
        }
    }
}

impl Outputs {
    fn pick(&self, set: &Option<PathBuf>, name: &str) -> PathBuf {
        set.clone().unwrap_or_else(|| self.dir.join(name))
    }

    pub fn doc_annotations(&self) -> PathBuf {
        self.pick(&self.doc_annotations, "doc_annotations.jsonl")
    }
    pub fn topic_annotations(&self) -> PathBuf {
        self.pick(&self.topic_annotations, "topic_annotations.jsonl")
    }
    pub fn queries(&self) -> PathBuf {
        self.pick(&self.queries, "queries.jsonl")
    }
    pub fn index(&self) -> PathBuf {
        self.pick(&self.index, "index.bin")
    }
    pub fn run(&self) -> PathBuf {
        self.pick(&self.run, "run.txt")
    }
    pub fn filtered_run(&self) -> PathBuf {
        self.pick(&self.filtered_run, "run.filtered.txt")
    }
    pub fn filter_report(&self) -> PathBuf {
        self.pick(&self.filter_report, "filter_report.jsonl")
    }
    pub fn eval_tsv(&self) -> PathBuf {
        self.pick(&self.eval_tsv, "eval.tsv")
    }
    pub fn eval_json(&self) -> PathBuf {
        self.pick(&self.eval_json, "eval.json")
    }
    pub fn cutoffs(&self) -> PathBuf {
        self.pick(&self.cutoffs, "cutoffs.csv")
    }
    pub fn ablation(&self) -> PathBuf {
        self.pick(&self.ablation, "ablation.tsv")
    }
    pub fn pairs_dir(&self) -> PathBuf {
        self.pick(&self.pairs_dir, "")
    }
    pub fn reranked_run(&self) -> PathBuf {
        self.pick(&self.reranked_run, "run.reranked.txt")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOptions {
    /// Run file evaluated by `eval`; the filtered run when filters are
    /// enabled, the plain run otherwise.
    #[serde(default)]
    pub run: Option<PathBuf>,
    /// Run file to compare against with a paired t-test.
    #[serde(default)]
    pub baseline: Option<PathBuf>,
    #[serde(default = "default_cutoff_depth")]
    pub cutoff_depth: usize,
}

fn default_cutoff_depth() -> usize {
    DEFAULT_CUTOFF_DEPTH
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            run: None,
            baseline: None,
            cutoff_depth: DEFAULT_CUTOFF_DEPTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RerankOptions {
    #[serde(default = "default_rerank_depth")]
    pub k: usize,
    /// Weight of the first-stage score when fusing; sequential reordering
    /// when absent.
    #[serde(default)]
    pub fusion_weight: Option<f64>,
}

fn default_rerank_depth() -> usize {
    DEFAULT_RERANK_DEPTH
}

impl Default for RerankOptions {
    fn default() -> Self {
        RerankOptions {
            k: DEFAULT_RERANK_DEPTH,
            fusion_weight: None,
        }
    }
}

/// One row of a section ablation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSet {
    pub name: String,
    pub sections: Vec<TrialField>,
    #[serde(default)]
    pub enrichment: EnrichmentFlags,
}

impl AblationSet {
    pub fn section_config(&self) -> Result<SectionConfig> {
        SectionConfig::new(self.sections.clone(), self.enrichment)
    }
}

impl RunConfig {
    /// A configuration with defaults for everything but the two required inputs.
    pub fn new(corpus: impl Into<PathBuf>, topics: impl Into<PathBuf>) -> Self {
        RunConfig {
            tag: default_tag(),
            model: Model::default(),
            sections: default_sections(),
            enrichment: EnrichmentFlags::NONE,
            filters: FilterConfig::NONE,
            k: DEFAULT_DEPTH,
            metrics: Metric::standard(),
            relevance_threshold: DEFAULT_RELEVANCE_THRESHOLD,
            inputs: Inputs {
                corpus: corpus.into(),
                topics: topics.into(),
                ..Inputs::default()
            },
            outputs: Outputs::default(),
            fields: FieldPaths::default(),
            eval: EvalOptions::default(),
            rerank: RerankOptions::default(),
            ablation: Vec::new(),
        }
    }

    pub fn section_config(&self) -> Result<SectionConfig> {
        SectionConfig::new(self.sections.clone(), self.enrichment)
    }

    /// Makes every relative path absolute with respect to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_opt = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut self.inputs.corpus);
        fix(&mut self.inputs.topics);
        fix_opt(&mut self.inputs.qrels);
        fix_opt(&mut self.inputs.gazetteer);
        fix_opt(&mut self.inputs.triggers);
        fix_opt(&mut self.inputs.stopwords);
        let out = &mut self.outputs;
        fix(&mut out.dir);
        for p in [
            &mut out.doc_annotations,
            &mut out.topic_annotations,
            &mut out.queries,
            &mut out.index,
            &mut out.run,
            &mut out.filtered_run,
            &mut out.filter_report,
            &mut out.eval_tsv,
            &mut out.eval_json,
            &mut out.cutoffs,
            &mut out.ablation,
            &mut out.pairs_dir,
            &mut out.reranked_run,
        ] {
            fix_opt(p);
        }
        fix_opt(&mut self.eval.run);
        fix_opt(&mut self.eval.baseline);
    }

    /// Checks value ranges and that every referenced input exists.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.rerank.k == 0 {
            return Err(Error::Config("rerank.k must be at least 1".into()));
        }
        if self.eval.cutoff_depth == 0 {
            return Err(Error::Config("eval.cutoff_depth must be at least 1".into()));
        }
        if !(1..=2).contains(&self.relevance_threshold) {
            return Err(Error::Config("relevance_threshold must be 1 or 2".into()));
        }
        if let Some(w) = self.rerank.fusion_weight {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Config("rerank.fusion_weight must lie in [0, 1]".into()));
            }
        }
        if self.metrics.is_empty() {
            return Err(Error::Config("at least one metric is required".into()));
        }
        self.section_config()?;
        for set in &self.ablation {
            set.section_config()
                .map_err(|e| Error::Config(format!("ablation set {:?}: {e}", set.name)))?;
        }
        let inputs = &self.inputs;
        let required = [("corpus", Some(&inputs.corpus)), ("topics", Some(&inputs.topics))];
        let optional = [
            ("qrels", inputs.qrels.as_ref()),
            ("gazetteer", inputs.gazetteer.as_ref()),
            ("triggers", inputs.triggers.as_ref()),
            ("stopwords", inputs.stopwords.as_ref()),
            ("eval.baseline", self.eval.baseline.as_ref()),
        ];
        for (name, path) in required.into_iter().chain(optional) {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(Error::Config(format!("{name} path {} does not exist", path.display())));
                }
            }
        }
        Ok(())
    }

    /// The run file `eval` and `export-pairs` read by default.
    pub fn final_run(&self) -> PathBuf {
        if let Some(run) = &self.eval.run {
            return run.clone();
        }
        if self.filters.is_empty() {
            self.outputs.run()
        } else {
            self.outputs.filtered_run()
        }
    }

    pub fn qrels_path(&self) -> Result<&Path> {
        self.inputs
            .qrels
            .as_deref()
            .ok_or_else(|| Error::Config("this stage needs inputs.qrels".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let cfg = RunConfig::new("c", "t");
        assert_eq!(cfg.k, 1000);
        assert_eq!(cfg.rerank.k, 50);
        assert_eq!(cfg.outputs.run(), Path::new("out/run.txt"));
        assert_eq!(cfg.final_run(), Path::new("out/run.txt"));
    }

    #[test]
    fn resolution_keeps_absolute_paths() {
        let mut cfg = RunConfig::new("corpus", "/abs/topics.tsv");
        cfg.outputs.run = Some("runs/x.txt".into());
        cfg.resolve_paths(Path::new("/base"));
        assert_eq!(cfg.inputs.corpus, Path::new("/base/corpus"));
        assert_eq!(cfg.inputs.topics, Path::new("/abs/topics.tsv"));
        assert_eq!(cfg.outputs.run(), Path::new("/base/runs/x.txt"));
        assert_eq!(cfg.outputs.index(), Path::new("/base/out/index.bin"));
    }

    #[test]
    fn validation() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(dir.path(), dir.path());
        cfg.validate().unwrap();
        cfg.k = 0;
        assert!(cfg.validate().unwrap_err().is_config());
        cfg.k = 5;
        cfg.inputs.qrels = Some(dir.path().join("missing"));
        assert!(cfg.validate().unwrap_err().is_config());
        cfg.inputs.qrels = None;
        cfg.sections.clear();
        assert!(cfg.validate().unwrap_err().is_config());
    }

    #[test]
    fn filtered_run_is_evaluated_when_filters_are_on() {
        let mut cfg = RunConfig::new("c", "t");
        cfg.filters = "AG".parse().unwrap();
        assert_eq!(cfg.final_run(), cfg.outputs.filtered_run());
    }
}
