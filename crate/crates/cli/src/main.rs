use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use trialrank::annotate::EnrichmentFlags;
use trialrank::eval::parse_metrics;
use trialrank::filter::FilterConfig;
use trialrank::index::{Model, SectionConfig};
use trialrank::pipeline::{self, AblationSet, Phase, RunConfig};
use trialrank::Error;

#[derive(Parser, Debug)]
#[command(
    name = "trialrank",
    version,
    about = "Patient-to-clinical-trial retrieval experiments"
)]
struct Cli {
    /// Run configuration (TOML). Relative paths inside it are resolved
    /// against the file's directory.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    topics: Option<PathBuf>,
    #[arg(long, global = true)]
    qrels: Option<PathBuf>,
    #[arg(long, global = true)]
    gazetteer: Option<PathBuf>,
    #[arg(long, global = true)]
    triggers: Option<PathBuf>,
    #[arg(long, global = true)]
    stopwords: Option<PathBuf>,
    /// Directory for outputs without an explicit path.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// bm25plus, tfidf or inexpb2.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Document sections joined with `+`, e.g. `summary+description+inclusion`.
    #[arg(long, global = true)]
    sections: Option<String>,
    /// Enrichment flags, a subset of `cpf`; `none` disables enrichment.
    #[arg(long, global = true)]
    enrichment: Option<String>,
    /// Filter flags, a subset of `AGSD`; `none` disables filtering.
    #[arg(long, global = true)]
    filters: Option<String>,
    /// Retrieval depth.
    #[arg(short, long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    tag: Option<String>,
    /// Comma-separated metrics, e.g. `ndcg@5,ndcg@10,p@10,rr`.
    #[arg(long, global = true)]
    metrics: Option<String>,
    /// Minimum grade counted as relevant by P@k and RR.
    #[arg(long, global = true)]
    relevance_threshold: Option<u8>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write trial and topic annotation sidecars.
    Annotate,
    /// Build and store the inverted index.
    Index,
    /// Rank every topic against the stored index.
    Search,
    /// Apply demographic and lifestyle filters to the run.
    Filter,
    /// Evaluate the final run against the qrels.
    Eval {
        /// Run file to evaluate instead of the configured one.
        #[arg(long)]
        run: Option<PathBuf>,
        /// Run file to compare against with paired t-tests.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Deepest cutoff of the eligible/excluded count report.
        #[arg(long)]
        cutoff_depth: Option<usize>,
    },
    /// Evaluate one index per section set.
    Ablation {
        /// Extra section sets as `name=sections[:flags]`; replaces the
        /// configured sets when given.
        #[arg(long = "set")]
        sets: Vec<String>,
    },
    /// Export re-ranker training pairs from the final run.
    ExportPairs {
        /// topical or criteria.
        #[arg(long)]
        phase: String,
    },
    /// Reorder the top of the final run with an external score file.
    RerankApply {
        /// Score sidecar (TSV or JSON lines).
        #[arg(long)]
        scores: PathBuf,
        /// Number of top documents to reorder.
        #[arg(long)]
        rerank_k: Option<usize>,
        /// Weight of the first-stage score for weighted fusion.
        #[arg(long)]
        fusion_weight: Option<f64>,
    },
}

fn config_error(message: impl Into<String>) -> Error {
    Error::Config(message.into())
}

fn load_config(path: &Path) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    cfg.resolve_paths(base);
    Ok(cfg)
}

fn flags_or_none<T: std::str::FromStr<Err = Error> + Default>(raw: &str) -> Result<T, Error> {
    if raw.eq_ignore_ascii_case("none") || raw.is_empty() {
        Ok(T::default())
    } else {
        raw.parse()
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let o = &cli.overrides;
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => match (&o.corpus, &o.topics) {
            (Some(c), Some(t)) => RunConfig::new(c, t),
            _ => return Err(config_error("give --config, or both --corpus and --topics")),
        },
    };
    if let Some(p) = &o.corpus {
        cfg.inputs.corpus = p.clone();
    }
    if let Some(p) = &o.topics {
        cfg.inputs.topics = p.clone();
    }
    if o.qrels.is_some() {
        cfg.inputs.qrels = o.qrels.clone();
    }
    if o.gazetteer.is_some() {
        cfg.inputs.gazetteer = o.gazetteer.clone();
    }
    if o.triggers.is_some() {
        cfg.inputs.triggers = o.triggers.clone();
    }
    if o.stopwords.is_some() {
        cfg.inputs.stopwords = o.stopwords.clone();
    }
    if let Some(dir) = &o.out_dir {
        cfg.outputs.dir = dir.clone();
    }
    if let Some(m) = &o.model {
        cfg.model = m.parse::<Model>()?;
    }
    if let Some(s) = &o.sections {
        cfg.sections = SectionConfig::parse_sections(s)?;
    }
    if let Some(e) = &o.enrichment {
        cfg.enrichment = flags_or_none::<EnrichmentFlags>(e)?;
    }
    if let Some(f) = &o.filters {
        cfg.filters = flags_or_none::<FilterConfig>(f)?;
    }
    if let Some(k) = o.k {
        cfg.k = k;
    }
    if let Some(tag) = &o.tag {
        cfg.tag = tag.clone();
    }
    if let Some(m) = &o.metrics {
        cfg.metrics = parse_metrics(m)?;
    }
    if let Some(t) = o.relevance_threshold {
        cfg.relevance_threshold = t;
    }
    match &cli.command {
        Command::Eval {
            run,
            baseline,
            cutoff_depth,
        } => {
            if run.is_some() {
                cfg.eval.run = run.clone();
            }
            if baseline.is_some() {
                cfg.eval.baseline = baseline.clone();
            }
            if let Some(d) = cutoff_depth {
                cfg.eval.cutoff_depth = *d;
            }
        }
        Command::Ablation { sets } if !sets.is_empty() => {
            cfg.ablation = sets.iter().map(|s| parse_set(s)).collect::<Result<_, _>>()?;
        }
        Command::RerankApply {
            rerank_k,
            fusion_weight,
            ..
        } => {
            if let Some(k) = rerank_k {
                cfg.rerank.k = *k;
            }
            if fusion_weight.is_some() {
                cfg.rerank.fusion_weight = *fusion_weight;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `name=sections[:flags]`, e.g. `14d=summary+description+inclusion:cfp`.
fn parse_set(raw: &str) -> Result<AblationSet, Error> {
    let (name, rest) = raw
        .split_once('=')
        .ok_or_else(|| config_error(format!("section set {raw:?} is not name=sections[:flags]")))?;
    let (sections, flags) = rest.split_once(':').unwrap_or((rest, ""));
    Ok(AblationSet {
        name: name.trim().to_string(),
        sections: SectionConfig::parse_sections(sections)?,
        enrichment: flags_or_none(flags.trim())?,
    })
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let cfg = build_config(cli)?;
    match &cli.command {
        Command::Annotate => {
            let out = pipeline::annotate(&cfg)?;
            info!(
                "annotated {} trials and {} topics into {} and {}",
                out.documents,
                out.topics,
                cfg.outputs.doc_annotations().display(),
                cfg.outputs.topic_annotations().display()
            );
        }
        Command::Index => {
            let index = pipeline::index(&cfg)?;
            info!(
                "indexed {} trials, {} terms, into {}",
                index.num_docs(),
                index.num_terms(),
                cfg.outputs.index().display()
            );
        }
        Command::Search => {
            let run = pipeline::search(&cfg)?;
            let lines: usize = run.topics.values().map(Vec::len).sum();
            info!("wrote {lines} run lines to {}", cfg.outputs.run().display());
        }
        Command::Filter => {
            let out = pipeline::filter(&cfg)?;
            info!(
                "filters {:?} removed {:.1}% of retrieved trials on average; wrote {}",
                cfg.filters.to_string(),
                100.0 * out.mean_removed_fraction(),
                cfg.outputs.filtered_run().display()
            );
        }
        Command::Eval { .. } => {
            let out = pipeline::eval(&cfg)?;
            let means: Vec<String> = out
                .evaluation
                .metrics
                .iter()
                .zip(&out.evaluation.mean)
                .map(|(m, v)| format!("{m}={v:.4}"))
                .collect();
            println!("{}", means.join(" "));
            for c in &out.comparisons {
                println!(
                    "{}: {:.4} vs baseline {:.4}, p={:.4}",
                    c.metric, c.run_mean, c.baseline_mean, c.p_value
                );
            }
        }
        Command::Ablation { .. } => {
            let rows = pipeline::ablation(&cfg)?;
            info!("wrote {} rows to {}", rows.len(), cfg.outputs.ablation().display());
        }
        Command::ExportPairs { phase } => {
            let phase: Phase = phase.parse()?;
            let out = pipeline::export_pairs(&cfg, phase)?;
            if !out.skipped_topics.is_empty() {
                warn!("{} topics had no retrieved positives", out.skipped_topics.len());
            }
            info!("wrote {} pairs to {}", out.records, out.path.display());
        }
        Command::RerankApply { scores, .. } => {
            pipeline::rerank_apply(&cfg, scores)?;
            info!("wrote {}", cfg.outputs.reranked_run().display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
