//! Command-line pipeline around the `graphinst` library.

pub mod config;
pub mod pipeline;
pub mod query;
pub mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use graphinst::dataset::export::{corpus_file_name, read_json, write_json};
use graphinst::dataset::{plan_counts, read_corpus, CorpusRecord, Split};
use graphinst::eval::{aggregate, read_predictions, PredictionRecord};
use graphinst::Format;

use config::PipelineConfig;
use pipeline::{Pipeline, PipelineManifest, RunReport, Stage};

macro_rules! error_kind {
    ($name:ident) => {
        #[derive(Debug)]
        pub struct $name(pub String);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl std::error::Error for $name {}
    };
}

error_kind!(ConfigError);
error_kind!(StaleError);
error_kind!(EndpointError);

pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const IO: i32 = 3;
    pub const ENDPOINT: i32 = 4;
    pub const DATA: i32 = 5;
    pub const STALE: i32 = 6;
}

/// Exit code for an error, by the first categorized cause in its chain.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return exit::CONFIG;
        }
        if cause.is::<StaleError>() {
            return exit::STALE;
        }
        if cause.is::<EndpointError>() {
            return exit::ENDPOINT;
        }
        if cause.is::<std::io::Error>() {
            return exit::IO;
        }
        if let Some(e) = cause.downcast_ref::<graphinst::Error>() {
            use graphinst::Error as E;
            return match e {
                E::Io { .. } | E::Record { .. } => exit::IO,
                E::Config(_)
                | E::InvalidSpec { .. }
                | E::InvalidSampler(_)
                | E::UnknownEdgeType(_)
                | E::UnknownNodeType(_)
                | E::InvalidIdentifier(_) => exit::CONFIG,
                _ => exit::DATA,
            };
        }
    }
    exit::OTHER
}

#[derive(Debug, Parser)]
#[command(name = "graphinst", version, about = "Graph instruction-tuning benchmark pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Pipeline configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        PipelineConfig::load(&self.config)?.with_overrides(self.seed, self.out.clone())
    }
}

#[derive(Debug, Clone, Args)]
pub struct StageArgs {
    #[command(flatten)]
    pub common: Common,
    /// Rerun or resume even when stamps or artifacts do not match.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitFilter {
    Train,
    Test,
    All,
}

impl SplitFilter {
    fn keeps(self, r: &CorpusRecord) -> bool {
        match self {
            SplitFilter::Train => r.split.split == Split::Train,
            SplitFilter::Test => r.split.split == Split::Test,
            SplitFilter::All => true,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    #[command(flatten)]
    pub common: Common,
    /// Which exported corpus to use.
    #[arg(long, default_value = "nl")]
    pub format: String,
    /// Which instances to use.
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitFilter,
    /// Predictions file; defaults to `predictions.<format>.jsonl` in the
    /// output directory.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read source records, build and de-identify the domain graphs.
    Ingest(StageArgs),
    /// Sample contexts and generate instances for every sub-task.
    Generate(StageArgs),
    /// Assign instances to train/test and apply the masks.
    Split(StageArgs),
    /// Write prompt/completion corpora for each format.
    Export(StageArgs),
    /// Run ingest, generate, split and export, skipping up-to-date stages.
    Run(StageArgs),
    /// Count instances per split from the roster alone.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Samples per sub-task; defaults to the config value.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Send corpus prompts to the configured model endpoint.
    Query {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Send at most this many requests in this invocation.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Score predictions against a corpus.
    Eval {
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Per-domain corpus statistics.
    Stats {
        #[command(flatten)]
        common: Common,
    },
}

pub fn run_stages(args: &StageArgs, stages: &[Stage]) -> Result<RunReport> {
    let pipeline = Pipeline::new(args.common.load()?, args.force)?;
    let report = pipeline.run(stages)?;
    for s in &report.executed {
        println!("{s}: done");
    }
    for s in &report.skipped {
        println!("{s}: up to date");
    }
    println!("config hash {}", report.manifest.config_hash);
    Ok(report)
}

pub fn plan(common: &Common, samples: Option<usize>) -> Result<graphinst::dataset::split::SplitPlan> {
    let config = common.load()?;
    config.validate_static()?;
    let roster = config.load_roster()?;
    let n = samples.unwrap_or(config.samples_per_subtask);
    let plan = plan_counts(&roster, n, &config.split).map_err(|e| ConfigError(e.to_string()))?;
    println!("domain\tsub_tasks\tinstances\ttrain_pool\ttest_pool\ttrain\ttest\texcluded");
    let rows = plan.per_domain.iter().map(|(d, r)| (d.as_str(), r)).chain([("all", &plan.total)]);
    for (d, r) in rows {
        println!(
            "{d}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.sub_tasks, r.instances, r.train_pool, r.test_pool, r.train, r.test, r.excluded
        );
    }
    if let Some(out) = &config.output_dir {
        write_json(&out.join("plan.json"), &plan)?;
    }
    Ok(plan)
}

fn parse_format(s: &str) -> Result<Format> {
    s.parse().map_err(|e: graphinst::Error| ConfigError(e.to_string()).into())
}

fn pipeline_manifest(out: &Path) -> Result<PipelineManifest> {
    let p = out.join("manifest.json");
    if !p.exists() {
        bail!(StaleError(format!("no pipeline manifest in {}; run the pipeline first", out.display())));
    }
    Ok(read_json(&p)?)
}

fn load_corpus(out: &Path, format: Format) -> Result<Vec<CorpusRecord>> {
    let p = out.join(corpus_file_name(format));
    if !p.exists() {
        bail!(StaleError(format!("{} does not exist; run `export` first", p.display())));
    }
    Ok(read_corpus(&p)?)
}

fn predictions_path(args: &CorpusArgs, out: &Path, format: Format) -> PathBuf {
    args.predictions
        .clone()
        .unwrap_or_else(|| out.join(format!("predictions.{}.jsonl", format.name())))
}

pub fn query(args: &CorpusArgs, limit: Option<usize>) -> Result<query::QueryReport> {
    let config = args.common.load()?;
    let out = config.output_dir()?.to_path_buf();
    let format = parse_format(&args.format)?;
    let endpoint = config
        .endpoint
        .clone()
        .ok_or_else(|| ConfigError("config has no [endpoint] section".into()))?;
    let records: Vec<CorpusRecord> =
        load_corpus(&out, format)?.into_iter().filter(|r| args.split.keeps(r)).collect();
    let path = predictions_path(args, &out, format);
    let report = query::query_model(&records, &endpoint, &path, limit)?;
    println!(
        "sent {} ({} failed), {} already done, {} remaining; predictions in {}",
        report.sent,
        report.failed,
        report.already_done,
        report.remaining,
        path.display()
    );
    Ok(report)
}

pub fn eval(args: &CorpusArgs) -> Result<graphinst::eval::EvalReport> {
    let config = args.common.load()?;
    let out = config.output_dir()?.to_path_buf();
    let format = parse_format(&args.format)?;
    let manifest = pipeline_manifest(&out)?;
    let corpus = load_corpus(&out, format)?;
    let all_ids: BTreeSet<&str> = corpus.iter().map(|r| r.instance_id.as_str()).collect();
    let selected: Vec<CorpusRecord> = corpus.iter().filter(|r| args.split.keeps(r)).cloned().collect();
    let keep: BTreeSet<&str> = selected.iter().map(|r| r.instance_id.as_str()).collect();

    let preds_path = predictions_path(args, &out, format);
    let preds = read_predictions(&preds_path)?;
    // predictions for instances outside the selected split are ignored
    let mut used: Vec<PredictionRecord> = Vec::new();
    for p in preds {
        if !all_ids.contains(p.instance_id.as_str()) {
            return Err(graphinst::Error::UnknownInstance(p.instance_id).into());
        }
        if keep.contains(p.instance_id.as_str()) {
            used.push(p);
        }
    }
    let report = aggregate(&used, &selected)?;
    let stem = format!("report.{}", format.name());
    write_json(
        &out.join(format!("{stem}.json")),
        &json!({
            "config_hash": manifest.config_hash,
            "seed": manifest.seed,
            "format": format,
            "predictions": preds_path.display().to_string(),
            "report": report,
        }),
    )?;
    let table = format!(
        "# config_hash={} seed={} format={}\n{}",
        manifest.config_hash,
        manifest.seed,
        format,
        report.to_table()
    );
    std::fs::write(out.join(format!("{stem}.txt")), &table).context("writing report table")?;
    print!("{}", report.to_table());
    if !report.missing.is_empty() {
        println!("{} instances had no prediction and scored 0", report.missing.len());
    }
    Ok(report)
}

pub fn stats(common: &Common) -> Result<Vec<stats::DomainStats>> {
    let config = common.load()?;
    let out = config.output_dir()?.to_path_buf();
    let manifest = pipeline_manifest(&out)?;
    let mut corpora = BTreeMap::new();
    for &f in &config.formats {
        corpora.insert(f, load_corpus(&out, f)?);
    }
    let rows = stats::compute_stats(&corpora);
    let tsv = stats::to_tsv(
        &rows,
        &[format!("config_hash={} seed={}", manifest.config_hash, manifest.seed)],
    );
    std::fs::write(out.join("stats.tsv"), &tsv).context("writing stats.tsv")?;
    print!("{tsv}");
    Ok(rows)
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => run_stages(&a, &[Stage::Ingest]).map(drop),
        Command::Generate(a) => run_stages(&a, &[Stage::Generate]).map(drop),
        Command::Split(a) => run_stages(&a, &[Stage::Split]).map(drop),
        Command::Export(a) => run_stages(&a, &[Stage::Export]).map(drop),
        Command::Run(a) => run_stages(&a, &Stage::ALL).map(drop),
        Command::Plan { common, samples } => plan(&common, samples).map(drop),
        Command::Query { corpus, limit } => query(&corpus, limit).map(drop),
        Command::Eval { corpus } => eval(&corpus).map(drop),
        Command::Stats { common } => stats(&common).map(drop),
    }
}
