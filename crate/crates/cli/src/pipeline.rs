//! Stage orchestration: ingest, generate, split, export.
//!
//! Each stage hashes the slice of configuration it depends on together with
//! the hash of the stage before it, and leaves a stamp under `stages/`
//! listing that hash and the digests of what it wrote. A stage is skipped
//! when its stamp hash matches and every listed artifact is unchanged.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use graphinst::dataset::export::{
    corpus_file_name, file_digest, manifest_file_name, read_json, sha256_hex, write_json, ExportOptions, FileDigest,
};
use graphinst::dataset::generate::{read_instances, write_instances};
use graphinst::dataset::{build_splits, export_corpus, generate_all, InstanceMeta, SplitAssignment};
use graphinst::ingest::{deidentify, ingest_reader, IngestStats, Rejection};
use graphinst::rng::child_seed;
use graphinst::serialize::TEMPLATE_VERSION;
use graphinst::HeteroGraph;

use crate::config::PipelineConfig;
use crate::StaleError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Generate,
    Split,
    Export,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Ingest, Stage::Generate, Stage::Split, Stage::Export];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Generate => "generate",
            Stage::Split => "split",
            Stage::Export => "export",
        }
    }

    fn upstream(self) -> Option<Stage> {
        match self {
            Stage::Ingest => None,
            Stage::Generate => Some(Stage::Ingest),
            Stage::Split => Some(Stage::Generate),
            Stage::Export => Some(Stage::Split),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStamp {
    pub stage: Stage,
    pub hash: String,
    pub seed: u64,
    pub artifacts: Vec<FileDigest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub seed: u64,
    /// Hash of the last stage, covering every setting that shapes the corpus.
    pub config_hash: String,
    pub template_version: String,
    pub stages: Vec<StageStamp>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunReport {
    pub manifest: PipelineManifest,
    pub executed: Vec<Stage>,
    pub skipped: Vec<Stage>,
}

/// Per-domain ingestion summary written next to each graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestSummary {
    pub domain: String,
    pub nodes: usize,
    pub edges: usize,
    pub stats: IngestStats,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NameMapping {
    node_type: String,
    raw_id: String,
    name: String,
}

pub fn hash_value(v: &serde_json::Value) -> String {
    sha256_hex(v.to_string().as_bytes())
}

fn stamp_path(out: &Path, stage: Stage) -> PathBuf {
    out.join("stages").join(format!("{}.json", stage.name()))
}

pub fn read_stamp(out: &Path, stage: Stage) -> Result<Option<StageStamp>> {
    let p = stamp_path(out, stage);
    if !p.exists() {
        return Ok(None);
    }
    Ok(Some(read_json(&p)?))
}

fn digest_artifacts(out: &Path, rel: &[String]) -> Result<Vec<FileDigest>> {
    rel.iter()
        .map(|r| {
            let p = out.join(r);
            let records = match r.ends_with(".jsonl") {
                true => std::fs::read_to_string(&p)
                    .with_context(|| format!("reading {}", p.display()))?
                    .lines()
                    .count(),
                false => 1,
            };
            Ok(FileDigest {
                path: r.clone(),
                sha256: file_digest(&p)?,
                records,
            })
        })
        .collect()
}

/// First artifact that is missing or differs from its stamp.
fn changed_artifact(out: &Path, stamp: &StageStamp) -> Option<String> {
    stamp.artifacts.iter().find_map(|a| match file_digest(&out.join(&a.path)) {
        Ok(d) if d == a.sha256 => None,
        _ => Some(a.path.clone()),
    })
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub force: bool,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, force: bool) -> Result<Self> {
        config.validate()?;
        Ok(Pipeline { config, force })
    }

    fn out(&self) -> &Path {
        self.config.output_dir().expect("validated")
    }

    fn seed(&self) -> u64 {
        self.config.seed().expect("validated")
    }

    fn input_digest(&self, p: &Path) -> Result<String> {
        Ok(file_digest(p)?)
    }

    /// Hash of `stage` given the hash of the stage before it.
    pub fn stage_hash(&self, stage: Stage, upstream: Option<&str>) -> Result<String> {
        let c = &self.config;
        let estimator = json!({
            "config": c.estimator,
            "vocab": match &c.estimator {
                graphinst::tokens::EstimatorConfig::VocabFile { path, .. } => Some(self.input_digest(&c.resolve(path))?),
                _ => None,
            },
        });
        let body = match stage {
            Stage::Ingest => {
                let mut domains = Vec::new();
                for (adapter, records) in c.load_adapters()? {
                    domains.push(json!({ "adapter": adapter, "records": self.input_digest(&records)? }));
                }
                json!({ "seed": self.seed(), "domains": domains })
            }
            Stage::Generate => json!({
                "roster": self.input_digest(&c.roster_path())?,
                "samples_per_subtask": c.samples_per_subtask,
                "sampler": c.sampler,
                "budget": c.budget,
                "margin": c.margin,
                "formats": c.formats,
                "estimator": estimator,
                "prompt_template": c.prompt_template(),
                "filters": c.filters,
                "template_version": TEMPLATE_VERSION,
            }),
            Stage::Split => json!({ "split": c.split }),
            Stage::Export => json!({
                "formats": c.formats,
                "estimator": estimator,
                "prompt_template": c.prompt_template(),
                "budget": c.budget,
                "margin": c.margin,
                "template_version": TEMPLATE_VERSION,
            }),
        };
        Ok(hash_value(&json!({
            "stage": stage.name(),
            "seed": self.seed(),
            "upstream": upstream,
            "body": body,
        })))
    }

    /// Runs `stages` in pipeline order. The stage before the first one must
    /// already be up to date.
    pub fn run(&self, stages: &[Stage]) -> Result<RunReport> {
        let mut executed = Vec::new();
        let mut skipped = Vec::new();
        let mut upstream_hash: Option<String> = None;
        let first = stages.iter().min().copied().unwrap_or(Stage::Ingest);
        if let Some(prev) = first.upstream() {
            upstream_hash = Some(self.require_upstream(prev)?);
        }
        for stage in Stage::ALL.into_iter().filter(|s| stages.contains(s)) {
            let hash = self.stage_hash(stage, upstream_hash.as_deref())?;
            if self.up_to_date(stage, &hash)? {
                log::info!("{stage}: up to date, skipped");
                skipped.push(stage);
            } else {
                log::info!("{stage}: running");
                let artifacts = self.execute(stage, &hash)?;
                let stamp = StageStamp {
                    stage,
                    hash: hash.clone(),
                    seed: self.seed(),
                    artifacts: digest_artifacts(self.out(), &artifacts)?,
                };
                write_json(&stamp_path(self.out(), stage), &stamp)?;
                executed.push(stage);
            }
            upstream_hash = Some(hash);
        }
        let manifest = self.write_manifest()?;
        Ok(RunReport {
            manifest,
            executed,
            skipped,
        })
    }

    /// Hash of the existing `stage` stamp, which must match what the
    /// current configuration would produce.
    fn require_upstream(&self, stage: Stage) -> Result<String> {
        let upstream = match stage.upstream() {
            Some(prev) => Some(self.require_upstream(prev)?),
            None => None,
        };
        let expected = self.stage_hash(stage, upstream.as_deref())?;
        let Some(stamp) = read_stamp(self.out(), stage)? else {
            bail!(StaleError(format!(
                "stage `{stage}` has not been run in {}; run it first",
                self.out().display()
            )));
        };
        if stamp.hash != expected {
            if !self.force {
                bail!(StaleError(format!(
                    "stage `{stage}` outputs in {} were made with a different configuration; \
                     rerun `{stage}` or pass --force to use them anyway",
                    self.out().display()
                )));
            }
            log::warn!("{stage}: using outputs from a different configuration (--force)");
        }
        if let Some(path) = changed_artifact(self.out(), &stamp) {
            if !self.force {
                bail!(StaleError(format!(
                    "`{path}` changed after stage `{stage}` wrote it; rerun `{stage}` or pass --force"
                )));
            }
        }
        Ok(stamp.hash)
    }

    fn up_to_date(&self, stage: Stage, hash: &str) -> Result<bool> {
        let Some(stamp) = read_stamp(self.out(), stage)? else {
            return Ok(false);
        };
        if stamp.hash != hash {
            return Ok(false);
        }
        match changed_artifact(self.out(), &stamp) {
            None => Ok(true),
            Some(_) if self.force => Ok(false),
            Some(path) => bail!(StaleError(format!(
                "`{path}` changed after stage `{stage}` wrote it; pass --force to regenerate"
            ))),
        }
    }

    fn execute(&self, stage: Stage, hash: &str) -> Result<Vec<String>> {
        let out = self.out();
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        match stage {
            Stage::Ingest => self.ingest(out),
            Stage::Generate => self.generate(out),
            Stage::Split => self.split(out),
            Stage::Export => self.export(out, hash),
        }
    }

    fn ingest(&self, out: &Path) -> Result<Vec<String>> {
        let mut written = Vec::new();
        for (adapter, records) in self.config.load_adapters()? {
            let file = std::fs::File::open(&records).with_context(|| format!("opening {}", records.display()))?;
            let ingested = ingest_reader(std::io::BufReader::new(file), &adapter)?;
            let seed = child_seed(self.seed(), &["deidentify", adapter.domain.as_str()]);
            let (graph, mapping) = deidentify(&ingested.graph, seed, 1)?;
            let d = &adapter.domain;
            let graph_rel = format!("graphs/{d}.graph.json");
            let map_rel = format!("graphs/{d}.names.json");
            let summary_rel = format!("graphs/{d}.ingest.json");
            write_json(&out.join(&graph_rel), &graph)?;
            let names: Vec<NameMapping> = mapping
                .into_iter()
                .map(|(k, v)| NameMapping {
                    node_type: k.node_type,
                    raw_id: k.raw_id,
                    name: v.to_string(),
                })
                .collect();
            write_json(&out.join(&map_rel), &names)?;
            write_json(
                &out.join(&summary_rel),
                &IngestSummary {
                    domain: d.clone(),
                    nodes: graph.node_count(),
                    edges: graph.edge_count(),
                    stats: ingested.stats,
                    rejected: ingested.rejected,
                },
            )?;
            log::info!(
                "ingest: {d}: {} nodes, {} edges",
                graph.node_count(),
                graph.edge_count()
            );
            written.extend([graph_rel, map_rel, summary_rel]);
        }
        Ok(written)
    }

    pub fn load_graphs(&self) -> Result<BTreeMap<String, HeteroGraph>> {
        let mut graphs = BTreeMap::new();
        for (adapter, _) in self.config.load_adapters()? {
            let p = self.out().join(format!("graphs/{}.graph.json", adapter.domain));
            graphs.insert(adapter.domain.clone(), read_json(&p)?);
        }
        Ok(graphs)
    }

    fn generate(&self, out: &Path) -> Result<Vec<String>> {
        let graphs = self.load_graphs()?;
        let roster = self.config.load_roster()?;
        let gen = self.config.generation_config(self.config.estimator()?);
        let instances = generate_all(&graphs, &roster, &gen, self.seed())?;
        write_instances(&out.join("instances.jsonl"), &instances)?;
        log::info!("generate: {} instances", instances.len());
        Ok(vec!["instances.jsonl".into()])
    }

    fn split(&self, out: &Path) -> Result<Vec<String>> {
        let instances = read_instances(&out.join("instances.jsonl"))?;
        let metas: Vec<InstanceMeta> = instances.iter().map(InstanceMeta::from).collect();
        let roster = self.config.load_roster()?;
        let seed = child_seed(self.seed(), &["split"]);
        let assignment = build_splits(&metas, &roster, &self.config.split, seed)?;
        write_json(&out.join("splits.json"), &assignment)?;
        Ok(vec!["splits.json".into()])
    }

    fn export(&self, out: &Path, hash: &str) -> Result<Vec<String>> {
        let instances = read_instances(&out.join("instances.jsonl"))?;
        let assignment: SplitAssignment = read_json(&out.join("splits.json"))?;
        let estimator = self.config.estimator()?;
        let mut written = Vec::new();
        for &format in &self.config.formats {
            let opts = ExportOptions {
                format,
                prompt_template: self.config.prompt_template().to_string(),
                estimator: estimator.clone(),
                budget: self.config.budget,
                margin: self.config.margin,
                config_hash: hash.to_string(),
                seed: self.seed(),
                filters: self.config.filters.describe(),
            };
            let m = export_corpus(&instances, &assignment, &opts, out)?;
            log::info!(
                "export: {format}: {} records ({} train, {} test, {} excluded)",
                m.total,
                m.counts.train,
                m.counts.test,
                m.counts.excluded
            );
            written.push(corpus_file_name(format));
            written.push(manifest_file_name(format));
        }
        Ok(written)
    }

    fn write_manifest(&self) -> Result<PipelineManifest> {
        let mut stages = Vec::new();
        for s in Stage::ALL {
            if let Some(stamp) = read_stamp(self.out(), s)? {
                stages.push(stamp);
            }
        }
        let manifest = PipelineManifest {
            seed: self.seed(),
            config_hash: stages.last().map(|s| s.hash.clone()).unwrap_or_default(),
            template_version: TEMPLATE_VERSION.into(),
            stages,
        };
        write_json(&self.out().join("manifest.json"), &manifest)?;
        Ok(manifest)
    }
}
