//! Corpus export: one JSON record per line plus a manifest.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::generate::{render_prompt, TaskInstance};
use super::split::{InstanceSplit, Split, SplitAssignment};
use crate::answer::{Answer, AnswerType};
use crate::error::{Error, Result};
use crate::graph::NodeRef;
use crate::serialize::{Format, GraphText, TEMPLATE_VERSION};
use crate::tasks::TaskKind;
use crate::tokens::TokenEstimator;

/// Version of the corpus record layout.
pub const CORPUS_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub instance_id: String,
    pub sub_task: String,
    pub domain: String,
    pub task: TaskKind,
    pub answer_type: AnswerType,
    #[serde(flatten)]
    pub split: InstanceSplit,
    pub format: Format,
    pub question: String,
    pub prompt: String,
    pub completion: String,
    pub gold: Answer,
    pub query: Vec<NodeRef>,
    /// Node types declared by the domain, for answer parsing.
    pub node_types: Vec<String>,
    pub context_nodes: usize,
    pub context_edges: usize,
    /// Token estimate of the rendered graph alone.
    pub graph_tokens: usize,
    /// Token estimate of the whole prompt, counted as wrapper plus graph.
    pub prompt_tokens: usize,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ExportOptions {
    pub format: Format,
    pub prompt_template: String,
    pub estimator: TokenEstimator,
    pub budget: usize,
    pub margin: usize,
    pub config_hash: String,
    pub seed: u64,
    /// Rejection filters used during generation, recorded in the manifest.
    pub filters: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub records: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
    pub excluded: usize,
}

impl SplitCounts {
    fn add(&mut self, split: Split) {
        match split {
            Split::Train => self.train += 1,
            Split::Test => self.test += 1,
            Split::Excluded => self.excluded += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub schema_version: String,
    pub template_version: String,
    pub format: Format,
    pub config_hash: String,
    pub seed: u64,
    pub budget: usize,
    pub margin: usize,
    pub estimator: String,
    pub prompt_template: String,
    pub filters: Vec<String>,
    pub total: usize,
    pub counts: SplitCounts,
    pub per_sub_task: BTreeMap<String, SplitCounts>,
    pub files: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn corpus_file_name(format: Format) -> String {
    format!("corpus.{}.jsonl", format.name())
}

pub fn manifest_file_name(format: Format) -> String {
    format!("manifest.{}.json", format.name())
}

fn to_record(inst: &TaskInstance, split: InstanceSplit, opts: &ExportOptions) -> CorpusRecord {
    let graph = GraphText::render(&inst.context, opts.format, &opts.estimator);
    let wrapper = render_prompt(&opts.prompt_template, &inst.question, "");
    let prompt_tokens = opts.estimator.estimate(&wrapper) + graph.token_estimate;
    CorpusRecord {
        instance_id: inst.instance_id.clone(),
        sub_task: inst.sub_task.clone(),
        domain: inst.domain.clone(),
        task: inst.task,
        answer_type: inst.answer_type(),
        split,
        format: opts.format,
        question: inst.question.clone(),
        prompt: render_prompt(&opts.prompt_template, &inst.question, &graph.text),
        completion: inst.gold.to_completion(),
        gold: inst.gold.clone(),
        query: inst.query.clone(),
        node_types: inst.context.node_types().map(str::to_string).collect(),
        context_nodes: inst.context.node_count(),
        context_edges: inst.context.edge_count(),
        graph_tokens: graph.token_estimate,
        prompt_tokens,
        config_hash: opts.config_hash.clone(),
        seed: opts.seed,
    }
}

/// Writes `corpus.<format>.jsonl` and `manifest.<format>.json` under `dir`.
/// Records are ordered by instance id. Every record must fit the budget.
pub fn export_corpus(
    instances: &[TaskInstance],
    assignment: &SplitAssignment,
    opts: &ExportOptions,
    dir: &Path,
) -> Result<ExportManifest> {
    let mut order: Vec<&TaskInstance> = instances.iter().collect();
    order.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    let corpus_path = dir.join(corpus_file_name(opts.format));

    let records: Vec<Result<CorpusRecord>> = order
        .par_iter()
        .enumerate()
        .map(|(index, inst)| {
            let split = *assignment.get(&inst.instance_id).ok_or_else(|| Error::Record {
                path: corpus_path.clone(),
                index,
                reason: format!("instance `{}` has no split assignment", inst.instance_id),
            })?;
            let record = to_record(inst, split, opts);
            if record.prompt_tokens + opts.margin > opts.budget {
                return Err(Error::Record {
                    path: corpus_path.clone(),
                    index,
                    reason: format!(
                        "instance `{}` needs {} tokens plus {} margin, over the {} budget",
                        inst.instance_id, record.prompt_tokens, opts.margin, opts.budget
                    ),
                });
            }
            Ok(record)
        })
        .collect();

    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut bytes = Vec::new();
    let mut counts = SplitCounts::default();
    let mut per_sub_task: BTreeMap<String, SplitCounts> = BTreeMap::new();
    for (index, record) in records.into_iter().enumerate() {
        let record = record?;
        counts.add(record.split.split);
        per_sub_task.entry(record.sub_task.clone()).or_default().add(record.split.split);
        serde_json::to_writer(&mut bytes, &record).map_err(|e| Error::Record {
            path: corpus_path.clone(),
            index,
            reason: e.to_string(),
        })?;
        bytes.push(b'\n');
    }
    std::fs::write(&corpus_path, &bytes).map_err(|e| Error::io(&corpus_path, e))?;

    let manifest = ExportManifest {
        schema_version: CORPUS_SCHEMA_VERSION.into(),
        template_version: TEMPLATE_VERSION.into(),
        format: opts.format,
        config_hash: opts.config_hash.clone(),
        seed: opts.seed,
        budget: opts.budget,
        margin: opts.margin,
        estimator: format!("{:?}", opts.estimator),
        prompt_template: opts.prompt_template.clone(),
        filters: opts.filters.clone(),
        total: order.len(),
        counts,
        per_sub_task,
        files: vec![FileDigest {
            path: corpus_file_name(opts.format),
            sha256: sha256_hex(&bytes),
            records: order.len(),
        }],
    };
    write_json(&dir.join(manifest_file_name(opts.format)), &manifest)?;
    Ok(manifest)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Record {
        path: path.to_path_buf(),
        index: 0,
        reason: e.to_string(),
    })
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (index, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Record {
            path: PathBuf::from(path),
            index,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}
