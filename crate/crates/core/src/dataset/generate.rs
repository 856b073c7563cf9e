//! Question–graph–answer instance generation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::roster::{Roster, SubTask};
use crate::answer::{Answer, AnswerType};
use crate::error::{Error, Result};
use crate::graph::{EdgeRecord, HeteroGraph, NodeRef};
use crate::rng::{self, StreamRng};
use crate::sampler::{ego_sample, SampleConfig};
use crate::serialize::{Format, GraphText};
use crate::tasks::{self, TaskKind};
use crate::tokens::{fits_budget, TokenEstimator, DEFAULT_MARGIN};

/// Default instruction wrapper; `{question}` and `{graph}` are filled in.
pub const DEFAULT_PROMPT_TEMPLATE: &str =
    "Answer the question about the graph below.\n\nQuestion: {question}\n\nGraph:\n{graph}\n\nAnswer:";

/// Settings shared by every sub-task of a generation run.
#[derive(Debug, Clone)]
pub struct GenerationConfig {
    pub samples_per_subtask: usize,
    pub sampler: SampleConfig,
    pub estimator: TokenEstimator,
    pub budget: usize,
    pub margin: usize,
    /// Every accepted instance must fit the budget in all of these formats.
    pub formats: Vec<Format>,
    pub prompt_template: String,
    pub filters: FilterConfig,
    /// Attempts allowed per requested instance, on top of a fixed 1000.
    pub attempts_per_instance: usize,
}

impl GenerationConfig {
    pub fn new(samples_per_subtask: usize, sampler: SampleConfig) -> Self {
        GenerationConfig {
            samples_per_subtask,
            sampler,
            estimator: TokenEstimator::default(),
            budget: 4096,
            margin: DEFAULT_MARGIN,
            formats: Format::ALL.to_vec(),
            prompt_template: DEFAULT_PROMPT_TEMPLATE.to_string(),
            filters: FilterConfig::default(),
            attempts_per_instance: 200,
        }
    }
}

/// Rejection filters applied to candidate instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    /// Largest share of empty gold sets in a set-valued sub-task.
    pub max_empty_fraction: f64,
    /// Largest share of any single gold value in a count sub-task.
    pub max_count_value_fraction: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_empty_fraction: 0.25,
            max_count_value_fraction: 0.30,
        }
    }
}

impl FilterConfig {
    /// Human-readable list of the filters, for manifests.
    pub fn describe(&self) -> Vec<String> {
        vec![
            "budget: prompt fits the token budget in every configured format".into(),
            format!(
                "empty-set: at most {:.0}% empty gold answers per set-valued sub-task",
                self.max_empty_fraction * 100.0
            ),
            "balance: yes/no gold labels 1:1 per boolean and link-prediction sub-task".into(),
            format!(
                "count-skew: no gold count value above {:.0}% of a count sub-task",
                self.max_count_value_fraction * 100.0
            ),
            "dedup: a query node tuple is used at most once per sub-task".into(),
            "link-prediction: positive target edges are removed from the context".into(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Nodes the context was sampled around.
    pub seeds: Vec<NodeRef>,
    /// Sampler seed used for this instance's context.
    pub rng_seed: u64,
    pub attempt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub instance_id: String,
    pub sub_task: String,
    pub domain: String,
    pub task: TaskKind,
    pub question: String,
    pub query: Vec<NodeRef>,
    pub context: HeteroGraph,
    pub gold: Answer,
    pub provenance: Provenance,
}

impl TaskInstance {
    pub fn answer_type(&self) -> AnswerType {
        self.gold.answer_type()
    }
}

/// Fills the prompt wrapper.
pub fn render_prompt(template: &str, question: &str, graph: &str) -> String {
    template.replace("{question}", question).replace("{graph}", graph)
}

/// Budget check over every configured format. The prompt wrapper counts as
/// part of the question.
pub fn fits_all_formats(question: &str, context: &HeteroGraph, config: &GenerationConfig) -> bool {
    let wrapped = render_prompt(&config.prompt_template, question, "");
    config.formats.iter().all(|&f| {
        let text = GraphText::render(context, f, &config.estimator);
        fits_budget(&wrapped, &text, config.budget, &config.estimator, config.margin)
    })
}

/// Tracks label quotas while instances are accepted.
struct Quotas<'a> {
    n: usize,
    filters: &'a FilterConfig,
    empty: usize,
    yes: usize,
    no: usize,
    counts: BTreeMap<u64, usize>,
}

impl<'a> Quotas<'a> {
    fn new(n: usize, filters: &'a FilterConfig) -> Self {
        Quotas {
            n,
            filters,
            empty: 0,
            yes: 0,
            no: 0,
            counts: BTreeMap::new(),
        }
    }

    fn admits(&self, gold: &Answer) -> bool {
        match gold {
            Answer::Bool(b) | Answer::LinkLabel(b) => {
                if *b {
                    self.yes < self.n.div_ceil(2)
                } else {
                    self.no < self.n / 2
                }
            }
            Answer::Count(c) => {
                let cap = ((self.filters.max_count_value_fraction * self.n as f64).floor() as usize).max(1);
                self.counts.get(c).copied().unwrap_or(0) < cap
            }
            other if other.is_empty_set() => {
                let cap = (self.filters.max_empty_fraction * self.n as f64).floor() as usize;
                self.empty < cap
            }
            _ => true,
        }
    }

    fn record(&mut self, gold: &Answer) {
        match gold {
            Answer::Bool(b) | Answer::LinkLabel(b) => {
                if *b {
                    self.yes += 1
                } else {
                    self.no += 1
                }
            }
            Answer::Count(c) => *self.counts.entry(*c).or_default() += 1,
            other if other.is_empty_set() => self.empty += 1,
            _ => {}
        }
    }
}

/// Nodes of each type, for uniform draws.
pub struct TypeIndex<'g> {
    by_type: BTreeMap<&'g str, Vec<&'g NodeRef>>,
}

impl<'g> TypeIndex<'g> {
    pub fn new(graph: &'g HeteroGraph) -> Self {
        let mut by_type: BTreeMap<&str, Vec<&NodeRef>> = BTreeMap::new();
        for n in graph.nodes() {
            by_type.entry(n.node_type()).or_default().push(n);
        }
        TypeIndex { by_type }
    }

    fn draw(&self, ty: &str, rng: &mut StreamRng) -> Option<&'g NodeRef> {
        let pool = self.by_type.get(ty)?;
        (!pool.is_empty()).then(|| pool[rng.gen_range(0..pool.len())])
    }
}

fn instance_id(sub_task: &str, index: usize) -> String {
    format!("{sub_task}-{index:04}")
}

fn attempt_budget(config: &GenerationConfig, n: usize) -> usize {
    1_000 + config.attempts_per_instance * n
}

/// Draws the query nodes for one attempt. Two-endpoint tasks take the second
/// node from the first node's sampled neighborhood half of the time and
/// uniformly from the whole graph otherwise, so that reachable and
/// unreachable pairs both occur.
fn draw_query(
    graph: &HeteroGraph,
    types: &TypeIndex<'_>,
    sub_task: &SubTask,
    sampler: &SampleConfig,
    rng: &mut StreamRng,
) -> Result<Option<Vec<NodeRef>>> {
    let Some(u) = types.draw(&sub_task.query_types[0], rng) else {
        return Ok(None);
    };
    if sub_task.query_types.len() == 1 {
        return Ok(Some(vec![u.clone()]));
    }
    let v_type = &sub_task.query_types[1];
    let near = rng.gen_bool(0.5);
    let v = if near {
        let around = ego_sample(graph, std::slice::from_ref(u), sampler)?;
        let pool: Vec<&NodeRef> = around
            .nodes()
            .iter()
            .filter(|n| n.node_type() == v_type && *n != u)
            .collect();
        if pool.is_empty() {
            None
        } else {
            Some(pool[rng.gen_range(0..pool.len())].clone())
        }
    } else {
        None
    };
    let v = match v {
        Some(v) => v,
        None => match types.draw(v_type, rng) {
            Some(v) if v != u => v.clone(),
            _ => return Ok(None),
        },
    };
    Ok(Some(vec![u.clone(), v]))
}

/// Generates `config.samples_per_subtask` instances of a structural sub-task.
pub fn generate_structural_instances(
    graph: &HeteroGraph,
    sub_task: &SubTask,
    config: &GenerationConfig,
    rng_seed: u64,
) -> Result<Vec<TaskInstance>> {
    let n = config.samples_per_subtask;
    if n == 0 {
        return Err(Error::Config("samples per sub-task must be at least 1".into()));
    }
    if sub_task.task == TaskKind::LinkPrediction {
        return Err(Error::Config(format!(
            "`{}` is a link-prediction sub-task",
            sub_task.id
        )));
    }
    sub_task.validate()?;
    let spec = sub_task.spec();
    spec.validate_for(graph)?;
    config.sampler.validate()?;

    let types = TypeIndex::new(graph);
    let mut rng = rng::substream(rng_seed, &["generate", sub_task.id.as_str()]);
    let mut quotas = Quotas::new(n, &config.filters);
    let mut used: BTreeSet<Vec<NodeRef>> = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    let budget = attempt_budget(config, n);
    let mut attempts = 0;

    while out.len() < n && attempts < budget {
        let attempt = attempts;
        attempts += 1;
        let sample_seed = rng::child_seed(rng_seed, &[sub_task.id.as_str(), "context", &attempt.to_string()]);
        let sampler = config.sampler.with_seed(sample_seed);
        let Some(drawn) = draw_query(graph, &types, sub_task, &sampler, &mut rng)? else {
            continue;
        };
        if used.contains(&drawn) {
            continue;
        }
        let context = ego_sample(graph, &drawn, &sampler)?;
        let query: Vec<NodeRef> = if sub_task.task.arity() == 0 { Vec::new() } else { drawn.clone() };
        let gold = tasks::solve(&context, &spec, &query)?;
        if !quotas.admits(&gold) {
            continue;
        }
        let question = sub_task.render_question(&query);
        if !fits_all_formats(&question, &context, config) {
            continue;
        }
        quotas.record(&gold);
        used.insert(drawn.clone());
        out.push(TaskInstance {
            instance_id: instance_id(&sub_task.id, out.len()),
            sub_task: sub_task.id.clone(),
            domain: sub_task.domain.clone(),
            task: sub_task.task,
            question,
            query,
            context,
            gold,
            provenance: Provenance {
                seeds: drawn,
                rng_seed: sample_seed,
                attempt,
            },
        });
    }
    if out.len() < n {
        return Err(Error::GenerationExhausted {
            sub_task: sub_task.id.clone(),
            accepted: out.len(),
            requested: n,
            attempts,
        });
    }
    Ok(out)
}

/// Merged context for a link-prediction triple: the union of the ego graphs
/// around head and tail, induced in `graph`, without the target edge.
pub fn lp_context(
    graph: &HeteroGraph,
    head: &NodeRef,
    tail: &NodeRef,
    edge_type: &str,
    sampler: &SampleConfig,
) -> Result<HeteroGraph> {
    let a = ego_sample(graph, std::slice::from_ref(head), sampler)?;
    let b = ego_sample(graph, std::slice::from_ref(tail), sampler)?;
    let union: BTreeSet<&NodeRef> = a.nodes().iter().chain(b.nodes()).collect();
    let merged = graph.induced(union)?;
    Ok(merged.without_edge(&EdgeRecord::new(head.clone(), tail.clone(), edge_type)?))
}

/// Generates a link-prediction sub-task: half positive, half negative.
pub fn generate_lp_instances(
    graph: &HeteroGraph,
    sub_task: &SubTask,
    config: &GenerationConfig,
    rng_seed: u64,
) -> Result<Vec<TaskInstance>> {
    let n = config.samples_per_subtask;
    if n == 0 {
        return Err(Error::Config("samples per sub-task must be at least 1".into()));
    }
    if sub_task.task != TaskKind::LinkPrediction {
        return Err(Error::Config(format!("`{}` is not a link-prediction sub-task", sub_task.id)));
    }
    sub_task.validate()?;
    let spec = sub_task.spec();
    spec.validate_for(graph)?;
    let edge_type = spec.edge_types.iter().next().unwrap().clone();

    let n_pos = n.div_ceil(2);
    let n_neg = n / 2;
    let available = graph
        .edges()
        .filter(|e| e.edge_type == edge_type)
        .count();
    let pool_pos = available.min(n_pos * 3);
    let triples = tasks::sample_lp_triples(
        graph,
        &edge_type,
        pool_pos,
        n_neg * 3,
        rng::child_seed(rng_seed, &[sub_task.id.as_str(), "triples"]),
    )?;
    let (positives, negatives): (Vec<_>, Vec<_>) = triples.into_iter().partition(|t| t.label);

    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    let mut accept = |pool: Vec<tasks::LpTriple>, want: usize, out: &mut Vec<TaskInstance>| -> Result<usize> {
        let mut got = 0;
        for triple in pool {
            if got == want {
                break;
            }
            let attempt = attempts;
            attempts += 1;
            let sample_seed = rng::child_seed(rng_seed, &[sub_task.id.as_str(), "context", &attempt.to_string()]);
            let sampler = config.sampler.with_seed(sample_seed);
            let context = lp_context(graph, &triple.head, &triple.tail, &edge_type, &sampler)?;
            let query = vec![triple.head.clone(), triple.tail.clone()];
            let question = sub_task.render_question(&query);
            if !fits_all_formats(&question, &context, config) {
                continue;
            }
            out.push(TaskInstance {
                instance_id: String::new(),
                sub_task: sub_task.id.clone(),
                domain: sub_task.domain.clone(),
                task: TaskKind::LinkPrediction,
                question,
                query: query.clone(),
                context,
                gold: Answer::LinkLabel(triple.label),
                provenance: Provenance {
                    seeds: query,
                    rng_seed: sample_seed,
                    attempt,
                },
            });
            got += 1;
        }
        Ok(got)
    };
    let got_pos = accept(positives, n_pos, &mut out)?;
    let got_neg = accept(negatives, n_neg, &mut out)?;
    if got_pos < n_pos || got_neg < n_neg {
        return Err(Error::GenerationExhausted {
            sub_task: sub_task.id.clone(),
            accepted: got_pos + got_neg,
            requested: n,
            attempts,
        });
    }
    // interleave labels deterministically so ids do not reveal the label
    let mut mix_rng = rng::substream(rng_seed, &["lp-order", sub_task.id.as_str()]);
    use rand::seq::SliceRandom;
    out.shuffle(&mut mix_rng);
    for (i, inst) in out.iter_mut().enumerate() {
        inst.instance_id = instance_id(&sub_task.id, i);
    }
    Ok(out)
}

/// Generates every sub-task of `roster` whose domain has a graph in
/// `graphs`, in parallel. Each sub-task draws from its own stream keyed by
/// `(master_seed, sub-task id)`, so output does not depend on scheduling.
pub fn generate_all(
    graphs: &BTreeMap<String, HeteroGraph>,
    roster: &Roster,
    config: &GenerationConfig,
    master_seed: u64,
) -> Result<Vec<TaskInstance>> {
    for st in &roster.sub_tasks {
        if !graphs.contains_key(&st.domain) {
            return Err(Error::Config(format!(
                "sub-task `{}` refers to domain `{}` with no graph",
                st.id, st.domain
            )));
        }
    }
    let batches: Vec<Result<Vec<TaskInstance>>> = roster
        .sub_tasks
        .par_iter()
        .map(|st| {
            let graph = &graphs[&st.domain];
            if st.task == TaskKind::LinkPrediction {
                generate_lp_instances(graph, st, config, master_seed)
            } else {
                generate_structural_instances(graph, st, config, master_seed)
            }
        })
        .collect();
    let mut out = Vec::new();
    for b in batches {
        out.extend(b?);
    }
    Ok(out)
}

pub fn write_instances(path: &Path, instances: &[TaskInstance]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (index, inst) in instances.iter().enumerate() {
        let line = serde_json::to_string(inst).map_err(|e| Error::Record {
            path: path.to_path_buf(),
            index,
            reason: e.to_string(),
        })?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_instances(path: &Path) -> Result<Vec<TaskInstance>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (index, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Record {
            path: path.to_path_buf(),
            index,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}
