//! Exact algorithms for the fourteen benchmark tasks.
//!
//! Every structural task maps a context graph, a [`TaskSpec`] and zero to two
//! query nodes to an [`Answer`]. Distances and paths are always measured in
//! the graph passed in, which for generated instances is the sampled context.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::answer::{Answer, AnswerType, Pair, Path};
use crate::error::{Error, Result};
use crate::graph::{HeteroGraph, NodeRef, UNREACHABLE};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    FindNeighbors,
    NodesSharedNeighbors,
    NHopNeighbors,
    FindPairs,
    PairsSharedNeighbors,
    DegreeCount,
    NodeCountWithinNHop,
    PathCount,
    LinkedByEdge,
    HasPath,
    FindPaths,
    ShortestPaths,
    EgoGraph,
    LinkPrediction,
}

/// Which [`TaskSpec`] fields a task reads.
struct Needs {
    edge_types: bool,
    node_types: bool,
    count: bool,
}

impl TaskKind {
    pub const ALL: [TaskKind; 14] = [
        TaskKind::FindNeighbors,
        TaskKind::NodesSharedNeighbors,
        TaskKind::NHopNeighbors,
        TaskKind::FindPairs,
        TaskKind::PairsSharedNeighbors,
        TaskKind::DegreeCount,
        TaskKind::NodeCountWithinNHop,
        TaskKind::PathCount,
        TaskKind::LinkedByEdge,
        TaskKind::HasPath,
        TaskKind::FindPaths,
        TaskKind::ShortestPaths,
        TaskKind::EgoGraph,
        TaskKind::LinkPrediction,
    ];

    pub fn answer_type(self) -> AnswerType {
        use TaskKind::*;
        match self {
            FindNeighbors | NodesSharedNeighbors | NHopNeighbors => AnswerType::Node,
            FindPairs | PairsSharedNeighbors => AnswerType::Pair,
            DegreeCount | NodeCountWithinNHop | PathCount => AnswerType::Count,
            LinkedByEdge | HasPath => AnswerType::Bool,
            FindPaths | ShortestPaths => AnswerType::Path,
            EgoGraph => AnswerType::Graph,
            LinkPrediction => AnswerType::LinkPrediction,
        }
    }

    /// Number of query nodes named in the question.
    pub fn arity(self) -> usize {
        use TaskKind::*;
        match self {
            PairsSharedNeighbors => 0,
            PathCount | LinkedByEdge | HasPath | FindPaths | ShortestPaths | LinkPrediction => 2,
            _ => 1,
        }
    }

    fn needs(self) -> Needs {
        use TaskKind::*;
        let (edge_types, node_types, count) = match self {
            FindNeighbors | NodesSharedNeighbors | FindPairs | DegreeCount | LinkedByEdge
            | LinkPrediction => (true, false, false),
            PairsSharedNeighbors => (true, false, true),
            NHopNeighbors | NodeCountWithinNHop => (false, true, true),
            PathCount | FindPaths | EgoGraph => (false, false, true),
            HasPath | ShortestPaths => (false, false, false),
        };
        Needs {
            edge_types,
            node_types,
            count,
        }
    }

    pub fn name(self) -> &'static str {
        use TaskKind::*;
        match self {
            FindNeighbors => "find_neighbors",
            NodesSharedNeighbors => "nodes_shared_neighbors",
            NHopNeighbors => "n_hop_neighbors",
            FindPairs => "find_pairs",
            PairsSharedNeighbors => "pairs_shared_neighbors",
            DegreeCount => "degree_count",
            NodeCountWithinNHop => "node_count_within_n_hop",
            PathCount => "path_count",
            LinkedByEdge => "linked_by_edge",
            HasPath => "has_path",
            FindPaths => "find_paths",
            ShortestPaths => "shortest_paths",
            EgoGraph => "ego_graph",
            LinkPrediction => "link_prediction",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A task specialised to edge types, node types and a count.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub task: TaskKind,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub edge_types: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub node_types: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "c")]
    pub hop_or_count: Option<u32>,
}

impl TaskSpec {
    pub fn new(task: TaskKind) -> Self {
        TaskSpec {
            task,
            edge_types: BTreeSet::new(),
            node_types: BTreeSet::new(),
            hop_or_count: None,
        }
    }

    pub fn edges<S: Into<String>>(mut self, types: impl IntoIterator<Item = S>) -> Self {
        self.edge_types = types.into_iter().map(Into::into).collect();
        self
    }

    pub fn node_types<S: Into<String>>(mut self, types: impl IntoIterator<Item = S>) -> Self {
        self.node_types = types.into_iter().map(Into::into).collect();
        self
    }

    pub fn count(mut self, c: u32) -> Self {
        self.hop_or_count = Some(c);
        self
    }

    /// Checks that exactly the fields the task reads are present. The count
    /// must be at least 1, except that an ego graph of radius 0 is allowed.
    pub fn validate(&self) -> Result<()> {
        let needs = self.task.needs();
        let check = |needed: bool, present: bool, what: &str| -> Result<()> {
            match (needed, present) {
                (true, false) => Err(Error::spec(self.task, format!("{what} required"))),
                (false, true) => Err(Error::spec(self.task, format!("{what} not used by this task"))),
                _ => Ok(()),
            }
        };
        check(needs.edge_types, !self.edge_types.is_empty(), "edge types")?;
        check(needs.node_types, !self.node_types.is_empty(), "node types")?;
        check(needs.count, self.hop_or_count.is_some(), "count")?;
        if self.task == TaskKind::LinkPrediction && self.edge_types.len() != 1 {
            return Err(Error::spec(self.task, "exactly one edge type"));
        }
        if let Some(0) = self.hop_or_count {
            if self.task != TaskKind::EgoGraph {
                return Err(Error::spec(self.task, "count must be at least 1"));
            }
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus type membership in `graph`.
    pub fn validate_for(&self, graph: &HeteroGraph) -> Result<()> {
        self.validate()?;
        for t in &self.edge_types {
            if !graph.has_edge_type(t) {
                return Err(Error::UnknownEdgeType(t.clone()));
            }
        }
        for t in &self.node_types {
            if !graph.has_node_type(t) {
                return Err(Error::UnknownNodeType(t.clone()));
            }
        }
        Ok(())
    }

    fn expect(&self, graph: &HeteroGraph, task: TaskKind) -> Result<()> {
        if self.task != task {
            return Err(Error::spec(task, format!("given a {} spec", self.task)));
        }
        self.validate_for(graph)
    }

    fn c(&self) -> u32 {
        self.hop_or_count.unwrap_or(0)
    }

    fn edge_type_list(&self) -> Vec<&str> {
        self.edge_types.iter().map(String::as_str).collect()
    }
}

/// Dispatches to the task's algorithm. `query` must hold
/// [`TaskKind::arity`] nodes. Link prediction has no structural answer and
/// is rejected here; its labels come from [`sample_lp_triples`].
pub fn solve(graph: &HeteroGraph, spec: &TaskSpec, query: &[NodeRef]) -> Result<Answer> {
    if query.len() != spec.task.arity() {
        return Err(Error::spec(
            spec.task,
            format!("expects {} query nodes, got {}", spec.task.arity(), query.len()),
        ));
    }
    use TaskKind::*;
    match spec.task {
        FindNeighbors => find_neighbors(graph, spec, &query[0]),
        NodesSharedNeighbors => nodes_shared_neighbors(graph, spec, &query[0]),
        NHopNeighbors => n_hop_neighbors(graph, spec, &query[0]),
        FindPairs => find_pairs(graph, spec, &query[0]),
        PairsSharedNeighbors => pairs_shared_neighbors(graph, spec),
        DegreeCount => degree_count(graph, spec, &query[0]),
        NodeCountWithinNHop => node_count_within_n_hop(graph, spec, &query[0]),
        PathCount => path_count(graph, spec, &query[0], &query[1]),
        LinkedByEdge => linked_by_edge(graph, spec, &query[0], &query[1]),
        HasPath => has_path(graph, &query[0], &query[1]),
        FindPaths => find_paths(graph, spec, &query[0], &query[1]),
        ShortestPaths => shortest_paths(graph, &query[0], &query[1]),
        EgoGraph => ego_graph_answer(graph, spec, &query[0]),
        LinkPrediction => Err(Error::spec(
            LinkPrediction,
            "labels come from sampled triples, not from the context",
        )),
    }
}

fn node_set(graph: &HeteroGraph, ixs: impl IntoIterator<Item = u32>) -> BTreeSet<NodeRef> {
    ixs.into_iter().map(|i| graph.node(i).clone()).collect()
}

pub fn find_neighbors(graph: &HeteroGraph, spec: &TaskSpec, u: &NodeRef) -> Result<Answer> {
    spec.expect(graph, TaskKind::FindNeighbors)?;
    let ui = graph.require(u)?;
    let mask = graph.type_mask(&spec.edge_type_list())?;
    Ok(Answer::NodeSet(node_set(graph, graph.typed_neighbors(ui, &mask))))
}

/// Nodes `v != u` that, for every listed type, share some neighbor with `u`
/// over that type.
pub fn nodes_shared_neighbors(graph: &HeteroGraph, spec: &TaskSpec, u: &NodeRef) -> Result<Answer> {
    spec.expect(graph, TaskKind::NodesSharedNeighbors)?;
    let ui = graph.require(u)?;
    let mut result: Option<BTreeSet<u32>> = None;
    for t in &spec.edge_types {
        let mask = graph.type_mask(&[t])?;
        let mut reach = BTreeSet::new();
        for w in graph.typed_neighbors(ui, &mask) {
            reach.extend(graph.typed_neighbors(w, &mask).filter(|&v| v != ui));
        }
        result = Some(match result {
            None => reach,
            Some(prev) => prev.intersection(&reach).copied().collect(),
        });
    }
    Ok(Answer::NodeSet(node_set(graph, result.unwrap_or_default())))
}

fn within_hops(graph: &HeteroGraph, spec: &TaskSpec, ui: u32) -> BTreeSet<NodeRef> {
    let dist = graph.bfs(ui);
    let c = spec.c();
    (0..graph.node_count() as u32)
        .filter(|&v| v != ui && dist[v as usize] != UNREACHABLE && dist[v as usize] <= c)
        .filter(|&v| spec.node_types.contains(graph.node(v).node_type()))
        .map(|v| graph.node(v).clone())
        .collect()
}

/// Nodes of the listed types within `c` hops of `u`, excluding `u`.
pub fn n_hop_neighbors(graph: &HeteroGraph, spec: &TaskSpec, u: &NodeRef) -> Result<Answer> {
    spec.expect(graph, TaskKind::NHopNeighbors)?;
    let ui = graph.require(u)?;
    Ok(Answer::NodeSet(within_hops(graph, spec, ui)))
}

/// Edges of the listed types incident to `u`, as unordered pairs.
pub fn find_pairs(graph: &HeteroGraph, spec: &TaskSpec, u: &NodeRef) -> Result<Answer> {
    spec.expect(graph, TaskKind::FindPairs)?;
    let ui = graph.require(u)?;
    let mask = graph.type_mask(&spec.edge_type_list())?;
    Ok(Answer::PairSet(
        graph
            .typed_neighbors(ui, &mask)
            .map(|v| Pair::new(u.clone(), graph.node(v).clone()))
            .collect(),
    ))
}

/// Pairs whose common neighborhood over the listed types has exactly `c`
/// nodes. A node `w` is common when both endpoints reach it over the same
/// listed type.
pub fn pairs_shared_neighbors(graph: &HeteroGraph, spec: &TaskSpec) -> Result<Answer> {
    spec.expect(graph, TaskKind::PairsSharedNeighbors)?;
    let types: Vec<u32> = spec
        .edge_types
        .iter()
        .filter_map(|t| graph.edge_type_ix(t))
        .collect();
    let mut shared: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    let mut by_type: Vec<u32> = Vec::new();
    let mut pairs_here: BTreeSet<(u32, u32)> = BTreeSet::new();
    for w in 0..graph.node_count() as u32 {
        pairs_here.clear();
        for &t in &types {
            by_type.clear();
            by_type.extend(graph.adj(w).iter().filter(|&&(_, et)| et == t).map(|&(v, _)| v));
            for (i, &a) in by_type.iter().enumerate() {
                for &b in &by_type[i + 1..] {
                    pairs_here.insert((a, b));
                }
            }
        }
        for &p in &pairs_here {
            *shared.entry(p).or_default() += 1;
        }
    }
    let c = spec.c();
    Ok(Answer::PairSet(
        shared
            .into_iter()
            .filter(|&(_, n)| n == c)
            .map(|((a, b), _)| Pair::new(graph.node(a).clone(), graph.node(b).clone()))
            .collect(),
    ))
}

pub fn degree_count(graph: &HeteroGraph, spec: &TaskSpec, u: &NodeRef) -> Result<Answer> {
    spec.expect(graph, TaskKind::DegreeCount)?;
    let ui = graph.require(u)?;
    let mask = graph.type_mask(&spec.edge_type_list())?;
    Ok(Answer::Count(graph.typed_neighbors(ui, &mask).count() as u64))
}

pub fn node_count_within_n_hop(graph: &HeteroGraph, spec: &TaskSpec, u: &NodeRef) -> Result<Answer> {
    spec.expect(graph, TaskKind::NodeCountWithinNHop)?;
    let ui = graph.require(u)?;
    Ok(Answer::Count(within_hops(graph, spec, ui).len() as u64))
}

/// Depth-first enumeration of simple paths from `s` to `t` with exactly
/// `hops` edges. `visit` sees each complete path.
fn for_each_simple_path(graph: &HeteroGraph, s: u32, t: u32, hops: u32, mut visit: impl FnMut(&[u32])) {
    if s == t || hops == 0 {
        return;
    }
    let to_target = graph.bfs(t);
    if to_target[s as usize] > hops {
        return;
    }
    let mut on_path = vec![false; graph.node_count()];
    let mut path = vec![s];
    on_path[s as usize] = true;

    fn step(
        graph: &HeteroGraph,
        t: u32,
        remaining: u32,
        to_target: &[u32],
        on_path: &mut [bool],
        path: &mut Vec<u32>,
        visit: &mut dyn FnMut(&[u32]),
    ) {
        let x = *path.last().unwrap();
        for y in graph.any_neighbors(x) {
            if on_path[y as usize] {
                continue;
            }
            if y == t {
                if remaining == 1 {
                    path.push(y);
                    visit(path);
                    path.pop();
                }
                continue;
            }
            if remaining <= 1 || to_target[y as usize] > remaining - 1 {
                continue;
            }
            on_path[y as usize] = true;
            path.push(y);
            step(graph, t, remaining - 1, to_target, on_path, path, visit);
            path.pop();
            on_path[y as usize] = false;
        }
    }
    step(graph, t, hops, &to_target, &mut on_path, &mut path, &mut visit);
}

/// Number of simple `u`–`v` paths with exactly `c` hops, any edge types.
pub fn path_count(graph: &HeteroGraph, spec: &TaskSpec, u: &NodeRef, v: &NodeRef) -> Result<Answer> {
    spec.expect(graph, TaskKind::PathCount)?;
    let (ui, vi) = (graph.require(u)?, graph.require(v)?);
    let mut count = 0u64;
    for_each_simple_path(graph, ui, vi, spec.c(), |_| count += 1);
    Ok(Answer::Count(count))
}

pub fn linked_by_edge(graph: &HeteroGraph, spec: &TaskSpec, u: &NodeRef, v: &NodeRef) -> Result<Answer> {
    spec.expect(graph, TaskKind::LinkedByEdge)?;
    graph.require(u)?;
    graph.require(v)?;
    Ok(Answer::Bool(
        spec.edge_types.iter().any(|t| graph.has_edge(u, v, t)),
    ))
}

/// True when `v` is reachable from `u`; `has_path(u, u)` is true.
pub fn has_path(graph: &HeteroGraph, u: &NodeRef, v: &NodeRef) -> Result<Answer> {
    Ok(Answer::Bool(graph.distance(u, v)?.is_some()))
}

fn to_path(graph: &HeteroGraph, ixs: &[u32]) -> Path {
    Path(ixs.iter().map(|&i| graph.node(i).clone()).collect())
}

/// All simple `u`–`v` paths with exactly `c` hops.
pub fn find_paths(graph: &HeteroGraph, spec: &TaskSpec, u: &NodeRef, v: &NodeRef) -> Result<Answer> {
    spec.expect(graph, TaskKind::FindPaths)?;
    let (ui, vi) = (graph.require(u)?, graph.require(v)?);
    let mut paths = BTreeSet::new();
    for_each_simple_path(graph, ui, vi, spec.c(), |p| {
        paths.insert(to_path(graph, p));
    });
    Ok(Answer::PathSet(paths))
}

/// Every path of minimum hop length between `u` and `v`. Empty when `v` is
/// unreachable or `u == v`.
pub fn shortest_paths(graph: &HeteroGraph, u: &NodeRef, v: &NodeRef) -> Result<Answer> {
    let (ui, vi) = (graph.require(u)?, graph.require(v)?);
    let from_u = graph.bfs(ui);
    let d = from_u[vi as usize];
    let mut paths = BTreeSet::new();
    if ui == vi || d == UNREACHABLE {
        return Ok(Answer::PathSet(paths));
    }
    let to_v = graph.bfs(vi);
    let mut stack = vec![ui];
    fn walk(
        graph: &HeteroGraph,
        d: u32,
        from_u: &[u32],
        to_v: &[u32],
        stack: &mut Vec<u32>,
        out: &mut BTreeSet<Path>,
    ) {
        let x = *stack.last().unwrap();
        if to_v[x as usize] == 0 {
            out.insert(to_path(graph, stack));
            return;
        }
        for y in graph.any_neighbors(x) {
            if from_u[y as usize] == from_u[x as usize] + 1 && from_u[y as usize] + to_v[y as usize] == d {
                stack.push(y);
                walk(graph, d, from_u, to_v, stack, out);
                stack.pop();
            }
        }
    }
    walk(graph, d, &from_u, &to_v, &mut stack, &mut paths);
    Ok(Answer::PathSet(paths))
}

/// Edges whose endpoints are both within `c` hops of `u`.
pub fn ego_graph_answer(graph: &HeteroGraph, spec: &TaskSpec, u: &NodeRef) -> Result<Answer> {
    spec.expect(graph, TaskKind::EgoGraph)?;
    let ui = graph.require(u)?;
    let dist = graph.bfs(ui);
    let c = spec.c();
    let inside = |i: u32| dist[i as usize] != UNREACHABLE && dist[i as usize] <= c;
    let mut edges = BTreeSet::new();
    for a in 0..graph.node_count() as u32 {
        if !inside(a) {
            continue;
        }
        for b in graph.any_neighbors(a) {
            if b > a && inside(b) {
                edges.insert(Pair::new(graph.node(a).clone(), graph.node(b).clone()));
            }
        }
    }
    Ok(Answer::EdgeSet(edges))
}

/// A labelled link-prediction triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpTriple {
    pub head: NodeRef,
    pub edge_type: String,
    pub tail: NodeRef,
    pub label: bool,
}

/// Draws `n_pos` existing edges of `edge_type` (label yes) and `n_neg`
/// non-adjacent node pairs (label no). Negative endpoints follow the node
/// type signature of a randomly drawn positive edge, so negatives look like
/// plausible edges of that type.
pub fn sample_lp_triples(
    graph: &HeteroGraph,
    edge_type: &str,
    n_pos: usize,
    n_neg: usize,
    rng_seed: u64,
) -> Result<Vec<LpTriple>> {
    let t = graph
        .edge_type_ix(edge_type)
        .ok_or_else(|| Error::UnknownEdgeType(edge_type.to_string()))?;
    let mut typed_edges: Vec<(u32, u32)> = Vec::new();
    for u in 0..graph.node_count() as u32 {
        for &(v, et) in graph.adj(u) {
            if et == t && v > u {
                typed_edges.push((u, v));
            }
        }
    }
    if typed_edges.len() < n_pos || (typed_edges.is_empty() && n_neg > 0) {
        return Err(Error::InsufficientPositives {
            edge_type: edge_type.to_string(),
            available: typed_edges.len(),
            requested: n_pos,
        });
    }

    let mut out = Vec::with_capacity(n_pos + n_neg);
    let mut pos_rng = rng::substream(rng_seed, &["lp-positive", edge_type]);
    for i in index::sample(&mut pos_rng, typed_edges.len(), n_pos) {
        let (u, v) = typed_edges[i];
        out.push(LpTriple {
            head: graph.node(u).clone(),
            edge_type: edge_type.to_string(),
            tail: graph.node(v).clone(),
            label: true,
        });
    }

    let mut by_type: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for i in 0..graph.node_count() as u32 {
        by_type.entry(graph.node(i).node_type()).or_default().push(i);
    }
    let mut neg_rng = rng::substream(rng_seed, &["lp-negative", edge_type]);
    let mut chosen: BTreeSet<(u32, u32)> = BTreeSet::new();
    let max_attempts = 1_000 + 50 * n_neg;
    let mut attempts = 0;
    while chosen.len() < n_neg && attempts < max_attempts {
        attempts += 1;
        let (pu, pv) = typed_edges[neg_rng.gen_range(0..typed_edges.len())];
        let pool_a = &by_type[graph.node(pu).node_type()];
        let pool_b = &by_type[graph.node(pv).node_type()];
        let a = pool_a[neg_rng.gen_range(0..pool_a.len())];
        let b = pool_b[neg_rng.gen_range(0..pool_b.len())];
        if a == b {
            continue;
        }
        let (a, b) = (a.min(b), a.max(b));
        if graph.adj(a).binary_search(&(b, t)).is_ok() || !chosen.insert((a, b)) {
            continue;
        }
        out.push(LpTriple {
            head: graph.node(a).clone(),
            edge_type: edge_type.to_string(),
            tail: graph.node(b).clone(),
            label: false,
        });
    }
    if chosen.len() < n_neg {
        return Err(Error::NegativeSamplingExhausted {
            edge_type: edge_type.to_string(),
            requested: n_neg,
            found: chosen.len(),
        });
    }
    Ok(out)
}
