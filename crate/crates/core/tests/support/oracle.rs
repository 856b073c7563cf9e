//! Brute-force reference answers for the structural tasks, built only from
//! the raw node and edge lists, and a random graph generator to compare
//! them on.

#![allow(dead_code)]

use std::collections::BTreeSet;

use graphinst::answer::{Answer, Pair, Path};
use graphinst::tasks::{self, TaskKind, TaskSpec};
use graphinst::{HeteroGraph, NodeRef};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const NODE_TYPES: [&str; 3] = ["author", "paper", "venue"];
pub const EDGE_TYPES: [&str; 4] = ["cites", "writes", "published", "related"];

const INF: usize = usize::MAX / 4;

pub struct Sample {
    pub graph: HeteroGraph,
    pub nodes: Vec<NodeRef>,
    pub edges: Vec<(usize, usize, String)>,
}

/// At most 12 nodes and 30 edges over three node types and four edge types.
pub fn random_graph(seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=12);
    let nodes: Vec<NodeRef> = (0..n)
        .map(|i| NodeRef::new(NODE_TYPES[rng.gen_range(0..3)], i as u64 + 1))
        .collect();
    let mut b = HeteroGraph::builder();
    for t in NODE_TYPES {
        b.node_type(t).unwrap();
    }
    for t in EDGE_TYPES {
        b.edge_type(t).unwrap();
    }
    for v in &nodes {
        b.node(v.clone()).unwrap();
    }
    let mut edges = Vec::new();
    if n > 1 {
        for _ in 0..rng.gen_range(0..=30) {
            let a = rng.gen_range(0..n);
            let c = rng.gen_range(0..n);
            let t = EDGE_TYPES[rng.gen_range(0..4)];
            if a == c || edges.iter().any(|(x, y, s)| s == t && ((*x, *y) == (a, c) || (*x, *y) == (c, a))) {
                continue;
            }
            b.edge(nodes[a].clone(), nodes[c].clone(), t).unwrap();
            edges.push((a, c, t.to_string()));
        }
    }
    Sample {
        graph: b.build(),
        nodes,
        edges,
    }
}

impl Sample {
    fn linked(&self, a: usize, b: usize, t: Option<&str>) -> bool {
        self.edges
            .iter()
            .any(|(x, y, s)| ((*x, *y) == (a, b) || (*x, *y) == (b, a)) && t.is_none_or(|t| s == t))
    }

    /// All-pairs hop distances by Floyd-Warshall.
    pub fn distances(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut d = vec![vec![INF; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        for (a, b, _) in &self.edges {
            d[*a][*b] = 1;
            d[*b][*a] = 1;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    fn pair(&self, a: usize, b: usize) -> Pair {
        Pair::new(self.nodes[a].clone(), self.nodes[b].clone())
    }

    fn node_set(&self, ixs: impl IntoIterator<Item = usize>) -> Answer {
        Answer::NodeSet(ixs.into_iter().map(|i| self.nodes[i].clone()).collect())
    }

    /// Every simple path from `u` with at most `max_hops` edges.
    fn simple_paths(&self, u: usize, max_hops: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut stack = vec![vec![u]];
        while let Some(p) = stack.pop() {
            if p.len() > 1 {
                out.push(p.clone());
            }
            if p.len() > max_hops {
                continue;
            }
            let last = *p.last().unwrap();
            for v in 0..self.nodes.len() {
                if !p.contains(&v) && self.linked(last, v, None) {
                    let mut q = p.clone();
                    q.push(v);
                    stack.push(q);
                }
            }
        }
        out
    }

    fn path_set(&self, paths: impl IntoIterator<Item = Vec<usize>>) -> Answer {
        Answer::PathSet(
            paths
                .into_iter()
                .map(|p| Path(p.into_iter().map(|i| self.nodes[i].clone()).collect()))
                .collect(),
        )
    }

    pub fn answer(&self, spec: &TaskSpec, q: &[usize], dist: &[Vec<usize>]) -> Answer {
        let n = self.nodes.len();
        let types: Vec<&str> = spec.edge_types.iter().map(String::as_str).collect();
        let any_type = |a: usize, b: usize| types.iter().any(|t| self.linked(a, b, Some(t)));
        let c = spec.hop_or_count.unwrap_or(0) as usize;
        match spec.task {
            TaskKind::FindNeighbors => self.node_set((0..n).filter(|&v| any_type(q[0], v))),
            TaskKind::NodesSharedNeighbors => self.node_set((0..n).filter(|&v| {
                v != q[0]
                    && types.iter().all(|t| {
                        (0..n).any(|w| self.linked(q[0], w, Some(t)) && self.linked(v, w, Some(t)))
                    })
            })),
            TaskKind::NHopNeighbors => self.node_set(self.within(spec, q[0], dist)),
            TaskKind::FindPairs => Answer::PairSet(
                (0..n).filter(|&v| any_type(q[0], v)).map(|v| self.pair(q[0], v)).collect(),
            ),
            TaskKind::PairsSharedNeighbors => {
                let mut out = BTreeSet::new();
                for a in 0..n {
                    for b in a + 1..n {
                        let shared = (0..n)
                            .filter(|&w| types.iter().any(|t| self.linked(a, w, Some(t)) && self.linked(b, w, Some(t))))
                            .count();
                        if shared == c {
                            out.insert(self.pair(a, b));
                        }
                    }
                }
                Answer::PairSet(out)
            }
            TaskKind::DegreeCount => Answer::Count((0..n).filter(|&v| any_type(q[0], v)).count() as u64),
            TaskKind::NodeCountWithinNHop => Answer::Count(self.within(spec, q[0], dist).len() as u64),
            TaskKind::PathCount => Answer::Count(self.paths_between(q[0], q[1], c).len() as u64),
            TaskKind::LinkedByEdge => Answer::Bool(any_type(q[0], q[1])),
            TaskKind::HasPath => Answer::Bool(dist[q[0]][q[1]] < INF),
            TaskKind::FindPaths => self.path_set(self.paths_between(q[0], q[1], c)),
            TaskKind::ShortestPaths => {
                let d = dist[q[0]][q[1]];
                if d == 0 || d >= INF {
                    self.path_set([])
                } else {
                    self.path_set(self.paths_between(q[0], q[1], d))
                }
            }
            TaskKind::EgoGraph => Answer::EdgeSet(
                self.edges
                    .iter()
                    .filter(|(a, b, _)| dist[q[0]][*a] <= c && dist[q[0]][*b] <= c)
                    .map(|(a, b, _)| self.pair(*a, *b))
                    .collect(),
            ),
            TaskKind::LinkPrediction => unreachable!("no structural answer"),
        }
    }

    fn within(&self, spec: &TaskSpec, u: usize, dist: &[Vec<usize>]) -> Vec<usize> {
        let c = spec.hop_or_count.unwrap_or(0) as usize;
        (0..self.nodes.len())
            .filter(|&v| v != u && dist[u][v] <= c && spec.node_types.contains(self.nodes[v].node_type()))
            .collect()
    }

    fn paths_between(&self, u: usize, v: usize, hops: usize) -> Vec<Vec<usize>> {
        self.simple_paths(u, hops)
            .into_iter()
            .filter(|p| p.len() == hops + 1 && *p.last().unwrap() == v)
            .collect()
    }
}

fn random_subset<'a>(rng: &mut ChaCha8Rng, from: &[&'a str]) -> Vec<&'a str> {
    loop {
        let s: Vec<&str> = from.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        if !s.is_empty() {
            return s;
        }
    }
}

/// A random valid spec for `task`.
pub fn random_spec(rng: &mut ChaCha8Rng, task: TaskKind) -> TaskSpec {
    use TaskKind::*;
    let spec = TaskSpec::new(task);
    match task {
        FindNeighbors | NodesSharedNeighbors | FindPairs | DegreeCount | LinkedByEdge => {
            spec.edges(random_subset(rng, &EDGE_TYPES))
        }
        PairsSharedNeighbors => spec.edges(random_subset(rng, &EDGE_TYPES)).count(rng.gen_range(1..=3)),
        NHopNeighbors | NodeCountWithinNHop => spec
            .node_types(random_subset(rng, &NODE_TYPES))
            .count(rng.gen_range(1..=4)),
        PathCount | FindPaths => spec.count(rng.gen_range(1..=4)),
        EgoGraph => spec.count(rng.gen_range(0..=3)),
        HasPath | ShortestPaths => spec,
        LinkPrediction => spec.edges([*EDGE_TYPES.choose(rng).unwrap()]),
    }
}

/// The thirteen tasks with structural answers.
pub fn structural_tasks() -> Vec<TaskKind> {
    TaskKind::ALL
        .into_iter()
        .filter(|&t| t != TaskKind::LinkPrediction)
        .collect()
}

/// Compares every structural task against the oracle on `graphs` random
/// graphs, over every query node (or ordered node pair). Returns the
/// number of comparisons, or the first disagreement.
pub fn check_oracle_equivalence(graphs: u64) -> Result<usize, String> {
    let mut compared = 0;
    for seed in 0..graphs {
        let sample = random_graph(seed);
        let dist = sample.distances();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let n = sample.nodes.len();
        for task in structural_tasks() {
            let spec = random_spec(&mut rng, task);
            let queries: Vec<Vec<usize>> = match task.arity() {
                0 => vec![vec![]],
                1 => (0..n).map(|u| vec![u]).collect(),
                _ => (0..n).flat_map(|u| (0..n).map(move |v| vec![u, v])).collect(),
            };
            for q in queries {
                let nodes: Vec<NodeRef> = q.iter().map(|&i| sample.nodes[i].clone()).collect();
                let got = tasks::solve(&sample.graph, &spec, &nodes)
                    .map_err(|e| format!("graph {seed}: {task} on {nodes:?} failed: {e}"))?;
                let want = sample.answer(&spec, &q, &dist);
                if got != want {
                    return Err(format!(
                        "graph {seed}: {task} {spec:?} on {nodes:?}: got {got:?}, oracle {want:?}"
                    ));
                }
                compared += 1;
            }
        }
    }
    Ok(compared)
}
