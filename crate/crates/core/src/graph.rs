//! Heterogeneous graph model.
//!
//! A [`HeteroGraph`] is an undirected, simple, typed multigraph: at most one
//! edge per unordered node pair and edge type, no self-loops. Nodes are
//! [`NodeRef`]s (`product11`), kept sorted so that every listing the graph
//! produces is deterministic. The graph is immutable once built; use a
//! [`GraphBuilder`] to construct one.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const UNREACHABLE: u32 = u32::MAX;

/// A de-identified node: its type followed by a numeric id, rendered with no
/// separator (`brand1`).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    node_type: Arc<str>,
    local_id: u64,
}

impl NodeRef {
    pub fn new(node_type: impl Into<Arc<str>>, local_id: u64) -> Self {
        NodeRef {
            node_type: node_type.into(),
            local_id,
        }
    }

    pub fn node_type(&self) -> &str {
        &self.node_type
    }

    pub fn local_id(&self) -> u64 {
        self.local_id
    }

    pub(crate) fn type_arc(&self) -> &Arc<str> {
        &self.node_type
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.node_type, self.local_id)
    }
}

impl fmt::Debug for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for NodeRef {
    type Err = Error;

    /// Splits a rendered name into its type prefix and trailing digits.
    fn from_str(name: &str) -> Result<Self> {
        let digits = name.len() - name.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        let (ty, id) = name.split_at(name.len() - digits);
        if digits == 0 || !is_node_type_name(ty) {
            return Err(Error::InvalidIdentifier(name.to_string()));
        }
        let local_id = id
            .parse()
            .map_err(|_| Error::InvalidIdentifier(name.to_string()))?;
        Ok(NodeRef::new(ty, local_id))
    }
}

impl Serialize for NodeRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Node type names must not end in a digit, otherwise `NodeRef` names would
/// be ambiguous.
pub fn is_node_type_name(s: &str) -> bool {
    is_edge_type_name(s) && !s.ends_with(|c: char| c.is_ascii_digit())
}

pub fn is_edge_type_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// An undirected typed edge, stored with `u < v`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: NodeRef,
    pub v: NodeRef,
    pub edge_type: String,
}

impl EdgeRecord {
    pub fn new(a: NodeRef, b: NodeRef, edge_type: impl Into<String>) -> Result<Self> {
        if a == b {
            return Err(Error::SelfLoop(a.to_string()));
        }
        let (u, v) = if a < b { (a, b) } else { (b, a) };
        Ok(EdgeRecord {
            u,
            v,
            edge_type: edge_type.into(),
        })
    }
}

/// Collects nodes and edges, then freezes them into a [`HeteroGraph`].
#[derive(Default, Clone, Debug)]
pub struct GraphBuilder {
    node_types: BTreeSet<Arc<str>>,
    edge_types: BTreeSet<Arc<str>>,
    nodes: BTreeSet<NodeRef>,
    edges: BTreeSet<(NodeRef, NodeRef, Arc<str>)>,
    raw_ids: Option<BTreeMap<NodeRef, String>>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_type(&mut self, name: &str) -> Result<&mut Self> {
        if !is_node_type_name(name) {
            return Err(Error::InvalidIdentifier(name.to_string()));
        }
        self.node_types.insert(name.into());
        Ok(self)
    }

    pub fn edge_type(&mut self, name: &str) -> Result<&mut Self> {
        if !is_edge_type_name(name) {
            return Err(Error::InvalidIdentifier(name.to_string()));
        }
        self.edge_types.insert(name.into());
        Ok(self)
    }

    pub fn node(&mut self, node: NodeRef) -> Result<&mut Self> {
        let ty = self
            .node_types
            .get(node.node_type())
            .ok_or_else(|| Error::UnknownNodeType(node.node_type().to_string()))?
            .clone();
        // share the declared type string
        self.nodes.insert(NodeRef::new(ty, node.local_id));
        Ok(self)
    }

    /// Adds an edge, inserting its endpoints if needed. Re-adding an
    /// existing edge (in either orientation) is a no-op.
    pub fn edge(&mut self, a: NodeRef, b: NodeRef, edge_type: &str) -> Result<&mut Self> {
        let ty = self
            .edge_types
            .get(edge_type)
            .ok_or_else(|| Error::UnknownEdgeType(edge_type.to_string()))?
            .clone();
        if a == b {
            return Err(Error::SelfLoop(a.to_string()));
        }
        self.node(a.clone())?;
        self.node(b.clone())?;
        let (u, v) = if a < b { (a, b) } else { (b, a) };
        self.edges.insert((u, v, ty));
        Ok(self)
    }

    pub(crate) fn raw_id(&mut self, node: NodeRef, raw: String) {
        self.raw_ids.get_or_insert_with(BTreeMap::new).insert(node, raw);
    }

    pub fn build(self) -> HeteroGraph {
        let node_types: Vec<Arc<str>> = self.node_types.into_iter().collect();
        let edge_types: Vec<Arc<str>> = self.edge_types.into_iter().collect();
        let nodes: Vec<NodeRef> = self.nodes.into_iter().collect();
        let index: HashMap<NodeRef, u32> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        let type_ix: HashMap<&str, u32> = edge_types
            .iter()
            .enumerate()
            .map(|(i, t)| (&**t, i as u32))
            .collect();
        let mut adj = vec![Vec::new(); nodes.len()];
        for (u, v, t) in &self.edges {
            let (ui, vi, ti) = (index[u], index[v], type_ix[&**t]);
            adj[ui as usize].push((vi, ti));
            adj[vi as usize].push((ui, ti));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let raw_ids = self
            .raw_ids
            .map(|raw| nodes.iter().map(|n| raw.get(n).cloned().unwrap_or_default()).collect());
        HeteroGraph {
            node_types,
            edge_types,
            nodes,
            index,
            adj,
            edge_count: self.edges.len(),
            raw_ids,
        }
    }
}

/// Immutable heterogeneous graph. Node indices follow the sorted order of
/// [`NodeRef`]s, and every adjacency list is sorted by `(neighbor, edge type)`.
#[derive(Clone, PartialEq, Eq)]
pub struct HeteroGraph {
    node_types: Vec<Arc<str>>,
    edge_types: Vec<Arc<str>>,
    nodes: Vec<NodeRef>,
    index: HashMap<NodeRef, u32>,
    adj: Vec<Vec<(u32, u32)>>,
    edge_count: usize,
    raw_ids: Option<Vec<String>>,
}

impl fmt::Debug for HeteroGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HeteroGraph")
            .field("nodes", &self.nodes)
            .field("edges", &self.edges().collect::<Vec<_>>())
            .finish()
    }
}

impl HeteroGraph {
    pub fn builder() -> GraphBuilder {
        GraphBuilder::new()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn nodes(&self) -> &[NodeRef] {
        &self.nodes
    }

    pub fn node_types(&self) -> impl Iterator<Item = &str> + '_ {
        self.node_types.iter().map(|t| &**t)
    }

    pub fn edge_types(&self) -> impl Iterator<Item = &str> + '_ {
        self.edge_types.iter().map(|t| &**t)
    }

    pub fn has_node_type(&self, name: &str) -> bool {
        self.node_types.iter().any(|t| &**t == name)
    }

    pub fn has_edge_type(&self, name: &str) -> bool {
        self.edge_type_ix(name).is_some()
    }

    pub fn contains(&self, node: &NodeRef) -> bool {
        self.index.contains_key(node)
    }

    /// The raw source identifier of `node`, for graphs that came straight
    /// out of ingestion.
    pub fn raw_id(&self, node: &NodeRef) -> Option<&str> {
        let ix = self.ix(node)?;
        self.raw_ids.as_ref().map(|r| r[ix as usize].as_str())
    }

    /// All edges in canonical `(u, v, edge_type)` order.
    pub fn edges(&self) -> impl Iterator<Item = EdgeRecord> + '_ {
        self.adj.iter().enumerate().flat_map(move |(u, list)| {
            list.iter()
                .filter(move |&&(v, _)| v as usize > u)
                .map(move |&(v, t)| EdgeRecord {
                    u: self.nodes[u].clone(),
                    v: self.nodes[v as usize].clone(),
                    edge_type: self.edge_types[t as usize].to_string(),
                })
        })
    }

    pub fn has_edge(&self, a: &NodeRef, b: &NodeRef, edge_type: &str) -> bool {
        match (self.ix(a), self.ix(b), self.edge_type_ix(edge_type)) {
            (Some(a), Some(b), Some(t)) => self.adj[a as usize].binary_search(&(b, t)).is_ok(),
            _ => false,
        }
    }

    /// Neighbors of `u` reachable over any of `edge_types`, sorted and
    /// deduplicated.
    pub fn neighbors<S: AsRef<str>>(&self, u: &NodeRef, edge_types: &[S]) -> Result<Vec<NodeRef>> {
        let ui = self.require(u)?;
        let mask = self.type_mask(edge_types)?;
        Ok(self
            .typed_neighbors(ui, &mask)
            .map(|v| self.nodes[v as usize].clone())
            .collect())
    }

    /// Hop distance ignoring edge types; `None` when unreachable.
    pub fn distance(&self, u: &NodeRef, v: &NodeRef) -> Result<Option<usize>> {
        let ui = self.require(u)?;
        let vi = self.require(v)?;
        let d = self.bfs(ui)[vi as usize];
        Ok((d != UNREACHABLE).then_some(d as usize))
    }

    /// `u`'s adjacency grouped by edge type.
    pub fn adjacency(&self, u: &NodeRef) -> Result<BTreeMap<&str, Vec<&NodeRef>>> {
        let ui = self.require(u)?;
        let mut out: BTreeMap<&str, Vec<&NodeRef>> = BTreeMap::new();
        for &(v, t) in &self.adj[ui as usize] {
            out.entry(&*self.edge_types[t as usize])
                .or_default()
                .push(&self.nodes[v as usize]);
        }
        Ok(out)
    }

    pub fn degree(&self, u: &NodeRef) -> Result<usize> {
        Ok(self.adj[self.require(u)? as usize].len())
    }

    /// Subgraph induced on `keep`, with the parent's type declarations.
    pub fn induced<'a>(&self, keep: impl IntoIterator<Item = &'a NodeRef>) -> Result<HeteroGraph> {
        let mut ixs = Vec::new();
        for n in keep {
            ixs.push(self.require(n)?);
        }
        Ok(self.induced_ix(&ixs))
    }

    /// A copy of the graph with one edge removed (if present).
    pub fn without_edge(&self, edge: &EdgeRecord) -> HeteroGraph {
        let mut b = self.empty_builder();
        for n in &self.nodes {
            b.nodes.insert(n.clone());
        }
        for e in self.edges() {
            if &e != edge {
                b.edges.insert((e.u, e.v, e.edge_type.as_str().into()));
            }
        }
        b.build()
    }

    // ---- index-level access used by the samplers and task algorithms ----

    pub(crate) fn ix(&self, node: &NodeRef) -> Option<u32> {
        self.index.get(node).copied()
    }

    pub(crate) fn require(&self, node: &NodeRef) -> Result<u32> {
        self.ix(node).ok_or_else(|| Error::UnknownNode(node.to_string()))
    }

    pub(crate) fn node(&self, ix: u32) -> &NodeRef {
        &self.nodes[ix as usize]
    }

    pub(crate) fn adj(&self, ix: u32) -> &[(u32, u32)] {
        &self.adj[ix as usize]
    }

    pub(crate) fn edge_type_ix(&self, name: &str) -> Option<u32> {
        self.edge_types
            .binary_search_by(|t| (**t).cmp(name))
            .ok()
            .map(|i| i as u32)
    }

    pub(crate) fn edge_type_name(&self, ix: u32) -> &str {
        &self.edge_types[ix as usize]
    }

    pub(crate) fn edge_type_count(&self) -> usize {
        self.edge_types.len()
    }

    /// `mask[t]` is true when edge type index `t` is listed.
    pub(crate) fn type_mask<S: AsRef<str>>(&self, edge_types: &[S]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.edge_types.len()];
        for t in edge_types {
            let ix = self
                .edge_type_ix(t.as_ref())
                .ok_or_else(|| Error::UnknownEdgeType(t.as_ref().to_string()))?;
            mask[ix as usize] = true;
        }
        Ok(mask)
    }

    pub(crate) fn typed_neighbors<'a>(
        &'a self,
        u: u32,
        mask: &'a [bool],
    ) -> impl Iterator<Item = u32> + 'a {
        let mut last = None;
        self.adj[u as usize].iter().filter_map(move |&(v, t)| {
            if mask[t as usize] && last != Some(v) {
                last = Some(v);
                Some(v)
            } else {
                None
            }
        })
    }

    /// Distinct neighbors regardless of edge type.
    pub(crate) fn any_neighbors(&self, u: u32) -> impl Iterator<Item = u32> + '_ {
        let mut last = None;
        self.adj[u as usize].iter().filter_map(move |&(v, _)| {
            if last != Some(v) {
                last = Some(v);
                Some(v)
            } else {
                None
            }
        })
    }

    pub(crate) fn bfs(&self, src: u32) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.nodes.len()];
        let mut queue = VecDeque::new();
        dist[src as usize] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let next = dist[u as usize] + 1;
            for v in self.any_neighbors(u) {
                if dist[v as usize] == UNREACHABLE {
                    dist[v as usize] = next;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub(crate) fn induced_ix(&self, keep: &[u32]) -> HeteroGraph {
        let mut selected = vec![false; self.nodes.len()];
        for &i in keep {
            selected[i as usize] = true;
        }
        let mut b = self.empty_builder();
        for &i in keep {
            b.nodes.insert(self.nodes[i as usize].clone());
            for &(v, t) in &self.adj[i as usize] {
                if v > i && selected[v as usize] {
                    b.edges.insert((
                        self.nodes[i as usize].clone(),
                        self.nodes[v as usize].clone(),
                        self.edge_types[t as usize].clone(),
                    ));
                }
            }
        }
        b.build()
    }

    pub(crate) fn empty_builder(&self) -> GraphBuilder {
        GraphBuilder {
            node_types: self.node_types.iter().cloned().collect(),
            edge_types: self.edge_types.iter().cloned().collect(),
            ..GraphBuilder::default()
        }
    }

    /// Builder pre-populated with this graph's contents.
    pub fn to_builder(&self) -> GraphBuilder {
        let mut b = self.empty_builder();
        b.nodes.extend(self.nodes.iter().cloned());
        for (u, list) in self.adj.iter().enumerate() {
            for &(v, t) in list {
                if v as usize > u {
                    b.edges.insert((
                        self.nodes[u].clone(),
                        self.nodes[v as usize].clone(),
                        self.edge_types[t as usize].clone(),
                    ));
                }
            }
        }
        b
    }
}

/// Plain-data form of a graph used in instance files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphData {
    pub node_types: Vec<String>,
    pub edge_types: Vec<String>,
    pub nodes: Vec<NodeRef>,
    pub edges: Vec<(NodeRef, NodeRef, String)>,
}

impl From<&HeteroGraph> for GraphData {
    fn from(g: &HeteroGraph) -> Self {
        GraphData {
            node_types: g.node_types().map(str::to_string).collect(),
            edge_types: g.edge_types().map(str::to_string).collect(),
            nodes: g.nodes().to_vec(),
            edges: g.edges().map(|e| (e.u, e.v, e.edge_type)).collect(),
        }
    }
}

impl TryFrom<GraphData> for HeteroGraph {
    type Error = Error;

    fn try_from(data: GraphData) -> Result<Self> {
        let mut b = GraphBuilder::new();
        for t in &data.node_types {
            b.node_type(t)?;
        }
        for t in &data.edge_types {
            b.edge_type(t)?;
        }
        for n in data.nodes {
            b.node(n)?;
        }
        for (u, v, t) in data.edges {
            b.edge(u, v, &t)?;
        }
        Ok(b.build())
    }
}

impl Serialize for HeteroGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphData::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for HeteroGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        HeteroGraph::try_from(GraphData::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn n(name: &str) -> NodeRef {
        name.parse().unwrap()
    }

    fn typed() -> GraphBuilder {
        let mut b = GraphBuilder::new();
        for t in ["product", "brand", "category"] {
            b.node_type(t).unwrap();
        }
        for t in ["also_buy", "also_view", "brand", "category"] {
            b.edge_type(t).unwrap();
        }
        b
    }

    /// product1–brand1:brand, product1–product2:also_view, product2–brand1:brand
    pub fn g1() -> HeteroGraph {
        let mut b = typed();
        b.edge(n("product1"), n("brand1"), "brand").unwrap();
        b.edge(n("product1"), n("product2"), "also_view").unwrap();
        b.edge(n("product2"), n("brand1"), "brand").unwrap();
        b.build()
    }

    /// G1 plus isolated category1.
    pub fn g2() -> HeteroGraph {
        let mut b = g1().to_builder();
        b.node(n("category1")).unwrap();
        b.build()
    }

    /// G1 plus product1/product2 both also_buy-linked to product3..5.
    pub fn g3() -> HeteroGraph {
        let mut b = g1().to_builder();
        for p in ["product3", "product4", "product5"] {
            b.edge(n("product1"), n(p), "also_buy").unwrap();
            b.edge(n("product2"), n(p), "also_buy").unwrap();
        }
        b.build()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn node_names_render_without_separator() {
        let p = NodeRef::new("product", 11);
        assert_eq!(p.to_string(), "product11");
        assert_eq!("product11".parse::<NodeRef>().unwrap(), p);
        assert!("product".parse::<NodeRef>().is_err());
        assert!("11".parse::<NodeRef>().is_err());
    }

    #[test]
    fn node_order_is_numeric_within_type() {
        assert!(n("product2") < n("product10"));
        assert!(n("brand9") < n("product1"));
    }

    #[test]
    fn counts_and_edges() {
        let g = g1();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.edges().count(), 3);
        assert!(g.has_edge(&n("brand1"), &n("product1"), "brand"));
        assert!(g.has_edge(&n("product1"), &n("brand1"), "brand"));
        assert!(!g.has_edge(&n("product1"), &n("product2"), "brand"));
    }

    #[test]
    fn duplicate_and_reversed_edges_collapse() {
        let mut b = g1().to_builder();
        b.edge(n("brand1"), n("product1"), "brand").unwrap();
        assert_eq!(b.build().edge_count(), 3);
    }

    #[test]
    fn rejects_self_loops_and_undeclared_types() {
        let mut b = g1().to_builder();
        assert!(matches!(
            b.edge(n("product1"), n("product1"), "also_view"),
            Err(Error::SelfLoop(_))
        ));
        assert!(matches!(
            b.edge(n("product1"), n("product2"), "likes"),
            Err(Error::UnknownEdgeType(_))
        ));
        assert!(matches!(b.node(n("venue1")), Err(Error::UnknownNodeType(_))));
    }

    #[test]
    fn neighbors_examples() {
        let g = g1();
        assert_eq!(g.neighbors(&n("product1"), &["brand"]).unwrap(), vec![n("brand1")]);
        assert_eq!(
            g.neighbors(&n("product1"), &["brand", "also_view"]).unwrap(),
            vec![n("brand1"), n("product2")]
        );
        assert!(g2().neighbors(&n("category1"), &["brand"]).unwrap().is_empty());
        assert!(matches!(
            g.neighbors(&n("product9"), &["brand"]),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn distance_examples() {
        let g = g1();
        assert_eq!(g.distance(&n("product1"), &n("product1")).unwrap(), Some(0));
        assert_eq!(g.distance(&n("product2"), &n("brand1")).unwrap(), Some(1));
        assert_eq!(g2().distance(&n("product1"), &n("category1")).unwrap(), None);
        assert!(g.distance(&n("product1"), &n("category1")).is_err());
    }

    #[test]
    fn induced_keeps_declarations() {
        let g = g3();
        let sub = g.induced(&[n("product1"), n("product3"), n("brand1")]).unwrap();
        assert_eq!(sub.node_count(), 3);
        assert_eq!(sub.edge_count(), 2);
        assert_eq!(sub.edge_types().count(), 4);
    }

    #[test]
    fn serde_round_trip() {
        let g = g2();
        let text = serde_json::to_string(&g).unwrap();
        let back: HeteroGraph = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn graph_is_send_and_sync() {
        fn check<T: Send + Sync>() {}
        check::<HeteroGraph>();
    }
}
