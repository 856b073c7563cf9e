//! Text renderings of a graph: natural language, JSON adjacency and DOT.
//!
//! All three list each undirected edge once, under its smaller endpoint in
//! [`NodeRef`] order, and mention isolated nodes explicitly so that every
//! node of the graph appears. Output is deterministic.
//!
//! Natural language (one sentence per owner node and edge type):
//!
//! ```text
//! The graph has 3 nodes and 3 edges.
//! brand1 is connected to product1, product2 via brand.
//! product1 is connected to product2 via also_view.
//! ```
//!
//! JSON, compact, keys in node order:
//!
//! ```text
//! {"node_types":["brand","product"],"edge_types":["also_view","brand"],
//!  "adjacency":{"brand1":{"brand":["product1","product2"]},"product1":{"also_view":["product2"]}}}
//! ```
//!
//! DOT:
//!
//! ```text
//! graph G {
//!   brand1 -- product1 [label="brand"];
//!   ...
//! }
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, HeteroGraph, NodeRef};
use crate::tokens::TokenEstimator;

/// Version tag of the text templates; bump whenever output bytes change.
pub const TEMPLATE_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Nl,
    Json,
    Dot,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Nl, Format::Json, Format::Dot];

    pub fn name(self) -> &'static str {
        match self {
            Format::Nl => "nl",
            Format::Json => "json",
            Format::Dot => "dot",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Format::Nl => "NL",
            Format::Json => "JSON",
            Format::Dot => "DOT",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Format::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown format `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphText {
    pub format: Format,
    pub text: String,
    pub token_estimate: usize,
}

impl GraphText {
    pub fn render(graph: &HeteroGraph, format: Format, estimator: &TokenEstimator) -> Self {
        Self::from_text(format, render(graph, format), estimator)
    }

    pub fn from_text(format: Format, text: String, estimator: &TokenEstimator) -> Self {
        let token_estimate = estimator.estimate(&text);
        GraphText {
            format,
            text,
            token_estimate,
        }
    }
}

pub fn render(graph: &HeteroGraph, format: Format) -> String {
    match format {
        Format::Nl => to_natural_language(graph),
        Format::Json => to_json(graph),
        Format::Dot => to_dot(graph),
    }
}

/// Edges owned by each node, grouped by edge type: `owner -> type -> [v]`.
fn owned(graph: &HeteroGraph) -> BTreeMap<&NodeRef, BTreeMap<&str, Vec<&NodeRef>>> {
    let mut out: BTreeMap<&NodeRef, BTreeMap<&str, Vec<&NodeRef>>> = BTreeMap::new();
    for u in 0..graph.node_count() as u32 {
        for &(v, t) in graph.adj(u) {
            if v > u {
                out.entry(graph.node(u))
                    .or_default()
                    .entry(graph.edge_type_name(t))
                    .or_default()
                    .push(graph.node(v));
            }
        }
    }
    out
}

fn isolated(graph: &HeteroGraph) -> Vec<&NodeRef> {
    (0..graph.node_count() as u32)
        .filter(|&i| graph.adj(i).is_empty())
        .map(|i| graph.node(i))
        .collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
}

pub fn to_natural_language(graph: &HeteroGraph) -> String {
    let mut out = String::new();
    if graph.edge_count() == 0 {
        out.push_str("The graph has no edges.");
    } else {
        let _ = write!(
            out,
            "The graph has {} nodes and {} edges.",
            graph.node_count(),
            graph.edge_count()
        );
    }
    for (u, by_type) in owned(graph) {
        for (t, vs) in by_type {
            let _ = write!(out, "\n{u} is connected to {} via {t}.", join(&vs));
        }
    }
    let lonely = isolated(graph);
    if !lonely.is_empty() {
        let _ = write!(out, "\nIsolated nodes: {}.", join(&lonely));
    }
    out
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

pub fn to_json(graph: &HeteroGraph) -> String {
    let list = |xs: Vec<String>| format!("[{}]", xs.iter().map(|x| json_str(x)).collect::<Vec<_>>().join(", "));
    let mut out = String::from("{\"node_types\": ");
    out.push_str(&list(graph.node_types().map(String::from).collect()));
    out.push_str(", \"edge_types\": ");
    out.push_str(&list(graph.edge_types().map(String::from).collect()));
    out.push_str(", \"adjacency\": {");

    let mut entries: BTreeMap<&NodeRef, BTreeMap<&str, Vec<&NodeRef>>> = owned(graph);
    for n in isolated(graph) {
        entries.insert(n, BTreeMap::new());
    }
    for (i, (u, by_type)) in entries.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&json_str(&u.to_string()));
        out.push_str(": {");
        for (j, (t, vs)) in by_type.iter().enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            out.push_str(&json_str(t));
            out.push_str(": ");
            out.push_str(&list(vs.iter().map(|v| v.to_string()).collect()));
        }
        out.push('}');
    }
    out.push_str("}}");
    out
}

/// Rebuilds a graph from [`to_json`] output.
pub fn parse_json(text: &str) -> Result<HeteroGraph> {
    #[derive(Deserialize)]
    struct Doc {
        node_types: Vec<String>,
        edge_types: Vec<String>,
        adjacency: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    }
    let doc: Doc = serde_json::from_str(text)?;
    let node = |s: &str| s.parse::<NodeRef>();
    let mut b = GraphBuilder::new();
    for t in &doc.node_types {
        b.node_type(t)?;
    }
    for t in &doc.edge_types {
        b.edge_type(t)?;
    }
    for (u, by_type) in &doc.adjacency {
        let u = node(u)?;
        b.node(u.clone())?;
        for (t, vs) in by_type {
            for v in vs {
                b.edge(u.clone(), node(v)?, t)?;
            }
        }
    }
    Ok(b.build())
}

pub fn to_dot(graph: &HeteroGraph) -> String {
    let mut out = String::from("graph G {\n");
    for n in isolated(graph) {
        let _ = writeln!(out, "  {n};");
    }
    for e in graph.edges() {
        let _ = writeln!(out, "  {} -- {} [label=\"{}\"];", e.u, e.v, e.edge_type);
    }
    out.push('}');
    out
}
