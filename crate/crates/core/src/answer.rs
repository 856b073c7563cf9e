//! Gold answers and their canonical text form.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::NodeRef;

/// The seven answer shapes. The display labels match the column headers of
/// the results tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    Node,
    Pair,
    Count,
    Bool,
    Path,
    Graph,
    LinkPrediction,
}

impl AnswerType {
    pub const ALL: [AnswerType; 7] = [
        AnswerType::Node,
        AnswerType::Pair,
        AnswerType::Count,
        AnswerType::Bool,
        AnswerType::Path,
        AnswerType::Graph,
        AnswerType::LinkPrediction,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AnswerType::Node => "Node",
            AnswerType::Pair => "Pair",
            AnswerType::Count => "Count",
            AnswerType::Bool => "Bool",
            AnswerType::Path => "Path",
            AnswerType::Graph => "Graph",
            AnswerType::LinkPrediction => "LP",
        }
    }

    /// Set-valued types are scored with F1, the rest with exact match.
    pub fn is_set(self) -> bool {
        matches!(
            self,
            AnswerType::Node | AnswerType::Pair | AnswerType::Path | AnswerType::Graph
        )
    }

    pub fn parse_label(s: &str) -> Option<AnswerType> {
        let s = s.trim().to_ascii_lowercase();
        AnswerType::ALL.into_iter().find(|t| {
            t.label().eq_ignore_ascii_case(&s)
                || serde_json::to_value(t).ok().and_then(|v| v.as_str().map(str::to_string))
                    == Some(s.clone())
        })
    }
}

impl fmt::Display for AnswerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Unordered node pair, stored endpoint-sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair(NodeRef, NodeRef);

impl Pair {
    pub fn new(a: NodeRef, b: NodeRef) -> Self {
        if a <= b {
            Pair(a, b)
        } else {
            Pair(b, a)
        }
    }

    pub fn first(&self) -> &NodeRef {
        &self.0
    }

    pub fn second(&self) -> &NodeRef {
        &self.1
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

/// A node sequence. Paths produced by the task algorithms are simple and
/// have at least two nodes; parsed predictions may be anything.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Path(pub Vec<NodeRef>);

impl Path {
    pub fn nodes(&self) -> &[NodeRef] {
        &self.0
    }

    pub fn hops(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn is_simple(&self) -> bool {
        let set: BTreeSet<&NodeRef> = self.0.iter().collect();
        set.len() == self.0.len()
    }

    /// The same path read in the direction whose first node is smaller, so
    /// that `a -> b -> c` and `c -> b -> a` compare equal.
    pub fn oriented(&self) -> Path {
        match (self.0.first(), self.0.last()) {
            (Some(a), Some(b)) if a > b => Path(self.0.iter().rev().cloned().collect()),
            _ => self.clone(),
        }
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" -> ")?;
            }
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Answer {
    NodeSet(BTreeSet<NodeRef>),
    PairSet(BTreeSet<Pair>),
    Count(u64),
    Bool(bool),
    PathSet(BTreeSet<Path>),
    EdgeSet(BTreeSet<Pair>),
    LinkLabel(bool),
}

impl Answer {
    pub fn answer_type(&self) -> AnswerType {
        match self {
            Answer::NodeSet(_) => AnswerType::Node,
            Answer::PairSet(_) => AnswerType::Pair,
            Answer::Count(_) => AnswerType::Count,
            Answer::Bool(_) => AnswerType::Bool,
            Answer::PathSet(_) => AnswerType::Path,
            Answer::EdgeSet(_) => AnswerType::Graph,
            Answer::LinkLabel(_) => AnswerType::LinkPrediction,
        }
    }

    /// True for set answers with no elements.
    pub fn is_empty_set(&self) -> bool {
        match self {
            Answer::NodeSet(s) => s.is_empty(),
            Answer::PairSet(s) | Answer::EdgeSet(s) => s.is_empty(),
            Answer::PathSet(s) => s.is_empty(),
            _ => false,
        }
    }

    /// Canonical completion text, the form models are trained to emit.
    pub fn to_completion(&self) -> String {
        fn join<T: fmt::Display>(items: impl IntoIterator<Item = T>, sep: &str) -> String {
            let parts: Vec<String> = items.into_iter().map(|i| i.to_string()).collect();
            if parts.is_empty() {
                "none".to_string()
            } else {
                parts.join(sep)
            }
        }
        match self {
            Answer::NodeSet(s) => join(s, ", "),
            Answer::PairSet(s) | Answer::EdgeSet(s) => join(s, ", "),
            Answer::PathSet(s) => join(s, "; "),
            Answer::Count(c) => c.to_string(),
            Answer::Bool(b) | Answer::LinkLabel(b) => if *b { "yes" } else { "no" }.to_string(),
        }
    }

    /// Canonical string elements of a set answer; paths are oriented and
    /// kept whole.
    pub fn elements(&self) -> Option<BTreeSet<String>> {
        Some(match self {
            Answer::NodeSet(s) => s.iter().map(|n| n.to_string()).collect(),
            Answer::PairSet(s) | Answer::EdgeSet(s) => s.iter().map(|p| p.to_string()).collect(),
            Answer::PathSet(s) => s.iter().map(|p| p.oriented().to_string()).collect(),
            _ => return None,
        })
    }
}
