//! Source ingestion and node de-identification.
//!
//! Source files are newline-delimited JSON records:
//!
//! ```text
//! {"id": "B0001", "type": "product", "relations": [["brand", "Acme"], ["also_view", "B0002"]]}
//! ```
//!
//! An [`Adapter`] (a TOML file) declares the domain's node and edge types and
//! maps each relation name to an edge type and a target node type. Targets
//! that never appear as records of their own are created as nodes of that
//! target type. Node identity is `(node type, raw id)`, so a brand and a
//! category may share a raw name without colliding.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{is_edge_type_name, is_node_type_name, GraphBuilder, HeteroGraph, NodeRef};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub id: String,
    #[serde(rename = "type")]
    pub node_type: String,
    #[serde(default)]
    pub relations: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relation {
    pub edge_type: String,
    pub target_type: String,
    /// With `true` (the default) a relation listed by one endpoint creates
    /// the undirected edge. With `false` both endpoints must list each other.
    #[serde(default = "default_true")]
    pub symmetrize: bool,
}

fn default_true() -> bool {
    true
}

/// Domain adapter: declared types plus the relation mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Adapter {
    pub domain: String,
    pub node_types: Vec<String>,
    pub edge_types: Vec<String>,
    pub relations: BTreeMap<String, Relation>,
}

impl Adapter {
    pub fn from_toml(text: &str) -> Result<Self> {
        let adapter: Adapter =
            toml::from_str(text).map_err(|e| Error::Config(format!("adapter: {e}")))?;
        adapter.validate()?;
        Ok(adapter)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.node_types {
            if !is_node_type_name(t) {
                return Err(Error::InvalidIdentifier(t.clone()));
            }
        }
        for t in &self.edge_types {
            if !is_edge_type_name(t) {
                return Err(Error::InvalidIdentifier(t.clone()));
            }
        }
        for (name, rel) in &self.relations {
            if !self.edge_types.contains(&rel.edge_type) {
                return Err(Error::Config(format!(
                    "relation `{name}` maps to undeclared edge type `{}`",
                    rel.edge_type
                )));
            }
            if !self.node_types.contains(&rel.target_type) {
                return Err(Error::Config(format!(
                    "relation `{name}` targets undeclared node type `{}`",
                    rel.target_type
                )));
            }
        }
        Ok(())
    }

    fn graph_builder(&self) -> Result<GraphBuilder> {
        let mut b = GraphBuilder::new();
        for t in &self.node_types {
            b.node_type(t)?;
        }
        for t in &self.edge_types {
            b.edge_type(t)?;
        }
        Ok(b)
    }
}

/// A record that was skipped during ingestion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub raw_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub records: usize,
    pub dangling_targets: usize,
    pub self_loops_dropped: usize,
    pub unreciprocated_dropped: usize,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    /// Graph with provisional ids (raw ids ranked within each type) and the
    /// raw ids attached.
    pub graph: HeteroGraph,
    pub rejected: Vec<Rejection>,
    pub stats: IngestStats,
}

/// Identity of a source node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RawKey {
    pub node_type: String,
    pub raw_id: String,
}

pub type NumberedRecords = Vec<(usize, SourceRecord)>;

/// Parses newline-delimited records. Blank lines are skipped; unparsable
/// lines come back as rejections.
pub fn read_records<R: BufRead>(reader: R) -> Result<(NumberedRecords, Vec<Rejection>)> {
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SourceRecord>(&line) {
            Ok(r) => records.push((line_no, r)),
            Err(e) => rejected.push(Rejection {
                line: line_no,
                raw_id: None,
                reason: format!("unparsable record: {e}"),
            }),
        }
    }
    Ok((records, rejected))
}

/// Reads and ingests a source file.
pub fn ingest_reader<R: BufRead>(reader: R, adapter: &Adapter) -> Result<Ingested> {
    let (records, mut parse_rejects) = read_records(reader)?;
    let mut out = build_graph(records, adapter)?;
    out.rejected.append(&mut parse_rejects);
    out.rejected.sort_by_key(|r| r.line);
    Ok(out)
}

/// Builds a graph from line-numbered records.
///
/// Invalid records (undeclared node type, unknown relation, empty id) are
/// rejected and reported; the same raw id declared with two different node
/// types is a hard error. The result does not depend on record order.
pub fn build_graph<I>(records: I, adapter: &Adapter) -> Result<Ingested>
where
    I: IntoIterator<Item = (usize, SourceRecord)>,
{
    adapter.validate()?;
    let mut rejected = Vec::new();
    let mut stats = IngestStats::default();
    let mut declared: BTreeMap<String, String> = BTreeMap::new();
    let mut nodes: BTreeSet<RawKey> = BTreeSet::new();
    // directed claims (source, target, edge type, symmetrize)
    let mut claims: BTreeSet<(RawKey, RawKey, String, bool)> = BTreeSet::new();

    for (line, rec) in records {
        if let Some(reason) = check_record(&rec, adapter) {
            rejected.push(Rejection {
                line,
                raw_id: (!rec.id.is_empty()).then(|| rec.id.clone()),
                reason,
            });
            continue;
        }
        match declared.get(&rec.id) {
            Some(ty) if *ty != rec.node_type => {
                let (first, second) = if *ty < rec.node_type {
                    (ty.clone(), rec.node_type.clone())
                } else {
                    (rec.node_type.clone(), ty.clone())
                };
                return Err(Error::ConflictingNodeType {
                    raw_id: rec.id,
                    first,
                    second,
                });
            }
            _ => {
                declared.insert(rec.id.clone(), rec.node_type.clone());
            }
        }
        stats.records += 1;
        let src = RawKey {
            node_type: rec.node_type,
            raw_id: rec.id,
        };
        nodes.insert(src.clone());
        for (name, target) in rec.relations {
            let rel = &adapter.relations[&name];
            let dst = RawKey {
                node_type: rel.target_type.clone(),
                raw_id: target,
            };
            claims.insert((src.clone(), dst, rel.edge_type.clone(), rel.symmetrize));
        }
    }

    let declared_nodes = nodes.clone();
    for (_, dst, _, _) in &claims {
        nodes.insert(dst.clone());
    }
    stats.dangling_targets = nodes.len() - declared_nodes.len();

    let mut local: BTreeMap<&RawKey, NodeRef> = BTreeMap::new();
    let mut next_id: BTreeMap<&str, u64> = BTreeMap::new();
    for key in &nodes {
        let id = next_id.entry(&key.node_type).or_insert(1);
        local.insert(key, NodeRef::new(key.node_type.as_str(), *id));
        *id += 1;
    }

    let mut b = adapter.graph_builder()?;
    for (key, node) in &local {
        b.node(node.clone())?;
        b.raw_id(node.clone(), key.raw_id.clone());
    }
    for (src, dst, edge_type, symmetrize) in &claims {
        if src == dst {
            stats.self_loops_dropped += 1;
            continue;
        }
        if !symmetrize && !claims.contains(&(dst.clone(), src.clone(), edge_type.clone(), false)) {
            stats.unreciprocated_dropped += 1;
            continue;
        }
        b.edge(local[src].clone(), local[dst].clone(), edge_type)?;
    }

    rejected.sort_by_key(|r| r.line);
    Ok(Ingested {
        graph: b.build(),
        rejected,
        stats,
    })
}

fn check_record(rec: &SourceRecord, adapter: &Adapter) -> Option<String> {
    if rec.id.is_empty() {
        return Some("empty id".into());
    }
    if !adapter.node_types.contains(&rec.node_type) {
        return Some(format!("undeclared node type `{}`", rec.node_type));
    }
    for (name, target) in &rec.relations {
        if !adapter.relations.contains_key(name) {
            return Some(format!("unknown relation `{name}`"));
        }
        if target.is_empty() {
            return Some(format!("empty target for relation `{name}`"));
        }
    }
    None
}

/// Renames every node to `<type><n>` where `n` runs from `start` within each
/// node type in a seed-determined order. Returns the renamed graph and the
/// provenance mapping from source identity to new name.
pub fn deidentify(
    graph: &HeteroGraph,
    seed: u64,
    start: u64,
) -> Result<(HeteroGraph, BTreeMap<RawKey, NodeRef>)> {
    let mut by_type: BTreeMap<&str, Vec<&NodeRef>> = BTreeMap::new();
    for n in graph.nodes() {
        by_type.entry(n.node_type()).or_default().push(n);
    }
    let mut rename: BTreeMap<&NodeRef, NodeRef> = BTreeMap::new();
    for (ty, mut members) in by_type {
        let mut stream = rng::substream(seed, &["deidentify".as_bytes(), ty.as_bytes()]);
        members.shuffle(&mut stream);
        for (i, old) in members.into_iter().enumerate() {
            rename.insert(old, NodeRef::new(old.type_arc().clone(), start + i as u64));
        }
    }

    let mut b = graph.empty_builder();
    let mut mapping = BTreeMap::new();
    for (old, new) in &rename {
        b.node(new.clone())?;
        let raw_id = graph
            .raw_id(old)
            .map(str::to_string)
            .unwrap_or_else(|| old.to_string());
        mapping.insert(
            RawKey {
                node_type: old.node_type().to_string(),
                raw_id,
            },
            new.clone(),
        );
    }
    for e in graph.edges() {
        b.edge(rename[&e.u].clone(), rename[&e.v].clone(), &e.edge_type)?;
    }
    Ok((b.build(), mapping))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amazon() -> Adapter {
        Adapter::from_toml(
            r#"
            domain = "amazon"
            node_types = ["product", "brand", "category"]
            edge_types = ["also_buy", "also_view", "brand", "category"]
            [relations]
            also_buy = { edge_type = "also_buy", target_type = "product" }
            also_view = { edge_type = "also_view", target_type = "product" }
            brand = { edge_type = "brand", target_type = "brand" }
            category = { edge_type = "category", target_type = "category" }
            "#,
        )
        .unwrap()
    }

    fn rec(id: &str, ty: &str, rels: &[(&str, &str)]) -> SourceRecord {
        SourceRecord {
            id: id.into(),
            node_type: ty.into(),
            relations: rels.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }

    fn numbered(records: Vec<SourceRecord>) -> Vec<(usize, SourceRecord)> {
        records.into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect()
    }

    #[test]
    fn minimal_join_creates_dangling_brand() {
        let out = build_graph(
            numbered(vec![
                rec("p1", "product", &[("brand", "b")]),
                rec("p2", "product", &[("brand", "b")]),
            ]),
            &amazon(),
        )
        .unwrap();
        assert_eq!(out.graph.node_count(), 3);
        assert_eq!(out.graph.edge_count(), 2);
        assert_eq!(out.stats.dangling_targets, 1);
        assert!(out.graph.edges().all(|e| e.edge_type == "brand"));
    }

    #[test]
    fn unknown_relation_is_rejected_with_line() {
        let good = vec![rec("p1", "product", &[("brand", "b")])];
        let baseline = build_graph(numbered(good.clone()), &amazon()).unwrap();
        let mut with_bad = good;
        with_bad.push(rec("p2", "product", &[("likes", "p1")]));
        let out = build_graph(numbered(with_bad), &amazon()).unwrap();
        assert_eq!(out.rejected.len(), 1);
        assert_eq!(out.rejected[0].line, 2);
        assert_eq!(out.graph, baseline.graph);
    }

    #[test]
    fn conflicting_types_are_fatal() {
        let err = build_graph(
            numbered(vec![rec("x", "product", &[]), rec("x", "brand", &[])]),
            &amazon(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ConflictingNodeType { .. }));
    }

    #[test]
    fn reader_reports_unparsable_lines() {
        let text = "{\"id\":\"p1\",\"type\":\"product\",\"relations\":[[\"brand\",\"b\"]]}\nnot json\n\n";
        let out = ingest_reader(text.as_bytes(), &amazon()).unwrap();
        assert_eq!(out.graph.edge_count(), 1);
        assert_eq!(out.rejected.len(), 1);
        assert_eq!(out.rejected[0].line, 2);
    }

    #[test]
    fn unreciprocated_edges_drop_without_symmetrize() {
        let mut a = amazon();
        a.relations.get_mut("also_view").unwrap().symmetrize = false;
        let out = build_graph(
            numbered(vec![
                rec("p1", "product", &[("also_view", "p2"), ("also_view", "p3")]),
                rec("p2", "product", &[("also_view", "p1")]),
            ]),
            &a,
        )
        .unwrap();
        assert_eq!(out.graph.edge_count(), 1);
        assert_eq!(out.stats.unreciprocated_dropped, 1);
    }

    #[test]
    fn deidentify_permutes_within_type() {
        let out = build_graph(
            numbered(vec![
                rec("a", "product", &[("brand", "x")]),
                rec("b", "product", &[("brand", "x")]),
                rec("c", "product", &[("also_view", "a")]),
            ]),
            &amazon(),
        )
        .unwrap();
        let (g, map) = deidentify(&out.graph, 42, 1).unwrap();
        let mut ids: Vec<u64> = g
            .nodes()
            .iter()
            .filter(|n| n.node_type() == "product")
            .map(NodeRef::local_id)
            .collect();
        ids.sort();
        assert_eq!(ids, vec![1, 2, 3]);
        assert_eq!(map.len(), 4);
        assert_eq!(g.edge_count(), out.graph.edge_count());
        let (g2, map2) = deidentify(&out.graph, 42, 1).unwrap();
        assert_eq!(g, g2);
        assert_eq!(map, map2);
    }

    #[test]
    fn adapter_rejects_bad_mapping() {
        let err = Adapter::from_toml(
            r#"
            domain = "x"
            node_types = ["paper"]
            edge_types = ["citation"]
            [relations]
            cites = { edge_type = "citation", target_type = "venue" }
            "#,
        );
        assert!(err.is_err());
    }
}
