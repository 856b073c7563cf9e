//! Corpus statistics as a tab-separated table, one row per domain plus a
//! total row.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use graphinst::dataset::{CorpusRecord, Split};
use graphinst::Format;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FormatStats {
    pub avg_tokens: f64,
    pub max_nodes: usize,
    pub max_edges: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DomainStats {
    pub domain: String,
    pub sub_tasks: usize,
    pub instances: usize,
    pub train: usize,
    pub test: usize,
    pub excluded: usize,
    pub avg_nodes: f64,
    pub avg_edges: f64,
    pub formats: BTreeMap<Format, FormatStats>,
}

fn mean(xs: impl Iterator<Item = usize>) -> f64 {
    let (s, n) = xs.fold((0usize, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s as f64 / n as f64
    }
}

fn summarize(domain: &str, corpora: &BTreeMap<Format, Vec<&CorpusRecord>>) -> DomainStats {
    // counts come from the first format; every format holds the same instances
    let Some((_, base)) = corpora.iter().next() else {
        return DomainStats {
            domain: domain.into(),
            ..Default::default()
        };
    };
    let count = |s: Split| base.iter().filter(|r| r.split.split == s).count();
    DomainStats {
        domain: domain.into(),
        sub_tasks: base.iter().map(|r| r.sub_task.as_str()).collect::<BTreeSet<_>>().len(),
        instances: base.len(),
        train: count(Split::Train),
        test: count(Split::Test),
        excluded: count(Split::Excluded),
        avg_nodes: mean(base.iter().map(|r| r.context_nodes)),
        avg_edges: mean(base.iter().map(|r| r.context_edges)),
        formats: corpora
            .iter()
            .map(|(f, rs)| {
                (
                    *f,
                    FormatStats {
                        avg_tokens: mean(rs.iter().map(|r| r.graph_tokens)),
                        max_nodes: rs.iter().map(|r| r.context_nodes).max().unwrap_or(0),
                        max_edges: rs.iter().map(|r| r.context_edges).max().unwrap_or(0),
                    },
                )
            })
            .collect(),
    }
}

/// Per-domain rows followed by an `all` row.
pub fn compute_stats(corpora: &BTreeMap<Format, Vec<CorpusRecord>>) -> Vec<DomainStats> {
    let domains: BTreeSet<&str> = corpora.values().flatten().map(|r| r.domain.as_str()).collect();
    let mut rows = Vec::new();
    for d in &domains {
        let subset = corpora
            .iter()
            .map(|(f, rs)| (*f, rs.iter().filter(|r| r.domain == *d).collect()))
            .collect();
        rows.push(summarize(d, &subset));
    }
    let all = corpora.iter().map(|(f, rs)| (*f, rs.iter().collect())).collect();
    rows.push(summarize("all", &all));
    rows
}

/// Tab-separated rendering. `header` lines are written first, prefixed
/// with `#`.
pub fn to_tsv(rows: &[DomainStats], header: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        let _ = writeln!(out, "# {h}");
    }
    let formats: BTreeSet<Format> = rows.iter().flat_map(|r| r.formats.keys().copied()).collect();
    let mut cols = vec![
        "domain", "sub_tasks", "instances", "train", "test", "excluded", "avg_nodes", "avg_edges",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    for f in &formats {
        cols.push(format!("{f}_avg_tokens"));
        cols.push(format!("{f}_max_nodes"));
        cols.push(format!("{f}_max_edges"));
    }
    let _ = writeln!(out, "{}", cols.join("\t"));
    for r in rows {
        let mut cells = vec![
            r.domain.clone(),
            r.sub_tasks.to_string(),
            r.instances.to_string(),
            r.train.to_string(),
            r.test.to_string(),
            r.excluded.to_string(),
            format!("{:.2}", r.avg_nodes),
            format!("{:.2}", r.avg_edges),
        ];
        for f in &formats {
            match r.formats.get(f) {
                Some(s) => cells.extend([
                    format!("{:.2}", s.avg_tokens),
                    s.max_nodes.to_string(),
                    s.max_edges.to_string(),
                ]),
                None => cells.extend(["-".into(), "-".into(), "-".into()]),
            }
        }
        let _ = writeln!(out, "{}", cells.join("\t"));
    }
    out
}
