//! Ego-graph sampling with per-type edge downsampling.
//!
//! Expansion is breadth-first from all seeds at once. When a node is expanded
//! its incident edges are grouped by edge type and each group is thinned by
//! the [`DownsamplePolicy`]. Every candidate in a group gets a random key from
//! a stream keyed by `(rng_seed, seed set, node, edge type)` and the policy
//! keeps the lowest keys (cap) or the keys below the ratio. Because keys never
//! depend on what else has been selected, raising a cap or ratio can only add
//! nodes. The returned graph is induced on the selected nodes, so edges among
//! selected nodes are always kept.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeRecord, HeteroGraph, NodeRef};
use crate::rng::{self, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DownsamplePolicy {
    /// Keep at most `caps[edge_type]` edges per expanded node and type.
    /// Types without an entry fall back to `default_cap`, or are unbounded.
    MaxPerType {
        #[serde(default)]
        caps: BTreeMap<String, u32>,
        #[serde(default)]
        default_cap: Option<u32>,
    },
    /// Keep each edge with probability `ratio`, and at least one per
    /// non-empty group.
    Ratio { ratio: f64 },
}

impl DownsamplePolicy {
    pub fn unbounded() -> Self {
        DownsamplePolicy::Ratio { ratio: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DownsamplePolicy::MaxPerType { caps, default_cap } => {
                if caps.values().chain(default_cap.iter()).any(|&c| c == 0) {
                    return Err(Error::InvalidSampler("caps must be at least 1".into()));
                }
            }
            DownsamplePolicy::Ratio { ratio } => {
                if !(*ratio > 0.0 && *ratio <= 1.0) {
                    return Err(Error::InvalidSampler(format!(
                        "ratio must lie in (0, 1], got {ratio}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn cap(&self, edge_type: &str) -> Option<usize> {
        match self {
            DownsamplePolicy::MaxPerType { caps, default_cap } => caps
                .get(edge_type)
                .or(default_cap.as_ref())
                .map(|&c| c as usize),
            DownsamplePolicy::Ratio { .. } => None,
        }
    }

    /// Positions kept out of a group of `n` candidates of one edge type.
    /// Output is in ascending position order.
    fn select(&self, edge_type: &str, n: usize, rng: &mut StreamRng) -> Vec<usize> {
        if n == 0 {
            return Vec::new();
        }
        let keys: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
        let mut kept: Vec<usize> = match self {
            DownsamplePolicy::MaxPerType { .. } => match self.cap(edge_type) {
                Some(cap) if cap < n => {
                    let mut order: Vec<usize> = (0..n).collect();
                    order.sort_by_key(|&i| (keys[i], i));
                    order.truncate(cap);
                    order
                }
                _ => (0..n).collect(),
            },
            DownsamplePolicy::Ratio { ratio } => {
                let threshold = ratio * 2f64.powi(64);
                let mut kept: Vec<usize> = (0..n).filter(|&i| (keys[i] as f64) < threshold).collect();
                if kept.is_empty() {
                    kept.push((0..n).min_by_key(|&i| (keys[i], i)).unwrap());
                }
                kept
            }
        };
        kept.sort_unstable();
        kept
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    #[serde(default = "default_radius")]
    pub radius: u32,
    pub policy: DownsamplePolicy,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_radius() -> u32 {
    2
}

impl SampleConfig {
    pub fn new(radius: u32, policy: DownsamplePolicy, rng_seed: u64) -> Self {
        SampleConfig {
            radius,
            policy,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius == 0 {
            return Err(Error::InvalidSampler("radius must be at least 1".into()));
        }
        self.policy.validate()
    }

    pub fn with_seed(&self, rng_seed: u64) -> Self {
        SampleConfig {
            rng_seed,
            ..self.clone()
        }
    }
}

/// Thins one `(frontier node, edge type)` group of candidate edges.
///
/// Draws one key per candidate from `rng` in input order; the kept edges are
/// returned in input order.
pub fn downsample_edges(
    candidates: &[EdgeRecord],
    policy: &DownsamplePolicy,
    rng: &mut StreamRng,
) -> Vec<EdgeRecord> {
    let Some(first) = candidates.first() else {
        return Vec::new();
    };
    policy
        .select(&first.edge_type, candidates.len(), rng)
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect()
}

/// Samples the ego subgraph of radius `config.radius` around `seeds`.
pub fn ego_sample(graph: &HeteroGraph, seeds: &[NodeRef], config: &SampleConfig) -> Result<HeteroGraph> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(Error::EmptySeeds);
    }
    let mut frontier = Vec::with_capacity(seeds.len());
    for s in seeds {
        frontier.push(graph.require(s)?);
    }
    frontier.sort_unstable();
    frontier.dedup();

    let seed_label = frontier
        .iter()
        .map(|&i| graph.node(i).to_string())
        .collect::<Vec<_>>()
        .join(",");

    let mut selected = vec![false; graph.node_count()];
    let mut members = frontier.clone();
    for &s in &frontier {
        selected[s as usize] = true;
    }

    let mut groups: Vec<Vec<u32>> = vec![Vec::new(); graph.edge_type_count()];
    for _ in 0..config.radius {
        let mut next = Vec::new();
        for &u in &frontier {
            for g in groups.iter_mut() {
                g.clear();
            }
            for &(v, t) in graph.adj(u) {
                groups[t as usize].push(v);
            }
            let u_name = graph.node(u).to_string();
            for (t, group) in groups.iter().enumerate() {
                if group.is_empty() {
                    continue;
                }
                let edge_type = graph.edge_type_name(t as u32);
                let mut stream = rng::substream(
                    config.rng_seed,
                    &[
                        "sample".as_bytes(),
                        seed_label.as_bytes(),
                        u_name.as_bytes(),
                        edge_type.as_bytes(),
                    ],
                );
                for i in config.policy.select(edge_type, group.len(), &mut stream) {
                    let v = group[i];
                    if !selected[v as usize] {
                        selected[v as usize] = true;
                        next.push(v);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort_unstable();
        members.extend_from_slice(&next);
        frontier = next;
    }
    Ok(graph.induced_ix(&members))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;

    fn unbounded(radius: u32) -> SampleConfig {
        SampleConfig::new(radius, DownsamplePolicy::unbounded(), 5)
    }

    fn candidates(n: usize) -> Vec<EdgeRecord> {
        (0..n)
            .map(|i| EdgeRecord::new(n_("product", 0), n_("product", i as u64 + 1), "also_buy").unwrap())
            .collect()
    }

    fn n_(ty: &str, id: u64) -> NodeRef {
        NodeRef::new(ty, id)
    }

    #[test]
    fn radius_one_on_g1_is_everything() {
        let sub = ego_sample(&g1(), &[n("product1")], &unbounded(1)).unwrap();
        assert_eq!(sub, g1());
    }

    #[test]
    fn sampling_is_deterministic() {
        let policy = DownsamplePolicy::MaxPerType {
            caps: BTreeMap::from([("also_buy".to_string(), 1)]),
            default_cap: None,
        };
        let cfg = SampleConfig::new(2, policy, 99);
        let a = ego_sample(&g3(), &[n("product1")], &cfg).unwrap();
        let b = ego_sample(&g3(), &[n("product1")], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn seeds_are_validated() {
        assert!(matches!(
            ego_sample(&g1(), &[], &unbounded(1)),
            Err(Error::EmptySeeds)
        ));
        assert!(matches!(
            ego_sample(&g1(), &[n("product7")], &unbounded(1)),
            Err(Error::UnknownNode(_))
        ));
        assert!(ego_sample(&g1(), &[n("product1")], &unbounded(0)).is_err());
    }

    #[test]
    fn cap_not_binding_keeps_all() {
        let policy = DownsamplePolicy::MaxPerType {
            caps: BTreeMap::from([("also_buy".to_string(), 10)]),
            default_cap: None,
        };
        let mut r = rng::substream(1, &["t"]);
        assert_eq!(downsample_edges(&candidates(5), &policy, &mut r).len(), 5);
    }

    #[test]
    fn cap_binding_keeps_exact_subset() {
        let policy = DownsamplePolicy::MaxPerType {
            caps: BTreeMap::from([("also_buy".to_string(), 3)]),
            default_cap: None,
        };
        let input = candidates(10);
        let mut r = rng::substream(1, &["t"]);
        let kept = downsample_edges(&input, &policy, &mut r);
        assert_eq!(kept.len(), 3);
        assert!(kept.iter().all(|e| input.contains(e)));
    }

    #[test]
    fn ratio_keeps_binomial_fraction() {
        let policy = DownsamplePolicy::Ratio { ratio: 0.3 };
        let input = candidates(10_000);
        let mut total = 0usize;
        let trials = 20;
        for t in 0..trials {
            let mut r = rng::substream(t, &["ratio"]);
            let kept = downsample_edges(&input, &policy, &mut r).len();
            // per-trial sd is ~0.0046, so 0.02 is >4 sd
            assert!((kept as f64 / 10_000.0 - 0.3).abs() < 0.02);
            total += kept;
        }
        let mean = total as f64 / (10_000.0 * trials as f64);
        assert!((mean - 0.3).abs() < 0.02);
    }

    #[test]
    fn ratio_keeps_at_least_one() {
        let policy = DownsamplePolicy::Ratio { ratio: 1e-9 };
        for s in 0..20 {
            let mut r = rng::substream(s, &["min"]);
            assert_eq!(downsample_edges(&candidates(4), &policy, &mut r).len(), 1);
        }
    }

    #[test]
    fn policy_validation() {
        assert!(DownsamplePolicy::Ratio { ratio: 0.0 }.validate().is_err());
        assert!(DownsamplePolicy::Ratio { ratio: 1.5 }.validate().is_err());
        assert!(DownsamplePolicy::MaxPerType {
            caps: BTreeMap::from([("x".to_string(), 0)]),
            default_cap: None
        }
        .validate()
        .is_err());
    }

    #[test]
    fn policy_parses_from_toml() {
        let cfg: SampleConfig = toml::from_str(
            r#"
            radius = 2
            rng_seed = 3
            [policy]
            mode = "max_per_type"
            caps = { also_buy = 4, brand = 2 }
            "#,
        )
        .unwrap();
        assert_eq!(cfg.policy.cap("also_buy"), Some(4));
        assert_eq!(cfg.policy.cap("category"), None);
    }
}
