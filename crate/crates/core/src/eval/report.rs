//! Aggregating instance scores into per-sub-task, per-answer-type and
//! overall results.
//!
//! A sub-task's value is 100 times its mean instance score. An answer
//! type's value is the mean over its sub-tasks, and the overall value is the
//! mean over answer types.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::parse::AnswerParser;
use super::score::{score_instance, Diagnostic, Scored};
use crate::answer::AnswerType;
use crate::dataset::CorpusRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub instance_id: String,
    pub raw_output: String,
    /// Set when the model could not be queried; the output is then empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PredictionRecord {
    pub fn new(instance_id: impl Into<String>, raw_output: impl Into<String>) -> Self {
        PredictionRecord {
            instance_id: instance_id.into(),
            raw_output: raw_output.into(),
            error: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "EM")]
    ExactMatch,
    F1,
    /// Macro average over EM and F1 groups.
    #[serde(rename = "macro")]
    Macro,
}

impl Metric {
    pub fn for_answer_type(t: AnswerType) -> Metric {
        if t.is_set() {
            Metric::F1
        } else {
            Metric::ExactMatch
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric: Metric,
    /// On a 0 to 100 scale.
    pub value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub per_answer_type: BTreeMap<String, MetricResult>,
    pub overall: MetricResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_sub_task: BTreeMap<String, MetricResult>,
    pub per_answer_type: BTreeMap<String, MetricResult>,
    pub overall: MetricResult,
    pub per_domain: BTreeMap<String, Breakdown>,
    /// Keyed by generalization axis: `seen`, `unseen_sub_task`,
    /// `unseen_answer_type`, `unseen_domain`.
    pub per_split: BTreeMap<String, Breakdown>,
    pub diagnostics: BTreeMap<Diagnostic, usize>,
    /// Corpus instances with no prediction; each scored 0.
    pub missing: Vec<String>,
}

/// One scored corpus instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub instance_id: String,
    pub sub_task: String,
    pub domain: String,
    pub answer_type: AnswerType,
    pub axis: String,
    #[serde(flatten)]
    pub scored: Scored,
}

fn check_predictions<'a>(
    predictions: &'a [PredictionRecord],
    corpus: &[CorpusRecord],
) -> Result<BTreeMap<&'a str, &'a PredictionRecord>> {
    let mut by_id = BTreeMap::new();
    let mut dups = BTreeSet::new();
    for p in predictions {
        if by_id.insert(p.instance_id.as_str(), p).is_some() {
            dups.insert(p.instance_id.clone());
        }
    }
    if !dups.is_empty() {
        return Err(Error::DuplicatePredictions(dups.into_iter().collect()));
    }
    let known: BTreeSet<&str> = corpus.iter().map(|r| r.instance_id.as_str()).collect();
    if let Some(id) = by_id.keys().find(|id| !known.contains(*id)) {
        return Err(Error::UnknownInstance(id.to_string()));
    }
    Ok(by_id)
}

/// Scores every corpus record against its prediction. Records without one,
/// or whose request failed, score 0.
pub fn score_corpus(predictions: &[PredictionRecord], corpus: &[CorpusRecord]) -> Result<Vec<InstanceScore>> {
    let by_id = check_predictions(predictions, corpus)?;
    let mut parsers: BTreeMap<&str, AnswerParser> = BTreeMap::new();
    for r in corpus {
        parsers
            .entry(r.domain.as_str())
            .or_insert_with(|| AnswerParser::for_types(&r.node_types));
    }
    Ok(corpus
        .par_iter()
        .map(|r| {
            let scored = match by_id.get(r.instance_id.as_str()) {
                None => Scored {
                    score: 0.0,
                    diagnostic: Some(Diagnostic::MissingPrediction),
                },
                // an empty output would otherwise match an empty gold set
                Some(p) if p.error.is_some() => Scored {
                    score: 0.0,
                    diagnostic: Some(Diagnostic::RequestFailed),
                },
                Some(p) => score_instance(&parsers[r.domain.as_str()].parse(&p.raw_output, r.answer_type), &r.gold),
            };
            InstanceScore {
                instance_id: r.instance_id.clone(),
                sub_task: r.sub_task.clone(),
                domain: r.domain.clone(),
                answer_type: r.answer_type,
                axis: r.split.axis().to_string(),
                scored,
            }
        })
        .collect())
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Macro average of `scores`: by sub-task, then by answer type.
fn breakdown(scores: &[&InstanceScore]) -> (BTreeMap<String, MetricResult>, Breakdown) {
    let mut by_sub_task: BTreeMap<&str, (AnswerType, Vec<f64>)> = BTreeMap::new();
    for s in scores {
        by_sub_task
            .entry(s.sub_task.as_str())
            .or_insert_with(|| (s.answer_type, Vec::new()))
            .1
            .push(s.scored.score);
    }
    let per_sub_task: BTreeMap<String, MetricResult> = by_sub_task
        .iter()
        .map(|(id, (t, xs))| {
            (
                id.to_string(),
                MetricResult {
                    metric: Metric::for_answer_type(*t),
                    value: 100.0 * mean(xs.iter().copied()),
                    n: xs.len(),
                },
            )
        })
        .collect();

    let mut per_answer_type = BTreeMap::new();
    for t in AnswerType::ALL {
        let members: Vec<(&MetricResult, usize)> = by_sub_task
            .iter()
            .filter(|(_, (ty, _))| *ty == t)
            .map(|(id, (_, xs))| (&per_sub_task[*id], xs.len()))
            .collect();
        if members.is_empty() {
            continue;
        }
        per_answer_type.insert(
            t.label().to_string(),
            MetricResult {
                metric: Metric::for_answer_type(t),
                value: mean(members.iter().map(|(m, _)| m.value)),
                n: members.iter().map(|(_, n)| n).sum(),
            },
        );
    }
    let overall = MetricResult {
        metric: Metric::Macro,
        value: mean(per_answer_type.values().map(|m: &MetricResult| m.value)),
        n: scores.len(),
    };
    (
        per_sub_task,
        Breakdown {
            per_answer_type,
            overall,
        },
    )
}

pub fn aggregate_scores(scores: &[InstanceScore]) -> EvalReport {
    let all: Vec<&InstanceScore> = scores.iter().collect();
    let (per_sub_task, top) = breakdown(&all);

    let group = |key: fn(&InstanceScore) -> &str| {
        let mut groups: BTreeMap<String, Vec<&InstanceScore>> = BTreeMap::new();
        for s in scores {
            groups.entry(key(s).to_string()).or_default().push(s);
        }
        groups
            .into_iter()
            .map(|(k, v)| (k, breakdown(&v).1))
            .collect::<BTreeMap<_, _>>()
    };

    let mut diagnostics = BTreeMap::new();
    let mut missing = Vec::new();
    for s in scores {
        if let Some(d) = s.scored.diagnostic {
            *diagnostics.entry(d).or_default() += 1;
            if d == Diagnostic::MissingPrediction {
                missing.push(s.instance_id.clone());
            }
        }
    }
    EvalReport {
        per_sub_task,
        per_answer_type: top.per_answer_type,
        overall: top.overall,
        per_domain: group(|s| &s.domain),
        per_split: group(|s| &s.axis),
        diagnostics,
        missing,
    }
}

/// Scores and aggregates in one step.
pub fn aggregate(predictions: &[PredictionRecord], corpus: &[CorpusRecord]) -> Result<EvalReport> {
    Ok(aggregate_scores(&score_corpus(predictions, corpus)?))
}

impl EvalReport {
    /// Aligned table with one row per domain and split axis plus the overall
    /// row, and one column per answer type plus the average.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, &BTreeMap<String, MetricResult>, f64)> =
            vec![("overall".into(), &self.per_answer_type, self.overall.value)];
        for (d, b) in &self.per_domain {
            rows.push((format!("domain:{d}"), &b.per_answer_type, b.overall.value));
        }
        for (s, b) in &self.per_split {
            rows.push((format!("split:{s}"), &b.per_answer_type, b.overall.value));
        }
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0).max(5);
        let mut out = format!("{:<width$}", "");
        for t in AnswerType::ALL {
            let _ = write!(out, " {:>7}", t.label());
        }
        let _ = writeln!(out, " {:>7}", "AVG");
        for (name, cells, avg) in rows {
            let _ = write!(out, "{name:<width$}");
            for t in AnswerType::ALL {
                match cells.get(t.label()) {
                    Some(m) => {
                        let _ = write!(out, " {:>7.2}", m.value);
                    }
                    None => {
                        let _ = write!(out, " {:>7}", "-");
                    }
                }
            }
            let _ = writeln!(out, " {avg:>7.2}");
        }
        out
    }
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
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
