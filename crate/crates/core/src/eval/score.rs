//! Per-instance scores: exact match for counts and labels, set F1 for the
//! rest.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::parse::Prediction;
use crate::answer::Answer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnostic {
    ParseFailure,
    KindMismatch,
    MissingPrediction,
    /// The query client gave up on this instance.
    RequestFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub score: f64,
    pub diagnostic: Option<Diagnostic>,
}

impl Scored {
    fn zero(d: Diagnostic) -> Self {
        Scored {
            score: 0.0,
            diagnostic: Some(d),
        }
    }
}

/// `2|P∩G| / (|P|+|G|)`; two empty sets score 1.
pub fn set_f1<T: Ord>(pred: &BTreeSet<T>, gold: &BTreeSet<T>) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    let hit = pred.intersection(gold).count();
    2.0 * hit as f64 / (pred.len() + gold.len()) as f64
}

pub fn score_instance(pred: &Prediction, gold: &Answer) -> Scored {
    let pred = match pred {
        Ok(p) => p,
        Err(_) => return Scored::zero(Diagnostic::ParseFailure),
    };
    if pred.answer_type() != gold.answer_type() {
        return Scored::zero(Diagnostic::KindMismatch);
    }
    let score = match (pred.elements(), gold.elements()) {
        (Some(p), Some(g)) => set_f1(&p, &g),
        _ => {
            if pred == gold {
                1.0
            } else {
                0.0
            }
        }
    };
    Scored {
        score,
        diagnostic: None,
    }
}
