//! Prediction parsing, scoring and reports.

pub mod parse;
pub mod report;
pub mod score;

pub use parse::{parse_prediction, AnswerParser, ParseFailure, Prediction};
pub use report::{aggregate, read_predictions, EvalReport, Metric, MetricResult, PredictionRecord};
pub use score::{score_instance, set_f1, Diagnostic, Scored};
