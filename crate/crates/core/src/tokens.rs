//! Token estimates and context budgets.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use base64::Engine as _;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use tiktoken_rs::CoreBPE;

use crate::error::{Error, Result};
use crate::serialize::GraphText;

/// Pre-tokenization pattern of the GPT-2 family of byte-level BPE
/// vocabularies.
pub const GPT2_PATTERN: &str =
    r"'(?:[sdmt]|ll|ve|re)| ?\p{L}++| ?\p{N}++| ?[^\s\p{L}\p{N}]++|\s++$|\s+(?!\S)|\s";

pub const DEFAULT_MARGIN: usize = 256;

/// How an estimator is written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    CharsPerToken(f64),
    VocabFile {
        path: PathBuf,
        #[serde(default)]
        pattern: Option<String>,
    },
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig::CharsPerToken(4.0)
    }
}

#[derive(Clone)]
pub enum TokenEstimator {
    /// `ceil(chars / k)`.
    CharsPerToken(f64),
    /// Exact count under a byte-level BPE vocabulary.
    Vocab(Arc<VocabTokenizer>),
}

impl fmt::Debug for TokenEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenEstimator::CharsPerToken(k) => write!(f, "CharsPerToken({k})"),
            TokenEstimator::Vocab(v) => write!(f, "Vocab({})", v.path.display()),
        }
    }
}

impl Default for TokenEstimator {
    fn default() -> Self {
        TokenEstimator::CharsPerToken(4.0)
    }
}

impl TokenEstimator {
    pub fn chars_per_token(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Config(format!("chars per token must be positive, got {k}")));
        }
        Ok(TokenEstimator::CharsPerToken(k))
    }

    /// Resolves a configuration, reading vocabulary files relative to `base`.
    pub fn from_config(config: &EstimatorConfig, base: &Path) -> Result<Self> {
        match config {
            EstimatorConfig::CharsPerToken(k) => Self::chars_per_token(*k),
            EstimatorConfig::VocabFile { path, pattern } => {
                let path = base.join(path);
                Ok(TokenEstimator::Vocab(Arc::new(VocabTokenizer::load(
                    &path,
                    pattern.as_deref().unwrap_or(GPT2_PATTERN),
                )?)))
            }
        }
    }

    pub fn estimate(&self, text: &str) -> usize {
        match self {
            TokenEstimator::CharsPerToken(k) => (text.chars().count() as f64 / k).ceil() as usize,
            TokenEstimator::Vocab(v) => v.count(text),
        }
    }
}

/// A tiktoken-format rank file (`<base64 token> <rank>` per line) with its
/// pre-tokenization pattern.
pub struct VocabTokenizer {
    path: PathBuf,
    bpe: CoreBPE,
}

impl VocabTokenizer {
    pub fn load(path: &Path, pattern: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bad = |line: usize, why: String| {
            Error::Config(format!("{}:{line}: {why}", path.display()))
        };
        let mut encoder: FxHashMap<Vec<u8>, u32> = FxHashMap::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (token, rank) = line
                .split_once(' ')
                .ok_or_else(|| bad(i + 1, "expected `<token> <rank>`".into()))?;
            let token = base64::engine::general_purpose::STANDARD
                .decode(token)
                .map_err(|e| bad(i + 1, e.to_string()))?;
            let rank = rank.trim().parse().map_err(|e| bad(i + 1, format!("{e}")))?;
            encoder.insert(token, rank);
        }
        if encoder.is_empty() {
            return Err(Error::Config(format!("{}: empty vocabulary", path.display())));
        }
        let bpe = CoreBPE::new(encoder, FxHashMap::default(), pattern)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(VocabTokenizer {
            path: path.to_path_buf(),
            bpe,
        })
    }

    pub fn count(&self, text: &str) -> usize {
        self.bpe.encode_ordinary(text).len()
    }
}

/// True when the question, the rendered graph and the answer margin fit in
/// `budget` tokens. The boundary is inclusive.
pub fn fits_budget(
    question: &str,
    graph_text: &GraphText,
    budget: usize,
    estimator: &TokenEstimator,
    margin: usize,
) -> bool {
    estimator.estimate(question) + graph_text.token_estimate + margin <= budget
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::serialize::Format;

    fn text(s: &str, est: &TokenEstimator) -> GraphText {
        GraphText::from_text(Format::Nl, s.to_string(), est)
    }

    #[test]
    fn chars_per_token_arithmetic() {
        let est = TokenEstimator::default();
        assert_eq!(est.estimate(""), 0);
        assert_eq!(est.estimate(&"x".repeat(400)), 100);
        assert_eq!(est.estimate("abcde"), 2);
        assert!(TokenEstimator::chars_per_token(0.0).is_err());
    }

    #[test]
    fn budget_boundaries() {
        let est = TokenEstimator::default();
        let g = text(&"x".repeat(400), &est);
        assert!(fits_budget("What?", &g, 4096, &est, DEFAULT_MARGIN));
        assert!(!fits_budget("", &text("", &est), 0, &est, DEFAULT_MARGIN));
        assert!(!fits_budget("", &text("", &est), 0, &est, 1));
        // 100 graph tokens + 1 question token + 256 margin
        assert!(fits_budget("abc", &g, 357, &est, DEFAULT_MARGIN));
        assert!(!fits_budget("abc", &g, 356, &est, DEFAULT_MARGIN));
    }

    #[test]
    fn missing_vocab_is_config_error() {
        let cfg = EstimatorConfig::VocabFile {
            path: "does/not/exist.tiktoken".into(),
            pattern: None,
        };
        assert!(TokenEstimator::from_config(&cfg, Path::new(".")).is_err());
    }

    #[test]
    fn estimator_config_forms() {
        let a: EstimatorConfig = toml::from_str("chars_per_token = 3.5").unwrap();
        assert_eq!(a, EstimatorConfig::CharsPerToken(3.5));
        let b: EstimatorConfig = toml::from_str("[vocab_file]\npath = \"v.tiktoken\"").unwrap();
        assert!(matches!(b, EstimatorConfig::VocabFile { .. }));
    }
}
