//! Extracting answers from free-form model output.
//!
//! Only the text after the last "answer is" / "answer:" marker is read when
//! such a marker exists; otherwise the whole output is. Within that segment:
//!
//! - node names are `<type><digits>`, case-insensitive;
//! - pairs (and graph edges) are `(a, b)` groups;
//! - paths are `a -> b -> c` chains, or failing that `[a, b, c]` groups, or
//!   failing that comma-separated nodes per line or `;`-separated chunk;
//! - counts are the first standalone integer;
//! - booleans and link labels are the first yes/no/true/false keyword.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use regex::Regex;

use crate::answer::{Answer, AnswerType, Pair, Path};
use crate::graph::NodeRef;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFailure {
    pub reason: String,
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.reason)
    }
}

impl std::error::Error for ParseFailure {}

pub type Prediction = std::result::Result<Answer, ParseFailure>;

#[derive(Debug, Clone)]
pub struct AnswerParser {
    node: Regex,
    arrow_chain: Regex,
    /// Lower-cased type name to its declared spelling; empty for the
    /// generic parser.
    types: BTreeMap<String, String>,
}

fn marker() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)answer\s*(?:is\b|:)").unwrap())
}

fn integer() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b\d+\b").unwrap())
}

fn keyword() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(yes|no|true|false)\b").unwrap())
}

fn paren_group() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(([^()]*)\)").unwrap())
}

fn bracket_group() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[([^\[\]]*)\]").unwrap())
}

impl AnswerParser {
    /// Parser that recognizes only the given node types.
    pub fn for_types<S: AsRef<str>>(node_types: &[S]) -> Self {
        if node_types.is_empty() {
            return Self::generic();
        }
        let mut names: Vec<&str> = node_types.iter().map(|s| s.as_ref()).collect();
        // longest first so that e.g. `paper` does not shadow `paperback`
        names.sort_by_key(|s| std::cmp::Reverse(s.len()));
        let alternation = names.iter().map(|s| regex::escape(s)).collect::<Vec<_>>().join("|");
        let types = names.iter().map(|s| (s.to_lowercase(), s.to_string())).collect();
        Self::with_type_pattern(&alternation, types)
    }

    /// Parser for any `<identifier><digits>` name; types are lower-cased.
    pub fn generic() -> Self {
        Self::with_type_pattern(r"[a-z_](?:[a-z0-9_]*[a-z_])?", BTreeMap::new())
    }

    fn with_type_pattern(ty: &str, types: BTreeMap<String, String>) -> Self {
        let node = format!(r"(?i)\b({ty})(\d+)\b");
        let bare = format!(r"\b(?:{ty})\d+\b");
        let arrow_chain = format!(r"(?i){bare}(?:\s*(?:->|→|=>)\s*{bare})+");
        AnswerParser {
            node: Regex::new(&node).expect("node pattern"),
            arrow_chain: Regex::new(&arrow_chain).expect("arrow pattern"),
            types,
        }
    }

    /// Node names in order of appearance.
    pub fn nodes_in(&self, text: &str) -> Vec<NodeRef> {
        self.node
            .captures_iter(text)
            .filter_map(|c| {
                let ty = c[1].to_lowercase();
                let ty = if self.types.is_empty() {
                    ty
                } else {
                    self.types.get(&ty)?.clone()
                };
                let id: u64 = c[2].parse().ok()?;
                Some(NodeRef::new(ty, id))
            })
            .collect()
    }

    pub fn parse(&self, raw_output: &str, answer_type: AnswerType) -> Prediction {
        let text = answer_segment(raw_output);
        match answer_type {
            AnswerType::Node => Ok(Answer::NodeSet(self.nodes_in(text).into_iter().collect())),
            AnswerType::Pair => Ok(Answer::PairSet(self.pairs_in(text))),
            AnswerType::Graph => Ok(Answer::EdgeSet(self.pairs_in(text))),
            AnswerType::Path => Ok(Answer::PathSet(self.paths_in(text))),
            AnswerType::Count => integer()
                .find(text)
                .and_then(|m| m.as_str().parse().ok())
                .map(Answer::Count)
                .ok_or_else(|| ParseFailure {
                    reason: "no integer in output".into(),
                }),
            AnswerType::Bool | AnswerType::LinkPrediction => {
                let word = keyword().find(text).ok_or_else(|| ParseFailure {
                    reason: "no yes/no keyword in output".into(),
                })?;
                let yes = matches!(word.as_str().to_ascii_lowercase().as_str(), "yes" | "true");
                Ok(if answer_type == AnswerType::Bool {
                    Answer::Bool(yes)
                } else {
                    Answer::LinkLabel(yes)
                })
            }
        }
    }

    fn pairs_in(&self, text: &str) -> BTreeSet<Pair> {
        paren_group()
            .captures_iter(text)
            .filter_map(|c| match self.nodes_in(&c[1]).as_slice() {
                [a, b] => Some(Pair::new(a.clone(), b.clone())),
                _ => None,
            })
            .collect()
    }

    fn paths_in(&self, text: &str) -> BTreeSet<Path> {
        let chains: Vec<Vec<NodeRef>> = self
            .arrow_chain
            .find_iter(text)
            .map(|m| self.nodes_in(m.as_str()))
            .collect();
        let candidates = if !chains.is_empty() {
            chains
        } else {
            let brackets: Vec<Vec<NodeRef>> = bracket_group()
                .captures_iter(text)
                .map(|c| self.nodes_in(&c[1]))
                .collect();
            if !brackets.is_empty() {
                brackets
            } else {
                text.split(['\n', ';']).map(|chunk| self.nodes_in(chunk)).collect()
            }
        };
        candidates
            .into_iter()
            .filter(|p| p.len() >= 2)
            .map(|p| Path(p).oriented())
            .collect()
    }
}

/// Text after the last answer marker, or all of it.
pub fn answer_segment(raw: &str) -> &str {
    match marker().find_iter(raw).last() {
        Some(m) => &raw[m.end()..],
        None => raw,
    }
}

/// [`AnswerParser::parse`] with the generic node pattern.
pub fn parse_prediction(raw_output: &str, answer_type: AnswerType) -> Prediction {
    AnswerParser::generic().parse(raw_output, answer_type)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> NodeRef {
        s.parse().unwrap()
    }

    fn shop() -> AnswerParser {
        AnswerParser::for_types(&["product", "brand"])
    }

    #[test]
    fn documented_examples() {
        for p in [shop(), AnswerParser::generic()] {
            assert_eq!(
                p.parse("The answer is: product3, product5", AnswerType::Node).unwrap(),
                Answer::NodeSet([n("product3"), n("product5")].into())
            );
            assert_eq!(p.parse("There are 4 such nodes.", AnswerType::Count).unwrap(), Answer::Count(4));
            assert_eq!(
                p.parse("product1 -> brand1 -> product2", AnswerType::Path).unwrap(),
                Answer::PathSet([Path(vec![n("product1"), n("brand1"), n("product2")])].into())
            );
        }
    }

    #[test]
    fn case_and_order_are_normalized() {
        let a = shop().parse("Brand1, PRODUCT2 and product1", AnswerType::Node).unwrap();
        let b = shop().parse("product1, product2, brand1", AnswerType::Node).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn last_marker_wins() {
        let raw = "My first answer is 3. On reflection the answer is 5.";
        assert_eq!(shop().parse(raw, AnswerType::Count).unwrap(), Answer::Count(5));
    }

    #[test]
    fn node_digits_are_not_counts() {
        assert_eq!(
            shop().parse("product12 has 7 neighbors", AnswerType::Count).unwrap(),
            Answer::Count(7)
        );
        assert!(shop().parse("product12 has many", AnswerType::Count).is_err());
    }

    #[test]
    fn pairs_and_edges() {
        let a = shop()
            .parse("(product1, brand1), (product3, product2) and (product9)", AnswerType::Pair)
            .unwrap();
        assert_eq!(
            a,
            Answer::PairSet(
                [
                    Pair::new(n("brand1"), n("product1")),
                    Pair::new(n("product2"), n("product3"))
                ]
                .into()
            )
        );
    }

    #[test]
    fn path_fallbacks() {
        let want: BTreeSet<Path> = [
            Path(vec![n("product1"), n("brand1"), n("product2")]),
            Path(vec![n("product1"), n("product3"), n("product2")]),
        ]
        .into();
        let arrows = "Paths from product1 to product2: product1 -> brand1 -> product2; product2 -> product3 -> product1";
        let brackets = "[product1, brand1, product2], [product1, product3, product2]";
        let lines = "product1, brand1, product2\nproduct1, product3, product2";
        for raw in [arrows, brackets, lines] {
            assert_eq!(shop().parse(raw, AnswerType::Path).unwrap(), Answer::PathSet(want.clone()), "{raw}");
        }
    }

    #[test]
    fn keywords() {
        assert_eq!(shop().parse("Yes, they are linked.", AnswerType::Bool).unwrap(), Answer::Bool(true));
        assert_eq!(shop().parse("false", AnswerType::Bool).unwrap(), Answer::Bool(false));
        assert_eq!(
            shop().parse("No.", AnswerType::LinkPrediction).unwrap(),
            Answer::LinkLabel(false)
        );
        assert!(shop().parse("", AnswerType::LinkPrediction).is_err());
        // "know" and "nothing" are not keywords
        assert!(shop().parse("I know nothing", AnswerType::Bool).is_err());
    }

    #[test]
    fn set_kinds_never_fail() {
        for t in [AnswerType::Node, AnswerType::Pair, AnswerType::Path, AnswerType::Graph] {
            let a = shop().parse("", t).unwrap();
            assert!(a.is_empty_set());
            assert!(shop().parse("none", t).unwrap().is_empty_set());
        }
    }

    #[test]
    fn typed_parser_ignores_other_names() {
        assert_eq!(
            shop().parse("product1, venue2", AnswerType::Node).unwrap(),
            Answer::NodeSet([n("product1")].into())
        );
    }
}
