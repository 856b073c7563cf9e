//! Sub-task rosters.
//!
//! A roster is a TOML file listing sub-tasks:
//!
//! ```toml
//! [[sub_task]]
//! id = "amazon.find_neighbors.brand_products"
//! domain = "amazon"
//! task = "find_neighbors"
//! edge_types = ["brand"]
//! query_types = ["brand"]
//! question = "What are the products of {u}?"
//! ```
//!
//! `query_types` gives the node type of each query node (for
//! `pairs_shared_neighbors`, the type of the node the context is sampled
//! around). Link-prediction sub-tasks take their endpoints from sampled
//! triples and leave it empty. `holdout = true` marks an unseen sub-task.
//!
//! Question templates may use `{u}`, `{v}`, `{c}`, `{edge_type}` (the single
//! edge type), `{edge_types}` and `{node_types}`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::answer::AnswerType;
use crate::error::{Error, Result};
use crate::graph::NodeRef;
use crate::tasks::{TaskKind, TaskSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubTask {
    pub id: String,
    pub domain: String,
    pub task: TaskKind,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub edge_types: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub node_types: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<u32>,
    #[serde(default)]
    pub query_types: Vec<String>,
    pub question: String,
    #[serde(default)]
    pub holdout: bool,
}

impl SubTask {
    pub fn spec(&self) -> TaskSpec {
        TaskSpec {
            task: self.task,
            edge_types: self.edge_types.clone(),
            node_types: self.node_types.clone(),
            hop_or_count: self.c,
        }
    }

    pub fn answer_type(&self) -> AnswerType {
        self.task.answer_type()
    }

    fn expected_query_types(&self) -> usize {
        match self.task {
            TaskKind::LinkPrediction => 0,
            TaskKind::PairsSharedNeighbors => 1,
            t => t.arity(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Error::Config(format!("sub-task `{}`: {why}", self.id));
        if self.id.trim().is_empty() {
            return Err(Error::Config("sub-task with empty id".into()));
        }
        self.spec().validate().map_err(|e| bad(e.to_string()))?;
        if self.query_types.len() != self.expected_query_types() {
            return Err(bad(format!(
                "expected {} query types, got {}",
                self.expected_query_types(),
                self.query_types.len()
            )));
        }
        let arity = self.task.arity();
        for (slot, needed) in [("{u}", arity >= 1), ("{v}", arity >= 2)] {
            if needed && !self.question.contains(slot) {
                return Err(bad(format!("question template lacks {slot}")));
            }
        }
        Ok(())
    }

    /// Fills the question template for the given query nodes.
    pub fn render_question(&self, query: &[NodeRef]) -> String {
        let join = |set: &BTreeSet<String>| set.iter().cloned().collect::<Vec<_>>().join(" and ");
        let mut q = self
            .question
            .replace("{edge_types}", &join(&self.edge_types))
            .replace("{node_types}", &join(&self.node_types))
            .replace(
                "{edge_type}",
                self.edge_types.iter().next().map(String::as_str).unwrap_or(""),
            )
            .replace("{c}", &self.c.map(|c| c.to_string()).unwrap_or_default());
        if let Some(u) = query.first() {
            q = q.replace("{u}", &u.to_string());
        }
        if let Some(v) = query.get(1) {
            q = q.replace("{v}", &v.to_string());
        }
        q
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roster {
    #[serde(rename = "sub_task", default)]
    pub sub_tasks: Vec<SubTask>,
}

impl Roster {
    pub fn from_toml(text: &str) -> Result<Self> {
        let roster: Roster = toml::from_str(text).map_err(|e| Error::Config(format!("roster: {e}")))?;
        roster.validate()?;
        Ok(roster)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Ids are unique, and so is each `(domain, task spec)`.
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        let mut specs = BTreeSet::new();
        for st in &self.sub_tasks {
            st.validate()?;
            if !ids.insert(&st.id) {
                return Err(Error::Config(format!("duplicate sub-task id `{}`", st.id)));
            }
            if !specs.insert((st.domain.clone(), st.spec(), st.query_types.clone())) {
                return Err(Error::Config(format!(
                    "sub-task `{}` repeats the task spec of another sub-task",
                    st.id
                )));
            }
        }
        Ok(())
    }

    pub fn domains(&self) -> BTreeSet<&str> {
        self.sub_tasks.iter().map(|s| s.domain.as_str()).collect()
    }

    pub fn for_domain<'a>(&'a self, domain: &'a str) -> impl Iterator<Item = &'a SubTask> + 'a {
        self.sub_tasks.iter().filter(move |s| s.domain == domain)
    }

    pub fn get(&self, id: &str) -> Option<&SubTask> {
        self.sub_tasks.iter().find(|s| s.id == id)
    }

    pub fn holdouts(&self) -> BTreeSet<String> {
        self.sub_tasks
            .iter()
            .filter(|s| s.holdout)
            .map(|s| s.id.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROSTER: &str = r#"
        [[sub_task]]
        id = "shop.find_neighbors.brand"
        domain = "shop"
        task = "find_neighbors"
        edge_types = ["brand"]
        query_types = ["brand"]
        question = "What are the products of {u}?"

        [[sub_task]]
        id = "shop.path_count.3"
        domain = "shop"
        task = "path_count"
        c = 3
        query_types = ["product", "product"]
        question = "How many {c}-hop simple paths exist between {u} and {v}?"
        holdout = true
    "#;

    #[test]
    fn parses_and_renders() {
        let r = Roster::from_toml(ROSTER).unwrap();
        assert_eq!(r.sub_tasks.len(), 2);
        assert_eq!(r.holdouts().len(), 1);
        let q = r.sub_tasks[1].render_question(&["product11".parse().unwrap(), "product12".parse().unwrap()]);
        assert_eq!(q, "How many 3-hop simple paths exist between product11 and product12?");
    }

    #[test]
    fn rejects_duplicates_and_bad_templates() {
        let dup = format!("{ROSTER}\n{}", &ROSTER[..ROSTER.find("[[sub_task]]\n        id = \"shop.path").unwrap()]);
        assert!(Roster::from_toml(&dup).is_err());
        let bad = ROSTER.replace("between {u} and {v}", "between {u}");
        assert!(Roster::from_toml(&bad).is_err());
        let wrong_arity = ROSTER.replace("query_types = [\"brand\"]", "query_types = []");
        assert!(Roster::from_toml(&wrong_arity).is_err());
    }
}
