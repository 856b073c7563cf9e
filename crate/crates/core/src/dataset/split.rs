//! Train/test splits and the three generalization masks.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::generate::TaskInstance;
use super::roster::Roster;
use crate::answer::AnswerType;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    /// `[train, test]` parts per sub-task.
    pub ratio: [u32; 2],
    /// Answer types removed from training entirely.
    pub masked_answer_types: Vec<AnswerType>,
    /// Domains held out for cross-domain evaluation.
    pub unseen_domains: Vec<String>,
    /// Held-out sub-tasks in addition to those marked in the roster.
    pub unseen_sub_tasks: Vec<String>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            ratio: [7, 3],
            masked_answer_types: vec![AnswerType::Pair, AnswerType::Bool, AnswerType::Graph],
            unseen_domains: Vec::new(),
            unseen_sub_tasks: Vec::new(),
        }
    }
}

impl SplitConfig {
    /// No masks at all; only the ratio applies.
    pub fn unmasked() -> Self {
        SplitConfig {
            masked_answer_types: Vec::new(),
            ..Default::default()
        }
    }

    /// Train-pool size for a sub-task of `n` instances.
    pub fn train_count(&self, n: usize) -> usize {
        let [a, b] = self.ratio;
        n * a as usize / (a + b) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.ratio;
        if a + b == 0 {
            return Err(Error::Config("split ratio must not be 0:0".into()));
        }
        if b == 0 {
            return Err(Error::Config(format!("split ratio {a}:{b} leaves no test instances")));
        }
        Ok(())
    }

    fn check_quota(&self, sub_task: &str, n: usize) -> Result<()> {
        if n - self.train_count(n) == 0 {
            return Err(Error::Config(format!(
                "split ratio {}:{} leaves sub-task `{sub_task}` ({n} instances) with no test instances",
                self.ratio[0], self.ratio[1]
            )));
        }
        Ok(())
    }
}

/// Side of the per-sub-task ratio split an instance falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pool {
    Train,
    Test,
}

/// Where an instance ends up once masks are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    /// Train-pool instance of a masked answer type: used nowhere.
    Excluded,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Excluded => "excluded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSplit {
    pub pool: Pool,
    pub split: Split,
    pub unseen_sub_task: bool,
    pub unseen_domain: bool,
    pub unseen_answer_type: bool,
}

impl InstanceSplit {
    fn resolve(pool: Pool, unseen_sub_task: bool, unseen_domain: bool, unseen_answer_type: bool) -> Self {
        let split = if unseen_sub_task || unseen_domain {
            Split::Test
        } else {
            match pool {
                Pool::Test => Split::Test,
                Pool::Train if unseen_answer_type => Split::Excluded,
                Pool::Train => Split::Train,
            }
        };
        InstanceSplit {
            pool,
            split,
            unseen_sub_task,
            unseen_domain,
            unseen_answer_type,
        }
    }

    /// Label for reports: `seen`, or the generalization axis that applies.
    pub fn axis(&self) -> &'static str {
        if self.unseen_domain {
            "unseen_domain"
        } else if self.unseen_sub_task {
            "unseen_sub_task"
        } else if self.unseen_answer_type {
            "unseen_answer_type"
        } else {
            "seen"
        }
    }
}

/// What the splitter needs to know about an instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct InstanceMeta {
    pub instance_id: String,
    pub sub_task: String,
    pub domain: String,
    pub answer_type: AnswerType,
}

impl From<&TaskInstance> for InstanceMeta {
    fn from(i: &TaskInstance) -> Self {
        InstanceMeta {
            instance_id: i.instance_id.clone(),
            sub_task: i.sub_task.clone(),
            domain: i.domain.clone(),
            answer_type: i.answer_type(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub instances: BTreeMap<String, InstanceSplit>,
    pub unseen_sub_tasks: BTreeSet<String>,
    pub unseen_domains: BTreeSet<String>,
    pub masked_answer_types: BTreeSet<AnswerType>,
}

impl SplitAssignment {
    pub fn get(&self, instance_id: &str) -> Option<&InstanceSplit> {
        self.instances.get(instance_id)
    }

    pub fn count(&self, split: Split) -> usize {
        self.instances.values().filter(|s| s.split == split).count()
    }

    pub fn pool_count(&self, pool: Pool) -> usize {
        self.instances.values().filter(|s| s.pool == pool).count()
    }
}

fn unseen_sets(roster: &Roster, config: &SplitConfig) -> Result<(BTreeSet<String>, BTreeSet<String>)> {
    let mut sub_tasks = roster.holdouts();
    for id in &config.unseen_sub_tasks {
        if roster.get(id).is_none() {
            return Err(Error::Config(format!("unseen sub-task `{id}` is not in the roster")));
        }
        sub_tasks.insert(id.clone());
    }
    let domains: BTreeSet<String> = config.unseen_domains.iter().cloned().collect();
    let known = roster.domains();
    if let Some(d) = domains.iter().find(|d| !known.contains(d.as_str())) {
        return Err(Error::Config(format!("unseen domain `{d}` is not in the roster")));
    }
    Ok((sub_tasks, domains))
}

/// Assigns every instance to a pool and a split. Within each sub-task the
/// instances are shuffled by a stream keyed on `(rng_seed, sub-task id)` and
/// the first `ratio` share forms the train pool.
pub fn build_splits(
    instances: &[InstanceMeta],
    roster: &Roster,
    config: &SplitConfig,
    rng_seed: u64,
) -> Result<SplitAssignment> {
    config.validate()?;
    let (unseen_sub_tasks, unseen_domains) = unseen_sets(roster, config)?;
    let masked: BTreeSet<AnswerType> = config.masked_answer_types.iter().copied().collect();

    let mut by_sub_task: BTreeMap<&str, Vec<&InstanceMeta>> = BTreeMap::new();
    let mut seen_ids = BTreeSet::new();
    for inst in instances {
        if !seen_ids.insert(inst.instance_id.as_str()) {
            return Err(Error::Config(format!("duplicate instance id `{}`", inst.instance_id)));
        }
        by_sub_task.entry(inst.sub_task.as_str()).or_default().push(inst);
    }

    let mut out = BTreeMap::new();
    for (sub_task, mut group) in by_sub_task {
        config.check_quota(sub_task, group.len())?;
        group.sort();
        let mut rng = rng::substream(rng_seed, &["split", sub_task]);
        group.shuffle(&mut rng);
        let n_train = config.train_count(group.len());
        for (i, inst) in group.into_iter().enumerate() {
            let pool = if i < n_train { Pool::Train } else { Pool::Test };
            out.insert(
                inst.instance_id.clone(),
                InstanceSplit::resolve(
                    pool,
                    unseen_sub_tasks.contains(&inst.sub_task),
                    unseen_domains.contains(&inst.domain),
                    masked.contains(&inst.answer_type),
                ),
            );
        }
    }
    Ok(SplitAssignment {
        instances: out,
        unseen_sub_tasks,
        unseen_domains,
        masked_answer_types: masked,
    })
}

/// Instance counts for one domain (or the total).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRow {
    pub sub_tasks: usize,
    pub instances: usize,
    pub train_pool: usize,
    pub test_pool: usize,
    pub train: usize,
    pub test: usize,
    pub excluded: usize,
}

impl PlanRow {
    fn add(&mut self, other: &PlanRow) {
        self.sub_tasks += other.sub_tasks;
        self.instances += other.instances;
        self.train_pool += other.train_pool;
        self.test_pool += other.test_pool;
        self.train += other.train;
        self.test += other.test;
        self.excluded += other.excluded;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub per_domain: BTreeMap<String, PlanRow>,
    pub total: PlanRow,
}

/// Split counts from the roster alone, without generating anything.
pub fn plan_counts(roster: &Roster, samples_per_subtask: usize, config: &SplitConfig) -> Result<SplitPlan> {
    config.validate()?;
    let (unseen_sub_tasks, unseen_domains) = unseen_sets(roster, config)?;
    let n = samples_per_subtask;
    let n_train = config.train_count(n);
    let mut per_domain: BTreeMap<String, PlanRow> = BTreeMap::new();
    for st in &roster.sub_tasks {
        config.check_quota(&st.id, n)?;
        let masked = config.masked_answer_types.contains(&st.answer_type());
        let mut row = PlanRow {
            sub_tasks: 1,
            instances: n,
            train_pool: n_train,
            test_pool: n - n_train,
            ..Default::default()
        };
        for (pool, k) in [(Pool::Train, n_train), (Pool::Test, n - n_train)] {
            let s = InstanceSplit::resolve(
                pool,
                unseen_sub_tasks.contains(&st.id),
                unseen_domains.contains(&st.domain),
                masked,
            );
            match s.split {
                Split::Train => row.train += k,
                Split::Test => row.test += k,
                Split::Excluded => row.excluded += k,
            }
        }
        per_domain.entry(st.domain.clone()).or_default().add(&row);
    }
    let mut total = PlanRow::default();
    for row in per_domain.values() {
        total.add(row);
    }
    Ok(SplitPlan { per_domain, total })
}
