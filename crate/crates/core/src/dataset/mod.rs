//! Instance generation, splits and corpus export.

pub mod export;
pub mod generate;
pub mod roster;
pub mod split;

pub use export::{export_corpus, read_corpus, CorpusRecord, ExportManifest, ExportOptions};
pub use generate::{
    generate_all, generate_lp_instances, generate_structural_instances, FilterConfig, GenerationConfig,
    TaskInstance,
};
pub use roster::{Roster, SubTask};
pub use split::{build_splits, plan_counts, InstanceMeta, Pool, Split, SplitAssignment, SplitConfig};
