//! Pipeline configuration file.
//!
//! Relative paths are resolved against the directory holding the config
//! file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use graphinst::dataset::generate::{FilterConfig, GenerationConfig, DEFAULT_PROMPT_TEMPLATE};
use graphinst::dataset::{Roster, SplitConfig};
use graphinst::ingest::Adapter;
use graphinst::tokens::{EstimatorConfig, TokenEstimator, DEFAULT_MARGIN};
use graphinst::{Format, SampleConfig};

use crate::query::EndpointConfig;
use crate::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSource {
    pub adapter: PathBuf,
    pub records: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub roster: PathBuf,
    pub samples_per_subtask: usize,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_margin")]
    pub margin: usize,
    #[serde(default)]
    pub prompt_template: Option<String>,
    #[serde(default)]
    pub domains: Vec<DomainSource>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    pub sampler: SampleConfig,
    #[serde(default)]
    pub filters: FilterConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub endpoint: Option<EndpointConfig>,
    /// Directory the relative paths above are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_formats() -> Vec<Format> {
    Format::ALL.to_vec()
}

fn default_budget() -> usize {
    4096
}

fn default_margin() -> usize {
    DEFAULT_MARGIN
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        config.base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(config)
    }

    /// Applies `--seed` and `--out`, then checks the result.
    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Result<Self> {
        if seed.is_some() {
            self.seed = seed;
        }
        if let Some(out) = out {
            self.output_dir = Some(out);
        } else if let Some(dir) = &self.output_dir {
            self.output_dir = Some(self.base_dir.join(dir));
        }
        Ok(self)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.base_dir.join(p)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| ConfigError("a master seed is required (config `seed` or --seed)".into()).into())
    }

    pub fn output_dir(&self) -> Result<&Path> {
        self.output_dir
            .as_deref()
            .ok_or_else(|| ConfigError("an output directory is required (config `output_dir` or --out)".into()).into())
    }

    pub fn roster_path(&self) -> PathBuf {
        self.resolve(&self.roster)
    }

    pub fn load_roster(&self) -> Result<Roster> {
        Roster::load(&self.roster_path()).map_err(|e| ConfigError(e.to_string()).into())
    }

    pub fn load_adapters(&self) -> Result<Vec<(Adapter, PathBuf)>> {
        self.domains
            .iter()
            .map(|d| {
                let adapter = Adapter::load(&self.resolve(&d.adapter)).map_err(|e| ConfigError(e.to_string()))?;
                Ok((adapter, self.resolve(&d.records)))
            })
            .collect()
    }

    pub fn estimator(&self) -> Result<TokenEstimator> {
        TokenEstimator::from_config(&self.estimator, &self.base_dir).map_err(|e| ConfigError(e.to_string()).into())
    }

    pub fn prompt_template(&self) -> &str {
        self.prompt_template.as_deref().unwrap_or(DEFAULT_PROMPT_TEMPLATE)
    }

    pub fn generation_config(&self, estimator: TokenEstimator) -> GenerationConfig {
        let mut g = GenerationConfig::new(self.samples_per_subtask, self.sampler.clone());
        g.estimator = estimator;
        g.budget = self.budget;
        g.margin = self.margin;
        g.formats = self.formats.clone();
        g.prompt_template = self.prompt_template().to_string();
        g.filters = self.filters.clone();
        g
    }

    /// Files the run stages read.
    pub fn input_files(&self) -> Vec<PathBuf> {
        let mut files = vec![self.roster_path()];
        for d in &self.domains {
            files.push(self.resolve(&d.adapter));
            files.push(self.resolve(&d.records));
        }
        if let EstimatorConfig::VocabFile { path, .. } = &self.estimator {
            files.push(self.resolve(path));
        }
        files
    }

    /// Checks everything a pipeline run needs, including that every
    /// referenced file exists.
    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        self.output_dir()?;
        for f in self.input_files() {
            if !f.is_file() {
                bail!(ConfigError(format!("referenced file {} does not exist", f.display())));
            }
        }
        self.validate_static()?;
        let roster = self.load_roster()?;
        let adapters = self.load_adapters()?;
        for domain in roster.domains() {
            if !adapters.iter().any(|(a, _)| a.domain == domain) {
                bail!(ConfigError(format!("roster domain `{domain}` has no [[domains]] entry")));
            }
        }
        self.estimator()?;
        Ok(())
    }

    /// Checks that need no files.
    pub fn validate_static(&self) -> Result<()> {
        if self.samples_per_subtask == 0 {
            bail!(ConfigError("samples_per_subtask must be at least 1".into()));
        }
        if self.formats.is_empty() {
            bail!(ConfigError("at least one format is required".into()));
        }
        if self.margin >= self.budget {
            bail!(ConfigError(format!(
                "margin {} leaves no room in budget {}",
                self.margin, self.budget
            )));
        }
        self.sampler.validate().map_err(|e| ConfigError(e.to_string()))?;
        self.split.validate().map_err(|e| ConfigError(e.to_string()))?;
        if let Some(e) = &self.endpoint {
            e.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seed = 1
        roster = "roster.toml"
        samples_per_subtask = 10
        [sampler]
        policy = { mode = "ratio", ratio = 1.0 }
    "#;

    #[test]
    fn defaults_fill_in() {
        let c: PipelineConfig = toml::from_str(MINIMAL).unwrap();
        assert_eq!(c.budget, 4096);
        assert_eq!(c.margin, 256);
        assert_eq!(c.formats, Format::ALL.to_vec());
        assert_eq!(c.split, SplitConfig::default());
        assert_eq!(c.sampler.radius, 2);
        c.validate_static().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<PipelineConfig>(&format!("{MINIMAL}\nbogus = 1")).is_err());
    }

    #[test]
    fn missing_seed_is_reported() {
        let mut c: PipelineConfig = toml::from_str(MINIMAL).unwrap();
        c.seed = None;
        assert!(c.seed().is_err());
    }
}
