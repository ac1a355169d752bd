use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{format_timestamp, parse_timestamp, CoreRule};
use crate::embed::{SkipGramConfig, WalkConfig};
use crate::stats::CohortAxis;

pub const WINDOW_CHOICES: [u32; 3] = [6, 12, 24];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    I,
    II,
    III,
    IV,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::I, ModelId::II, ModelId::III, ModelId::IV];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::I => "I",
            ModelId::II => "II",
            ModelId::III => "III",
            ModelId::IV => "IV",
        }
    }

    pub fn uses_degree(self) -> bool {
        self != ModelId::III
    }

    pub fn uses_diversity(self) -> bool {
        matches!(self, ModelId::III | ModelId::IV)
    }

    /// Model I keeps every row with innovativeness; the others also need all
    /// three diversity values.
    pub fn needs_diversity_rows(self) -> bool {
        self != ModelId::I
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(ModelId::I),
            "II" | "2" => Ok(ModelId::II),
            "III" | "3" => Ok(ModelId::III),
            "IV" | "4" => Ok(ModelId::IV),
            other => Err(format!("unknown model {other:?} (expected I, II, III or IV)")),
        }
    }
}

fn ts_ser<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_timestamp(ts))
}

fn ts_de<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
    let raw = String::deserialize(d)?;
    parse_timestamp(&raw).map_err(serde::de::Error::custom)
}

pub fn default_cutoff() -> DateTime<Utc> {
    crate::synth::default_cutoff()
}

fn default_window() -> u32 {
    6
}

fn default_rule() -> CoreRule {
    CoreRule::Pct5Min10
}

fn default_model() -> ModelId {
    ModelId::IV
}

fn default_packages() -> SkipGramConfig {
    SkipGramConfig::packages()
}

/// Everything one pipeline run depends on. Relative paths are resolved
/// against the directory of the config file they were read from.
///
/// The `seed` fields inside the walk and skip-gram sections are ignored:
/// every randomised step derives its seed from the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub events: PathBuf,
    pub projects: PathBuf,
    pub imports: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bots: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub awesome: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default = "default_window")]
    pub window_months: u32,
    #[serde(default = "default_rule")]
    pub core_rule: CoreRule,
    #[serde(default = "default_cutoff", serialize_with = "ts_ser", deserialize_with = "ts_de")]
    pub cutoff: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_model")]
    pub model: ModelId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohort: Option<CohortAxis>,
    #[serde(default)]
    pub walks: WalkConfig,
    #[serde(default)]
    pub commit_embedding: SkipGramConfig,
    #[serde(default)]
    pub issue_embedding: SkipGramConfig,
    #[serde(default)]
    pub star_embedding: SkipGramConfig,
    #[serde(default = "default_packages")]
    pub package_embedding: SkipGramConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl PipelineConfig {
    /// Config with default settings for the given inputs.
    pub fn new(events: PathBuf, projects: PathBuf, imports: PathBuf, output_dir: PathBuf) -> Self {
        PipelineConfig {
            events,
            projects,
            imports,
            bots: None,
            awesome: None,
            output_dir,
            window_months: default_window(),
            core_rule: default_rule(),
            cutoff: default_cutoff(),
            seed: None,
            model: default_model(),
            cohort: None,
            walks: WalkConfig::default(),
            commit_embedding: SkipGramConfig::default(),
            issue_embedding: SkipGramConfig::default(),
            star_embedding: SkipGramConfig::default(),
            package_embedding: SkipGramConfig::packages(),
        }
    }

    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.events);
        fix(&mut self.projects);
        fix(&mut self.imports);
        fix(&mut self.output_dir);
        if let Some(p) = self.bots.as_mut() {
            fix(p);
        }
        if let Some(p) = self.awesome.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !WINDOW_CHOICES.contains(&self.window_months) {
            return Err(ConfigError::Invalid(format!("window_months must be one of 6, 12, 24 (got {})", self.window_months)));
        }
        if self.walks.walk_length == 0 || self.walks.walks_per_node == 0 {
            return Err(ConfigError::Invalid("walks.walk_length and walks.walks_per_node must be positive".into()));
        }
        use crate::embed::CorpusKind;
        for (name, sg, kind) in [
            ("commit_embedding", &self.commit_embedding, CorpusKind::Walks),
            ("issue_embedding", &self.issue_embedding, CorpusKind::Walks),
            ("star_embedding", &self.star_embedding, CorpusKind::Walks),
            ("package_embedding", &self.package_embedding, CorpusKind::Packages),
        ] {
            sg.validate(kind).map_err(|e| ConfigError::Invalid(format!("{name}: {e}")))?;
        }
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| ConfigError::Invalid("a seed is required for embedding stages".into()))
    }

    /// Reduces every skip-gram section to the given dimension and epoch count
    /// and sets the walk count; a convenience for quick runs.
    pub fn with_light_embeddings(mut self, dim: usize, epochs: usize, walks_per_node: usize) -> Self {
        for sg in [&mut self.commit_embedding, &mut self.issue_embedding, &mut self.star_embedding, &mut self.package_embedding] {
            sg.dim = dim;
            sg.epochs = epochs;
        }
        self.walks.walks_per_node = walks_per_node;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::ContextWindow;

    #[test]
    fn minimal_toml_gets_defaults() {
        let text = r#"
            events = "data/events.jsonl"
            projects = "data/projects.csv"
            imports = "/abs/imports.jsonl"
            output_dir = "out"
            seed = 7
        "#;
        let cfg = PipelineConfig::from_toml_str(text, Path::new("/base")).unwrap();
        assert_eq!(cfg.events, PathBuf::from("/base/data/events.jsonl"));
        assert_eq!(cfg.imports, PathBuf::from("/abs/imports.jsonl"));
        assert_eq!(cfg.window_months, 6);
        assert_eq!(cfg.core_rule, CoreRule::Pct5Min10);
        assert_eq!(cfg.model, ModelId::IV);
        assert_eq!(cfg.package_embedding.window, ContextWindow::Full);
        assert_eq!(cfg.cutoff, default_cutoff());
        cfg.validate().unwrap();
    }

    #[test]
    fn round_trips_and_rejects() {
        let mut cfg = PipelineConfig::new("e".into(), "p".into(), "i".into(), "o".into());
        cfg.cohort = Some(CohortAxis::Ownership);
        cfg.core_rule = CoreRule::Cum80;
        cfg.model = ModelId::III;
        let back = PipelineConfig::from_toml_str(&cfg.to_toml(), Path::new("")).unwrap();
        assert_eq!(back, cfg);

        cfg.window_months = 9;
        assert!(cfg.validate().is_err());
        let bad = "events='e'\nprojects='p'\nimports='i'\noutput_dir='o'\nwindow=3\n";
        assert!(PipelineConfig::from_toml_str(bad, Path::new("")).is_err());
        let bad_rule = "events='e'\nprojects='p'\nimports='i'\noutput_dir='o'\ncore_rule='top10'\n";
        assert!(PipelineConfig::from_toml_str(bad_rule, Path::new("")).is_err());
        assert!(cfg.require_seed().is_err());
    }

    #[test]
    fn model_ids() {
        assert_eq!("iii".parse::<ModelId>().unwrap(), ModelId::III);
        assert!("V".parse::<ModelId>().is_err());
        assert!(ModelId::IV.uses_degree() && ModelId::IV.uses_diversity());
        assert!(!ModelId::III.uses_degree());
    }
}
