//! Campaign configuration files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use gridarena_core::driver::BudgetRule;
use gridarena_core::{EngineConfig, LandscapeSpec, LoadOptions, Protocol, ScoreTable, TableFormat};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SEED_ENV: &str = "GRIDARENA_SEED";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub tables: Vec<TableEntry>,
    pub engines: Vec<EngineEntry>,
    #[serde(default = "default_multipliers")]
    pub multipliers: Vec<u32>,
    /// Falls back to a single seed from `GRIDARENA_SEED` when empty.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<ProtocolSet>,
    #[serde(default)]
    pub budget_rule: BudgetRule,
}

fn default_multipliers() -> Vec<u32> {
    vec![1, 2, 3]
}

fn default_protocols() -> Vec<ProtocolSet> {
    vec![ProtocolSet::SingleFoldAll, ProtocolSet::CrossValidated]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolSet {
    /// One single-fold run per fold.
    SingleFoldAll,
    CrossValidated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableEntry {
    pub id: String,
    /// Model label used for grouping; defaults to the table id.
    #[serde(default)]
    pub model: Option<String>,
    /// Data-set label used for grouping; defaults to `"default"`.
    #[serde(default)]
    pub context: Option<String>,
    #[serde(flatten)]
    pub source: TableSource,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableSource {
    Synthetic {
        landscape: LandscapeSpec,
        folds: usize,
    },
    File {
        path: PathBuf,
        #[serde(default)]
        format: Option<TableFormat>,
        #[serde(default)]
        manifest: Option<PathBuf>,
        #[serde(default)]
        minimize: bool,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineEntry {
    /// Label in run keys and reports; defaults to the engine kind.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub config: EngineConfig,
}

impl EngineEntry {
    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(self.config.kind())
    }
}

/// Group labels stored next to each materialized table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMeta {
    pub id: String,
    pub model: String,
    pub context: String,
}

impl TableEntry {
    pub fn meta(&self) -> TableMeta {
        TableMeta {
            id: self.id.clone(),
            model: self.model.clone().unwrap_or_else(|| self.id.clone()),
            context: self.context.clone().unwrap_or_else(|| "default".into()),
        }
    }

    /// Builds or loads the table. Relative paths resolve against `base`.
    pub fn materialize(&self, base: &Path) -> CliResult<ScoreTable> {
        match &self.source {
            TableSource::Synthetic { landscape, folds } => landscape
                .synthesize(*folds)
                .map_err(|e| CliError::config(format!("table {}", self.id), e)),
            TableSource::File {
                path,
                format,
                manifest,
                minimize,
            } => {
                let path = base.join(path);
                let format = match format {
                    Some(f) => *f,
                    None => TableFormat::from_path(&path).ok_or_else(|| {
                        CliError::Config(format!(
                            "table {}: cannot infer the format of {}",
                            self.id,
                            path.display()
                        ))
                    })?,
                };
                let opts = LoadOptions {
                    manifest: manifest.as_ref().map(|m| base.join(m)),
                    minimize: *minimize,
                };
                gridarena_core::table::load_table(&path, format, &opts)
                    .map_err(|e| CliError::data(path.display(), e))
            }
        }
    }
}

/// Ids and engine labels become parts of file names and run keys.
fn check_label(what: &str, label: &str) -> CliResult<()> {
    let ok = !label.is_empty()
        && !label.contains("__")
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !label.starts_with('.');
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{what} `{label}` must be non-empty ASCII letters, digits, `_`, `-` or `.`, without `__`"
        )))
    }
}

impl CampaignConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(path.display(), e))?;
        let mut config: Self =
            serde_json::from_str(&text).map_err(|e| CliError::config(path.display(), e))?;
        config.resolve_seeds(std::env::var(SEED_ENV).ok().as_deref())?;
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_seeds(&mut self, env: Option<&str>) -> CliResult<()> {
        if self.seeds.is_empty() {
            if let Some(s) = env {
                let seed = s
                    .trim()
                    .parse()
                    .map_err(|e| CliError::config(format!("{SEED_ENV}={s}"), e))?;
                self.seeds.push(seed);
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.tables.is_empty() {
            return Err(CliError::Config("no tables configured".into()));
        }
        if self.engines.is_empty() {
            return Err(CliError::Config("no engines configured".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config(format!(
                "no seeds configured and {SEED_ENV} is not set"
            )));
        }
        if self.multipliers.is_empty() || self.multipliers.contains(&0) {
            return Err(CliError::Config("multipliers must be a non-empty list of positive integers".into()));
        }
        if self.protocols.is_empty() {
            return Err(CliError::Config("no protocols configured".into()));
        }
        let mut ids = BTreeSet::new();
        for t in &self.tables {
            check_label("table id", &t.id)?;
            if !ids.insert(&t.id) {
                return Err(CliError::Config(format!("duplicate table id `{}`", t.id)));
            }
            if let TableSource::Synthetic { folds: 0, .. } = t.source {
                return Err(CliError::Config(format!("table {}: folds must be positive", t.id)));
            }
        }
        let mut labels = BTreeSet::new();
        for e in &self.engines {
            check_label("engine name", e.label())?;
            if !labels.insert(e.label()) {
                return Err(CliError::Config(format!(
                    "duplicate engine label `{}`; give repeated kinds distinct names",
                    e.label()
                )));
            }
            e.config
                .validate()
                .map_err(|err| CliError::config(format!("engine {}", e.label()), err))?;
        }
        Ok(())
    }

    /// Every protocol to run on a table with `folds` folds.
    pub fn protocols_for(&self, folds: usize) -> Vec<Protocol> {
        let mut out = Vec::new();
        for set in &self.protocols {
            match set {
                ProtocolSet::SingleFoldAll => out.extend((1..=folds).map(Protocol::SingleFold)),
                ProtocolSet::CrossValidated => out.push(Protocol::CrossValidated),
            }
        }
        out.dedup();
        out
    }
}
