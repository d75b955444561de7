//! The sequential loop: propose, look up, append, `L` times.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engines::{uniform_unpulled, Engine, EngineConfig, History, Trial};
use crate::rng::{self, tag};
use crate::{ArmIndex, Error, Result, ScoreTable, View};

/// How validation scores are served to the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// One fold is one independent single-validation experiment.
    SingleFold(usize),
    /// Every pull is scored by the mean over all folds.
    CrossValidated,
}

impl Protocol {
    pub fn view(self) -> View {
        match self {
            Self::SingleFold(k) => View::Fold(k),
            Self::CrossValidated => View::Cv,
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SingleFold(k) => write!(f, "fold{k}"),
            Self::CrossValidated => f.write_str("cv"),
        }
    }
}

/// Rounding rule for `L = m * sqrt(N)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetRule {
    /// `round(m * sqrt(N))`.
    #[default]
    RoundScaled,
    /// `m * round(sqrt(N))`.
    ScaledRound,
}

/// Trial budget `round(m * sqrt(N))`, clamped to `[1, N]`.
pub fn budget_for(multiplier: u32, grid_size: usize) -> usize {
    budget_with(BudgetRule::RoundScaled, multiplier, grid_size)
}

pub fn budget_with(rule: BudgetRule, multiplier: u32, grid_size: usize) -> usize {
    let root = (grid_size as f64).sqrt();
    let l = match rule {
        BudgetRule::RoundScaled => (multiplier as f64 * root).round(),
        BudgetRule::ScaledRound => multiplier as f64 * root.round(),
    } as usize;
    l.clamp(1, grid_size.max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pull {
    pub arm: ArmIndex,
    /// Validation score served to the engine.
    pub val: f64,
    /// The arm had been pulled before in this run; served from memory.
    pub duplicate: bool,
    /// The engine was exhausted and the driver drew a random unpulled arm.
    pub fallback: bool,
}

/// One complete run. Field order is fixed, so serializations of equal
/// records are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub engine: String,
    pub config: Option<EngineConfig>,
    pub table: String,
    pub protocol: Protocol,
    pub multiplier: u32,
    pub budget: usize,
    pub budget_rule: BudgetRule,
    pub seed: u64,
    pub pulls: Vec<Pull>,
    pub fallbacks: usize,
    /// Test score of the best-validation pull (earliest on ties).
    pub r_star: f64,
    /// Test rank of every pull, in pull order.
    pub ranks: Vec<usize>,
}

impl RunRecord {
    /// Stable identifier of the run's configuration tuple.
    pub fn key(&self) -> String {
        run_key(&self.table, &self.engine, self.protocol, self.multiplier, self.seed)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        Ok(serde_json::from_str(line)?)
    }

    /// Index of the pull with the best served validation score.
    pub fn best_pull(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.pulls.iter().enumerate() {
            if p.val > self.pulls[best].val {
                best = i;
            }
        }
        best
    }
}

pub fn run_key(table: &str, engine: &str, protocol: Protocol, multiplier: u32, seed: u64) -> String {
    format!("{table}__{engine}__{protocol}__m{multiplier}__s{seed}")
}

/// Everything that identifies a run except the engine.
#[derive(Debug, Clone, Copy)]
pub struct RunSetup<'a> {
    pub table: &'a ScoreTable,
    pub table_id: &'a str,
    pub protocol: Protocol,
    pub multiplier: u32,
    pub seed: u64,
    pub budget_rule: BudgetRule,
}

impl RunSetup<'_> {
    pub fn budget(&self) -> usize {
        budget_with(self.budget_rule, self.multiplier, self.table.len())
    }

    /// Builds the configured engine and runs it, labeled by its kind.
    pub fn execute(&self, config: &EngineConfig) -> Result<RunRecord> {
        self.execute_labeled(config.kind(), config)
    }

    pub fn execute_labeled(&self, label: &str, config: &EngineConfig) -> Result<RunRecord> {
        let mut engine = config.build(self.table.spec(), self.budget())?;
        self.execute_engine(label, Some(config.clone()), engine.as_mut())
    }

    /// Runs an arbitrary engine. The engine only ever sees validation
    /// scores of the protocol's view; test scores are read afterwards to
    /// derive `r_star` and the rank sequence.
    pub fn execute_engine(
        &self,
        label: &str,
        config: Option<EngineConfig>,
        engine: &mut dyn Engine,
    ) -> Result<RunRecord> {
        if self.multiplier == 0 {
            return Err(Error::Config("budget multiplier must be positive".into()));
        }
        let view = self.protocol.view();
        self.table.check_view(view)?;
        let spec = self.table.spec();
        let budget = self.budget();
        if budget == 0 {
            return Err(Error::Config("budget is zero".into()));
        }
        let fold_key = match self.protocol {
            Protocol::SingleFold(k) => k as u64,
            Protocol::CrossValidated => 0,
        };
        let mut rng = rng::stream(&[tag::ENGINE, self.seed, fold_key]);
        let mut history = History::new();
        let mut pulls = Vec::with_capacity(budget);
        let mut fallbacks = 0;

        while pulls.len() < budget {
            let (linear, fallback) = match engine.suggest(&history, spec, &mut rng) {
                Ok(arm) => (spec.to_linear(&arm)?, false),
                Err(_) => {
                    let k = uniform_unpulled(&history, spec, &mut rng).ok_or_else(|| {
                        Error::Config("no unpulled arm left for fallback".into())
                    })?;
                    fallbacks += 1;
                    (k, true)
                }
            };
            let duplicate = history.contains(linear);
            let val = self.table.validation(linear, view);
            let arm = ArmIndex(spec.coords_unchecked(linear));
            history.push(Trial {
                arm: arm.clone(),
                linear,
                score: val,
            });
            pulls.push(Pull {
                arm,
                val,
                duplicate,
                fallback,
            });
        }

        let linear: Vec<usize> = history.iter().map(|t| t.linear).collect();
        let test_ranks = self.table.test_ranks(view)?;
        let mut record = RunRecord {
            engine: label.to_string(),
            config,
            table: self.table_id.to_string(),
            protocol: self.protocol,
            multiplier: self.multiplier,
            budget,
            budget_rule: self.budget_rule,
            seed: self.seed,
            pulls,
            fallbacks,
            r_star: 0.0,
            ranks: linear.iter().map(|&k| test_ranks[k]).collect(),
        };
        record.r_star = self.table.test(linear[record.best_pull()], view);
        Ok(record)
    }
}

/// Runs a configured engine: `L = budget(m, N)` pulls under `protocol`.
pub fn run(
    config: &EngineConfig,
    table: &ScoreTable,
    table_id: &str,
    protocol: Protocol,
    multiplier: u32,
    seed: u64,
    budget_rule: BudgetRule,
) -> Result<RunRecord> {
    RunSetup {
        table,
        table_id,
        protocol,
        multiplier,
        seed,
        budget_rule,
    }
    .execute(config)
}

/// Test ranks of the pulled arms under the record's view, recomputed from
/// the table.
pub fn rank_sequence(record: &RunRecord, table: &ScoreTable) -> Result<Vec<usize>> {
    let ranks = table.test_ranks(record.protocol.view())?;
    record
        .pulls
        .iter()
        .map(|p| Ok(ranks[table.spec().to_linear(&p.arm)?]))
        .collect()
}
