//! From run records to per-engine aggregates.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rank::{p_better_than_random, RankStatistic};
use super::score::{expected_random_best, improvement_degree, normalized_score, overall, ScoreExperiment};
use crate::driver::{budget_with, rank_sequence, Protocol, RunRecord};
use crate::rng;
use crate::{Error, Result, ScoreTable};

pub const DEFAULT_DRAWS: usize = 100_000;

/// A score table together with the labels used for grouping.
#[derive(Debug, Clone)]
pub struct EvalTable {
    pub table: ScoreTable,
    pub model: String,
    pub context: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub draws: usize,
    pub seed: u64,
    pub statistic: RankStatistic,
    /// Compare against random search at this multiplier's budget instead
    /// of the run's own. Needed for runs that pull the whole grid, where
    /// random search and grid search coincide.
    #[serde(default)]
    pub reference_multiplier: Option<u32>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            draws: DEFAULT_DRAWS,
            seed: 0,
            statistic: RankStatistic::Dcg10,
            reference_multiplier: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub key: String,
    pub engine: String,
    pub table: String,
    pub protocol: Protocol,
    pub multiplier: u32,
    pub seed: u64,
    pub budget: usize,
    /// Rank statistic of the run's pull sequence.
    pub statistic: f64,
    /// Only estimated for single-fold runs.
    pub p_better: Option<f64>,
    pub r_star: f64,
    pub r_rand: f64,
    pub r_grid: f64,
    /// `None` when grid and random scores coincide.
    pub normalized: Option<f64>,
}

impl RunMetrics {
    pub fn experiment(&self) -> ScoreExperiment {
        ScoreExperiment {
            r_star: self.r_star,
            r_rand: self.r_rand,
            r_grid: self.r_grid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSummary {
    pub multiplier: u32,
    pub p_runs: usize,
    pub p_mean: Option<f64>,
    pub p_se: Option<f64>,
    pub experiments: usize,
    pub improvement: Option<f64>,
    pub improvement_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSummary {
    pub engine: String,
    pub budgets: Vec<BudgetSummary>,
    /// Requires p and improvement at each of `m = 1, 2, 3`.
    pub overall: Option<f64>,
    /// Models with an improvement degree of at least 50 at some budget.
    pub forte: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsResult {
    pub options: EvalOptions,
    pub runs: Vec<RunMetrics>,
    pub engines: Vec<EngineSummary>,
}

/// `sd / sqrt(n)` with the sample standard deviation; `None` below two values.
pub fn standard_error(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((var / n as f64).sqrt())
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Metrics of a single run against its table.
pub fn evaluate_run(record: &RunRecord, table: &ScoreTable, options: &EvalOptions) -> Result<RunMetrics> {
    let view = record.protocol.view();
    let n = table.len();
    let ranks = rank_sequence(record, table)?;
    let statistic = options.statistic.value(&ranks, n)?;
    let p_better = match record.protocol {
        Protocol::SingleFold(fold) => {
            let seed = rng::mix(&[options.seed, record.seed, record.multiplier as u64, fold as u64]);
            Some(p_better_than_random(&ranks, n, options.statistic, options.draws, seed)?)
        }
        Protocol::CrossValidated => None,
    };
    let tests: Vec<f64> = table.validation_order(view)?.iter().map(|a| a.test).collect();
    let random_budget = match options.reference_multiplier {
        Some(m) => budget_with(record.budget_rule, m, n),
        None => record.budget.min(n),
    };
    let r_rand = expected_random_best(&tests, random_budget)?;
    let r_grid = table.grid_search_score(view)?;
    let normalized = match normalized_score(record.r_star, r_rand, r_grid) {
        Ok(v) => Some(v),
        Err(Error::DegenerateDenominator) => None,
        Err(e) => return Err(e),
    };
    Ok(RunMetrics {
        key: record.key(),
        engine: record.engine.clone(),
        table: record.table.clone(),
        protocol: record.protocol,
        multiplier: record.multiplier,
        seed: record.seed,
        budget: record.budget,
        statistic,
        p_better,
        r_star: record.r_star,
        r_rand,
        r_grid,
        normalized,
    })
}

/// Improvement degree with a standard error over seeds: experiments are
/// grouped by seed, each group is aggregated on its own, and the spread of
/// the group values gives the error.
fn improvement_with_se(runs: &[&RunMetrics]) -> (Option<f64>, Option<f64>) {
    let all: Vec<ScoreExperiment> = runs.iter().map(|r| r.experiment()).collect();
    let value = improvement_degree(&all).ok();
    let mut by_seed: BTreeMap<u64, Vec<ScoreExperiment>> = BTreeMap::new();
    for r in runs {
        by_seed.entry(r.seed).or_default().push(r.experiment());
    }
    let groups: Vec<f64> = by_seed
        .values()
        .filter_map(|g| improvement_degree(g).ok())
        .collect();
    (value, standard_error(&groups))
}

/// Evaluates every record and aggregates per engine and budget multiplier:
/// mean p over single-fold runs and the improvement degree over
/// cross-validated runs. The result does not depend on record order.
pub fn evaluate(
    records: &[RunRecord],
    tables: &BTreeMap<String, EvalTable>,
    options: &EvalOptions,
) -> Result<MetricsResult> {
    if let Some(r) = records.iter().find(|r| !tables.contains_key(&r.table)) {
        return Err(Error::MissingTable(r.table.clone()));
    }
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.key());
    let runs = sorted
        .par_iter()
        .map(|r| evaluate_run(r, &tables[&r.table].table, options))
        .collect::<Result<Vec<_>>>()?;

    let engines: BTreeSet<&str> = runs.iter().map(|r| r.engine.as_str()).collect();
    let summaries = engines
        .into_iter()
        .map(|engine| summarize_engine(engine, &runs, tables))
        .collect();
    Ok(MetricsResult {
        options: *options,
        runs,
        engines: summaries,
    })
}

fn summarize_engine(engine: &str, runs: &[RunMetrics], tables: &BTreeMap<String, EvalTable>) -> EngineSummary {
    let own: Vec<&RunMetrics> = runs.iter().filter(|r| r.engine == engine).collect();
    let multipliers: BTreeSet<u32> = own.iter().map(|r| r.multiplier).collect();
    let budgets: Vec<BudgetSummary> = multipliers
        .iter()
        .map(|&m| {
            let ps: Vec<f64> = own
                .iter()
                .filter(|r| r.multiplier == m)
                .filter_map(|r| r.p_better)
                .collect();
            let cv: Vec<&RunMetrics> = own
                .iter()
                .copied()
                .filter(|r| r.multiplier == m && r.protocol == Protocol::CrossValidated)
                .collect();
            let (improvement, improvement_se) = improvement_with_se(&cv);
            BudgetSummary {
                multiplier: m,
                p_runs: ps.len(),
                p_mean: mean(&ps),
                p_se: standard_error(&ps),
                experiments: cv.len(),
                improvement,
                improvement_se,
            }
        })
        .collect();

    let at = |m: u32| budgets.iter().find(|b| b.multiplier == m);
    let overall = (|| {
        let mut p = [0.0; 3];
        let mut imp = [0.0; 3];
        for m in 1..=3u32 {
            let b = at(m)?;
            p[m as usize - 1] = b.p_mean?;
            imp[m as usize - 1] = b.improvement?;
        }
        Some(overall(p, imp))
    })();

    let models: BTreeSet<&str> = own.iter().map(|r| tables[&r.table].model.as_str()).collect();
    let forte = models
        .into_iter()
        .filter(|&model| {
            multipliers.iter().any(|&m| {
                let ex: Vec<ScoreExperiment> = own
                    .iter()
                    .filter(|r| {
                        r.multiplier == m
                            && r.protocol == Protocol::CrossValidated
                            && tables[&r.table].model == model
                    })
                    .map(|r| r.experiment())
                    .collect();
                improvement_degree(&ex).is_ok_and(|v| v >= 50.0)
            })
        })
        .map(str::to_string)
        .collect();

    EngineSummary {
        engine: engine.to_string(),
        budgets,
        overall,
        forte,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{self, BudgetRule};
    use crate::{EngineConfig, GridSpec, Landscape, LandscapeSpec};

    fn bowl(seed: u64, noise: f64) -> ScoreTable {
        let grid = GridSpec::from_sizes(&[6, 5]).unwrap();
        LandscapeSpec::new(grid, Landscape::bowl_centered(&[2.0, 4.0]), noise, seed)
            .synthesize(3)
            .unwrap()
    }

    fn tables() -> BTreeMap<String, EvalTable> {
        [("a", "m1"), ("b", "m2")]
            .into_iter()
            .enumerate()
            .map(|(i, (id, model))| {
                (
                    id.to_string(),
                    EvalTable {
                        table: bowl(i as u64, 0.05),
                        model: model.to_string(),
                        context: "ctx".to_string(),
                    },
                )
            })
            .collect()
    }

    fn campaign(tables: &BTreeMap<String, EvalTable>, engines: &[EngineConfig]) -> Vec<RunRecord> {
        let mut out = Vec::new();
        for (id, t) in tables {
            for config in engines {
                for m in 1..=3 {
                    for seed in 0..3 {
                        for protocol in [Protocol::SingleFold(1), Protocol::SingleFold(2), Protocol::CrossValidated] {
                            out.push(
                                driver::run(config, &t.table, id, protocol, m, seed, BudgetRule::default()).unwrap(),
                            );
                        }
                    }
                }
            }
        }
        out
    }

    fn options() -> EvalOptions {
        EvalOptions {
            draws: 500,
            seed: 4,
            statistic: RankStatistic::Dcg10,
            reference_multiplier: None,
        }
    }

    #[test]
    fn standard_error_examples() {
        assert_eq!(standard_error(&[1.0]), None);
        let se = standard_error(&[1.0, 3.0]).unwrap();
        assert!((se - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aggregates_pair_protocols_with_metrics() {
        let tables = tables();
        let records = campaign(&tables, &[EngineConfig::Random, EngineConfig::GridSweep]);
        let result = evaluate(&records, &tables, &options()).unwrap();
        assert_eq!(result.runs.len(), records.len());
        assert_eq!(result.engines.len(), 2);
        for e in &result.engines {
            assert_eq!(e.budgets.len(), 3);
            for b in &e.budgets {
                // 2 tables x 3 seeds x 2 folds / x 1 cv.
                assert_eq!(b.p_runs, 12);
                assert_eq!(b.experiments, 6);
                assert!(b.p_mean.is_some_and(|p| (0.0..=1.0).contains(&p)));
                assert!(b.improvement.is_some_and(f64::is_finite));
            }
            assert!(e.overall.is_some());
        }
        for r in &result.runs {
            assert_eq!(r.p_better.is_some(), r.protocol != Protocol::CrossValidated);
        }
    }

    #[test]
    fn aggregate_matches_direct_computation() {
        let tables = tables();
        let records = campaign(&tables, &[EngineConfig::Random]);
        let result = evaluate(&records, &tables, &options()).unwrap();
        let b = &result.engines[0].budgets[1];
        let cv: Vec<ScoreExperiment> = result
            .runs
            .iter()
            .filter(|r| r.multiplier == 2 && r.protocol == Protocol::CrossValidated)
            .map(|r| r.experiment())
            .collect();
        let (num, den) = cv
            .iter()
            .fold((0.0, 0.0), |(n, d), e| (n + e.r_star - e.r_rand, d + e.r_grid - e.r_rand));
        assert!((b.improvement.unwrap() - 100.0 * num / den).abs() < 1e-9);
        let ps: Vec<f64> = result
            .runs
            .iter()
            .filter(|r| r.multiplier == 2)
            .filter_map(|r| r.p_better)
            .collect();
        assert!((b.p_mean.unwrap() - ps.iter().sum::<f64>() / ps.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn independent_of_record_order() {
        let tables = tables();
        let records = campaign(&tables, &[EngineConfig::Random, EngineConfig::SpaceFilling]);
        let a = evaluate(&records, &tables, &options()).unwrap();
        let mut reversed = records.clone();
        reversed.reverse();
        let b = evaluate(&reversed, &tables, &options()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn full_sweep_scores_one_hundred() {
        let grid = GridSpec::from_sizes(&[4, 4]).unwrap();
        let table = LandscapeSpec::new(grid, Landscape::bowl_centered(&[1.0, 3.0]), 0.0, 0)
            .synthesize(2)
            .unwrap();
        let mut tables = BTreeMap::new();
        tables.insert(
            "t".to_string(),
            EvalTable {
                table: table.clone(),
                model: "m".into(),
                context: "c".into(),
            },
        );
        // m = 4 on N = 16 clamps the budget to the whole grid.
        let record = driver::run(&EngineConfig::GridSweep, &table, "t", Protocol::CrossValidated, 4, 0, BudgetRule::default()).unwrap();
        assert_eq!(record.budget, 16);
        let own = evaluate(std::slice::from_ref(&record), &tables, &options()).unwrap();
        assert_eq!(own.runs[0].r_rand, own.runs[0].r_grid);
        assert_eq!(own.runs[0].normalized, None);
        assert_eq!(own.engines[0].budgets[0].improvement, None);

        let options = EvalOptions {
            reference_multiplier: Some(1),
            ..options()
        };
        let result = evaluate(&[record], &tables, &options).unwrap();
        assert_eq!(result.runs[0].normalized, Some(100.0));
        assert_eq!(result.engines[0].budgets[0].improvement, Some(100.0));
        assert_eq!(result.engines[0].forte, vec!["m".to_string()]);
    }

    #[test]
    fn missing_tables_are_reported() {
        let tables = tables();
        let mut records = campaign(&tables, &[EngineConfig::Random]);
        records[0].table = "nope".into();
        assert!(matches!(
            evaluate(&records, &tables, &options()),
            Err(Error::MissingTable(t)) if t == "nope"
        ));
    }
}
