//! Rank-based and score-based benchmark metrics and their aggregation.

mod inversion;
mod rank;
mod score;
mod summary;

pub use inversion::{winner_inversion_rate, Inversion, InversionReport, ScoreKey};
pub use rank::{
    alt_statistics, dcg10, p_better_than_random, random_ranks, top10_threshold, AltStatistics, RankStatistic,
};
pub use score::{expected_random_best, improvement_degree, normalized_score, overall, ScoreExperiment};
pub use summary::{
    evaluate, evaluate_run, standard_error, BudgetSummary, EngineSummary, EvalOptions, EvalTable, MetricsResult,
    RunMetrics, DEFAULT_DRAWS,
};
