use std::io;

use crate::ArmIndex;

/// Errors raised across grid, table, driver and metrics operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("incomplete score table: no score for arm {arm} fold {fold}")]
    Incomplete { arm: ArmIndex, fold: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    /// `r_grid == r_rand`, so the sandwich normalization has no scale.
    #[error("degenerate normalization: grid and random scores coincide")]
    DegenerateDenominator,

    #[error("run references unknown table {0:?}")]
    MissingTable(String),

    #[error("undefined aggregate: {0}")]
    UndefinedAggregate(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
