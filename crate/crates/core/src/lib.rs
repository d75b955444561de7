//! Grid-replay benchmarking of sequential hyperparameter-optimization engines.
//!
//! Every arm of a discrete hyperparameter grid is scored ahead of time into a
//! [`ScoreTable`]. Search engines are then replayed against the table by the
//! [`driver`], and the resulting runs are scored with rank-based and
//! score-based [`metrics`] that normalize across grids, folds and seeds.
//!
//! ```
//! use gridarena_core::{driver, EngineConfig, GridSpec, Landscape, LandscapeSpec, Protocol};
//!
//! let grid = GridSpec::from_sizes(&[5, 5]).unwrap();
//! let land = LandscapeSpec::new(grid, Landscape::bowl_centered(&[3.0, 3.0]), 0.0, 7);
//! let table = land.synthesize(1).unwrap();
//!
//! let record = driver::run(
//!     &EngineConfig::GridSweep,
//!     &table,
//!     "bowl",
//!     Protocol::SingleFold(1),
//!     1,
//!     0,
//!     driver::BudgetRule::default(),
//! )
//! .unwrap();
//! assert_eq!(record.pulls.len(), 5);
//! ```

pub mod driver;
pub mod engines;
mod error;
pub mod grid;
pub mod metrics;
pub mod rng;
pub mod table;

pub use driver::{BudgetRule, Protocol, Pull, RunRecord};
pub use engines::{Engine, EngineConfig, Exhausted, History, Trial};
pub use error::{Error, Result};
pub use grid::{ArmIndex, Axis, GridSpec};
pub use table::{Landscape, LandscapeSpec, LoadOptions, RankedArm, ScoreTable, TableFormat, View};
