//! Pre-computed validation and test scores for every (arm, fold) cell.
//!
//! Scores are stored higher-is-better. A [`View`] selects either one fold or
//! the cross-validated mean over all folds; ranks and validation orderings
//! are always taken under a view.

mod io;
mod landscape;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::{ArmIndex, Error, GridSpec, Result};

pub use io::{load_table, save_table, LoadOptions, TableFormat};
pub use landscape::{synth_table, Landscape, LandscapeSpec};

/// Which scores to read: one fold (1-based) or the mean over all folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    Fold(usize),
    Cv,
}

/// An arm in validation order, paired with its test score under the same view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedArm {
    pub linear: usize,
    pub validation: f64,
    pub test: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    spec: GridSpec,
    folds: usize,
    // Indexed by `arm * folds + (fold - 1)`.
    val: Vec<f64>,
    test: Vec<f64>,
}

impl ScoreTable {
    /// Builds a table from flat `arm * folds + fold0` vectors.
    pub fn new(spec: GridSpec, folds: usize, val: Vec<f64>, test: Vec<f64>) -> Result<Self> {
        if folds == 0 {
            return Err(Error::Config("a score table needs at least one fold".into()));
        }
        let cells = spec.len() * folds;
        if val.len() != cells || test.len() != cells {
            return Err(Error::Config(format!(
                "expected {cells} cells, got {} validation and {} test scores",
                val.len(),
                test.len()
            )));
        }
        if let Some(i) = val.iter().chain(&test).position(|v| !v.is_finite()) {
            let cell = i % cells;
            return Err(Error::Parse(format!(
                "non-finite score at arm {} fold {}",
                ArmIndex(spec.coords_unchecked(cell / folds)),
                cell % folds + 1
            )));
        }
        Ok(Self {
            spec,
            folds,
            val,
            test,
        })
    }

    /// Builds a table by evaluating `cell(linear_arm, fold)` -> `(val, test)`
    /// with 1-based folds.
    pub fn from_fn(
        spec: GridSpec,
        folds: usize,
        mut cell: impl FnMut(usize, usize) -> (f64, f64),
    ) -> Result<Self> {
        let cells = spec.len() * folds;
        let mut val = Vec::with_capacity(cells);
        let mut test = Vec::with_capacity(cells);
        for arm in 0..spec.len() {
            for fold in 1..=folds {
                let (v, t) = cell(arm, fold);
                val.push(v);
                test.push(t);
            }
        }
        Self::new(spec, folds, val, test)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Fold count `K`.
    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn len(&self) -> usize {
        self.spec.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn check_view(&self, view: View) -> Result<()> {
        match view {
            View::Fold(k) if k == 0 || k > self.folds => Err(Error::OutOfRange(format!(
                "fold {k} outside [1, {}]",
                self.folds
            ))),
            _ => Ok(()),
        }
    }

    /// Raw score of one cell, 1-based fold.
    pub fn cell(&self, linear: usize, fold: usize) -> (f64, f64) {
        let i = linear * self.folds + fold - 1;
        (self.val[i], self.test[i])
    }

    fn read(&self, data: &[f64], linear: usize, view: View) -> f64 {
        let row = &data[linear * self.folds..(linear + 1) * self.folds];
        match view {
            View::Fold(k) => row[k - 1],
            View::Cv => row.iter().sum::<f64>() / self.folds as f64,
        }
    }

    /// Validation score of an arm under `view`. Panics on an invalid view or
    /// arm; callers validate with [`check_view`](Self::check_view).
    pub fn validation(&self, linear: usize, view: View) -> f64 {
        self.read(&self.val, linear, view)
    }

    pub fn test(&self, linear: usize, view: View) -> f64 {
        self.read(&self.test, linear, view)
    }

    /// Validation scores of all arms under `view`, in linear order.
    pub fn validation_scores(&self, view: View) -> Result<Vec<f64>> {
        self.check_view(view)?;
        Ok((0..self.len()).map(|k| self.validation(k, view)).collect())
    }

    pub fn test_scores(&self, view: View) -> Result<Vec<f64>> {
        self.check_view(view)?;
        Ok((0..self.len()).map(|k| self.test(k, view)).collect())
    }

    /// Mean validation and test score of an arm over the `K` folds.
    pub fn cv_scores(&self, arm: &ArmIndex) -> Result<(f64, f64)> {
        let k = self.spec.to_linear(arm)?;
        Ok((self.validation(k, View::Cv), self.test(k, View::Cv)))
    }

    /// Test rank of every arm (indexed by linear key): 1 is the highest test
    /// score, ties go to the lower linear index.
    pub fn test_ranks(&self, view: View) -> Result<Vec<usize>> {
        let scores = self.test_scores(view)?;
        let mut ranks = vec![0; scores.len()];
        for (r, k) in descending_order(&scores).into_iter().enumerate() {
            ranks[k] = r + 1;
        }
        Ok(ranks)
    }

    /// Arms sorted by descending validation score (ties by linear index),
    /// each paired with its test score. The first entry is the arm full grid
    /// search would select.
    pub fn validation_order(&self, view: View) -> Result<Vec<RankedArm>> {
        let val = self.validation_scores(view)?;
        Ok(descending_order(&val)
            .into_iter()
            .map(|k| RankedArm {
                linear: k,
                validation: val[k],
                test: self.test(k, view),
            })
            .collect())
    }

    /// Test score of the best-validation arm over the full grid.
    pub fn grid_search_score(&self, view: View) -> Result<f64> {
        Ok(self.validation_order(view)?[0].test)
    }
}

fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    idx
}
