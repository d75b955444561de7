//! Score-based metrics: expected random-search score, sandwich
//! normalization between random and full grid search, and aggregation.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Expected best-validation test score of random search at `budget`:
/// every arm is included independently with probability `p = L/N`, empty
/// draws are discarded, and the best-validation included arm is reported.
///
/// `tests_in_validation_order` lists the test score of every arm, sorted by
/// descending validation score.
pub fn expected_random_best(tests_in_validation_order: &[f64], budget: usize) -> Result<f64> {
    let n = tests_in_validation_order.len();
    if budget == 0 || budget > n {
        return Err(Error::Config(format!("budget {budget} outside [1, {n}]")));
    }
    let miss = 1.0 - budget as f64 / n as f64;
    let mut weight = 1.0;
    let (mut num, mut den) = (0.0, 0.0);
    for &r in tests_in_validation_order {
        if weight == 0.0 {
            break;
        }
        num += weight * r;
        den += weight;
        weight *= miss;
    }
    Ok(num / den)
}

/// One experiment for the improvement degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreExperiment {
    pub r_star: f64,
    pub r_rand: f64,
    pub r_grid: f64,
}

impl ScoreExperiment {
    /// Grid and random scores coincide up to rounding, leaving no scale.
    pub fn is_degenerate(&self) -> bool {
        let scale = 1f64.max(self.r_grid.abs()).max(self.r_rand.abs());
        (self.r_grid - self.r_rand).abs() <= 1e-12 * scale
    }
}

/// `100 (r* - r_rand) / (r_grid - r_rand)`: 0 at random search, 100 at
/// full grid search, above 100 when grid search overfits validation.
pub fn normalized_score(r_star: f64, r_rand: f64, r_grid: f64) -> Result<f64> {
    let e = ScoreExperiment {
        r_star,
        r_rand,
        r_grid,
    };
    if e.is_degenerate() {
        return Err(Error::DegenerateDenominator);
    }
    Ok(100.0 * ((r_star - r_rand) / (r_grid - r_rand)))
}

/// Normalized scores aggregated with weights `r_grid - r_rand`:
/// `100 sum(r* - r_rand) / sum(r_grid - r_rand)`. Degenerate experiments
/// contribute to neither sum.
pub fn improvement_degree(experiments: &[ScoreExperiment]) -> Result<f64> {
    let (num, den) = experiments
        .iter()
        .filter(|e| !e.is_degenerate())
        .fold((0.0, 0.0), |(n, d), e| {
            (n + (e.r_star - e.r_rand), d + (e.r_grid - e.r_rand))
        });
    if den == 0.0 {
        return Err(Error::UndefinedAggregate(
            "every experiment has r_grid == r_rand".into(),
        ));
    }
    Ok(100.0 * (num / den))
}

/// Equal-weight blend of the two metric families over budgets `m = 1, 2, 3`:
/// `(mean p [%] - 50) + mean improvement / 2`. Random search scores 0.
pub fn overall(p_by_m: [f64; 3], improvement_by_m: [f64; 3]) -> f64 {
    let p = p_by_m.iter().sum::<f64>() / 3.0;
    let imp = improvement_by_m.iter().sum::<f64>() / 3.0;
    (100.0 * p - 50.0) + imp / 2.0
}
