//! Rank-based statistics and the probability of beating random search.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{self, tag};
use crate::{Error, Result};

/// Largest rank counted as a top-10% hit: `floor(N / 10)`.
pub fn top10_threshold(grid_size: usize) -> usize {
    grid_size / 10
}

fn check_ranks(ranks: &[usize], grid_size: usize) -> Result<()> {
    match ranks.iter().find(|&&r| r == 0 || r > grid_size) {
        Some(r) => Err(Error::OutOfRange(format!("rank {r} outside [1, {grid_size}]"))),
        None => Ok(()),
    }
}

fn dcg_unchecked(ranks: impl Iterator<Item = usize>, threshold: usize) -> f64 {
    ranks
        .enumerate()
        .filter(|&(_, r)| r <= threshold)
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum()
}

/// Position-discounted count of top-10% arms:
/// `sum_l 1/log2(l + 1) * [rank_l <= 0.1 N]`.
pub fn dcg10(ranks: &[usize], grid_size: usize) -> Result<f64> {
    check_ranks(ranks, grid_size)?;
    Ok(dcg_unchecked(ranks.iter().copied(), top10_threshold(grid_size)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AltStatistics {
    /// 1-based pull index of the first top-10% arm.
    pub time_to_top10: Option<usize>,
    pub best_rank: usize,
}

pub fn alt_statistics(ranks: &[usize], grid_size: usize) -> Result<AltStatistics> {
    check_ranks(ranks, grid_size)?;
    let threshold = top10_threshold(grid_size);
    Ok(AltStatistics {
        time_to_top10: ranks.iter().position(|&r| r <= threshold).map(|i| i + 1),
        best_rank: ranks.iter().copied().min().unwrap_or(grid_size),
    })
}

/// A rank-sequence statistic, oriented so that larger is better.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankStatistic {
    #[default]
    Dcg10,
    /// Negated first-hit time; sequences without a hit score `-(L + 1)`.
    TimeToTop10,
    /// Negated best rank.
    BestRank,
}

impl RankStatistic {
    pub fn value(self, ranks: &[usize], grid_size: usize) -> Result<f64> {
        check_ranks(ranks, grid_size)?;
        Ok(self.value_unchecked(ranks, grid_size))
    }

    fn value_unchecked(self, ranks: &[usize], grid_size: usize) -> f64 {
        let threshold = top10_threshold(grid_size);
        match self {
            Self::Dcg10 => dcg_unchecked(ranks.iter().copied(), threshold),
            Self::TimeToTop10 => {
                let t = ranks
                    .iter()
                    .position(|&r| r <= threshold)
                    .map_or(ranks.len() + 1, |i| i + 1);
                -(t as f64)
            }
            Self::BestRank => -(ranks.iter().copied().min().unwrap_or(grid_size) as f64),
        }
    }
}

/// Random search's rank sequence for draw `j`: `budget` distinct ranks from
/// `[1, N]` in uniformly random order, from a stream keyed by `(seed, j)`.
pub fn random_ranks(grid_size: usize, budget: usize, seed: u64, draw: u64) -> Vec<usize> {
    let mut rng = rng::stream(&[tag::RANDOM_DRAW, seed, draw]);
    index::sample(&mut rng, grid_size, budget)
        .into_iter()
        .map(|i| i + 1)
        .collect()
}

/// Monte Carlo estimate of `P(s(engine) > s(random))` over `draws` random
/// sequences of the same length. Ties count as losses.
pub fn p_better_than_random(
    ranks: &[usize],
    grid_size: usize,
    statistic: RankStatistic,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    if draws == 0 {
        return Err(Error::Config("at least one random draw is required".into()));
    }
    if ranks.is_empty() || ranks.len() > grid_size {
        return Err(Error::Config(format!(
            "rank sequence of length {} cannot be compared on a grid of size {grid_size}",
            ranks.len()
        )));
    }
    let engine = statistic.value(ranks, grid_size)?;
    let wins = (0..draws as u64)
        .into_par_iter()
        .filter(|&j| {
            let draw = random_ranks(grid_size, ranks.len(), seed, j);
            engine > statistic.value_unchecked(&draw, grid_size)
        })
        .count();
    Ok(wins as f64 / draws as f64)
}
