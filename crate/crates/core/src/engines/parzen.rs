//! Categorical Parzen-ratio search.
//!
//! After a space-filling warm start the history is split at the top-`gamma`
//! quantile of validation scores. Each axis gets two add-one smoothed
//! histograms over its values, one for the good pulls and one for the rest.
//! Candidates are sampled axis by axis from the good histograms and the one
//! maximizing `prod_j good_j / bad_j` is proposed.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use super::space_filling::UnitGrid;
use super::{to_arm, Engine, Exhausted, History, ParzenConfig};
use crate::rng::EngineRng;
use crate::{ArmIndex, GridSpec};

#[derive(Debug, Clone)]
pub struct Parzen {
    config: ParzenConfig,
    warm_start: usize,
    units: UnitGrid,
}

/// Per-axis smoothed log-probabilities of the good and bad groups.
struct Densities {
    good: Vec<Vec<f64>>,
    bad: Vec<Vec<f64>>,
}

impl Densities {
    fn log_ratio(&self, coords: &[usize]) -> f64 {
        coords
            .iter()
            .enumerate()
            .map(|(j, &c)| self.good[j][c - 1] - self.bad[j][c - 1])
            .sum()
    }
}

fn smoothed(spec: &GridSpec, group: &[&[usize]]) -> Vec<Vec<f64>> {
    spec.sizes()
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let mut counts = vec![1.0; n];
            for coords in group {
                counts[coords[j] - 1] += 1.0;
            }
            let total = (group.len() + n) as f64;
            counts.iter().map(|c| (c / total).ln()).collect()
        })
        .collect()
}

impl Parzen {
    pub fn new(spec: &GridSpec, config: ParzenConfig, warm_start: usize) -> Self {
        Self {
            config,
            warm_start,
            units: UnitGrid::new(spec),
        }
    }

    fn densities(&self, history: &History, spec: &GridSpec) -> Densities {
        let trials = history.trials();
        let lo = trials.iter().map(|t| t.score).fold(f64::INFINITY, f64::min);
        let hi = trials.iter().map(|t| t.score).fold(f64::NEG_INFINITY, f64::max);
        let coords: Vec<&[usize]> = trials.iter().map(|t| t.arm.coords()).collect();
        if lo == hi {
            // No ordering information: both groups are the whole history and
            // every ratio is exactly one.
            let all = smoothed(spec, &coords);
            return Densities {
                good: all.clone(),
                bad: all,
            };
        }
        let mut order: Vec<usize> = (0..trials.len()).collect();
        order.sort_by(|&a, &b| trials[b].score.total_cmp(&trials[a].score).then(a.cmp(&b)));
        let n_good = ((self.config.gamma * trials.len() as f64).ceil() as usize)
            .clamp(1, trials.len());
        let good: Vec<&[usize]> = order[..n_good].iter().map(|&i| coords[i]).collect();
        let bad: Vec<&[usize]> = order[n_good..].iter().map(|&i| coords[i]).collect();
        Densities {
            good: smoothed(spec, &good),
            bad: smoothed(spec, &bad),
        }
    }
}

impl Engine for Parzen {
    fn suggest(
        &mut self,
        history: &History,
        spec: &GridSpec,
        rng: &mut EngineRng,
    ) -> Result<ArmIndex, Exhausted> {
        if history.len() < self.warm_start {
            return to_arm(spec, self.units.maximin(history, rng));
        }
        let dens = self.densities(history, spec);
        let samplers: Vec<WeightedIndex<f64>> = dens
            .good
            .iter()
            .map(|lp| WeightedIndex::new(lp.iter().map(|l| l.exp())).expect("positive weights"))
            .collect();
        let pulled = history.pulled_mask(spec.len());

        let mut best: Option<(f64, Vec<usize>)> = None;
        for _ in 0..self.config.candidates {
            let coords: Vec<usize> = samplers.iter().map(|s| s.sample(rng) + 1).collect();
            if pulled[spec.linear_unchecked(&coords)] {
                continue;
            }
            let score = dens.log_ratio(&coords);
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, coords));
            }
        }
        if let Some((_, coords)) = best {
            return Ok(ArmIndex(coords));
        }

        // Every candidate was already pulled: score the unpulled arms directly.
        let mut best: Option<(f64, usize)> = None;
        for k in (0..spec.len()).filter(|&k| !pulled[k]) {
            let score = dens.log_ratio(&spec.coords_unchecked(k));
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, k));
            }
        }
        to_arm(spec, best.map(|(_, k)| k))
    }
}
