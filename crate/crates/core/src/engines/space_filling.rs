use rand::seq::IndexedRandom;

use super::{to_arm, Engine, Exhausted, History};
use crate::rng::EngineRng;
use crate::{ArmIndex, GridSpec};

// Relative slack when comparing maximin distances, so that arms at the same
// geometric distance tie regardless of summation order.
const TIE_EPS: f64 = 1e-12;

/// Unit-cube coordinates of every arm, cached for distance queries.
#[derive(Debug, Clone)]
pub(crate) struct UnitGrid {
    dim: usize,
    coords: Vec<f64>,
}

impl UnitGrid {
    pub(crate) fn new(spec: &GridSpec) -> Self {
        let coords = (0..spec.len()).flat_map(|k| spec.unit_coords(k)).collect();
        Self {
            dim: spec.dim(),
            coords,
        }
    }

    pub(crate) fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    fn sq_dist(&self, a: usize, b: usize) -> f64 {
        self.point(a)
            .iter()
            .zip(self.point(b))
            .map(|(x, y)| (x - y).powi(2))
            .sum()
    }

    /// The unpulled arm farthest from every pulled arm (greedy maximin),
    /// with ties broken uniformly at random. An empty history yields a
    /// uniformly random arm.
    pub(crate) fn maximin(&self, history: &History, rng: &mut EngineRng) -> Option<usize> {
        let n = self.coords.len() / self.dim;
        let mask = history.pulled_mask(n);
        let pulled: Vec<usize> = (0..n).filter(|&k| mask[k]).collect();
        let mut best = f64::NEG_INFINITY;
        let mut ties = Vec::new();
        for k in (0..n).filter(|&k| !mask[k]) {
            let d = pulled
                .iter()
                .map(|&p| self.sq_dist(k, p))
                .fold(f64::INFINITY, f64::min);
            if d > best + TIE_EPS {
                best = d;
                ties.clear();
                ties.push(k);
            } else if d >= best - TIE_EPS {
                ties.push(k);
            }
        }
        ties.choose(rng).copied()
    }
}

/// Greedy maximin design without replacement.
#[derive(Debug, Clone)]
pub struct SpaceFilling {
    units: UnitGrid,
}

impl SpaceFilling {
    pub fn new(spec: &GridSpec) -> Self {
        Self {
            units: UnitGrid::new(spec),
        }
    }
}

impl Engine for SpaceFilling {
    fn suggest(
        &mut self,
        history: &History,
        spec: &GridSpec,
        rng: &mut EngineRng,
    ) -> Result<ArmIndex, Exhausted> {
        to_arm(spec, self.units.maximin(history, rng))
    }
}
