//! Neighborhood hill climbing, alone with random restarts or blended with a
//! space-filling global search.

use rand::seq::IndexedRandom;

use super::space_filling::UnitGrid;
use super::{to_arm, uniform_unpulled, Engine, Exhausted, History};
use crate::rng::EngineRng;
use crate::{ArmIndex, GridSpec};

/// Hill-climbing state: the current incumbent of the local walk.
#[derive(Debug, Clone, Default)]
struct Climber {
    center: Option<usize>,
}

impl Climber {
    /// Moves the center to its best pulled neighbor while that improves,
    /// then proposes a random unpulled neighbor. `None` means the center is
    /// a local optimum with its whole neighborhood evaluated.
    fn step(&mut self, history: &History, spec: &GridSpec, rng: &mut EngineRng) -> Option<usize> {
        let mut center = self.center?;
        let scores = history.score_map(spec.len());
        let score = |k: usize| scores[k].unwrap_or(f64::NEG_INFINITY);
        loop {
            let best = spec
                .neighbors_linear(center)
                .into_iter()
                .filter(|&k| scores[k].is_some())
                .fold(None, |b: Option<usize>, k| match b {
                    Some(b) if score(b) >= score(k) => Some(b),
                    _ => Some(k),
                });
            match best {
                Some(b) if score(b) > score(center) => center = b,
                _ => break,
            }
        }
        self.center = Some(center);
        let open: Vec<usize> = spec
            .neighbors_linear(center)
            .into_iter()
            .filter(|&k| scores[k].is_none())
            .collect();
        open.choose(rng).copied()
    }
}

/// Hill climbing over grid neighbors; when the walk is stuck at a local
/// optimum it restarts from a uniformly random unpulled arm.
#[derive(Debug, Clone, Default)]
pub struct LocalRestart {
    climber: Climber,
}

impl LocalRestart {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Engine for LocalRestart {
    fn suggest(
        &mut self,
        history: &History,
        spec: &GridSpec,
        rng: &mut EngineRng,
    ) -> Result<ArmIndex, Exhausted> {
        if let Some(k) = self.climber.step(history, spec, rng) {
            return to_arm(spec, Some(k));
        }
        let restart = uniform_unpulled(history, spec, rng);
        self.climber.center = restart;
        to_arm(spec, restart)
    }
}

/// Interleaves local steps with greedy maximin proposals. The local walk
/// starts from, and jumps to, the best arm found by either component.
#[derive(Debug, Clone)]
pub struct Blended {
    climber: Climber,
    units: UnitGrid,
    global_every: usize,
    calls: usize,
}

impl Blended {
    pub fn new(spec: &GridSpec, global_every: usize) -> Self {
        Self {
            climber: Climber::default(),
            units: UnitGrid::new(spec),
            global_every,
            calls: 0,
        }
    }
}

impl Engine for Blended {
    fn suggest(
        &mut self,
        history: &History,
        spec: &GridSpec,
        rng: &mut EngineRng,
    ) -> Result<ArmIndex, Exhausted> {
        let turn = self.calls;
        self.calls += 1;
        if turn % self.global_every != 0 {
            if let Some(best) = history.best() {
                let incumbent = self
                    .climber
                    .center
                    .and_then(|c| history.iter().filter(|t| t.linear == c).map(|t| t.score).reduce(f64::max));
                if incumbent.is_none_or(|s| best.score > s) {
                    self.climber.center = Some(best.linear);
                }
            }
            if let Some(k) = self.climber.step(history, spec, rng) {
                return to_arm(spec, Some(k));
            }
        }
        to_arm(spec, self.units.maximin(history, rng))
    }
}
