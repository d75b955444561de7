//! Pluggable search engines.
//!
//! An [`Engine`] proposes the next arm given the validation history of the
//! current run. Engines never see test scores. Each run owns its engine
//! instance and a dedicated random stream, so proposals are a deterministic
//! function of the configuration, the seed and the history.

mod gp;
mod local;
mod parzen;
mod space_filling;

use serde::{Deserialize, Serialize};

use crate::rng::EngineRng;
use crate::{ArmIndex, Error, GridSpec, Result};

pub use gp::{noise_grid, GaussianProcess};
pub use local::{Blended, LocalRestart};
pub use parzen::Parzen;
pub use space_filling::SpaceFilling;

/// One pull seen by the engine: the arm and the validation score served.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub arm: ArmIndex,
    pub linear: usize,
    pub score: f64,
}

/// Append-only record of the pulls of one run, in pull order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    trials: Vec<Trial>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, trial: Trial) {
        self.trials.push(trial);
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Trial> {
        self.trials.iter()
    }

    /// Best validation score so far; ties go to the earliest pull.
    pub fn best(&self) -> Option<&Trial> {
        self.trials
            .iter()
            .fold(None, |best: Option<&Trial>, t| match best {
                Some(b) if b.score >= t.score => Some(b),
                _ => Some(t),
            })
    }

    pub fn contains(&self, linear: usize) -> bool {
        self.trials.iter().any(|t| t.linear == linear)
    }

    /// `pulled[k]` is true when arm `k` appears in the history.
    pub(crate) fn pulled_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for t in &self.trials {
            mask[t.linear] = true;
        }
        mask
    }

    /// Highest score served for each pulled arm.
    pub(crate) fn score_map(&self, n: usize) -> Vec<Option<f64>> {
        let mut map: Vec<Option<f64>> = vec![None; n];
        for t in &self.trials {
            let slot = &mut map[t.linear];
            *slot = Some(slot.map_or(t.score, |s| s.max(t.score)));
        }
        map
    }
}

/// The engine cannot produce a new proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("engine exhausted its proposals")]
pub struct Exhausted;

/// A sequential search engine.
pub trait Engine: Send {
    /// Proposes the next arm to pull.
    fn suggest(
        &mut self,
        history: &History,
        spec: &GridSpec,
        rng: &mut EngineRng,
    ) -> Result<ArmIndex, Exhausted>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParzenConfig {
    /// Fraction of the history treated as "good".
    pub gamma: f64,
    /// Arms sampled from the good density per proposal.
    pub candidates: usize,
    /// Space-filling pulls before modeling; `None` means `max(2, ceil(L/4))`.
    pub warm_start: Option<usize>,
}

impl Default for ParzenConfig {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            candidates: 64,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct GpEiConfig {
    /// Space-filling pulls before modeling; `None` means `max(2, ceil(L/4))`.
    pub warm_start: Option<usize>,
    /// Exploration margin subtracted inside expected improvement, in units
    /// of the standardized score.
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendedConfig {
    /// Every `global_every`-th proposal (starting with the first) is a
    /// space-filling one; the rest are local steps.
    pub global_every: usize,
}

impl Default for BlendedConfig {
    fn default() -> Self {
        Self { global_every: 3 }
    }
}

/// Engine family and its parameters, as read from a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EngineConfig {
    /// Uniform sampling without replacement.
    Random,
    /// Exhaustive enumeration in linear order.
    GridSweep,
    /// Greedy maximin design.
    SpaceFilling,
    Parzen(ParzenConfig),
    GpEi(GpEiConfig),
    /// Hill climbing over grid neighbors with uniform random restarts.
    LocalRestart,
    /// Local steps interleaved with space-filling global proposals.
    Blended(BlendedConfig),
}

impl EngineConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::GridSweep => "grid_sweep",
            Self::SpaceFilling => "space_filling",
            Self::Parzen(_) => "parzen",
            Self::GpEi(_) => "gp_ei",
            Self::LocalRestart => "local_restart",
            Self::Blended(_) => "blended",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("{}: {msg}", self.kind())));
        match self {
            Self::Parzen(c) => {
                if !(c.gamma > 0.0 && c.gamma < 1.0) {
                    return bad("gamma must lie in (0, 1)");
                }
                if c.candidates == 0 {
                    return bad("candidates must be positive");
                }
                if c.warm_start == Some(0) {
                    return bad("warm_start must be positive");
                }
            }
            Self::GpEi(c) => {
                if !(c.xi >= 0.0 && c.xi.is_finite()) {
                    return bad("xi must be finite and >= 0");
                }
                if c.warm_start == Some(0) {
                    return bad("warm_start must be positive");
                }
            }
            Self::Blended(c) if c.global_every == 0 => return bad("global_every must be positive"),
            _ => {}
        }
        Ok(())
    }

    /// Instantiates a fresh engine for a run of `budget` pulls on `spec`.
    pub fn build(&self, spec: &GridSpec, budget: usize) -> Result<Box<dyn Engine>> {
        self.validate()?;
        let warm = |w: Option<usize>| w.unwrap_or_else(|| default_warm_start(budget));
        Ok(match self {
            Self::Random => Box::new(RandomSearch),
            Self::GridSweep => Box::new(GridSweep),
            Self::SpaceFilling => Box::new(SpaceFilling::new(spec)),
            Self::Parzen(c) => Box::new(Parzen::new(spec, c.clone(), warm(c.warm_start))),
            Self::GpEi(c) => Box::new(gp::GpEi::new(spec, c.xi, warm(c.warm_start))),
            Self::LocalRestart => Box::new(LocalRestart::new()),
            Self::Blended(c) => Box::new(Blended::new(spec, c.global_every)),
        })
    }
}

/// Warm-start length for model-based engines: `max(2, ceil(L / 4))`.
pub fn default_warm_start(budget: usize) -> usize {
    budget.div_ceil(4).max(2)
}

/// Unpulled arms in linear order.
pub(crate) fn unpulled(history: &History, n: usize) -> Vec<usize> {
    let mask = history.pulled_mask(n);
    (0..n).filter(|&k| !mask[k]).collect()
}

pub(crate) fn uniform_unpulled(
    history: &History,
    spec: &GridSpec,
    rng: &mut EngineRng,
) -> Option<usize> {
    use rand::seq::IndexedRandom;
    unpulled(history, spec.len()).choose(rng).copied()
}

fn to_arm(spec: &GridSpec, k: Option<usize>) -> Result<ArmIndex, Exhausted> {
    k.map(|k| ArmIndex(spec.coords_unchecked(k))).ok_or(Exhausted)
}

/// Uniform over unpulled arms.
#[derive(Debug, Default)]
pub struct RandomSearch;

impl Engine for RandomSearch {
    fn suggest(
        &mut self,
        history: &History,
        spec: &GridSpec,
        rng: &mut EngineRng,
    ) -> Result<ArmIndex, Exhausted> {
        to_arm(spec, uniform_unpulled(history, spec, rng))
    }
}

/// The lowest unpulled linear index.
#[derive(Debug, Default)]
pub struct GridSweep;

impl Engine for GridSweep {
    fn suggest(
        &mut self,
        history: &History,
        spec: &GridSpec,
        _rng: &mut EngineRng,
    ) -> Result<ArmIndex, Exhausted> {
        let mask = history.pulled_mask(spec.len());
        to_arm(spec, mask.iter().position(|&p| !p))
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::rng;

    /// Drives an engine against a score function for `budget` pulls.
    pub fn replay(
        engine: &mut dyn Engine,
        spec: &GridSpec,
        budget: usize,
        seed: u64,
        score: impl Fn(usize) -> f64,
    ) -> Vec<usize> {
        let mut rng = rng::stream(&[seed]);
        let mut h = History::new();
        for _ in 0..budget {
            let arm = engine.suggest(&h, spec, &mut rng).expect("proposal");
            let k = spec.to_linear(&arm).expect("valid arm");
            h.push(Trial {
                arm,
                linear: k,
                score: score(k),
            });
        }
        h.iter().map(|t| t.linear).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::testing::replay;
    use super::*;
    use crate::rng;

    #[test]
    fn random_draws_without_replacement() {
        let spec = GridSpec::from_sizes(&[2, 2]).unwrap();
        for seed in 0..20 {
            let mut pulls = replay(&mut RandomSearch, &spec, 4, seed, |_| 0.0);
            pulls.sort();
            assert_eq!(pulls, vec![0, 1, 2, 3]);
        }
        let mut h = History::new();
        for k in 0..4 {
            h.push(Trial {
                arm: spec.from_linear(k).unwrap(),
                linear: k,
                score: 0.0,
            });
        }
        assert_eq!(
            RandomSearch.suggest(&h, &spec, &mut rng::stream(&[0])),
            Err(Exhausted)
        );
    }

    #[test]
    fn sweep_enumerates_in_order() {
        let spec = GridSpec::from_sizes(&[3, 4]).unwrap();
        let pulls = replay(&mut GridSweep, &spec, 12, 0, |k| k as f64);
        assert_eq!(pulls, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn config_parsing_and_defaults() {
        let c: EngineConfig = serde_json::from_str(r#"{"kind":"parzen"}"#).unwrap();
        assert_eq!(c, EngineConfig::Parzen(ParzenConfig::default()));
        let echo = serde_json::to_string(&c).unwrap();
        assert_eq!(
            echo,
            r#"{"kind":"parzen","gamma":0.25,"candidates":64,"warm_start":null}"#
        );
        let c: EngineConfig =
            serde_json::from_str(r#"{"kind":"blended","global_every":2}"#).unwrap();
        assert_eq!(c.kind(), "blended");
        assert!(serde_json::from_str::<EngineConfig>(r#"{"kind":"hebo"}"#).is_err());
        assert!(serde_json::from_str::<EngineConfig>(r#"{"kind":"gp_ei","bogus":1}"#).is_err());
        let bad = EngineConfig::Parzen(ParzenConfig {
            gamma: 1.5,
            ..Default::default()
        });
        assert!(bad.build(&GridSpec::from_sizes(&[3]).unwrap(), 2).is_err());
    }

    #[test]
    fn warm_start_rule() {
        assert_eq!(default_warm_start(1), 2);
        assert_eq!(default_warm_start(8), 2);
        assert_eq!(default_warm_start(10), 3);
        assert_eq!(default_warm_start(16), 4);
        assert_eq!(default_warm_start(17), 5);
    }

    #[test]
    fn every_engine_is_valid_and_deterministic() {
        let spec = GridSpec::from_sizes(&[4, 3, 5]).unwrap();
        let score = |k: usize| ((k * 37) % 11) as f64 / 11.0;
        let configs = [
            EngineConfig::Random,
            EngineConfig::GridSweep,
            EngineConfig::SpaceFilling,
            EngineConfig::Parzen(Default::default()),
            EngineConfig::GpEi(Default::default()),
            EngineConfig::LocalRestart,
            EngineConfig::Blended(Default::default()),
        ];
        for config in &configs {
            for seed in 0..3 {
                let run = |seed| {
                    let mut e = config.build(&spec, 24).unwrap();
                    replay(e.as_mut(), &spec, 24, seed, score)
                };
                let a = run(seed);
                assert_eq!(a, run(seed), "{}", config.kind());
                assert!(a.iter().all(|&k| k < spec.len()));
            }
        }
    }
}
