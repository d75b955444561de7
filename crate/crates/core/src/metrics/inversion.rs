//! How often two engines disagree on which of two models is better.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ScoreKey {
    pub engine: String,
    pub model: String,
    pub context: String,
}

impl ScoreKey {
    pub fn new(engine: impl Into<String>, model: impl Into<String>, context: impl Into<String>) -> Self {
        Self {
            engine: engine.into(),
            model: model.into(),
            context: context.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inversion {
    pub context: String,
    pub models: (String, String),
    pub engines: (String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionReport {
    pub rate: f64,
    /// Comparable (context, model pair, engine pair) triples, ties included.
    pub comparisons: usize,
    /// Triples where at least one engine scored the two models equally.
    pub ties: usize,
    pub inversions: Vec<Inversion>,
}

/// Fraction of (context, model pair, engine pair) triples whose two engines
/// pick different winners. Only triples with all four scores present are
/// comparable; a tie under either engine never counts as an inversion.
pub fn winner_inversion_rate(scores: &BTreeMap<ScoreKey, f64>) -> Result<InversionReport> {
    let engines: BTreeSet<&str> = scores.keys().map(|k| k.engine.as_str()).collect();
    let models: BTreeSet<&str> = scores.keys().map(|k| k.model.as_str()).collect();
    if engines.len() < 2 {
        return Err(Error::Config(format!(
            "winner inversions need at least two engines, found {}",
            engines.len()
        )));
    }
    if models.len() < 2 {
        return Err(Error::Config(format!(
            "winner inversions need at least two models, found {}",
            models.len()
        )));
    }
    let contexts: BTreeSet<&str> = scores.keys().map(|k| k.context.as_str()).collect();
    let get = |e: &str, m: &str, c: &str| scores.get(&ScoreKey::new(e, m, c)).copied();

    let engines: Vec<&str> = engines.into_iter().collect();
    let models: Vec<&str> = models.into_iter().collect();
    let (mut comparisons, mut ties) = (0, 0);
    let mut inversions = Vec::new();
    for &c in &contexts {
        for (i, &m1) in models.iter().enumerate() {
            for &m2 in &models[i + 1..] {
                for (a, &e1) in engines.iter().enumerate() {
                    for &e2 in &engines[a + 1..] {
                        let (Some(s11), Some(s12), Some(s21), Some(s22)) =
                            (get(e1, m1, c), get(e1, m2, c), get(e2, m1, c), get(e2, m2, c))
                        else {
                            continue;
                        };
                        comparisons += 1;
                        if s11 == s12 || s21 == s22 {
                            ties += 1;
                        } else if (s11 > s12) != (s21 > s22) {
                            inversions.push(Inversion {
                                context: c.to_string(),
                                models: (m1.to_string(), m2.to_string()),
                                engines: (e1.to_string(), e2.to_string()),
                            });
                        }
                    }
                }
            }
        }
    }
    if comparisons == 0 {
        return Err(Error::Config(
            "no context has two models scored by two engines".into(),
        ));
    }
    Ok(InversionReport {
        rate: inversions.len() as f64 / comparisons as f64,
        comparisons,
        ties,
        inversions,
    })
}
