//! Scripted world model standing in for the language model.
//!
//! Generated passages carry a machine-readable location tag `[at:place]`,
//! which scripted predicates read back. Fault injection makes the generator
//! write a passage somewhere other than requested (`p_halluc`) and makes
//! scripted addition miscount (`p_arith`).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Where every story begins; no location predicate holds there.
pub const START: &str = "trail";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Faults {
    #[serde(default)]
    pub p_halluc: f64,
    #[serde(default)]
    pub p_arith: f64,
}

impl Faults {
    pub const NONE: Faults = Faults { p_halluc: 0.0, p_arith: 0.0 };

    pub fn is_valid(&self) -> bool {
        [self.p_halluc, self.p_arith].iter().all(|p| (0.0..=1.0).contains(p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedWorld {
    places: Vec<String>,
    pub faults: Faults,
}

impl ScriptedWorld {
    pub fn new(places: impl IntoIterator<Item = String>, faults: Faults) -> ScriptedWorld {
        let mut places: Vec<String> = places.into_iter().chain([START.to_string()]).collect();
        places.sort();
        places.dedup();
        ScriptedWorld { places, faults }
    }

    pub fn places(&self) -> &[String] {
        &self.places
    }

    pub fn write(place: &str, turn: usize) -> String {
        format!("[at:{place}] Passage {turn} takes place at the {place}.")
    }

    /// A passage for a request to go to `requested`. Under a fault it is set
    /// at some other known place instead. Returns the passage and whether it
    /// was faulty.
    pub fn generate(&self, requested: &str, turn: usize, rng: &mut ChaCha8Rng) -> (String, bool) {
        if rng.random::<f64>() < self.faults.p_halluc {
            let others: Vec<&String> = self.places.iter().filter(|p| *p != requested).collect();
            if !others.is_empty() {
                let place = others[rng.random_range(0..others.len())];
                return (Self::write(place, turn), true);
            }
        }
        (Self::write(requested, turn), false)
    }

    pub fn place_of(passage: &str) -> Option<&str> {
        passage.strip_prefix("[at:")?.split_once(']').map(|(p, _)| p)
    }

    pub fn has_tag(user_prompt: &str, tag: &str) -> bool {
        user_prompt.contains(&format!("[{tag}]"))
    }

    /// Addition that is off by one under an arithmetic fault.
    pub fn add(&self, a: i64, b: i64, rng: &mut ChaCha8Rng) -> (i64, bool) {
        if rng.random::<f64>() < self.faults.p_arith {
            (a + b + 1, true)
        } else {
            (a + b, false)
        }
    }

    pub fn summarize(summary: &str, passage: &str) -> String {
        let place = Self::place_of(passage).unwrap_or("somewhere");
        if summary.is_empty() {
            format!("visited: {place}")
        } else {
            format!("{summary}, {place}")
        }
    }
}
