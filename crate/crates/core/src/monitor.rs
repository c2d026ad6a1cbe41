//! Three-valued runtime monitors for specification conjuncts.
//!
//! Each conjunct is tracked by subset simulation of two trimmed Büchi
//! automata, one for the conjunct and one for its negation. Since every
//! trimmed state has a non-empty language, an empty subset for the conjunct
//! means no continuation can satisfy it, and an empty subset for the negation
//! means every continuation does.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::abstraction::{LtlFormula, LtlSpec, Valuation};
use crate::formula::{Formula, Lasso};
use crate::frontend::TslAtom;
use crate::nba::{ltl_to_nba, Nba, NbaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Pending,
    Satisfied { turn: usize },
    Violated { turn: usize },
}

impl Verdict {
    pub fn is_violated(&self) -> bool {
        matches!(self, Verdict::Violated { .. })
    }
}

/// What a violation of a conjunct indicates about the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationClass {
    /// Mentions an integer cell.
    Arithmetic,
    /// Mentions a predicate over the story state.
    Hallucination,
    /// Only update terms: enforced by the automaton itself.
    Procedural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Assumption,
    Guarantee,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub label: String,
    pub role: Role,
    pub class: ViolationClass,
    pub formula: LtlFormula,
    pos: Nba,
    neg: Nba,
    cur_pos: BTreeSet<usize>,
    cur_neg: BTreeSet<usize>,
    pub verdict: Verdict,
}

impl Track {
    pub fn new(label: impl Into<String>, role: Role, class: ViolationClass, formula: LtlFormula) -> Result<Track, NbaError> {
        let pos = ltl_to_nba(&formula)?;
        let neg = ltl_to_nba(&Formula::not(formula.clone()))?;
        let cur_pos: BTreeSet<usize> = pos.initial.iter().copied().collect();
        let cur_neg: BTreeSet<usize> = neg.initial.iter().copied().collect();
        let mut t = Track { label: label.into(), role, class, formula, pos, neg, cur_pos, cur_neg, verdict: Verdict::Pending };
        t.settle(0);
        Ok(t)
    }

    fn settle(&mut self, turn: usize) {
        if self.verdict != Verdict::Pending {
            return;
        }
        if self.cur_pos.is_empty() {
            self.verdict = Verdict::Violated { turn };
        } else if self.cur_neg.is_empty() {
            self.verdict = Verdict::Satisfied { turn };
        }
    }

    /// Advances by one letter; `turn` is the 1-based index of that letter.
    pub fn step(&mut self, v: Valuation, turn: usize) {
        if self.verdict != Verdict::Pending {
            return;
        }
        self.cur_pos = self.cur_pos.iter().flat_map(|&q| self.pos.post(q, v)).collect();
        self.cur_neg = self.cur_neg.iter().flat_map(|&q| self.neg.post(q, v)).collect();
        self.settle(turn);
    }

    /// Advances by a letter known only up to the given alternatives.
    pub fn step_any(&mut self, letters: &[Valuation], turn: usize) {
        if self.verdict != Verdict::Pending {
            return;
        }
        let image = |nba: &Nba, cur: &BTreeSet<usize>| {
            let mut out = BTreeSet::new();
            for &v in letters {
                for &q in cur {
                    out.extend(nba.post(q, v));
                }
            }
            out
        };
        self.cur_pos = image(&self.pos, &self.cur_pos);
        self.cur_neg = image(&self.neg, &self.cur_neg);
        self.settle(turn);
    }

    /// Final verdict after reading the lasso forever.
    pub fn verdict_on_lasso(&self, word: &Lasso<Valuation>) -> Verdict {
        let mut t = self.clone();
        let mut turn = 0;
        for &v in &word.stem {
            turn += 1;
            t.step(v, turn);
        }
        let mut seen = BTreeSet::new();
        while t.verdict == Verdict::Pending && seen.insert((t.cur_pos.clone(), t.cur_neg.clone())) {
            for &v in &word.cycle {
                turn += 1;
                t.step(v, turn);
            }
        }
        t.verdict
    }
}

/// Monitors for every assumption and guarantee conjunct of a specification.
#[derive(Debug, Clone)]
pub struct Monitor {
    pub tracks: Vec<Track>,
    pub turn: usize,
}

impl Monitor {
    pub fn new(spec: &LtlSpec) -> Result<Monitor, NbaError> {
        let mut tracks = Vec::new();
        for (role, list) in [(Role::Assumption, &spec.assumptions), (Role::Guarantee, &spec.guarantees)] {
            for c in list {
                tracks.push(Track::new(c.label.clone(), role, classify(spec, &c.formula), c.formula.clone())?);
            }
        }
        Ok(Monitor { tracks, turn: 0 })
    }

    /// Feeds one turn: the predicate values read and the updates chosen.
    pub fn observe(&mut self, v: Valuation) -> Vec<Verdict> {
        self.turn += 1;
        for t in &mut self.tracks {
            t.step(v, self.turn);
        }
        self.verdicts()
    }

    /// Feeds a turn whose letter is one of `letters`; a conjunct is only
    /// violated if every alternative violates it.
    pub fn observe_any(&mut self, letters: &[Valuation]) -> Vec<Verdict> {
        self.turn += 1;
        for t in &mut self.tracks {
            t.step_any(letters, self.turn);
        }
        self.verdicts()
    }

    pub fn verdicts(&self) -> Vec<Verdict> {
        self.tracks.iter().map(|t| t.verdict).collect()
    }

    /// The earliest violation, if any.
    pub fn first_violation(&self) -> Option<(usize, &Track)> {
        self.tracks
            .iter()
            .filter_map(|t| match t.verdict {
                Verdict::Violated { turn } => Some((turn, t)),
                _ => None,
            })
            .min_by_key(|(turn, _)| *turn)
    }
}

/// Integer cells take precedence over location predicates.
pub fn classify(spec: &LtlSpec, f: &LtlFormula) -> ViolationClass {
    let mut atoms = Vec::new();
    f.atoms(&mut atoms);
    let terms: Vec<&TslAtom> = atoms.into_iter().map(|&p| &spec.dict.prop(p).term).collect();
    let integer = |a: &TslAtom| spec.signals.integer_cells.iter().any(|c| mentions(a, c));
    if terms.iter().any(|a| integer(a)) {
        ViolationClass::Arithmetic
    } else if terms.iter().any(|a| matches!(a, TslAtom::Predicate(_))) {
        ViolationClass::Hallucination
    } else {
        ViolationClass::Procedural
    }
}

fn mentions(a: &TslAtom, cell: &str) -> bool {
    let text = match a {
        TslAtom::Predicate(p) => p.to_string(),
        TslAtom::Update(u) => u.to_string(),
    };
    text.split(|c: char| !(c.is_alphanumeric() || c == '_')).any(|w| w == cell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::abstract_to_ltl;
    use crate::corpus;
    use crate::frontend::compile;

    fn spec(src: &str) -> LtlSpec {
        abstract_to_ltl(&compile(src).unwrap()).unwrap()
    }

    fn bit(s: &LtlSpec, name: &str) -> Valuation {
        1 << s.dict.index_of_name(name).unwrap()
    }

    #[test]
    fn weak_until_violated_when_cave_precedes_market() {
        let s = spec(corpus::FIG2);
        let mut m = Monitor::new(&s).unwrap();
        let k = m.tracks.iter().position(|t| t.role == Role::Guarantee && t.label.contains(" W ")).unwrap();
        let market = bit(&s, "u_storyPassage_toMarket_summary");
        let cave = bit(&s, "p_inCave_summary");
        m.observe(market);
        m.observe(market);
        assert_eq!(m.tracks[k].verdict, Verdict::Pending);
        m.observe(market | cave);
        assert_eq!(m.tracks[k].verdict, Verdict::Violated { turn: 3 });
    }

    #[test]
    fn point_in_time_violation_on_next_turn() {
        let s = spec(corpus::FIG2);
        let mut m = Monitor::new(&s).unwrap();
        let k = m.tracks.iter().position(|t| t.role == Role::Assumption && t.label.contains("<->")).unwrap();
        assert_eq!(m.tracks[k].class, ViolationClass::Hallucination);
        m.observe(bit(&s, "u_storyPassage_toCave_summary"));
        assert_eq!(m.tracks[k].verdict, Verdict::Pending);
        m.observe(bit(&s, "u_storyPassage_toMarket_summary"));
        assert_eq!(m.tracks[k].verdict, Verdict::Violated { turn: 2 });
    }

    #[test]
    fn partial_letter_violates_only_when_every_completion_does() {
        let s = spec(corpus::FIG2);
        let mut m = Monitor::new(&s).unwrap();
        let k = m.tracks.iter().position(|t| t.role == Role::Assumption && t.label.contains("<->")).unwrap();
        let (cave, market) = (bit(&s, "u_storyPassage_toCave_summary"), bit(&s, "u_storyPassage_toMarket_summary"));
        m.observe(cave);
        let mut other = m.clone();
        other.observe_any(&[market, cave | bit(&s, "p_inCave_summary")]);
        assert_eq!(other.tracks[k].verdict, Verdict::Pending);
        m.observe_any(&[market, cave]);
        assert_eq!(m.tracks[k].verdict, Verdict::Violated { turn: 2 });
    }

    #[test]
    fn counter_conjunct_is_arithmetic() {
        let s = spec(corpus::CHOICES);
        let classes: BTreeSet<ViolationClass> = s.guarantees.iter().map(|g| classify(&s, &g.formula)).collect();
        assert!(classes.contains(&ViolationClass::Arithmetic));
        assert!(classes.contains(&ViolationClass::Hallucination));
    }
}
