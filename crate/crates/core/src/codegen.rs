//! Stable JSON artifacts and nested-conditional pseudocode for Mealy machines.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{OutputGroup, PropDictionary, Valuation};
use crate::frontend::{parse_predicate_term, parse_update_term, SignalTable, TslAtom};
use crate::mealy::{MealyMachine, Transition};

pub const ARTIFACT_VERSION: &str = "tslagent-automaton/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputProp {
    pub name: String,
    /// Predicate term as written in the specification, e.g. `inCave(s)`.
    pub term: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputProp {
    pub name: String,
    pub signal: String,
    /// Function term assigned to the signal, e.g. `toCave(s)`.
    pub term: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub prop: String,
    pub value: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactTransition {
    /// Conjunction of input literals; empty means `true`.
    pub guard: Vec<Literal>,
    /// Output signal to function term.
    pub updates: BTreeMap<String, String>,
    pub next: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactState {
    pub id: usize,
    pub transitions: Vec<ArtifactTransition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub version: String,
    pub signals: SignalTable,
    pub inputs: Vec<InputProp>,
    pub outputs: Vec<OutputProp>,
    pub initial: usize,
    pub states: Vec<ArtifactState>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ArtifactError {
    #[error("malformed artifact JSON: {0}")]
    Json(String),
    #[error("unsupported artifact version `{0}`")]
    Version(String),
    #[error("artifact term `{0}` does not parse")]
    Term(String),
    #[error("artifact refers to unknown proposition `{0}`")]
    UnknownProp(String),
    #[error("state {state}: guards are not exclusive and exhaustive")]
    Guards { state: usize },
    #[error("state {state}: updates must pick one declared term per output signal")]
    Updates { state: usize },
    #[error("state {state}: successor {next} out of range")]
    Successor { state: usize, next: usize },
    #[error("states must be numbered densely from 0 with initial state 0")]
    Numbering,
}

impl Artifact {
    pub fn from_machine(m: &MealyMachine) -> Artifact {
        let dict = &m.dict;
        let inputs = dict.inputs().map(|i| InputProp { name: dict.name(i).to_string(), term: dict.prop(i).term.to_string() }).collect();
        let outputs = dict
            .outputs()
            .map(|i| {
                let TslAtom::Update(u) = &dict.prop(i).term else { unreachable!("output props are updates") };
                OutputProp { name: dict.name(i).to_string(), signal: u.target.clone(), term: u.value.to_string() }
            })
            .collect();
        let states = m
            .table
            .iter()
            .enumerate()
            .map(|(id, row)| {
                let mut transitions = Vec::new();
                split(row, 0, dict.num_inputs(), &mut Vec::new(), &mut |guard, t| {
                    let guard = guard.iter().map(|&(p, value)| Literal { prop: dict.name(p).to_string(), value }).collect();
                    transitions.push(ArtifactTransition { guard, updates: updates_of(m, t.output), next: t.next });
                });
                ArtifactState { id, transitions }
            })
            .collect();
        Artifact { version: ARTIFACT_VERSION.to_string(), signals: m.signals.clone(), inputs, outputs, initial: 0, states }
    }

    /// Canonical text: sorted keys, two-space indentation, trailing newline.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("artifact serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Artifact, ArtifactError> {
        let a: Artifact = serde_json::from_str(text).map_err(|e| ArtifactError::Json(e.to_string()))?;
        if a.version != ARTIFACT_VERSION {
            return Err(ArtifactError::Version(a.version));
        }
        Ok(a)
    }

    fn dictionary(&self) -> Result<PropDictionary, ArtifactError> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| parse_predicate_term(&p.term).map(TslAtom::Predicate).map_err(|_| ArtifactError::Term(p.term.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let outputs = self
            .outputs
            .iter()
            .map(|p| {
                let text = format!("[{} <- {}]", p.signal, p.term);
                parse_update_term(&text).map(TslAtom::Update).map_err(|_| ArtifactError::Term(text))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let dict = PropDictionary::new(inputs, outputs).map_err(|e| ArtifactError::Term(e.to_string()))?;
        for p in self.inputs.iter().map(|p| &p.name).chain(self.outputs.iter().map(|p| &p.name)) {
            if dict.index_of_name(p).is_none() {
                return Err(ArtifactError::UnknownProp(p.clone()));
            }
        }
        Ok(dict)
    }

    /// Rebuilds the machine, checking guard exclusivity and exhaustiveness.
    pub fn to_machine(&self) -> Result<MealyMachine, ArtifactError> {
        let dict = self.dictionary()?;
        if self.initial != 0 || self.states.iter().enumerate().any(|(k, s)| s.id != k) || self.states.is_empty() {
            return Err(ArtifactError::Numbering);
        }
        let mut by_signal: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for i in dict.outputs() {
            if let TslAtom::Update(u) = &dict.prop(i).term {
                by_signal.entry(u.target.clone()).or_default().push(i);
            }
        }
        let groups: Vec<OutputGroup> = by_signal.into_iter().map(|(signal, props)| OutputGroup { signal, props }).collect();
        let n_in = dict.num_inputs();
        let mut table = Vec::new();
        for (state, s) in self.states.iter().enumerate() {
            let mut row: Vec<Option<Transition>> = vec![None; 1 << n_in];
            for t in &s.transitions {
                let (mut pos, mut neg) = (0u64, 0u64);
                for l in &t.guard {
                    let p = dict.index_of_name(&l.prop).filter(|&p| dict.is_input(p)).ok_or_else(|| ArtifactError::UnknownProp(l.prop.clone()))?;
                    if l.value {
                        pos |= 1 << p;
                    } else {
                        neg |= 1 << p;
                    }
                }
                if t.next >= self.states.len() {
                    return Err(ArtifactError::Successor { state, next: t.next });
                }
                let output = self.output_valuation(&dict, &groups, &t.updates).ok_or(ArtifactError::Updates { state })?;
                for (i, slot) in row.iter_mut().enumerate() {
                    let v = i as Valuation;
                    if v & pos == pos && v & neg == 0 {
                        if slot.is_some() {
                            return Err(ArtifactError::Guards { state });
                        }
                        *slot = Some(Transition { output, next: t.next });
                    }
                }
            }
            table.push(row.into_iter().collect::<Option<Vec<_>>>().ok_or(ArtifactError::Guards { state })?);
        }
        Ok(MealyMachine { dict, groups, signals: self.signals.clone(), table })
    }

    fn output_valuation(&self, dict: &PropDictionary, groups: &[OutputGroup], updates: &BTreeMap<String, String>) -> Option<Valuation> {
        if updates.len() != groups.len() {
            return None;
        }
        let mut v = 0;
        for g in groups {
            let term = updates.get(&g.signal)?;
            let p = g.props.iter().copied().find(|&p| matches!(&dict.prop(p).term, TslAtom::Update(u) if u.value.to_string() == *term))?;
            v |= 1 << p;
        }
        Some(v)
    }

    /// The transition taken in `state` when `holds(prop_name)` gives the predicate values.
    pub fn step(&self, state: usize, holds: &dyn Fn(&str) -> bool) -> Option<&ArtifactTransition> {
        self.states.get(state)?.transitions.iter().find(|t| t.guard.iter().all(|l| holds(&l.prop) == l.value))
    }

    pub fn input_term(&self, prop: &str) -> Option<&str> {
        self.inputs.iter().find(|p| p.name == prop).map(|p| p.term.as_str())
    }

    pub fn num_transitions(&self) -> usize {
        self.states.iter().map(|s| s.transitions.len()).sum()
    }
}

fn updates_of(m: &MealyMachine, output: Valuation) -> BTreeMap<String, String> {
    m.chosen(output)
        .into_iter()
        .map(|p| match &m.dict.prop(p).term {
            TslAtom::Update(u) => (u.target.clone(), u.value.to_string()),
            TslAtom::Predicate(_) => unreachable!("outputs are updates"),
        })
        .collect()
}

/// Shannon expansion of one table row. Splits on the lowest input prop that
/// still matters, negative branch first, so guards come out in prop order.
fn split(row: &[Transition], from: usize, n_in: usize, guard: &mut Vec<(usize, bool)>, emit: &mut dyn FnMut(&[(usize, bool)], Transition)) {
    let fixed: Valuation = guard.iter().filter(|l| l.1).map(|l| 1 << l.0).sum();
    let fixed_mask: Valuation = guard.iter().map(|l| 1 << l.0).sum();
    let cell = |i: usize| i as Valuation & fixed_mask == fixed;
    let members: Vec<usize> = (0..row.len()).filter(|&i| cell(i)).collect();
    let first = row[members[0]];
    if members.iter().all(|&i| row[i] == first) {
        emit(guard, first);
        return;
    }
    let p = (from..n_in)
        .find(|&p| members.iter().any(|&i| i & 1 << p == 0 && row[i] != row[i | 1 << p]))
        .expect("a non-uniform cell depends on some free prop");
    for value in [false, true] {
        guard.push((p, value));
        split(row, p + 1, n_in, guard, emit);
        guard.pop();
    }
}

pub fn emit_json(m: &MealyMachine) -> String {
    Artifact::from_machine(m).to_json()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    /// Language-neutral nested conditionals.
    Neutral,
    /// JavaScript in the style of the original agent code.
    JavaScript,
}

pub fn emit_pseudocode(m: &MealyMachine, dialect: Dialect) -> String {
    render(&Artifact::from_machine(m), dialect)
}

/// Renders an artifact as nested conditionals over `currentState`.
pub fn render(a: &Artifact, dialect: Dialect) -> String {
    let literal = |l: &Literal| {
        let term = a.input_term(&l.prop).unwrap_or(&l.prop);
        match (dialect, l.value) {
            (_, true) => term.to_string(),
            (Dialect::Neutral, false) => format!("not {term}"),
            (Dialect::JavaScript, false) => format!("!{term}"),
        }
    };
    let join = match dialect {
        Dialect::Neutral => " and ",
        Dialect::JavaScript => " && ",
    };
    let mut out = String::new();
    for (k, s) in a.states.iter().enumerate() {
        let head = if k == 0 { "if" } else { "else if" };
        match dialect {
            Dialect::Neutral => writeln!(out, "{head} currentState == {} then", s.id),
            Dialect::JavaScript => writeln!(out, "{head} (currentState === {}) {{", s.id),
        }
        .expect("write to string");
        for (j, t) in s.transitions.iter().enumerate() {
            let conditional = !t.guard.is_empty();
            let indent = if conditional { "    " } else { "  " };
            if conditional {
                let cond = t.guard.iter().map(literal).collect::<Vec<_>>().join(join);
                let head = if j == 0 { "if" } else { "else if" };
                match dialect {
                    Dialect::Neutral => writeln!(out, "  {head} {cond} then"),
                    Dialect::JavaScript => writeln!(out, "  {head} ({cond}) {{"),
                }
                .expect("write to string");
            }
            for (signal, term) in &t.updates {
                let _ = writeln!(out, "{indent}{signal} = {term}");
            }
            let last = j + 1 == s.transitions.len();
            match dialect {
                Dialect::Neutral => {
                    let _ = writeln!(out, "{indent}currentState = {}", t.next);
                    if conditional && last {
                        let _ = writeln!(out, "  end");
                    }
                }
                Dialect::JavaScript => {
                    let close = match (conditional, last) {
                        (true, true) => " } }",
                        (true, false) | (false, _) => " }",
                    };
                    let _ = writeln!(out, "{indent}currentState = {}{close}", t.next);
                }
            }
        }
        if dialect == Dialect::Neutral && k + 1 == a.states.len() {
            let _ = writeln!(out, "end");
        }
    }
    out
}
