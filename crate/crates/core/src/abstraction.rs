//! Propositional abstraction of a TSL specification.
//!
//! Every distinct predicate term becomes an input proposition and every distinct
//! update term an output proposition. Valuations are bit sets over proposition
//! indices: inputs occupy the low indices, outputs follow.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::Formula;
use crate::frontend::ast::{FunctionTerm, SectionKind, UpdateTerm};
use crate::frontend::{CoreSpec, SignalTable, TslAtom, TslFormula};

pub type LtlFormula = Formula<usize>;

/// Bit set of true propositions.
pub type Valuation = u64;

pub const MAX_PROPS: usize = 64;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AbstractionError {
    #[error("specification needs {0} propositions, at most {MAX_PROPS} are supported")]
    TooManyProps(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropKind {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prop {
    pub name: String,
    pub kind: PropKind,
    pub term: TslAtom,
}

/// Bidirectional map between propositions and the TSL terms they abstract.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropDictionary {
    props: Vec<Prop>,
    num_inputs: usize,
    by_term: BTreeMap<TslAtom, usize>,
    by_name: BTreeMap<String, usize>,
}

impl PropDictionary {
    /// Builds a dictionary from input terms and output terms; each list is sorted by prop name.
    pub fn new(inputs: impl IntoIterator<Item = TslAtom>, outputs: impl IntoIterator<Item = TslAtom>) -> Result<Self, AbstractionError> {
        let mut names = BTreeSet::new();
        let mut named = |atoms: Vec<TslAtom>, kind: PropKind| -> Vec<Prop> {
            let mut v: Vec<Prop> = atoms
                .into_iter()
                .map(|term| {
                    let base = mangle(&term);
                    let mut name = base.clone();
                    let mut k = 1;
                    while !names.insert(name.clone()) {
                        k += 1;
                        name = format!("{base}_{k}");
                    }
                    Prop { name, kind, term }
                })
                .collect();
            v.sort_by(|a, b| a.name.cmp(&b.name));
            v
        };
        let dedup = |it: Vec<TslAtom>| it.into_iter().collect::<BTreeSet<_>>().into_iter().collect::<Vec<_>>();
        let ins = named(dedup(inputs.into_iter().collect()), PropKind::Input);
        let outs = named(dedup(outputs.into_iter().collect()), PropKind::Output);
        let num_inputs = ins.len();
        let props: Vec<Prop> = ins.into_iter().chain(outs).collect();
        if props.len() > MAX_PROPS {
            return Err(AbstractionError::TooManyProps(props.len()));
        }
        let by_term = props.iter().enumerate().map(|(i, p)| (p.term.clone(), i)).collect();
        let by_name = props.iter().enumerate().map(|(i, p)| (p.name.clone(), i)).collect();
        Ok(PropDictionary { props, num_inputs, by_term, by_name })
    }

    pub fn len(&self) -> usize {
        self.props.len()
    }

    pub fn is_empty(&self) -> bool {
        self.props.is_empty()
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.props.len() - self.num_inputs
    }

    pub fn props(&self) -> &[Prop] {
        &self.props
    }

    pub fn prop(&self, i: usize) -> &Prop {
        &self.props[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.props[i].name
    }

    pub fn is_input(&self, i: usize) -> bool {
        i < self.num_inputs
    }

    pub fn index_of_term(&self, term: &TslAtom) -> Option<usize> {
        self.by_term.get(term).copied()
    }

    pub fn index_of_name(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn inputs(&self) -> impl Iterator<Item = usize> {
        0..self.num_inputs
    }

    pub fn outputs(&self) -> impl Iterator<Item = usize> {
        self.num_inputs..self.props.len()
    }

    pub fn input_mask(&self) -> Valuation {
        mask(self.num_inputs)
    }

    pub fn output_mask(&self) -> Valuation {
        mask(self.props.len()) & !self.input_mask()
    }

    /// Names of the true propositions of a valuation.
    pub fn describe(&self, v: Valuation) -> Vec<&str> {
        (0..self.props.len()).filter(|i| v >> i & 1 == 1).map(|i| self.name(i)).collect()
    }
}

fn mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// `inCave(s)` becomes `p_inCave_s`, `[storyPassage <- toCave(s)]` becomes `u_storyPassage_toCave_s`.
pub fn mangle(atom: &TslAtom) -> String {
    let mut parts = Vec::new();
    match atom {
        TslAtom::Predicate(p) => {
            parts.push("p".to_string());
            parts.push(p.name.clone());
            p.args.iter().for_each(|a| flatten(a, &mut parts));
        }
        TslAtom::Update(u) => {
            parts.push("u".to_string());
            parts.push(u.target.clone());
            flatten(&u.value, &mut parts);
        }
    }
    parts.join("_")
}

fn flatten(t: &FunctionTerm, out: &mut Vec<String>) {
    match t {
        FunctionTerm::Signal(s) => out.push(s.clone()),
        FunctionTerm::Apply { name, args } => {
            out.push(name.clone());
            args.iter().for_each(|a| flatten(a, out));
        }
    }
}

/// A signal and its mutually exclusive update alternatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputGroup {
    pub signal: String,
    pub props: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtlConjunct {
    pub section: SectionKind,
    pub label: String,
    pub formula: LtlFormula,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtlSpec {
    pub dict: PropDictionary,
    pub groups: Vec<OutputGroup>,
    pub assumptions: Vec<LtlConjunct>,
    pub guarantees: Vec<LtlConjunct>,
    pub signals: SignalTable,
}

impl LtlSpec {
    pub fn assumption(&self) -> LtlFormula {
        Formula::conj(self.assumptions.iter().map(|c| c.formula.clone()))
    }

    pub fn guarantee(&self) -> LtlFormula {
        Formula::conj(self.guarantees.iter().map(|c| c.formula.clone()))
    }

    /// Exactly one alternative per output signal at every step.
    pub fn exclusivity(&self) -> LtlFormula {
        Formula::globally(Formula::conj(self.groups.iter().map(|g| exactly_one(&g.props))))
    }

    /// `(assumptions -> guarantees) && exclusivity`.
    pub fn formula(&self) -> LtlFormula {
        Formula::and(Formula::implies(self.assumption(), self.guarantee()), self.exclusivity())
    }

    /// True if the output part of `v` picks exactly one alternative per group.
    pub fn outputs_exclusive(&self, v: Valuation) -> bool {
        self.groups.iter().all(|g| g.props.iter().filter(|&&p| v >> p & 1 == 1).count() == 1)
    }

    /// Number of output valuations that respect exclusivity.
    pub fn output_choices(&self) -> usize {
        self.groups.iter().map(|g| g.props.len()).product()
    }

    /// The `k`-th exclusive output valuation, in mixed radix over groups.
    pub fn output_choice(&self, mut k: usize) -> Valuation {
        let mut v = 0;
        for g in &self.groups {
            v |= 1 << g.props[k % g.props.len()];
            k /= g.props.len();
        }
        v
    }

    pub fn tsl_formula_of(&self, f: &LtlFormula) -> TslFormula {
        f.map_atoms(&mut |&i| self.dict.prop(i).term.clone())
    }
}

fn exactly_one(props: &[usize]) -> LtlFormula {
    let some = Formula::disj(props.iter().map(|&p| Formula::Atom(p)));
    let mut parts = vec![some];
    for (i, &a) in props.iter().enumerate() {
        for &b in &props[i + 1..] {
            parts.push(Formula::not(Formula::and(Formula::Atom(a), Formula::Atom(b))));
        }
    }
    Formula::conj(parts)
}

pub fn abstract_to_ltl(core: &CoreSpec) -> Result<LtlSpec, AbstractionError> {
    let mut atoms = Vec::new();
    for c in core.assumptions.iter().chain(&core.guarantees) {
        c.formula.atoms(&mut atoms);
    }
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for a in atoms {
        match a {
            TslAtom::Predicate(_) => inputs.push(a.clone()),
            TslAtom::Update(u) => {
                if core.signals.written_cells.contains(&u.target) {
                    outputs.push(TslAtom::Update(UpdateTerm::idle(&u.target)));
                }
                outputs.push(a.clone());
            }
        }
    }
    let dict = PropDictionary::new(inputs, outputs)?;
    let mut by_signal: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for i in dict.outputs() {
        if let TslAtom::Update(u) = &dict.prop(i).term {
            by_signal.entry(u.target.clone()).or_default().push(i);
        }
    }
    let groups = by_signal.into_iter().map(|(signal, props)| OutputGroup { signal, props }).collect();
    let lower = |c: &crate::frontend::Conjunct| LtlConjunct {
        section: c.section,
        label: c.label(),
        formula: c.formula.map_atoms(&mut |a| dict.index_of_term(a).expect("atom collected above")),
    };
    let assumptions = core.assumptions.iter().map(lower).collect();
    let guarantees = core.guarantees.iter().map(lower).collect();
    Ok(LtlSpec { dict, groups, assumptions, guarantees, signals: core.signals.clone() })
}

/// Renders a propositional formula with proposition names.
pub struct Named<'a>(pub &'a LtlFormula, pub &'a PropDictionary);

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let named = self.0.map_atoms(&mut |&i| self.1.name(i).to_string());
        write!(f, "{named}")
    }
}
