use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ast::{is_numeral, FunctionTerm};
use super::desugar::{CoreSpec, TslAtom, TslFormula};
use super::diag::SpecError;

/// Signal and symbol classification of a specification.
///
/// Cells are signals read as arguments; those also written by updates persist
/// values between turns, the rest are refreshed by the runtime. Outputs are
/// update targets that are never read. Zero-arity predicates act as boolean inputs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalTable {
    pub inputs: BTreeSet<String>,
    pub cells: BTreeSet<String>,
    pub outputs: BTreeSet<String>,
    pub predicates: BTreeMap<String, usize>,
    pub functions: BTreeMap<String, usize>,
    #[serde(default)]
    pub constants: BTreeSet<String>,
    /// Cells written by some update.
    #[serde(default)]
    pub written_cells: BTreeSet<String>,
    /// Written cells whose updates involve numerals, treated as integers.
    #[serde(default)]
    pub integer_cells: BTreeSet<String>,
}

impl SignalTable {
    pub fn is_integer_cell(&self, name: &str) -> bool {
        self.integer_cells.contains(name)
    }
}

/// Builds the table from formulas, collecting consistency errors instead of failing.
pub fn classify<'a>(formulas: impl IntoIterator<Item = &'a TslFormula>) -> (SignalTable, Vec<SpecError>) {
    let mut atoms = Vec::new();
    for f in formulas {
        f.atoms(&mut atoms);
    }
    let mut read: BTreeSet<&str> = BTreeSet::new();
    let mut targets: BTreeMap<&str, bool> = BTreeMap::new();
    let mut arity: BTreeMap<String, usize> = BTreeMap::new();
    let mut errors = Vec::new();
    let mut t = SignalTable::default();

    let mut note = |name: &str, n: usize, errors: &mut Vec<SpecError>| match arity.get(name) {
        Some(&m) if m != n => {
            let e = SpecError::ArityMismatch { symbol: name.to_string(), first: m, second: n };
            if !errors.contains(&e) {
                errors.push(e);
            }
        }
        Some(_) => {}
        None => {
            arity.insert(name.to_string(), n);
        }
    };

    for atom in &atoms {
        let mut sigs = Vec::new();
        let mut funs = Vec::new();
        match atom {
            TslAtom::Predicate(p) => {
                note(&p.name, p.args.len(), &mut errors);
                t.predicates.entry(p.name.clone()).or_insert(p.args.len());
                if p.args.is_empty() {
                    t.inputs.insert(p.name.clone());
                }
                p.args.iter().for_each(|a| {
                    a.signals(&mut sigs);
                    a.functions(&mut funs);
                });
            }
            TslAtom::Update(u) => {
                let numeric = mentions_numeral(&u.value);
                let e = targets.entry(u.target.as_str()).or_insert(false);
                *e |= numeric;
                if !u.is_idle() {
                    u.value.signals(&mut sigs);
                }
                u.value.functions(&mut funs);
            }
        }
        read.extend(sigs);
        for (name, n) in funs {
            if is_numeral(name) {
                t.constants.insert(name.to_string());
            } else {
                note(name, n, &mut errors);
                t.functions.entry(name.to_string()).or_insert(n);
            }
        }
    }

    for (&target, &numeric) in &targets {
        if t.functions.contains_key(target) || t.predicates.contains_key(target) {
            errors.push(SpecError::TargetUsedAsFunction(target.to_string()));
        }
        if read.contains(target) {
            t.written_cells.insert(target.to_string());
            if numeric {
                t.integer_cells.insert(target.to_string());
            }
        } else {
            t.outputs.insert(target.to_string());
        }
    }
    t.cells = read.into_iter().map(str::to_string).collect();
    (t, errors)
}

fn mentions_numeral(t: &FunctionTerm) -> bool {
    let mut funs = Vec::new();
    t.functions(&mut funs);
    funs.iter().any(|(n, _)| is_numeral(n))
}

/// Checks symbol consistency and returns the signal table.
pub fn validate_signals(core: &CoreSpec) -> Result<SignalTable, SpecError> {
    let (table, errors) = classify(core.assumptions.iter().chain(&core.guarantees).map(|c| &c.formula));
    if let Some(e) = errors.into_iter().next() {
        return Err(e);
    }
    if core.guarantees.is_empty() {
        return Err(SpecError::NoGuarantees);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::super::desugar::desugar;
    use super::super::parser::parse_spec;
    use super::*;
    use crate::corpus;

    fn table(src: &str) -> Result<SignalTable, SpecError> {
        validate_signals(&desugar(&parse_spec(src).unwrap()))
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn adventure_classification() {
        let t = table(corpus::ADVENTURE).unwrap();
        assert!(t.inputs.is_empty());
        assert_eq!(t.cells, set(&["s"]));
        assert_eq!(t.outputs, set(&["storyPassage"]));
        let preds: Vec<_> = t.predicates.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        assert_eq!(preds, vec![("inCave", 1), ("inMarket", 1), ("inTown", 1)]);
        let funs: Vec<_> = t.functions.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        assert_eq!(funs, vec![("toCave", 1), ("toMarket", 1), ("toTown", 1)]);
    }

    #[test]
    fn choices_counter_is_a_cell() {
        let t = table(corpus::CHOICES).unwrap();
        assert!(t.cells.contains("safeCount"));
        assert!(t.written_cells.contains("safeCount"));
        assert!(t.is_integer_cell("safeCount"));
        assert_eq!(t.inputs, set(&["safe", "safeThreshold"]));
        assert_eq!(t.functions.get("add"), Some(&2));
        assert_eq!(t.constants, set(&["1"]));
    }

    #[test]
    fn arity_mismatch_names_symbol() {
        let err = table("always guarantee { p(x); p(x, y); }").unwrap_err();
        assert!(matches!(err, SpecError::ArityMismatch { ref symbol, first: 1, second: 2 } if symbol == "p"), "{err:?}");
    }

    #[test]
    fn target_used_as_function() {
        let err = table("always guarantee { [f <- f(x)]; }").unwrap_err();
        assert_eq!(err, SpecError::TargetUsedAsFunction("f".into()));
    }

    #[test]
    fn assumptions_alone_are_rejected() {
        assert_eq!(table("always assume { p; }").unwrap_err(), SpecError::NoGuarantees);
    }
}
