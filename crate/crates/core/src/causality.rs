//! But-for causes over input propositions for effects over output propositions.
//!
//! A deviation varies the input propositions in a fixed scope (all inputs by
//! default); every other input keeps its value from the observed trace. A
//! candidate is certified when it holds on the trace and every deviation that
//! falsifies it also falsifies the effect. The check is an emptiness test on
//! the product of the machine, the trace and a Büchi automaton for
//! `!cause && effect`, so it covers all ultimately periodic deviations.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::abstraction::{LtlFormula, Valuation};
use crate::formula::{Formula, Lasso};
use crate::graph;
use crate::mealy::MealyMachine;
use crate::nba::{ltl_to_nba, NbaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Deviations {
    /// Largest trace stem accepted.
    pub stem: usize,
    /// Largest trace loop accepted.
    pub cycle: usize,
    /// Input propositions a deviation may change; `None` means all inputs.
    pub scope: Option<Valuation>,
}

impl Default for Deviations {
    fn default() -> Self {
        Deviations { stem: 8, cycle: 4, scope: None }
    }
}

impl Deviations {
    pub fn with_scope(scope: impl IntoIterator<Item = usize>) -> Self {
        Deviations { scope: Some(scope.into_iter().fold(0, |acc, p| acc | 1 << p)), ..Deviations::default() }
    }

    fn mask(&self, m: &MealyMachine) -> Valuation {
        self.scope.unwrap_or(Valuation::MAX) & m.dict.input_mask()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CausalityError {
    #[error("the effect does not hold on the machine's run over the trace")]
    EffectNotOnTrace,
    #[error("trace of stem {stem} and loop {cycle} exceeds the deviation bounds {bounds:?}")]
    BoundTooSmall { stem: usize, cycle: usize, bounds: Deviations },
    #[error("the effect mentions input propositions")]
    EffectOverInputs,
    #[error("the cause mentions propositions outside the deviation scope")]
    CauseOutsideScope,
    #[error(transparent)]
    Automaton(#[from] NbaError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CauseVerdict {
    pub holds_on_trace: bool,
    pub counterfactual_valid: bool,
    /// Input word on which the cause fails and the effect still holds.
    pub witness: Option<Lasso<Valuation>>,
}

impl CauseVerdict {
    pub fn certified(&self) -> bool {
        self.holds_on_trace && self.counterfactual_valid
    }
}

fn support(f: &LtlFormula) -> Valuation {
    let mut atoms = Vec::new();
    f.atoms(&mut atoms);
    atoms.into_iter().fold(0, |acc, &p| acc | 1 << p)
}

fn holds(f: &LtlFormula, w: &Lasso<Valuation>) -> bool {
    f.eval_lasso(w, &|&p, &v| v >> p & 1 == 1)
}

fn check_inputs(m: &MealyMachine, trace: &Lasso<Valuation>, effect: &LtlFormula, bounds: Deviations) -> Result<(), CausalityError> {
    if support(effect) & m.dict.input_mask() != 0 {
        return Err(CausalityError::EffectOverInputs);
    }
    if trace.stem.len() > bounds.stem || trace.cycle.len() > bounds.cycle {
        return Err(CausalityError::BoundTooSmall { stem: trace.stem.len(), cycle: trace.cycle.len(), bounds });
    }
    if !holds(effect, &m.run_lasso(trace)) {
        return Err(CausalityError::EffectNotOnTrace);
    }
    Ok(())
}

pub fn check_cause(
    m: &MealyMachine,
    trace: &Lasso<Valuation>,
    effect: &LtlFormula,
    cause: &LtlFormula,
    bounds: Deviations,
) -> Result<CauseVerdict, CausalityError> {
    check_inputs(m, trace, effect, bounds)?;
    verdict(m, trace, effect, cause, bounds.mask(m))
}

fn verdict(m: &MealyMachine, trace: &Lasso<Valuation>, effect: &LtlFormula, cause: &LtlFormula, free: Valuation) -> Result<CauseVerdict, CausalityError> {
    if support(cause) & !free != 0 {
        return Err(CausalityError::CauseOutsideScope);
    }
    let holds_on_trace = holds(cause, &trace.map(|&v| v & m.dict.input_mask()));
    let witness = find_witness(m, trace, free, &Formula::and(Formula::not(cause.clone()), effect.clone()))?;
    Ok(CauseVerdict { holds_on_trace, counterfactual_valid: witness.is_none(), witness })
}

/// Searches for an input word that agrees with the trace outside `free` and
/// whose run satisfies `target`.
fn find_witness(m: &MealyMachine, trace: &Lasso<Valuation>, free: Valuation, target: &LtlFormula) -> Result<Option<Lasso<Valuation>>, CausalityError> {
    let nba = ltl_to_nba(target)?;
    let free_bits: Vec<usize> = (0..64).filter(|&p| free >> p & 1 == 1).collect();
    let letters: Vec<Valuation> = (0..1u64 << free_bits.len())
        .map(|k| free_bits.iter().enumerate().fold(0, |acc, (j, &p)| acc | (k >> j & 1) << p))
        .collect();

    type Node = (usize, usize, usize);
    let mut index: HashMap<Node, usize> = HashMap::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut adj: Vec<Vec<(usize, Valuation)>> = Vec::new();
    let mut queue = VecDeque::new();
    for &q in &nba.initial {
        let n = (0, 0, q);
        if let std::collections::hash_map::Entry::Vacant(e) = index.entry(n) {
            e.insert(nodes.len());
            nodes.push(n);
            adj.push(Vec::new());
            queue.push_back(nodes.len() - 1);
        }
    }
    let roots = nodes.len();
    while let Some(x) = queue.pop_front() {
        let (pos, state, q) = nodes[x];
        for &d in &letters {
            let input = (trace.at(pos) & m.dict.input_mask() & !free) | d;
            let tr = m.step(state, input);
            let letter = input | tr.output;
            for q2 in nba.post(q, letter) {
                let n = (trace.succ(pos), tr.next, q2);
                let y = *index.entry(n).or_insert_with(|| {
                    nodes.push(n);
                    adj.push(Vec::new());
                    queue.push_back(nodes.len() - 1);
                    nodes.len() - 1
                });
                adj[x].push((y, input));
            }
        }
    }

    let plain: Vec<Vec<usize>> = adj.iter().map(|es| es.iter().map(|e| e.0).collect()).collect();
    let comp = graph::tarjan(&plain);
    let cyclic = graph::cyclic_nodes(&plain, &comp);
    let Some(target) = (0..nodes.len()).find(|&x| cyclic[x] && nba.accepting[nodes[x].2]) else { return Ok(None) };
    let stem = path(&adj, (0..roots).collect(), target).expect("target was reached from a root");
    let cycle = adj[target]
        .iter()
        .filter(|&&(y, _)| comp[y] == comp[target])
        .find_map(|&(y, i)| path(&adj, vec![y], target).map(|mut p| {
            p.insert(0, i);
            p
        }))
        .expect("cyclic node lies on a cycle");
    Ok(Some(Lasso::new(stem, cycle)))
}

/// Input labels along a shortest path from any source to `goal`.
fn path(adj: &[Vec<(usize, Valuation)>], sources: Vec<usize>, goal: usize) -> Option<Vec<Valuation>> {
    let mut prev: Vec<Option<(usize, Valuation)>> = vec![None; adj.len()];
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::new();
    for s in sources {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(x) = queue.pop_front() {
        if x == goal {
            let mut out = Vec::new();
            let mut cur = x;
            while let Some((p, i)) = prev[cur] {
                out.push(i);
                cur = p;
            }
            out.reverse();
            return Some(out);
        }
        for &(y, i) in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                prev[y] = Some((x, i));
                queue.push_back(y);
            }
        }
    }
    None
}

/// Templates `G l`, `l U l'`, `l W l'`, `F l` and `X^k l` for `k <= 3`, over
/// literals of the given input propositions. `l` and `l'` use distinct props.
pub fn templates(inputs: &[usize]) -> Vec<LtlFormula> {
    let lits: Vec<LtlFormula> = inputs.iter().flat_map(|&p| [Formula::Atom(p), Formula::not(Formula::Atom(p))]).collect();
    let prop_of = |l: &LtlFormula| match l {
        Formula::Atom(p) => *p,
        Formula::Not(a) => match **a {
            Formula::Atom(p) => p,
            _ => unreachable!("literal"),
        },
        _ => unreachable!("literal"),
    };
    let mut out: Vec<LtlFormula> = lits.iter().map(|l| Formula::globally(l.clone())).collect();
    for a in &lits {
        for b in lits.iter().filter(|b| prop_of(b) != prop_of(a)) {
            out.push(Formula::until(a.clone(), b.clone()));
        }
    }
    for a in &lits {
        for b in lits.iter().filter(|b| prop_of(b) != prop_of(a)) {
            out.push(Formula::or(Formula::until(a.clone(), b.clone()), Formula::globally(a.clone())));
        }
    }
    out.extend(lits.iter().map(|l| Formula::finally(l.clone())));
    for k in 0..=3 {
        out.extend(lits.iter().map(|l| (0..k).fold(l.clone(), |f, _| Formula::next(f))));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauseSearch {
    pub cause: LtlFormula,
    pub verdict: CauseVerdict,
    /// Every certified template, in enumeration order.
    pub certified: Vec<LtlFormula>,
    pub note: Option<String>,
}

/// Returns the strongest certified template, or `true` when the effect does
/// not depend on any input within the templates.
pub fn synthesize_cause(
    m: &MealyMachine,
    trace: &Lasso<Valuation>,
    effect: &LtlFormula,
    candidates: &[LtlFormula],
    bounds: Deviations,
) -> Result<CauseSearch, CausalityError> {
    check_inputs(m, trace, effect, bounds)?;
    let mut certified = Vec::new();
    for c in candidates {
        let v = verdict(m, trace, effect, c, bounds.mask(m))?;
        if v.certified() {
            certified.push((c.clone(), v));
        }
    }
    let n = certified.len();
    let mut implies = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            implies[i][j] = i == j || entails(&certified[i].0, &certified[j].0)?;
        }
    }
    let best = (0..n).max_by_key(|&i| (implies[i].iter().filter(|&&b| b).count(), std::cmp::Reverse(i)));
    let list = certified.iter().map(|c| c.0.clone()).collect();
    Ok(match best {
        Some(i) => CauseSearch { cause: certified[i].0.clone(), verdict: certified[i].1.clone(), certified: list, note: None },
        None => CauseSearch {
            cause: Formula::True,
            verdict: verdict(m, trace, effect, &Formula::True, bounds.mask(m))?,
            certified: list,
            note: Some("input-independent effect: no template over the inputs explains it".to_string()),
        },
    })
}

/// Language inclusion `a => b` by emptiness of `a && !b`.
pub fn entails(a: &LtlFormula, b: &LtlFormula) -> Result<bool, NbaError> {
    Ok(ltl_to_nba(&Formula::and(a.clone(), Formula::not(b.clone())))?.is_empty())
}
