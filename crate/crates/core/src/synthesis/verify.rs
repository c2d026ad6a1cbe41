//! Model checking of a Mealy machine against the full specification.
//!
//! Deliberately independent of the synthesis route: the negated formula is
//! translated by a separate node-based construction into a generalized Büchi
//! automaton with state labels, and the product with the machine is searched
//! for a reachable fair cycle.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::abstraction::{LtlFormula, LtlSpec, Valuation};
use crate::formula::{Formula, Lasso};
use crate::graph;
use crate::mealy::MealyMachine;

pub const DEFAULT_PRODUCT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("product exceeds {0} states")]
    ProductTooLarge(usize),
    #[error("machine is not total and exclusive over the specification's propositions")]
    MalformedMachine,
    #[error("formula has more than 64 until-subformulas")]
    TooManyEventualities,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    /// Input valuations driving the machine into a violation.
    pub inputs: Lasso<Valuation>,
    /// Full valuations (inputs and outputs) of the resulting run.
    pub run: Lasso<Valuation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub automaton_states: usize,
    pub product_states: usize,
    pub counterexample: Option<Counterexample>,
}

pub fn verify_machine(m: &MealyMachine, spec: &LtlSpec) -> Result<VerificationReport, VerifyError> {
    verify_formula(m, &spec.formula(), DEFAULT_PRODUCT_CAP)
}

/// Checks that every run of `m` satisfies `f`.
pub fn verify_formula(m: &MealyMachine, f: &LtlFormula, cap: usize) -> Result<VerificationReport, VerifyError> {
    if !m.is_well_formed() {
        return Err(VerifyError::MalformedMachine);
    }
    let gba = Gba::build(&f.negated_nnf());
    if gba.acceptance.len() > 64 {
        return Err(VerifyError::TooManyEventualities);
    }
    let n_in = m.num_input_valuations();

    // Product nodes: (machine state, automaton node); the node constrains the letter read next.
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut nodes: Vec<(usize, usize)> = Vec::new();
    let mut adj: Vec<Vec<usize>> = Vec::new();
    let mut via: Vec<Vec<Valuation>> = Vec::new();
    let mut queue = VecDeque::new();
    for &g in &gba.initial {
        index.insert((0, g), nodes.len());
        nodes.push((0, g));
        queue.push_back(nodes.len() - 1);
    }
    let roots = nodes.len();
    while let Some(x) = queue.pop_front() {
        let (t, g) = nodes[x];
        let mut succ = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_in {
            let tr = m.table[t][i];
            let letter = i as Valuation | tr.output;
            if !gba.label_ok(g, letter) {
                continue;
            }
            for &h in &gba.succ[g] {
                let key = (tr.next, h);
                let y = match index.get(&key) {
                    Some(&y) => y,
                    None => {
                        if nodes.len() >= cap {
                            return Err(VerifyError::ProductTooLarge(cap));
                        }
                        index.insert(key, nodes.len());
                        nodes.push(key);
                        queue.push_back(nodes.len() - 1);
                        nodes.len() - 1
                    }
                };
                succ.push(y);
                labels.push(i as Valuation);
            }
        }
        while adj.len() <= x {
            adj.push(Vec::new());
            via.push(Vec::new());
        }
        adj[x] = succ;
        via[x] = labels;
    }
    adj.resize(nodes.len(), Vec::new());
    via.resize(nodes.len(), Vec::new());

    let comp = graph::tarjan(&adj);
    let cyclic = graph::cyclic_nodes(&adj, &comp);
    let ncomp = comp.iter().copied().max().map_or(0, |c| c + 1);
    let k = gba.acceptance.len();
    let mut covered = vec![0u64; ncomp];
    let mut has_cycle = vec![false; ncomp];
    for x in 0..nodes.len() {
        if cyclic[x] {
            has_cycle[comp[x]] = true;
            covered[comp[x]] |= gba.acc_bits[nodes[x].1];
        }
    }
    let full = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
    let fair = (0..ncomp).find(|&c| has_cycle[c] && covered[c] & full == full);
    let counterexample = fair.map(|c| {
        let inputs = lasso_through(&adj, &via, &comp, c, roots, &gba, &nodes, full);
        let mut state = 0;
        let mut feed = |i: &Valuation| {
            let tr = m.step(state, *i);
            state = tr.next;
            i | tr.output
        };
        let stem = inputs.stem.iter().map(&mut feed).collect();
        let cycle = inputs.cycle.iter().map(&mut feed).collect();
        Counterexample { inputs, run: Lasso::new(stem, cycle) }
    });
    Ok(VerificationReport { passed: counterexample.is_none(), automaton_states: gba.succ.len(), product_states: nodes.len(), counterexample })
}

/// Finds a stem into component `c` and a cycle inside it visiting every acceptance set.
fn lasso_through(
    adj: &[Vec<usize>],
    via: &[Vec<Valuation>],
    comp: &[usize],
    c: usize,
    roots: usize,
    gba: &Gba,
    nodes: &[(usize, usize)],
    full: u64,
) -> Lasso<Valuation> {
    let (stem, entry) = (0..roots)
        .map(|r| if comp[r] == c { Some((Vec::new(), r)) } else { try_bfs(adj, via, r, &|y| comp[y] == c) })
        .find_map(|x| x)
        .expect("fair component is reachable");
    let mut cycle = Vec::new();
    let mut at = entry;
    let mut need = full & !gba.acc_bits[nodes[entry].1];
    while need != 0 {
        let bit = need.trailing_zeros();
        let (p, end) = try_bfs_inside(adj, via, at, comp, c, &|y| gba.acc_bits[nodes[y].1] >> bit & 1 == 1);
        cycle.extend(p);
        at = end;
        need &= !gba.acc_bits[nodes[at].1];
    }
    if at != entry || cycle.is_empty() {
        let (p, _) = try_bfs_inside(adj, via, at, comp, c, &|y| y == entry);
        cycle.extend(p);
    }
    Lasso::new(stem, cycle)
}

fn try_bfs(adj: &[Vec<usize>], via: &[Vec<Valuation>], from: usize, goal: &dyn Fn(usize) -> bool) -> Option<(Vec<Valuation>, usize)> {
    search(adj, via, from, &|_| true, goal)
}

fn try_bfs_inside(
    adj: &[Vec<usize>],
    via: &[Vec<Valuation>],
    from: usize,
    comp: &[usize],
    c: usize,
    goal: &dyn Fn(usize) -> bool,
) -> (Vec<Valuation>, usize) {
    search(adj, via, from, &|y| comp[y] == c, goal).expect("strongly connected")
}

/// Breadth-first search for a non-empty path to a goal node.
fn search(
    adj: &[Vec<usize>],
    via: &[Vec<Valuation>],
    from: usize,
    allowed: &dyn Fn(usize) -> bool,
    goal: &dyn Fn(usize) -> bool,
) -> Option<(Vec<Valuation>, usize)> {
    let n = adj.len();
    let mut parent: Vec<Option<(usize, Valuation)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut q = VecDeque::from([from]);
    while let Some(x) = q.pop_front() {
        for (j, &y) in adj[x].iter().enumerate() {
            if !allowed(y) {
                continue;
            }
            if goal(y) {
                let mut path = vec![via[x][j]];
                let mut z = x;
                while z != from {
                    let (p, v) = parent[z].expect("parent chain");
                    path.push(v);
                    z = p;
                }
                path.reverse();
                return Some((path, y));
            }
            if !seen[y] {
                seen[y] = true;
                parent[y] = Some((x, via[x][j]));
                q.push_back(y);
            }
        }
    }
    None
}

/// Generalized Büchi automaton with literal constraints on nodes.
struct Gba {
    initial: Vec<usize>,
    succ: Vec<Vec<usize>>,
    pos: Vec<u64>,
    neg: Vec<u64>,
    acceptance: Vec<usize>,
    /// Acceptance sets each node belongs to.
    acc_bits: Vec<u64>,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Node {
    old: BTreeSet<usize>,
    next: BTreeSet<usize>,
}

struct Builder {
    subs: Vec<LtlFormula>,
    ids: HashMap<LtlFormula, usize>,
}

impl Builder {
    fn id(&mut self, f: &LtlFormula) -> usize {
        if let Some(&i) = self.ids.get(f) {
            return i;
        }
        let i = self.subs.len();
        self.subs.push(f.clone());
        self.ids.insert(f.clone(), i);
        i
    }

    fn expand(&mut self, mut new: Vec<usize>, mut old: BTreeSet<usize>, mut next: BTreeSet<usize>, out: &mut Vec<Node>) {
        loop {
            let Some(eta) = new.pop() else {
                out.push(Node { old, next });
                return;
            };
            if old.contains(&eta) {
                continue;
            }
            let f = self.subs[eta].clone();
            match &f {
                Formula::True => {
                    old.insert(eta);
                }
                Formula::False => return,
                Formula::Atom(_) | Formula::Not(_) => {
                    let neg = match &f {
                        Formula::Atom(p) => Formula::not(Formula::Atom(*p)),
                        Formula::Not(a) => (**a).clone(),
                        _ => unreachable!(),
                    };
                    if self.ids.get(&neg).is_some_and(|n| old.contains(n)) {
                        return;
                    }
                    old.insert(eta);
                }
                Formula::And(a, b) => {
                    let (a, b) = (self.id(a), self.id(b));
                    old.insert(eta);
                    new.push(a);
                    new.push(b);
                }
                Formula::Next(a) => {
                    let a = self.id(a);
                    old.insert(eta);
                    next.insert(a);
                }
                Formula::Or(a, b) => {
                    let (a, b) = (self.id(a), self.id(b));
                    old.insert(eta);
                    let mut n1 = new.clone();
                    n1.push(a);
                    self.expand(n1, old.clone(), next.clone(), out);
                    new.push(b);
                }
                Formula::Until(a, b) => {
                    let (a, b) = (self.id(a), self.id(b));
                    old.insert(eta);
                    let mut n1 = new.clone();
                    n1.push(a);
                    let mut x1 = next.clone();
                    x1.insert(eta);
                    self.expand(n1, old.clone(), x1, out);
                    new.push(b);
                }
                Formula::Release(a, b) => {
                    let (a, b) = (self.id(a), self.id(b));
                    old.insert(eta);
                    let mut n1 = new.clone();
                    n1.push(b);
                    let mut x1 = next.clone();
                    x1.insert(eta);
                    self.expand(n1, old.clone(), x1, out);
                    new.push(a);
                    new.push(b);
                }
            }
        }
    }
}

impl Gba {
    fn build(f: &LtlFormula) -> Gba {
        let mut b = Builder { subs: Vec::new(), ids: HashMap::new() };
        let root = b.id(f);
        let mut index: HashMap<Node, usize> = HashMap::new();
        let mut nodes: Vec<Node> = Vec::new();
        let mut succ: Vec<Vec<usize>> = Vec::new();
        let mut by_next: HashMap<BTreeSet<usize>, Vec<usize>> = HashMap::new();

        let mut intern = |n: Node, nodes: &mut Vec<Node>| -> usize {
            *index.entry(n.clone()).or_insert_with(|| {
                nodes.push(n);
                nodes.len() - 1
            })
        };
        let mut out = Vec::new();
        b.expand(vec![root], BTreeSet::new(), BTreeSet::new(), &mut out);
        let mut initial: Vec<usize> = out.into_iter().map(|n| intern(n, &mut nodes)).collect();
        initial.sort_unstable();
        initial.dedup();
        let mut i = 0;
        while i < nodes.len() {
            let key = nodes[i].next.clone();
            let targets = match by_next.get(&key) {
                Some(t) => t.clone(),
                None => {
                    let mut out = Vec::new();
                    b.expand(key.iter().copied().collect(), BTreeSet::new(), BTreeSet::new(), &mut out);
                    let t: Vec<usize> = out.into_iter().map(|n| intern(n, &mut nodes)).collect();
                    by_next.insert(key, t.clone());
                    t
                }
            };
            succ.push(targets);
            i += 1;
        }
        let untils: Vec<usize> = (0..b.subs.len()).filter(|&s| matches!(b.subs[s], Formula::Until(..))).collect();
        let acceptance: Vec<usize> = untils.clone();
        let mut pos = Vec::with_capacity(nodes.len());
        let mut neg = Vec::with_capacity(nodes.len());
        let mut acc_bits = Vec::with_capacity(nodes.len());
        for n in &nodes {
            let (mut p, mut q) = (0u64, 0u64);
            for &s in &n.old {
                match &b.subs[s] {
                    Formula::Atom(a) => p |= 1 << a,
                    Formula::Not(a) => {
                        if let Formula::Atom(a) = **a {
                            q |= 1 << a;
                        }
                    }
                    _ => {}
                }
            }
            pos.push(p);
            neg.push(q);
            let mut bits = 0u64;
            for (k, &u) in untils.iter().enumerate().take(64) {
                let Formula::Until(_, rhs) = &b.subs[u] else { unreachable!() };
                let rhs = b.ids.get(&**rhs).copied();
                if !n.old.contains(&u) || rhs.is_some_and(|r| n.old.contains(&r)) {
                    bits |= 1 << k;
                }
            }
            acc_bits.push(bits);
        }
        Gba { initial, succ, pos, neg, acceptance, acc_bits }
    }

    fn label_ok(&self, g: usize, letter: Valuation) -> bool {
        letter & self.pos[g] == self.pos[g] && letter & self.neg[g] == 0
    }
}
