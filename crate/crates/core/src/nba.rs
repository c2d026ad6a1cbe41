//! Tableau translation from LTL to nondeterministic Büchi automata.
//!
//! States are sets of obligations; transitions carry cube labels. The
//! generalized automaton (one acceptance set per until-subformula) is
//! degeneralized with a level counter and trimmed to states with a
//! non-empty language.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::abstraction::{LtlFormula, Valuation};
use crate::formula::{Formula, Lasso};
use crate::graph;

pub const DEFAULT_NODE_CAP: usize = 2000;
pub const DEFAULT_STATE_CAP: usize = 200_000;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum NbaError {
    #[error("formula has {nodes} distinct subformulas, above the cap of {cap}")]
    FormulaTooLarge { nodes: usize, cap: usize },
    #[error("automaton exceeds {0} states")]
    TooManyStates(usize),
    #[error("formula has more than 64 until-subformulas")]
    TooManyEventualities,
}

/// A conjunction of literals: `pos` must be true, `neg` must be false.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Cube {
    pub pos: u64,
    pub neg: u64,
}

impl Cube {
    pub const TOP: Cube = Cube { pos: 0, neg: 0 };

    pub fn matches(&self, v: Valuation) -> bool {
        v & self.pos == self.pos && v & self.neg == 0
    }

    pub fn with(self, prop: usize, value: bool) -> Option<Cube> {
        let bit = 1u64 << prop;
        let mut c = self;
        if value {
            c.pos |= bit;
        } else {
            c.neg |= bit;
        }
        (c.pos & c.neg == 0).then_some(c)
    }

    pub fn and(self, other: Cube) -> Option<Cube> {
        let c = Cube { pos: self.pos | other.pos, neg: self.neg | other.neg };
        (c.pos & c.neg == 0).then_some(c)
    }

    /// Every valuation matching `self` matches `other`.
    pub fn entails(&self, other: &Cube) -> bool {
        other.pos & !self.pos == 0 && other.neg & !self.neg == 0
    }

    pub fn support(&self) -> u64 {
        self.pos | self.neg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub cube: Cube,
    pub to: usize,
}

/// State-based Büchi automaton over valuations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nba {
    pub initial: Vec<usize>,
    pub accepting: Vec<bool>,
    pub edges: Vec<Vec<Edge>>,
}

#[derive(Debug, Clone, Copy)]
pub struct NbaOptions {
    pub node_cap: usize,
    pub state_cap: usize,
    /// Clear the accepting flag of states that lie on no cycle.
    pub drop_transient_acceptance: bool,
}

impl Default for NbaOptions {
    fn default() -> Self {
        NbaOptions { node_cap: DEFAULT_NODE_CAP, state_cap: DEFAULT_STATE_CAP, drop_transient_acceptance: true }
    }
}

pub fn ltl_to_nba(f: &LtlFormula) -> Result<Nba, NbaError> {
    ltl_to_nba_with(f, NbaOptions::default())
}

pub fn ltl_to_nba_with(f: &LtlFormula, opts: NbaOptions) -> Result<Nba, NbaError> {
    let mut arena = Arena::default();
    let root = arena.intern_formula(&f.nnf());
    if arena.nodes.len() > opts.node_cap {
        return Err(NbaError::FormulaTooLarge { nodes: arena.nodes.len(), cap: opts.node_cap });
    }
    if arena.untils.len() > 64 {
        return Err(NbaError::TooManyEventualities);
    }
    let gen = arena.generalized(root, opts.state_cap)?;
    let nba = degeneralize(&gen, opts.state_cap)?;
    Ok(nba.trim(opts.drop_transient_acceptance))
}

impl Nba {
    pub fn num_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_empty()
    }

    /// Automaton with no states, accepting nothing.
    pub fn empty() -> Nba {
        Nba { initial: Vec::new(), accepting: Vec::new(), edges: Vec::new() }
    }

    /// Successor states on a letter.
    pub fn post(&self, q: usize, v: Valuation) -> impl Iterator<Item = usize> + '_ {
        self.edges[q].iter().filter(move |e| e.cube.matches(v)).map(|e| e.to)
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        self.edges.iter().map(|es| es.iter().map(|e| e.to).collect::<BTreeSet<_>>().into_iter().collect()).collect()
    }

    /// Keeps reachable states with a non-empty language.
    pub fn trim(&self, drop_transient_acceptance: bool) -> Nba {
        let n = self.num_states();
        let adj = self.adjacency();
        let mut reach = vec![false; n];
        let mut queue: Vec<usize> = self.initial.clone();
        for &q in &queue {
            reach[q] = true;
        }
        while let Some(q) = queue.pop() {
            for &r in &adj[q] {
                if !reach[r] {
                    reach[r] = true;
                    queue.push(r);
                }
            }
        }
        let comp = graph::tarjan(&adj);
        let cyclic = graph::cyclic_nodes(&adj, &comp);
        let mut good_comp = vec![false; comp.iter().copied().max().map_or(0, |m| m + 1)];
        for q in 0..n {
            if self.accepting[q] && cyclic[q] {
                good_comp[comp[q]] = true;
            }
        }
        let good: Vec<bool> = (0..n).map(|q| good_comp[comp[q]] && cyclic[q]).collect();
        let live = graph::backward_reach(&adj, &good);
        let keep: Vec<bool> = (0..n).map(|q| reach[q] && live[q]).collect();
        let mut map = vec![usize::MAX; n];
        let mut order = Vec::new();
        // Renumber in breadth-first order from the initial states for stable output.
        let mut bfs: VecDeque<usize> = self.initial.iter().copied().filter(|&q| keep[q]).collect();
        for &q in &bfs {
            if map[q] == usize::MAX {
                map[q] = order.len();
                order.push(q);
            }
        }
        while let Some(q) = bfs.pop_front() {
            for e in &self.edges[q] {
                if keep[e.to] && map[e.to] == usize::MAX {
                    map[e.to] = order.len();
                    order.push(e.to);
                    bfs.push_back(e.to);
                }
            }
        }
        let mut initial: Vec<usize> = self.initial.iter().filter(|&&q| keep[q]).map(|&q| map[q]).collect();
        initial.sort_unstable();
        initial.dedup();
        let accepting = order.iter().map(|&q| self.accepting[q] && (!drop_transient_acceptance || cyclic[q])).collect();
        let edges = order
            .iter()
            .map(|&q| {
                let es: Vec<Edge> = self.edges[q].iter().filter(|e| keep[e.to]).map(|e| Edge { cube: e.cube, to: map[e.to] }).collect();
                simplify_edges(es)
            })
            .collect();
        Nba { initial, accepting, edges }
    }

    /// Whether the automaton accepts the lasso word.
    pub fn accepts(&self, word: &Lasso<Valuation>) -> bool {
        let len = word.len();
        let idx = |q: usize, i: usize| q * len + i;
        let n = self.num_states() * len;
        let mut adj = vec![Vec::new(); n];
        let mut reach = vec![false; n];
        let mut queue: Vec<usize> = self.initial.iter().map(|&q| idx(q, 0)).collect();
        for &x in &queue {
            reach[x] = true;
        }
        while let Some(x) = queue.pop() {
            let (q, i) = (x / len, x % len);
            let j = word.succ(i);
            for r in self.post(q, *word.at(i)) {
                let y = idx(r, j);
                adj[x].push(y);
                if !reach[y] {
                    reach[y] = true;
                    queue.push(y);
                }
            }
        }
        let comp = graph::tarjan(&adj);
        let cyclic = graph::cyclic_nodes(&adj, &comp);
        (0..n).any(|x| reach[x] && cyclic[x] && self.accepting[x / len])
    }
}

/// Merges duplicate edges and pairs of cubes that differ in a single literal.
fn simplify_edges(mut es: Vec<Edge>) -> Vec<Edge> {
    loop {
        es.sort();
        es.dedup();
        let mut merged = false;
        'outer: for i in 0..es.len() {
            for j in 0..es.len() {
                if i == j || es[i].to != es[j].to {
                    continue;
                }
                let (a, b) = (es[i].cube, es[j].cube);
                if a.entails(&b) {
                    es.remove(i);
                    merged = true;
                    break 'outer;
                }
                if a.support() == b.support() {
                    let diff = a.pos ^ b.pos;
                    if diff.count_ones() == 1 {
                        es[i].cube = Cube { pos: a.pos & !diff, neg: a.neg & !diff };
                        es.remove(j);
                        merged = true;
                        break 'outer;
                    }
                }
            }
        }
        if !merged {
            return es;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Node {
    True,
    False,
    Lit(usize, bool),
    And(u32, u32),
    Or(u32, u32),
    Next(u32),
    Until(u32, u32),
    Release(u32, u32),
}

#[derive(Default)]
struct Arena {
    nodes: Vec<Node>,
    ids: HashMap<Node, u32>,
    /// Bit index of every until node.
    untils: HashMap<u32, usize>,
}

struct Term {
    cube: Cube,
    next: Vec<u32>,
    postponed: u64,
}

struct Generalized {
    /// Bits of untils that are ever postponed; these form the acceptance sets.
    acceptance: Vec<u64>,
    edges: Vec<Vec<(Cube, usize, u64)>>,
}

impl Arena {
    fn intern(&mut self, n: Node) -> u32 {
        if let Some(&id) = self.ids.get(&n) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(n);
        self.ids.insert(n, id);
        if let Node::Until(..) = n {
            let k = self.untils.len();
            self.untils.insert(id, k);
        }
        id
    }

    fn intern_formula(&mut self, f: &LtlFormula) -> u32 {
        let t = self.intern(Node::True);
        let ff = self.intern(Node::False);
        match f {
            Formula::True => t,
            Formula::False => ff,
            Formula::Atom(p) => self.intern(Node::Lit(*p, true)),
            Formula::Not(a) => match **a {
                Formula::Atom(p) => self.intern(Node::Lit(p, false)),
                _ => unreachable!("input is in negation normal form"),
            },
            Formula::And(a, b) => {
                let (a, b) = (self.intern_formula(a), self.intern_formula(b));
                match (self.nodes[a as usize], self.nodes[b as usize]) {
                    (Node::False, _) | (_, Node::False) => ff,
                    (Node::True, _) => b,
                    (_, Node::True) => a,
                    _ if a == b => a,
                    _ => self.intern(Node::And(a.min(b), a.max(b))),
                }
            }
            Formula::Or(a, b) => {
                let (a, b) = (self.intern_formula(a), self.intern_formula(b));
                match (self.nodes[a as usize], self.nodes[b as usize]) {
                    (Node::True, _) | (_, Node::True) => t,
                    (Node::False, _) => b,
                    (_, Node::False) => a,
                    _ if a == b => a,
                    _ => self.intern(Node::Or(a.min(b), a.max(b))),
                }
            }
            Formula::Next(a) => {
                let a = self.intern_formula(a);
                match self.nodes[a as usize] {
                    Node::True | Node::False => a,
                    _ => self.intern(Node::Next(a)),
                }
            }
            Formula::Until(a, b) => {
                let (a, b) = (self.intern_formula(a), self.intern_formula(b));
                match self.nodes[b as usize] {
                    Node::True | Node::False => b,
                    _ if matches!(self.nodes[a as usize], Node::False) => b,
                    _ => self.intern(Node::Until(a, b)),
                }
            }
            Formula::Release(a, b) => {
                let (a, b) = (self.intern_formula(a), self.intern_formula(b));
                match self.nodes[b as usize] {
                    Node::True | Node::False => b,
                    _ if matches!(self.nodes[a as usize], Node::True) => b,
                    _ => self.intern(Node::Release(a, b)),
                }
            }
        }
    }

    fn expand(&self, obligations: &[u32]) -> Vec<Term> {
        let mut out = Vec::new();
        let mut seen = Vec::new();
        self.go(obligations.to_vec(), &mut seen, Cube::TOP, Vec::new(), 0, &mut out);
        // Drop terms subsumed by a weaker one.
        let mut keep = vec![true; out.len()];
        for i in 0..out.len() {
            for j in 0..out.len() {
                if i == j || !keep[j] || !keep[i] {
                    continue;
                }
                let (a, b) = (&out[j], &out[i]);
                let subsumes = b.cube.entails(&a.cube) && a.postponed & !b.postponed == 0 && a.next.iter().all(|x| b.next.binary_search(x).is_ok());
                let identical = a.cube == b.cube && a.postponed == b.postponed && a.next == b.next;
                if subsumes && (!identical || j < i) {
                    keep[i] = false;
                }
            }
        }
        out.into_iter().zip(keep).filter(|(_, k)| *k).map(|(t, _)| t).collect()
    }

    fn go(&self, mut todo: Vec<u32>, seen: &mut Vec<u32>, mut cube: Cube, mut next: Vec<u32>, postponed: u64, out: &mut Vec<Term>) {
        let mark = seen.len();
        while let Some(id) = todo.pop() {
            if seen.contains(&id) {
                continue;
            }
            seen.push(id);
            match self.nodes[id as usize] {
                Node::True => {}
                Node::False => {
                    seen.truncate(mark);
                    return;
                }
                Node::Lit(p, v) => match cube.with(p, v) {
                    Some(c) => cube = c,
                    None => {
                        seen.truncate(mark);
                        return;
                    }
                },
                Node::And(a, b) => {
                    todo.push(a);
                    todo.push(b);
                }
                Node::Next(a) => next.push(a),
                Node::Or(a, b) => {
                    for branch in [a, b] {
                        let mut t = todo.clone();
                        t.push(branch);
                        self.go(t, seen, cube, next.clone(), postponed, out);
                    }
                    seen.truncate(mark);
                    return;
                }
                Node::Until(a, b) => {
                    let mut t = todo.clone();
                    t.push(b);
                    self.go(t, seen, cube, next.clone(), postponed, out);
                    let mut n2 = next.clone();
                    n2.push(id);
                    let mut t = todo;
                    t.push(a);
                    let bit = 1u64 << self.untils[&id];
                    self.go(t, seen, cube, n2, postponed | bit, out);
                    seen.truncate(mark);
                    return;
                }
                Node::Release(a, b) => {
                    if !matches!(self.nodes[a as usize], Node::False) {
                        let mut t = todo.clone();
                        t.push(a);
                        t.push(b);
                        self.go(t, seen, cube, next.clone(), postponed, out);
                    }
                    let mut n2 = next;
                    n2.push(id);
                    let mut t = todo;
                    t.push(b);
                    self.go(t, seen, cube, n2, postponed, out);
                    seen.truncate(mark);
                    return;
                }
            }
        }
        next.sort_unstable();
        next.dedup();
        out.push(Term { cube, next, postponed });
        seen.truncate(mark);
    }

    fn generalized(&self, root: u32, cap: usize) -> Result<Generalized, NbaError> {
        let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
        let mut states: Vec<Vec<u32>> = Vec::new();
        let mut edges = Vec::new();
        let init = if matches!(self.nodes[root as usize], Node::True) { vec![] } else { vec![root] };
        index.insert(init.clone(), 0);
        states.push(init);
        let mut ever_postponed = 0u64;
        let mut i = 0;
        while i < states.len() {
            let mut es = Vec::new();
            for term in self.expand(&states[i].clone()) {
                let to = match index.get(&term.next) {
                    Some(&j) => j,
                    None => {
                        if states.len() >= cap {
                            return Err(NbaError::TooManyStates(cap));
                        }
                        index.insert(term.next.clone(), states.len());
                        states.push(term.next.clone());
                        states.len() - 1
                    }
                };
                ever_postponed |= term.postponed;
                es.push((term.cube, to, term.postponed));
            }
            edges.push(es);
            i += 1;
        }
        let acceptance = (0..64).map(|b| 1u64 << b).filter(|b| ever_postponed & b != 0).collect();
        Ok(Generalized { acceptance, edges })
    }
}

fn degeneralize(g: &Generalized, cap: usize) -> Result<Nba, NbaError> {
    let k = g.acceptance.len();
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut states = vec![(0usize, 0usize)];
    index.insert((0, 0), 0);
    let mut edges = Vec::new();
    let mut i = 0;
    while i < states.len() {
        let (q, l) = states[i];
        let mut es = Vec::new();
        for &(cube, to, postponed) in &g.edges[q] {
            let mut l2 = if l == k { 0 } else { l };
            while l2 < k && postponed & g.acceptance[l2] == 0 {
                l2 += 1;
            }
            let key = (to, l2);
            let j = match index.get(&key) {
                Some(&j) => j,
                None => {
                    if states.len() >= cap {
                        return Err(NbaError::TooManyStates(cap));
                    }
                    index.insert(key, states.len());
                    states.push(key);
                    states.len() - 1
                }
            };
            es.push(Edge { cube, to: j });
        }
        edges.push(es);
        i += 1;
    }
    let accepting = states.iter().map(|&(_, l)| l == k).collect();
    Ok(Nba { initial: vec![0], accepting, edges })
}

#[cfg(test)]
mod tests {
    use super::*;

    type F = LtlFormula;

    fn p(i: usize) -> F {
        Formula::Atom(i)
    }

    #[test]
    fn globally_is_one_state() {
        let a = ltl_to_nba(&F::globally(p(0))).unwrap();
        assert_eq!(a.num_states(), 1);
        assert!(a.accepting[0]);
        assert_eq!(a.edges[0], vec![Edge { cube: Cube { pos: 1, neg: 0 }, to: 0 }]);
    }

    #[test]
    fn finally_is_two_states() {
        let a = ltl_to_nba(&F::finally(p(0))).unwrap();
        assert_eq!(a.num_states(), 2);
        assert!(!a.accepting[0]);
        assert!(a.accepting[1]);
        assert!(a.edges[0].contains(&Edge { cube: Cube::TOP, to: 0 }));
        assert!(a.edges[0].contains(&Edge { cube: Cube { pos: 1, neg: 0 }, to: 1 }));
        assert_eq!(a.edges[1], vec![Edge { cube: Cube::TOP, to: 1 }]);
    }

    #[test]
    fn contradiction_is_empty() {
        let a = ltl_to_nba(&F::and(F::globally(p(0)), F::finally(F::not(p(0))))).unwrap();
        assert!(a.is_empty());
    }

    #[test]
    fn membership_examples() {
        let gf = ltl_to_nba(&F::globally(F::finally(p(0)))).unwrap();
        assert!(gf.accepts(&Lasso::new(vec![], vec![0, 1])));
        assert!(!gf.accepts(&Lasso::new(vec![1, 1], vec![0])));
        let u = ltl_to_nba(&F::until(p(0), p(1))).unwrap();
        assert!(u.accepts(&Lasso::new(vec![1, 1, 2], vec![0])));
        assert!(!u.accepts(&Lasso::new(vec![], vec![1])));
    }

    #[test]
    fn node_cap_is_enforced() {
        let big = F::conj((0..40).map(|i| F::finally(F::and(p(i % 8), F::next(p((i + 1) % 8))))));
        let err = ltl_to_nba_with(&big, NbaOptions { node_cap: 20, ..NbaOptions::default() }).unwrap_err();
        assert!(matches!(err, NbaError::FormulaTooLarge { cap: 20, .. }));
    }
}
