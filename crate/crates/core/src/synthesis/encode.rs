//! SAT encoding of bounded synthesis: a `k`-state machine together with an
//! annotation that counts visits to rejecting states of the co-Büchi automaton.

use super::ucw::Ucw;
use crate::abstraction::LtlSpec;
use crate::mealy::Transition;
use crate::sat::Solver;

struct Vars {
    k: usize,
    n_in: usize,
    n_q: usize,
    levels: usize,
    n_out: usize,
    out_base: usize,
    t_base: i32,
    o_base: i32,
    a_base: i32,
    m_base: i32,
}

impl Vars {
    fn new(k: usize, n_in: usize, n_q: usize, bound: usize, spec: &LtlSpec) -> Vars {
        let levels = bound + 1;
        let n_out = spec.dict.num_outputs();
        let t_base = 1;
        let o_base = t_base + (k * n_in * k) as i32;
        let a_base = o_base + (k * n_in * n_out) as i32;
        let m_base = a_base + (k * n_q * levels) as i32;
        Vars { k, n_in, n_q, levels, n_out, out_base: spec.dict.num_inputs(), t_base, o_base, a_base, m_base }
    }

    fn num_vars(&self) -> usize {
        (self.m_base - 1) as usize + self.k * self.n_in * self.n_q * self.levels
    }

    /// Successor choice `t --i--> u`.
    fn t(&self, t: usize, i: usize, u: usize) -> i32 {
        self.t_base + ((t * self.n_in + i) * self.k + u) as i32
    }

    /// Output proposition `p` on `t --i-->`.
    fn o(&self, t: usize, i: usize, p: usize) -> i32 {
        self.o_base + ((t * self.n_in + i) * self.n_out + (p - self.out_base)) as i32
    }

    /// Machine state `t` and automaton state `q` co-reachable after `v` rejecting visits.
    fn a(&self, t: usize, q: usize, v: usize) -> i32 {
        self.a_base + ((t * self.n_q + q) * self.levels + v) as i32
    }

    /// Automaton state `q` with count `v` is entered from machine state `t` on input `i`.
    fn m(&self, t: usize, i: usize, q: usize, v: usize) -> i32 {
        self.m_base + (((t * self.n_in + i) * self.n_q + q) * self.levels + v) as i32
    }
}

/// Searches for a `k`-state machine whose runs visit rejecting states at most `bound` times.
pub fn solve(spec: &LtlSpec, ucw: &Ucw, k: usize, bound: usize) -> Option<Vec<Vec<Transition>>> {
    let n_in = 1usize << spec.dict.num_inputs();
    let n_q = ucw.num_states();
    let vars = Vars::new(k, n_in, n_q, bound, spec);
    let rej = |q: usize| usize::from(ucw.rejecting[q]);
    let mut clauses: Vec<Vec<i32>> = Vec::new();

    for t in 0..k {
        for i in 0..n_in {
            clauses.push((0..k).map(|u| vars.t(t, i, u)).collect());
            for g in &spec.groups {
                clauses.push(g.props.iter().map(|&p| vars.o(t, i, p)).collect());
                for (x, &p) in g.props.iter().enumerate() {
                    for &r in &g.props[x + 1..] {
                        clauses.push(vec![-vars.o(t, i, p), -vars.o(t, i, r)]);
                    }
                }
            }
        }
    }
    // Every state other than 0 is entered from a lower-numbered state.
    for u in 1..k {
        clauses.push((0..u).flat_map(|t| (0..n_in).map(move |i| (t, i))).map(|(t, i)| vars.t(t, i, u)).collect());
    }
    for &q in &ucw.initial {
        if rej(q) > bound {
            return None;
        }
        clauses.push(vec![vars.a(0, q, rej(q))]);
    }

    let mut used_m = vec![false; k * n_in * n_q * vars.levels];
    let m_index = |t: usize, i: usize, q: usize, v: usize| ((t * n_in + i) * n_q + q) * vars.levels + v;
    for q in 0..n_q {
        for e in &ucw.edges[q] {
            let w_add = rej(e.to);
            for i in 0..n_in {
                if !e.input.matches(i as u64) {
                    continue;
                }
                for t in 0..k {
                    let mut mismatch: Vec<i32> = Vec::new();
                    for p in bits(e.output.pos) {
                        mismatch.push(-vars.o(t, i, p));
                    }
                    for p in bits(e.output.neg) {
                        mismatch.push(vars.o(t, i, p));
                    }
                    for v in 0..vars.levels {
                        let mut c = Vec::with_capacity(mismatch.len() + 2);
                        c.push(-vars.a(t, q, v));
                        c.extend_from_slice(&mismatch);
                        let w = v + w_add;
                        if w <= bound {
                            c.push(vars.m(t, i, e.to, w));
                            used_m[m_index(t, i, e.to, w)] = true;
                        }
                        clauses.push(c);
                    }
                }
            }
        }
    }
    for t in 0..k {
        for i in 0..n_in {
            for q in 0..n_q {
                for v in 0..vars.levels {
                    if !used_m[m_index(t, i, q, v)] {
                        continue;
                    }
                    for u in 0..k {
                        clauses.push(vec![-vars.m(t, i, q, v), -vars.t(t, i, u), vars.a(u, q, v)]);
                    }
                }
            }
        }
    }

    let mut solver = Solver::new(vars.num_vars());
    for c in &clauses {
        solver.add_clause(c);
    }
    let model = solver.solve()?;
    let truth = |lit: i32| model.value(lit);
    let table = (0..k)
        .map(|t| {
            (0..n_in)
                .map(|i| {
                    let next = (0..k).find(|&u| truth(vars.t(t, i, u))).unwrap_or(0);
                    let output = spec.groups.iter().fold(0u64, |acc, g| {
                        let p = g.props.iter().copied().find(|&p| truth(vars.o(t, i, p))).unwrap_or(g.props[0]);
                        acc | 1 << p
                    });
                    Transition { output, next }
                })
                .collect()
        })
        .collect();
    Some(table)
}

fn bits(mut x: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if x == 0 {
            None
        } else {
            let b = x.trailing_zeros() as usize;
            x &= x - 1;
            Some(b)
        }
    })
}
