//! Explicit check of a candidate machine against the co-Büchi automaton.

use super::ucw::Ucw;
use crate::graph;
use crate::mealy::Transition;

/// True iff every run of the automaton over every input stream visits
/// rejecting states only finitely often.
pub fn satisfies(table: &[Vec<Transition>], ucw: &Ucw) -> bool {
    let k = table.len();
    let n_q = ucw.num_states();
    if n_q == 0 {
        return true;
    }
    let id = |t: usize, q: usize| t * n_q + q;
    let mut adj = vec![Vec::new(); k * n_q];
    let mut seen = vec![false; k * n_q];
    let mut stack: Vec<usize> = ucw.initial.iter().map(|&q| id(0, q)).collect();
    for &x in &stack {
        seen[x] = true;
    }
    while let Some(x) = stack.pop() {
        let (t, q) = (x / n_q, x % n_q);
        for (i, tr) in table[t].iter().enumerate() {
            let letter = i as u64 | tr.output;
            for e in &ucw.edges[q] {
                if e.input.matches(letter) && e.output.matches(letter) {
                    let y = id(tr.next, e.to);
                    adj[x].push(y);
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let comp = graph::tarjan(&adj);
    let cyclic = graph::cyclic_nodes(&adj, &comp);
    !(0..k * n_q).any(|x| seen[x] && cyclic[x] && ucw.rejecting[x % n_q])
}
