//! Deterministic clean-up of a solver-produced machine. Every rewrite is
//! kept only if the machine still satisfies the co-Büchi automaton.

use std::collections::VecDeque;

use super::check::satisfies;
use super::ucw::Ucw;
use crate::abstraction::{LtlSpec, Valuation};
use crate::mealy::Transition;

type Table = Vec<Vec<Transition>>;

pub fn polish(spec: &LtlSpec, ucw: &Ucw, table: Table) -> Table {
    let table = renumber(table);
    let table = prefer_small_outputs(spec, ucw, table);
    let table = merge_dont_cares(spec, ucw, table);
    renumber(table)
}

/// Breadth-first numbering from state 0, dropping unreachable states.
pub fn renumber(table: Table) -> Table {
    let mut map = vec![usize::MAX; table.len()];
    let mut order = vec![0];
    map[0] = 0;
    let mut queue = VecDeque::from([0]);
    while let Some(t) = queue.pop_front() {
        for tr in &table[t] {
            if map[tr.next] == usize::MAX {
                map[tr.next] = order.len();
                order.push(tr.next);
                queue.push_back(tr.next);
            }
        }
    }
    order.iter().map(|&t| table[t].iter().map(|tr| Transition { output: tr.output, next: map[tr.next] }).collect()).collect()
}

/// Lexicographic key of an output valuation: chosen alternative per group.
fn key(spec: &LtlSpec, v: Valuation) -> Vec<usize> {
    spec.groups.iter().map(|g| g.props.iter().position(|&p| v >> p & 1 == 1).unwrap_or(usize::MAX)).collect()
}

/// Replaces each output by the lexicographically smallest admissible alternative.
fn prefer_small_outputs(spec: &LtlSpec, ucw: &Ucw, mut table: Table) -> Table {
    let mut choices: Vec<Valuation> = (0..spec.output_choices()).map(|c| spec.output_choice(c)).collect();
    choices.sort_by_key(|&v| key(spec, v));
    for t in 0..table.len() {
        for i in 0..table[t].len() {
            let current = table[t][i].output;
            for &c in &choices {
                if key(spec, c) >= key(spec, current) {
                    break;
                }
                table[t][i].output = c;
                if satisfies(&table, ucw) {
                    break;
                }
                table[t][i].output = current;
            }
        }
    }
    table
}

/// Makes neighbouring input valuations behave identically where possible,
/// which yields smaller guards in generated code.
fn merge_dont_cares(spec: &LtlSpec, ucw: &Ucw, mut table: Table) -> Table {
    let n_in = spec.dict.num_inputs();
    for t in 0..table.len() {
        for p in (0..n_in).rev() {
            let bit = 1usize << p;
            for lo in 0..table[t].len() {
                if lo & bit != 0 {
                    continue;
                }
                let hi = lo | bit;
                let (a, b) = (table[t][lo], table[t][hi]);
                if a == b {
                    continue;
                }
                // Try the preferred behaviour first: smaller output, then smaller successor.
                let rank = |x: Transition| (key(spec, x.output), x.next);
                let (win, lose) = if rank(a) <= rank(b) { (a, b) } else { (b, a) };
                table[t][lo] = win;
                table[t][hi] = win;
                if satisfies(&table, ucw) {
                    continue;
                }
                table[t][lo] = lose;
                table[t][hi] = lose;
                if !satisfies(&table, ucw) {
                    table[t][lo] = a;
                    table[t][hi] = b;
                }
            }
        }
    }
    table
}
