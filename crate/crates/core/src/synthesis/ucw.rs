//! Universal co-Büchi automaton for the negated specification, built as a
//! disjoint union of one Büchi automaton per guarantee conjunct.

use crate::abstraction::{LtlFormula, LtlSpec};
use crate::formula::Formula;
use crate::nba::{ltl_to_nba_with, Cube, NbaError, NbaOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UcwEdge {
    pub input: Cube,
    pub output: Cube,
    pub to: usize,
}

#[derive(Debug, Clone)]
pub struct Ucw {
    pub initial: Vec<usize>,
    pub rejecting: Vec<bool>,
    pub edges: Vec<Vec<UcwEdge>>,
}

impl Ucw {
    pub fn num_states(&self) -> usize {
        self.rejecting.len()
    }
}

/// One formula per guarantee conjunct: all assumptions and the negated guarantee.
pub fn components(spec: &LtlSpec) -> Vec<LtlFormula> {
    let assumed = spec.assumption();
    spec.guarantees.iter().map(|g| Formula::and(assumed.clone(), Formula::not(g.formula.clone()))).collect()
}

pub fn build_ucw(spec: &LtlSpec, opts: NbaOptions) -> Result<Ucw, NbaError> {
    let imask = spec.dict.input_mask();
    let omask = spec.dict.output_mask();
    let mut ucw = Ucw { initial: Vec::new(), rejecting: Vec::new(), edges: Vec::new() };
    for f in components(spec) {
        let nba = ltl_to_nba_with(&f, opts)?;
        let base = ucw.num_states();
        ucw.initial.extend(nba.initial.iter().map(|q| q + base));
        ucw.rejecting.extend(&nba.accepting);
        for es in &nba.edges {
            let mut out = Vec::new();
            for e in es {
                let output = Cube { pos: e.cube.pos & omask, neg: e.cube.neg & omask };
                let Some(output) = exclusive_part(spec, output) else { continue };
                out.push(UcwEdge { input: Cube { pos: e.cube.pos & imask, neg: e.cube.neg & imask }, output, to: e.to + base });
            }
            ucw.edges.push(out);
        }
    }
    Ok(ucw)
}

/// Restricts an output cube to one-hot choices: `None` if no exclusive choice
/// matches, otherwise the cube without literals implied by exclusivity.
fn exclusive_part(spec: &LtlSpec, c: Cube) -> Option<Cube> {
    let mut c = c;
    for g in &spec.groups {
        let members: u64 = g.props.iter().map(|&p| 1u64 << p).sum();
        let pos = c.pos & members;
        match pos.count_ones() {
            0 => {
                if c.neg & members == members {
                    return None;
                }
            }
            1 => c.neg &= !members,
            _ => return None,
        }
    }
    Some(c)
}
