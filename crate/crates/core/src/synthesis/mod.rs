//! Bounded synthesis of Mealy machines and their independent verification.

mod check;
mod encode;
mod post;
pub mod ucw;
pub mod verify;

use thiserror::Error;

use crate::abstraction::LtlSpec;
use crate::mealy::MealyMachine;
use crate::nba::{ltl_to_nba_with, NbaError, NbaOptions};
pub use verify::{verify_machine, VerificationReport, VerifyError, DEFAULT_PRODUCT_CAP};

pub const DEFAULT_MAX_STATES: usize = 32;
pub const DEFAULT_REJECTION_BOUND: usize = 1;
pub const MAX_INPUT_PROPS: usize = 12;

#[derive(Debug, Clone, Copy)]
pub struct SynthesisOptions {
    pub max_states: usize,
    /// Maximal number of rejecting visits tolerated by the annotation.
    pub rejection_bound: usize,
    pub nba: NbaOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions { max_states: DEFAULT_MAX_STATES, rejection_bound: DEFAULT_REJECTION_BOUND, nba: NbaOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthesisResult {
    Realizable { machine: MealyMachine, states: usize },
    Unrealizable { bound: usize, definitive: bool },
}

impl SynthesisResult {
    pub fn machine(&self) -> Option<&MealyMachine> {
        match self {
            SynthesisResult::Realizable { machine, .. } => Some(machine),
            SynthesisResult::Unrealizable { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SynthesisError {
    #[error(transparent)]
    Automaton(#[from] NbaError),
    #[error("{0} input propositions exceed the supported {MAX_INPUT_PROPS}")]
    TooManyInputs(usize),
}

pub fn synthesize(spec: &LtlSpec, max_states: usize) -> Result<SynthesisResult, SynthesisError> {
    synthesize_with(spec, SynthesisOptions { max_states, ..SynthesisOptions::default() })
}

/// Searches `k = 1..=max_states` for the smallest machine admitting an annotation.
pub fn synthesize_with(spec: &LtlSpec, opts: SynthesisOptions) -> Result<SynthesisResult, SynthesisError> {
    if spec.dict.num_inputs() > MAX_INPUT_PROPS {
        return Err(SynthesisError::TooManyInputs(spec.dict.num_inputs()));
    }
    // An unsatisfiable specification has no implementation of any size.
    if ltl_to_nba_with(&spec.formula(), opts.nba)?.is_empty() {
        return Ok(SynthesisResult::Unrealizable { bound: opts.max_states, definitive: true });
    }
    let ucw = ucw::build_ucw(spec, opts.nba)?;
    for k in 1..=opts.max_states {
        if let Some(table) = encode::solve(spec, &ucw, k, opts.rejection_bound) {
            debug_assert!(check::satisfies(&table, &ucw));
            debug_assert!(k == opts.max_states || encode::solve(spec, &ucw, k + 1, opts.rejection_bound).is_some());
            let table = post::polish(spec, &ucw, table);
            let states = table.len();
            return Ok(SynthesisResult::Realizable { machine: MealyMachine::new(spec, table), states });
        }
    }
    Ok(SynthesisResult::Unrealizable { bound: opts.max_states, definitive: false })
}
