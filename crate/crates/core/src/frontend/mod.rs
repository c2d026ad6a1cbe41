//! Lexing, parsing, desugaring and validation of `.tsl` specifications.

pub mod ast;
pub mod desugar;
pub mod diag;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod signals;

pub use ast::{Expr, ExprKind, FunctionTerm, PredicateTerm, SectionKind, SpecAst, UpdateTerm};
pub use desugar::{desugar, desugar_expr, Conjunct, CoreSpec, TslAtom, TslFormula};
pub use diag::{Diagnostic, SpecError};
pub use parser::{parse_formula, parse_function_term, parse_predicate_term, parse_spec, parse_update_term};
pub use pretty::{pretty_formula, pretty_spec};
pub use signals::{validate_signals, SignalTable};

/// Parses, desugars and validates in one step.
pub fn compile(src: &str) -> Result<CoreSpec, SpecError> {
    let core = desugar(&parse_spec(src)?);
    validate_signals(&core)?;
    Ok(core)
}
