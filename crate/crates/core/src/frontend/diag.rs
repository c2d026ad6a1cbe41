use std::fmt;

use thiserror::Error;

use super::ast::Span;

/// A located message: `line:column: message` plus the offending source line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub excerpt: String,
}

impl Diagnostic {
    pub fn at(src: &str, span: Span, message: impl Into<String>) -> Self {
        let start = span.start.min(src.len());
        let line_start = src[..start].rfind('\n').map_or(0, |p| p + 1);
        let line_end = src[start..].find('\n').map_or(src.len(), |p| start + p);
        let line = src[..start].matches('\n').count() + 1;
        let column = src[line_start..start].chars().count() + 1;
        Diagnostic { line, column, message: message.into(), excerpt: src[line_start..line_end].to_string() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}:{}: {}", self.line, self.column, self.message)?;
        writeln!(f, "  | {}", self.excerpt)?;
        write!(f, "  | {}^", " ".repeat(self.column.saturating_sub(1)))
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("lexical error at {0}")]
    Lexical(Diagnostic),
    #[error("syntax error at {0}")]
    Syntax(Diagnostic),
    #[error("unbalanced block at {0}")]
    UnbalancedBlock(Diagnostic),
    #[error("symbol `{symbol}` is used with arities {first} and {second}")]
    ArityMismatch { symbol: String, first: usize, second: usize },
    #[error("`{0}` is both an update target and a function symbol")]
    TargetUsedAsFunction(String),
    #[error("specification has no guarantees")]
    NoGuarantees,
}

impl SpecError {
    pub fn diagnostic(&self) -> Option<&Diagnostic> {
        match self {
            SpecError::Lexical(d) | SpecError::Syntax(d) | SpecError::UnbalancedBlock(d) => Some(d),
            _ => None,
        }
    }
}
