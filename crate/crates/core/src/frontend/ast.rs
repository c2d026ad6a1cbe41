//! Surface syntax tree for `.tsl` specifications.

use std::fmt;

/// Byte range into the source text.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn join(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SectionKind {
    InitiallyAssume,
    AlwaysAssume,
    InitiallyGuarantee,
    Guarantee,
    AlwaysGuarantee,
}

impl SectionKind {
    pub fn keywords(self) -> &'static str {
        match self {
            SectionKind::InitiallyAssume => "initially assume",
            SectionKind::AlwaysAssume => "always assume",
            SectionKind::InitiallyGuarantee => "initially guarantee",
            SectionKind::Guarantee => "guarantee",
            SectionKind::AlwaysGuarantee => "always guarantee",
        }
    }

    pub fn is_assumption(self) -> bool {
        matches!(self, SectionKind::InitiallyAssume | SectionKind::AlwaysAssume)
    }

    pub fn is_always(self) -> bool {
        matches!(self, SectionKind::AlwaysAssume | SectionKind::AlwaysGuarantee)
    }
}

/// A function term: either a signal reference or an application `f(t0, .., tn)`.
///
/// Numerals such as `1` are zero-argument applications whose name is the numeral.
/// Infix `a + b` is the application `add(a, b)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FunctionTerm {
    Signal(String),
    Apply { name: String, args: Vec<FunctionTerm> },
}

impl FunctionTerm {
    pub fn apply(name: impl Into<String>, args: Vec<FunctionTerm>) -> Self {
        FunctionTerm::Apply { name: name.into(), args }
    }

    pub fn signal(name: impl Into<String>) -> Self {
        FunctionTerm::Signal(name.into())
    }

    /// Visits every signal reference in the term.
    pub fn signals<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            FunctionTerm::Signal(s) => out.push(s),
            FunctionTerm::Apply { args, .. } => args.iter().for_each(|a| a.signals(out)),
        }
    }

    /// Visits every applied function symbol with its arity.
    pub fn functions<'a>(&'a self, out: &mut Vec<(&'a str, usize)>) {
        if let FunctionTerm::Apply { name, args } = self {
            out.push((name, args.len()));
            args.iter().for_each(|a| a.functions(out));
        }
    }
}

pub fn is_numeral(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_digit())
}

impl fmt::Display for FunctionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionTerm::Signal(s) => f.write_str(s),
            FunctionTerm::Apply { name, args } if name == "add" && args.len() == 2 => {
                let wrap = |t: &FunctionTerm| matches!(t, FunctionTerm::Apply { name, args } if name == "add" && args.len() == 2);
                if wrap(&args[0]) {
                    write!(f, "({})", args[0])?;
                } else {
                    write!(f, "{}", args[0])?;
                }
                f.write_str(" + ")?;
                if wrap(&args[1]) {
                    write!(f, "({})", args[1])
                } else {
                    write!(f, "{}", args[1])
                }
            }
            FunctionTerm::Apply { name, args } if args.is_empty() && is_numeral(name) => f.write_str(name),
            FunctionTerm::Apply { name, args } => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// `p(t0, .., tn)`; a bare `p` is a zero-arity predicate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredicateTerm {
    pub name: String,
    pub args: Vec<FunctionTerm>,
}

impl fmt::Display for PredicateTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// `[target <- value]`
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UpdateTerm {
    pub target: String,
    pub value: FunctionTerm,
}

impl UpdateTerm {
    /// The implicit "keep the current value" update `[c <- c]`.
    pub fn idle(cell: &str) -> Self {
        UpdateTerm { target: cell.to_string(), value: FunctionTerm::Signal(cell.to_string()) }
    }

    pub fn is_idle(&self) -> bool {
        matches!(&self.value, FunctionTerm::Signal(s) if *s == self.target)
    }
}

impl fmt::Display for UpdateTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} <- {}]", self.target, self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Next,
    Globally,
    Finally,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    And,
    Or,
    Implies,
    Iff,
    Until,
    WeakUntil,
    Release,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
            BinaryOp::Implies => "->",
            BinaryOp::Iff => "<->",
            BinaryOp::Until => "U",
            BinaryOp::WeakUntil => "W",
            BinaryOp::Release => "R",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    True,
    False,
    Predicate(PredicateTerm),
    Update(UpdateTerm),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

/// A formula node. Equality compares structure only; spans are ignored.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// Counts nodes of the given shape, used by tests and diagnostics.
    pub fn count(&self, pred: &dyn Fn(&ExprKind) -> bool) -> usize {
        let own = usize::from(pred(&self.kind));
        own + match &self.kind {
            ExprKind::Unary(_, e) => e.count(pred),
            ExprKind::Binary(_, a, b) => a.count(pred) + b.count(pred),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub kind: SectionKind,
    pub formulas: Vec<Expr>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpecAst {
    pub sections: Vec<Section>,
}

impl SpecAst {
    /// Concatenates the sections of two specifications (logical conjunction).
    pub fn conjoin(mut self, other: SpecAst) -> SpecAst {
        self.sections.extend(other.sections);
        self
    }

    pub fn section_sizes(&self) -> Vec<(SectionKind, usize)> {
        self.sections.iter().map(|s| (s.kind, s.formulas.len())).collect()
    }
}
