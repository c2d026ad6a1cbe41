use std::fmt;

use super::ast::*;
use super::pretty::pretty_formula;
use super::signals::{classify, SignalTable};
use crate::formula::Formula;

/// Atomic TSL terms: predicate observations and update choices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TslAtom {
    Predicate(PredicateTerm),
    Update(UpdateTerm),
}

impl fmt::Display for TslAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TslAtom::Predicate(p) => write!(f, "{p}"),
            TslAtom::Update(u) => write!(f, "{u}"),
        }
    }
}

pub type TslFormula = Formula<TslAtom>;

/// One top-level formula of a block, after desugaring.
#[derive(Debug, Clone, PartialEq)]
pub struct Conjunct {
    pub section: SectionKind,
    /// Source text as written, without the implicit `G` of `always` blocks.
    pub text: String,
    pub formula: TslFormula,
}

impl Conjunct {
    pub fn label(&self) -> String {
        if self.section.is_always() {
            format!("G ({})", self.text)
        } else {
            self.text.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreSpec {
    pub assumptions: Vec<Conjunct>,
    pub guarantees: Vec<Conjunct>,
    pub signals: SignalTable,
}

impl CoreSpec {
    pub fn assumption(&self) -> TslFormula {
        Formula::conj(self.assumptions.iter().map(|c| c.formula.clone()))
    }

    pub fn guarantee(&self) -> TslFormula {
        Formula::conj(self.guarantees.iter().map(|c| c.formula.clone()))
    }

    /// `assumptions -> guarantees`.
    pub fn formula(&self) -> TslFormula {
        Formula::implies(self.assumption(), self.guarantee())
    }
}

pub fn desugar(ast: &SpecAst) -> CoreSpec {
    let mut assumptions = Vec::new();
    let mut guarantees = Vec::new();
    for section in &ast.sections {
        for e in &section.formulas {
            let mut formula = desugar_expr(e);
            if section.kind.is_always() {
                formula = Formula::globally(formula);
            }
            let c = Conjunct { section: section.kind, text: pretty_formula(e), formula };
            if section.kind.is_assumption() {
                assumptions.push(c);
            } else {
                guarantees.push(c);
            }
        }
    }
    let signals = classify(assumptions.iter().chain(&guarantees).map(|c| &c.formula)).0;
    CoreSpec { assumptions, guarantees, signals }
}

pub fn desugar_expr(e: &Expr) -> TslFormula {
    match &e.kind {
        ExprKind::True => Formula::True,
        ExprKind::False => Formula::False,
        ExprKind::Predicate(p) => Formula::Atom(TslAtom::Predicate(p.clone())),
        ExprKind::Update(u) => Formula::Atom(TslAtom::Update(u.clone())),
        ExprKind::Unary(op, a) => {
            let a = desugar_expr(a);
            match op {
                UnaryOp::Not => Formula::not(a),
                UnaryOp::Next => Formula::next(a),
                UnaryOp::Globally => Formula::globally(a),
                UnaryOp::Finally => Formula::finally(a),
            }
        }
        ExprKind::Binary(op, a, b) => {
            let (a, b) = (desugar_expr(a), desugar_expr(b));
            match op {
                BinaryOp::And => Formula::and(a, b),
                BinaryOp::Or => Formula::or(a, b),
                BinaryOp::Implies => Formula::implies(a, b),
                BinaryOp::Iff => Formula::and(Formula::implies(a.clone(), b.clone()), Formula::implies(b, a)),
                BinaryOp::Until => Formula::until(a, b),
                BinaryOp::WeakUntil => Formula::or(Formula::until(a.clone(), b), Formula::globally(a)),
                BinaryOp::Release => Formula::release(a, b),
            }
        }
    }
}
