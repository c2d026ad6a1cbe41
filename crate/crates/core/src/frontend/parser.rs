//! Recursive-descent parser for the block dialect.
//!
//! Precedence, tightest first: unary `! X G F`, then `U W R` (right
//! associative), `&&`, `||`, `->` (right associative), `<->`.

use super::ast::*;
use super::diag::{Diagnostic, SpecError};
use super::lexer::{tokenize, Tok, Token};

pub fn parse_spec(src: &str) -> Result<SpecAst, SpecError> {
    let mut p = Parser::new(src)?;
    let mut sections = Vec::new();
    while p.peek() != &Tok::Eof {
        sections.push(p.section()?);
    }
    Ok(SpecAst { sections })
}

/// Parses a single formula, e.g. an effect or cause given on the command line.
pub fn parse_formula(src: &str) -> Result<Expr, SpecError> {
    let mut p = Parser::new(src)?;
    let e = p.formula()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_function_term(src: &str) -> Result<FunctionTerm, SpecError> {
    let mut p = Parser::new(src)?;
    let t = p.function_term()?;
    p.expect_eof()?;
    Ok(t)
}

pub fn parse_predicate_term(src: &str) -> Result<PredicateTerm, SpecError> {
    let e = parse_formula(src)?;
    match e.kind {
        ExprKind::Predicate(p) => Ok(p),
        _ => Err(SpecError::Syntax(Diagnostic::at(src, e.span, "expected a predicate term"))),
    }
}

pub fn parse_update_term(src: &str) -> Result<UpdateTerm, SpecError> {
    let e = parse_formula(src)?;
    match e.kind {
        ExprKind::Update(u) => Ok(u),
        _ => Err(SpecError::Syntax(Diagnostic::at(src, e.span, "expected an update term"))),
    }
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, SpecError> {
        Ok(Parser { src, toks: tokenize(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, SpecError> {
        Err(SpecError::Syntax(Diagnostic::at(self.src, self.span(), message)))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, SpecError> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            self.syntax(format!("expected {what}, found {}", self.peek().describe()))
        }
    }

    fn expect_eof(&mut self) -> Result<(), SpecError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            self.syntax(format!("unexpected {} after formula", self.peek().describe()))
        }
    }

    fn section(&mut self) -> Result<Section, SpecError> {
        let kind = match self.peek() {
            Tok::Initially => {
                self.bump();
                match self.peek() {
                    Tok::Assume => SectionKind::InitiallyAssume,
                    Tok::Guarantee => SectionKind::InitiallyGuarantee,
                    other => return self.syntax(format!("expected `assume` or `guarantee`, found {}", other.describe())),
                }
            }
            Tok::Always => {
                self.bump();
                match self.peek() {
                    Tok::Assume => SectionKind::AlwaysAssume,
                    Tok::Guarantee => SectionKind::AlwaysGuarantee,
                    other => return self.syntax(format!("expected `assume` or `guarantee`, found {}", other.describe())),
                }
            }
            Tok::Guarantee => SectionKind::Guarantee,
            other => {
                return self.syntax(format!("expected a block keyword (`initially`, `always`, `guarantee`), found {}", other.describe()))
            }
        };
        self.bump();
        let open = self.expect(Tok::LBrace, "`{`")?;
        let mut formulas = Vec::new();
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Eof => {
                    return Err(SpecError::UnbalancedBlock(Diagnostic::at(
                        self.src,
                        open.span,
                        format!("`{}` block opened here is never closed", kind.keywords()),
                    )))
                }
                _ => {}
            }
            formulas.push(self.formula()?);
            match self.peek() {
                Tok::Semi => {
                    self.bump();
                }
                Tok::RBrace => {}
                Tok::Eof => {
                    return Err(SpecError::UnbalancedBlock(Diagnostic::at(
                        self.src,
                        open.span,
                        format!("`{}` block opened here is never closed", kind.keywords()),
                    )))
                }
                other => return self.syntax(format!("expected `;` or `}}` after formula, found {}", other.describe())),
            }
        }
        Ok(Section { kind, formulas })
    }

    fn formula(&mut self) -> Result<Expr, SpecError> {
        let mut lhs = self.implication()?;
        while self.eat(&Tok::Iff) {
            let rhs = self.implication()?;
            lhs = binary(BinaryOp::Iff, lhs, rhs);
        }
        Ok(lhs)
    }

    fn implication(&mut self) -> Result<Expr, SpecError> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Implies) {
            let rhs = self.implication()?;
            return Ok(binary(BinaryOp::Implies, lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Expr, SpecError> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Or) {
            let rhs = self.conjunction()?;
            lhs = binary(BinaryOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Expr, SpecError> {
        let mut lhs = self.temporal()?;
        while self.eat(&Tok::And) {
            let rhs = self.temporal()?;
            lhs = binary(BinaryOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn temporal(&mut self) -> Result<Expr, SpecError> {
        let lhs = self.unary()?;
        let op = match self.peek() {
            Tok::Until => BinaryOp::Until,
            Tok::WeakUntil => BinaryOp::WeakUntil,
            Tok::Release => BinaryOp::Release,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.temporal()?;
        Ok(binary(op, lhs, rhs))
    }

    fn unary(&mut self) -> Result<Expr, SpecError> {
        let op = match self.peek() {
            Tok::Not => UnaryOp::Not,
            Tok::Next => UnaryOp::Next,
            Tok::Globally => UnaryOp::Globally,
            Tok::Finally => UnaryOp::Finally,
            _ => return self.primary(),
        };
        let start = self.bump().span;
        let inner = self.unary()?;
        let span = start.join(inner.span);
        Ok(Expr::new(ExprKind::Unary(op, Box::new(inner)), span))
    }

    fn primary(&mut self) -> Result<Expr, SpecError> {
        let start = self.span();
        match self.peek().clone() {
            Tok::True => {
                self.bump();
                Ok(Expr::new(ExprKind::True, start))
            }
            Tok::False => {
                self.bump();
                Ok(Expr::new(ExprKind::False, start))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.formula()?;
                if !self.eat(&Tok::RParen) {
                    return self.syntax(format!("expected `)` to close `(`, found {}", self.peek().describe()));
                }
                Ok(Expr::new(inner.kind, start.join(self.prev_span())))
            }
            Tok::LBracket => {
                self.bump();
                let target = match self.peek().clone() {
                    Tok::Ident(name) => {
                        self.bump();
                        name
                    }
                    other => return self.syntax(format!("expected update target signal, found {}", other.describe())),
                };
                self.expect(Tok::Assign, "`<-` in update term")?;
                let value = self.function_term()?;
                if !self.eat(&Tok::RBracket) {
                    let d = Diagnostic::at(
                        self.src,
                        self.span(),
                        format!("unclosed `[` update term (opened at column {}), found {}", Diagnostic::at(self.src, start, "").column, self.peek().describe()),
                    );
                    return Err(SpecError::Syntax(d));
                }
                Ok(Expr::new(ExprKind::Update(UpdateTerm { target, value }), start.join(self.prev_span())))
            }
            Tok::Ident(name) => {
                self.bump();
                let args = if self.eat(&Tok::LParen) { self.arguments()? } else { Vec::new() };
                Ok(Expr::new(ExprKind::Predicate(PredicateTerm { name, args }), start.join(self.prev_span())))
            }
            other => self.syntax(format!("expected a formula, found {}", other.describe())),
        }
    }

    /// Arguments after an opening `(`, consuming the closing `)`.
    fn arguments(&mut self) -> Result<Vec<FunctionTerm>, SpecError> {
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.function_term()?);
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RParen => {
                    self.bump();
                    return Ok(args);
                }
                other => return self.syntax(format!("expected `,` or `)` in argument list, found {}", other.describe())),
            }
        }
    }

    fn function_term(&mut self) -> Result<FunctionTerm, SpecError> {
        let mut lhs = self.function_atom()?;
        while self.eat(&Tok::Plus) {
            let rhs = self.function_atom()?;
            lhs = FunctionTerm::apply("add", vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn function_atom(&mut self) -> Result<FunctionTerm, SpecError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                if self.eat(&Tok::LParen) {
                    Ok(FunctionTerm::apply(name, self.arguments()?))
                } else {
                    Ok(FunctionTerm::Signal(name))
                }
            }
            Tok::Number(n) => {
                self.bump();
                Ok(FunctionTerm::apply(n, Vec::new()))
            }
            Tok::LParen => {
                self.bump();
                let t = self.function_term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            other => self.syntax(format!("expected a function term, found {}", other.describe())),
        }
    }
}

fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
    let span = lhs.span.join(rhs.span);
    Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span)
}
