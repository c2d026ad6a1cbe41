use std::fmt::Write;

use super::ast::*;

pub fn pretty_formula(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

pub fn pretty_spec(ast: &SpecAst) -> String {
    let mut out = String::new();
    for (i, section) in ast.sections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "{} {{", section.kind.keywords());
        for f in &section.formulas {
            let _ = writeln!(out, "  {};", pretty_formula(f));
        }
        out.push_str("}\n");
    }
    out
}

fn is_atomic(e: &Expr) -> bool {
    matches!(e.kind, ExprKind::True | ExprKind::False | ExprKind::Predicate(_) | ExprKind::Update(_))
}

fn write_child(out: &mut String, e: &Expr) {
    if is_atomic(e) || matches!(e.kind, ExprKind::Unary(..)) {
        write_expr(out, e);
    } else {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::True => out.push_str("true"),
        ExprKind::False => out.push_str("false"),
        ExprKind::Predicate(p) => {
            let _ = write!(out, "{p}");
        }
        ExprKind::Update(u) => {
            let _ = write!(out, "{u}");
        }
        ExprKind::Unary(op, inner) => {
            out.push_str(match op {
                UnaryOp::Not => "! ",
                UnaryOp::Next => "X ",
                UnaryOp::Globally => "G ",
                UnaryOp::Finally => "F ",
            });
            write_child(out, inner);
        }
        ExprKind::Binary(op, a, b) => {
            write_child(out, a);
            let _ = write!(out, " {} ", op.symbol());
            write_child(out, b);
        }
    }
}
