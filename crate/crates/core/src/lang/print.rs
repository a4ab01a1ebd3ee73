//! Pretty-printer producing source that parses back to the same model.

use std::fmt::Write;

use super::ast::{ClassDef, Expr, MethodDef, Program, Visibility, PLUS};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Top,
    SumLeft,
    SumRight,
    Receiver,
}

fn is_infix_plus(e: &Expr) -> bool {
    matches!(e, Expr::Send { selector, args, .. } if selector == PLUS && args.len() == 1)
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, Ctx::Top);
    out
}

fn write_args(out: &mut String, args: &[Expr]) {
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, a, Ctx::Top);
    }
    out.push(')');
}

fn write_expr(out: &mut String, e: &Expr, ctx: Ctx) {
    stacker::maybe_grow(64 * 1024, 1024 * 1024, || write_expr_inner(out, e, ctx))
}

fn write_expr_inner(out: &mut String, e: &Expr, ctx: Ctx) {
    match e {
        Expr::New(c) => {
            if ctx == Ctx::Receiver {
                let _ = write!(out, "(new {c})");
            } else {
                let _ = write!(out, "new {c}");
            }
        }
        Expr::Var(x) | Expr::FieldGet(x) => out.push_str(x),
        Expr::SelfRef => out.push_str("self"),
        Expr::Nil => out.push_str("nil"),
        Expr::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Expr::FieldSet(f, v) => {
            let paren = ctx != Ctx::Top;
            if paren {
                out.push('(');
            }
            let _ = write!(out, "{f} := ");
            write_expr(out, v, Ctx::Top);
            if paren {
                out.push(')');
            }
        }
        Expr::Let { var, bound, body } => {
            let paren = ctx != Ctx::Top;
            if paren {
                out.push('(');
            }
            let _ = write!(out, "let {var} = ");
            write_expr(out, bound, Ctx::Top);
            out.push_str(" in ");
            write_expr(out, body, Ctx::Top);
            if paren {
                out.push(')');
            }
        }
        Expr::Send {
            receiver,
            selector,
            args,
        } if is_infix_plus(e) => {
            let paren = matches!(ctx, Ctx::SumRight | Ctx::Receiver);
            if paren {
                out.push('(');
            }
            write_expr(out, receiver, Ctx::SumLeft);
            let _ = write!(out, " {selector} ");
            write_expr(out, &args[0], Ctx::SumRight);
            if paren {
                out.push(')');
            }
        }
        Expr::Send {
            receiver,
            selector,
            args,
        } => {
            write_expr(out, receiver, Ctx::Receiver);
            let _ = write!(out, ".{selector}");
            write_args(out, args);
        }
        Expr::SuperSend { selector, args } => {
            let _ = write!(out, "super.{selector}");
            write_args(out, args);
        }
    }
}

fn write_method(out: &mut String, m: &MethodDef) {
    if m.visibility == Visibility::Protected {
        out.push_str("protected ");
    }
    let _ = writeln!(
        out,
        "method {}({}) {{ {} }}",
        m.selector,
        m.params.join(", "),
        expr_to_string(&m.body)
    );
}

fn write_class(out: &mut String, c: &ClassDef) {
    let _ = writeln!(out, "class {} extends {} {{", c.name, c.superclass);
    if !c.fields.is_empty() {
        let _ = writeln!(out, "  fields: {};", c.fields.join(" "));
    }
    for m in c.methods() {
        out.push_str("  ");
        write_method(out, m);
    }
    out.push_str("}\n");
}

pub fn program_to_string(p: &Program) -> String {
    let mut out = String::new();
    for c in &p.classes {
        write_class(&mut out, c);
    }
    let _ = writeln!(out, "main {{ {} }}", expr_to_string(&p.main));
    out
}
