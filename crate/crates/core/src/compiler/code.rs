use std::fmt::Write as _;

use serde::Serialize;

use crate::lang::{Visibility, MANGLING_PREFIX, PLUS};
use crate::outcome::Value;

use super::symbol::SymbolId;

/// Index of a class in a [`super::RuntimeImage`]. `Object` is always 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ClassId(pub u32);

/// Image-wide send-site number, used to index inline caches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SiteId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SendKind {
    Object,
    #[serde(rename = "self")]
    SelfSend,
    Super,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteTag {
    Plain,
    Mangled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SendSite {
    pub id: SiteId,
    pub kind: SendKind,
    /// Only object-sends evaluate a receiver expression.
    pub receiver: Option<Code>,
    /// Source selector.
    pub selector: SymbolId,
    pub selector_text: String,
    /// Symbol actually looked up: the mangled form for mangled sites.
    pub symbol: SymbolId,
    pub tag: SiteTag,
    /// Plain because the selector was defined nowhere it could be found.
    pub deferred: bool,
    /// Static lookup start of a super-send.
    pub start: Option<ClassId>,
    pub args: Vec<Code>,
}

/// Lowered method body. Variables are resolved to frame slots and fields to
/// slots in the receiver's layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Code {
    Const(Value),
    SelfRef,
    Local {
        slot: usize,
        name: String,
    },
    /// Variable bound nowhere; evaluating it is stuck.
    FreeVar(String),
    New {
        class: ClassId,
        name: String,
    },
    NewUnknown(String),
    GetField {
        slot: usize,
        name: String,
    },
    SetField {
        slot: usize,
        name: String,
        value: Box<Code>,
    },
    /// Access to a field the enclosing class does not have. Methods holding
    /// one fail on activation, so it is never evaluated.
    UnknownField(String),
    Send(Box<SendSite>),
    Let {
        slot: usize,
        name: String,
        bound: Box<Code>,
        body: Box<Code>,
    },
}

impl Code {
    /// Source-like rendering with mangled sites shown under their mangled
    /// selector.
    pub fn render(&self) -> String {
        let mut out = String::new();
        render(&mut out, self, Ctx::Top);
        out
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Top,
    SumLeft,
    SumRight,
    Receiver,
}

fn is_plus(s: &SendSite) -> bool {
    s.kind == SendKind::Object && s.selector_text == PLUS && s.args.len() == 1
}

fn render(out: &mut String, c: &Code, ctx: Ctx) {
    stacker::maybe_grow(64 * 1024, 1024 * 1024, || render_inner(out, c, ctx))
}

fn render_inner(out: &mut String, c: &Code, ctx: Ctx) {
    match c {
        Code::Const(Value::Nil) => out.push_str("nil"),
        Code::Const(v) => {
            let _ = write!(out, "{v}");
        }
        Code::SelfRef => out.push_str("self"),
        Code::Local { name, .. } | Code::FreeVar(name) | Code::UnknownField(name) => {
            out.push_str(name)
        }
        Code::GetField { name, .. } => out.push_str(name),
        Code::New { name, .. } | Code::NewUnknown(name) => {
            if ctx == Ctx::Receiver {
                let _ = write!(out, "(new {name})");
            } else {
                let _ = write!(out, "new {name}");
            }
        }
        Code::SetField { name, value, .. } => {
            let paren = ctx != Ctx::Top;
            if paren {
                out.push('(');
            }
            let _ = write!(out, "{name} := ");
            render(out, value, Ctx::Top);
            if paren {
                out.push(')');
            }
        }
        Code::Let {
            name, bound, body, ..
        } => {
            let paren = ctx != Ctx::Top;
            if paren {
                out.push('(');
            }
            let _ = write!(out, "let {name} = ");
            render(out, bound, Ctx::Top);
            out.push_str(" in ");
            render(out, body, Ctx::Top);
            if paren {
                out.push(')');
            }
        }
        Code::Send(s) if is_plus(s) => {
            let paren = matches!(ctx, Ctx::SumRight | Ctx::Receiver);
            if paren {
                out.push('(');
            }
            render(out, s.receiver.as_ref().expect("object-send"), Ctx::SumLeft);
            out.push_str(" + ");
            render(out, &s.args[0], Ctx::SumRight);
            if paren {
                out.push(')');
            }
        }
        Code::Send(s) => {
            match (&s.kind, &s.receiver) {
                (SendKind::Super, _) => out.push_str("super"),
                (SendKind::SelfSend, _) => out.push_str("self"),
                (SendKind::Object, Some(r)) => render(out, r, Ctx::Receiver),
                (SendKind::Object, None) => unreachable!("object-sends have a receiver"),
            }
            out.push('.');
            if s.tag == SiteTag::Mangled {
                out.push_str(MANGLING_PREFIX);
            }
            out.push_str(&s.selector_text);
            out.push('(');
            for (i, a) in s.args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                render(out, a, Ctx::Top);
            }
            out.push(')');
        }
    }
}

/// A method after lowering. Shared between the plain and mangled entries of
/// a double-registered selector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledMethod {
    pub origin: String,
    pub class: ClassId,
    pub selector: SymbolId,
    pub selector_text: String,
    pub visibility: Visibility,
    pub params: Vec<String>,
    /// Parameters plus every `let` in the body.
    pub frame_size: usize,
    pub body: Code,
    /// First field access (in evaluation-independent pre-order) that the
    /// origin class does not have.
    pub unknown_field: Option<String>,
}

impl CompiledMethod {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Every send site of the body, in pre-order.
    pub fn sites(&self) -> Vec<&SendSite> {
        let mut out = Vec::new();
        collect_sites(&self.body, &mut out);
        out
    }
}

fn collect_sites<'a>(c: &'a Code, out: &mut Vec<&'a SendSite>) {
    match c {
        Code::SetField { value, .. } => collect_sites(value, out),
        Code::Send(s) => {
            out.push(s);
            if let Some(r) = &s.receiver {
                collect_sites(r, out);
            }
            s.args.iter().for_each(|a| collect_sites(a, out));
        }
        Code::Let { bound, body, .. } => {
            collect_sites(bound, out);
            collect_sites(body, out);
        }
        _ => {}
    }
}
