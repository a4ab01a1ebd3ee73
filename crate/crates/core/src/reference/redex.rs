use std::fmt;

use crate::outcome::Value;

/// Run-time expression: a surface expression whose field accesses carry the
/// object they belong to and whose `self`/`super` sends carry the receiver and
/// the class of the enclosing method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Redex {
    Val(Value),
    New(String),
    Var(String),
    FieldGet {
        owner: Value,
        field: String,
    },
    FieldSet {
        owner: Value,
        field: String,
        value: Box<Redex>,
    },
    ObjectSend {
        receiver: Box<Redex>,
        selector: String,
        args: Vec<Redex>,
    },
    SelfSend {
        owner: Value,
        class: String,
        selector: String,
        args: Vec<Redex>,
    },
    SuperSend {
        owner: Value,
        class: String,
        selector: String,
        args: Vec<Redex>,
    },
    Let {
        var: String,
        bound: Box<Redex>,
        body: Box<Redex>,
    },
}

impl Redex {
    pub fn as_value(&self) -> Option<Value> {
        match self {
            Redex::Val(v) => Some(*v),
            _ => None,
        }
    }

    /// Index of the leftmost child in an evaluation-context position that is
    /// not yet a value. Children are numbered receiver/bound/value first,
    /// then arguments.
    pub(crate) fn pending_child(&self) -> Option<usize> {
        let pending = |r: &Redex| r.as_value().is_none();
        match self {
            Redex::FieldSet { value, .. } => pending(value).then_some(0),
            Redex::ObjectSend { receiver, args, .. } => {
                if pending(receiver) {
                    Some(0)
                } else {
                    args.iter().position(pending).map(|i| i + 1)
                }
            }
            Redex::SelfSend { args, .. } | Redex::SuperSend { args, .. } => {
                args.iter().position(pending).map(|i| i + 1)
            }
            Redex::Let { bound, .. } => pending(bound).then_some(0),
            Redex::Val(_) | Redex::New(_) | Redex::Var(_) | Redex::FieldGet { .. } => None,
        }
    }

    pub(crate) fn child_mut(&mut self, i: usize) -> &mut Redex {
        match self {
            Redex::FieldSet { value, .. } if i == 0 => value,
            Redex::ObjectSend { receiver, .. } if i == 0 => receiver,
            Redex::ObjectSend { args, .. }
            | Redex::SelfSend { args, .. }
            | Redex::SuperSend { args, .. } => &mut args[i - 1],
            Redex::Let { bound, .. } if i == 0 => bound,
            _ => unreachable!("no child {i}"),
        }
    }

    /// Replaces free occurrences of `var` with `value`. A `let` binding the
    /// same name shadows it in its body.
    pub fn substitute(&mut self, var: &str, value: Value) {
        stacker::maybe_grow(64 * 1024, 1024 * 1024, || self.substitute_inner(var, value))
    }

    fn substitute_inner(&mut self, var: &str, value: Value) {
        match self {
            Redex::Var(x) if x == var => *self = Redex::Val(value),
            Redex::Val(_) | Redex::New(_) | Redex::Var(_) | Redex::FieldGet { .. } => {}
            Redex::FieldSet { value: v, .. } => v.substitute(var, value),
            Redex::ObjectSend { receiver, args, .. } => {
                receiver.substitute(var, value);
                args.iter_mut().for_each(|a| a.substitute(var, value));
            }
            Redex::SelfSend { args, .. } | Redex::SuperSend { args, .. } => {
                args.iter_mut().for_each(|a| a.substitute(var, value))
            }
            Redex::Let {
                var: x,
                bound,
                body,
            } => {
                bound.substitute(var, value);
                if x != var {
                    body.substitute(var, value);
                }
            }
        }
    }

    /// Takes a (possibly very deep) redex apart without recursive drops.
    pub(crate) fn dismantle(self) {
        let mut work = vec![self];
        while let Some(r) = work.pop() {
            match r {
                Redex::FieldSet { value, .. } => work.push(*value),
                Redex::ObjectSend { receiver, args, .. } => {
                    work.push(*receiver);
                    work.extend(args);
                }
                Redex::SelfSend { args, .. } | Redex::SuperSend { args, .. } => work.extend(args),
                Redex::Let { bound, body, .. } => {
                    work.push(*bound);
                    work.push(*body);
                }
                Redex::Val(_) | Redex::New(_) | Redex::Var(_) | Redex::FieldGet { .. } => {}
            }
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Redex]) -> fmt::Result {
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

impl fmt::Display for Redex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Redex::Val(v) => write!(f, "{v}"),
            Redex::New(c) => write!(f, "new {c}"),
            Redex::Var(x) => f.write_str(x),
            Redex::FieldGet { owner, field } => write!(f, "{owner}.{field}"),
            Redex::FieldSet {
                owner,
                field,
                value,
            } => write!(f, "({owner}.{field} := {value})"),
            Redex::ObjectSend {
                receiver,
                selector,
                args,
            } => {
                write!(f, "({receiver}).{selector}")?;
                write_args(f, args)
            }
            Redex::SelfSend {
                owner,
                class,
                selector,
                args,
            } => {
                write!(f, "self<{owner},{class}>.{selector}")?;
                write_args(f, args)
            }
            Redex::SuperSend {
                owner,
                class,
                selector,
                args,
            } => {
                write!(f, "super<{owner},{class}>.{selector}")?;
                write_args(f, args)
            }
            Redex::Let { var, bound, body } => write!(f, "(let {var} = {bound} in {body})"),
        }
    }
}
