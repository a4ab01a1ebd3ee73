//! Values and evaluation outcomes shared by the reference evaluator and the
//! compiled runtime.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::lang::MANGLING_PREFIX;

/// Class name reported for integer receivers in diagnostics.
pub const INTEGER_CLASS: &str = "Integer";

/// Default step budget for a single evaluation.
pub const DEFAULT_FUEL: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Value {
    Nil,
    Oid(u32),
    Int(i64),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Nil => f.write_str("nil"),
            Value::Oid(o) => write!(f, "#{o}"),
            Value::Int(n) => write!(f, "{n}"),
        }
    }
}

/// Why an evaluation got stuck.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Error)]
#[serde(tag = "error")]
pub enum RuntimeError {
    #[error("DoesNotUnderstand: {class}>>{selector}")]
    DoesNotUnderstand { class: String, selector: String },
    #[error("NilReceiver: nil does not understand {selector}")]
    NilReceiver { selector: String },
    #[error("UnknownClass: {class}")]
    UnknownClass { class: String },
    #[error("UnknownVariable: {name}")]
    UnknownVariable { name: String },
    #[error("UnknownField: {class} has no field {field}")]
    UnknownField { class: String, field: String },
    #[error("ArityMismatch: {class}>>{selector} expects {expected} arguments, got {got}")]
    ArityMismatch {
        class: String,
        selector: String,
        expected: usize,
        got: usize,
    },
    #[error("PrimitiveFailed: {selector} needs integer arguments")]
    PrimitiveFailed { selector: String },
}

impl RuntimeError {
    /// Strips the mangling prefix from any selector in the error, so that a
    /// failed mangled send reads like an ordinary not-understood message.
    pub fn demangled(self) -> RuntimeError {
        let strip = |s: String| match s.strip_prefix(MANGLING_PREFIX) {
            Some(rest) => rest.to_string(),
            None => s,
        };
        match self {
            RuntimeError::DoesNotUnderstand { class, selector } => {
                RuntimeError::DoesNotUnderstand {
                    class,
                    selector: strip(selector),
                }
            }
            RuntimeError::NilReceiver { selector } => RuntimeError::NilReceiver {
                selector: strip(selector),
            },
            RuntimeError::ArityMismatch {
                class,
                selector,
                expected,
                got,
            } => RuntimeError::ArityMismatch {
                class,
                selector: strip(selector),
                expected,
                got,
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "outcome", content = "detail", rename_all = "snake_case")]
pub enum Outcome {
    Value(Value),
    RuntimeError(RuntimeError),
    FuelExhausted,
}

impl Outcome {
    pub fn value(&self) -> Option<Value> {
        match self {
            Outcome::Value(v) => Some(*v),
            _ => None,
        }
    }

    /// Equality up to mangling-prefix stripping in error reasons.
    pub fn equivalent(&self, other: &Outcome) -> bool {
        match (self, other) {
            (Outcome::RuntimeError(a), Outcome::RuntimeError(b)) => {
                a.clone().demangled() == b.clone().demangled()
            }
            (a, b) => a == b,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Value(v) => write!(f, "{v}"),
            Outcome::RuntimeError(e) => write!(f, "error: {e}"),
            Outcome::FuelExhausted => f.write_str("fuel exhausted"),
        }
    }
}

/// An outcome with the number of reduction steps taken to reach it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Evaluation {
    pub outcome: Outcome,
    pub steps: u64,
}
