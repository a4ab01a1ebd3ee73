//! Reference semantics: a small-step reduction evaluator used as the ground
//! truth for the compiled runtime.

mod eval;
mod redex;

pub use eval::{eval_program, ObjectRecord, Reference, Step, Store};
pub use redex::Redex;
