//! Surface language: program model, parser, printer, hierarchy relations and
//! well-formedness checks.

mod ast;
mod hierarchy;
mod parse;
mod print;
mod validate;

pub use ast::*;
pub use hierarchy::{Hierarchy, UnknownClass};
pub use parse::{parse, ParseError};
pub use print::{expr_to_string, program_to_string};
pub use validate::{validate, Rule, ValidationReport, Violation};
