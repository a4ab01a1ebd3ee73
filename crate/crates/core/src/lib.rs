pub mod compiler;
pub mod lang;
pub mod metrics;
pub mod outcome;
pub mod reference;
pub mod runtime;
