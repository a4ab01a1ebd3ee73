//! Memory accounting, differential testing against the reference
//! evaluator, program generation and benchmarking.

mod bench;
mod diff;
mod generate;
mod memory;

pub use bench::{
    bench, bench_image, compare, replicate_main, BenchConfig, BenchError, BenchReport, Comparison,
};
pub use diff::{diff_corpus, differential_run, DiffResult, SeedResult};
pub use generate::{generate_program, GenConfig};
pub use memory::{
    measure_image, worst_case_ratios, MemoryReport, WorstCaseRatios, ENTRY_BYTES,
    SYMBOL_HEADER_BYTES,
};
