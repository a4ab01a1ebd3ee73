use std::fmt::Write;

use protolite::compiler::CompileMode;
use protolite::metrics::{BenchReport, MemoryReport, WorstCaseRatios};
use protolite::outcome::Evaluation;
use protolite::runtime::{CacheStats, RunConfig};

fn caches(run: RunConfig) -> &'static str {
    match (run.global_cache, run.inline_cache) {
        (true, true) => "global + inline caches",
        (true, false) => "global cache only",
        (false, true) => "inline caches only",
        (false, false) => "no caches",
    }
}

fn probes(out: &mut String, stats: &CacheStats) {
    let pct = stats.percentages();
    let counts = [stats.probe1, stats.probe2, stats.probe3, stats.misses];
    let _ = writeln!(out, "global cache: {} lookups", stats.global_lookups);
    for ((label, p), n) in ["probe 1", "probe 2", "probe 3", "miss"]
        .iter()
        .zip(pct)
        .zip(counts)
    {
        let _ = writeln!(out, "  {label:<8} {p:>6.2}%  {n}");
    }
    let _ = writeln!(out, "distinct keys: {}", stats.distinct_keys);
    let _ = writeln!(
        out,
        "inline caches: {} monomorphic, {} polymorphic, {} megamorphic",
        stats.ic.mono, stats.ic.poly, stats.ic.mega
    );
}

pub fn stats(
    mode: CompileMode,
    ev: &Evaluation,
    stats: &CacheStats,
    memory: &MemoryReport,
    ratios: &WorstCaseRatios,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "outcome: {} ({} steps)", ev.outcome, ev.steps);
    probes(&mut out, stats);
    let _ = writeln!(out, "memory ({mode}):");
    let width = memory.per_class.keys().map(String::len).max().unwrap_or(0);
    for (class, n) in &memory.per_class {
        let _ = writeln!(out, "  {class:<width$}  {n} entries");
    }
    let _ = writeln!(
        out,
        "  entries {}, symbols {} plain + {} mangled, compiled methods {}",
        memory.total_entries, memory.plain_symbols, memory.mangled_symbols, memory.compiled_methods
    );
    let _ = writeln!(
        out,
        "  estimated bytes {} (dictionaries {}, symbols {})",
        memory.estimated_bytes(),
        memory.dictionary_bytes,
        memory.symbol_bytes
    );
    let _ = writeln!(
        out,
        "worst case over baseline: dictionaries {:.2}x, symbols {:.2}x, total {:.2}x",
        ratios.dictionaries, ratios.symbols, ratios.total
    );
    out
}

pub fn bench(report: &BenchReport, baseline: Option<&BenchReport>) -> String {
    let c = &report.config;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} image, {}: {} invocations x {} iterations, first {} of each discarded",
        c.mode,
        caches(c.run),
        c.invocations,
        c.iterations,
        c.warmup
    );
    let _ = writeln!(
        out,
        "median {:.3} ms, mean {:.3} ms",
        report.median_ms, report.mean_ms
    );
    if let (Some(b), Some(o)) = (baseline, report.relative_overhead) {
        let _ = writeln!(
            out,
            "baseline median {:.3} ms, mean {:.3} ms, relative overhead {:+.2}%",
            b.median_ms,
            b.mean_ms,
            100.0 * o
        );
    }
    let _ = writeln!(out, "steady state of the last invocation:");
    probes(&mut out, &report.stats);
    out
}
