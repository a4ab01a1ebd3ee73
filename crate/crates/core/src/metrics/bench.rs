use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::compiler::{compile_program, CompileError, CompileMode, RuntimeImage};
use crate::lang::{Expr, Program};
use crate::outcome::{Outcome, DEFAULT_FUEL};
use crate::runtime::{CacheStats, RunConfig, Runtime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BenchConfig {
    pub mode: CompileMode,
    pub run: RunConfig,
    /// Fresh runtimes, each starting with cold caches.
    pub invocations: usize,
    /// Timed runs per invocation, warm-up included.
    pub iterations: usize,
    /// Leading iterations of each invocation left out of the aggregates.
    pub warmup: usize,
    pub fuel: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            mode: CompileMode::Protected,
            run: RunConfig::default(),
            invocations: 10,
            iterations: 15,
            warmup: 5,
            fuel: DEFAULT_FUEL,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("no measured iterations: {iterations} iterations with {warmup} warm-up")]
    NoIterations { iterations: usize, warmup: usize },
    #[error("no invocations requested")]
    NoInvocations,
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error("benchmark run did not produce a value: {0}")]
    Failed(Outcome),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    /// Wall time in milliseconds of every iteration, per invocation,
    /// warm-up included.
    pub times_ms: Vec<Vec<f64>>,
    pub median_ms: f64,
    pub mean_ms: f64,
    /// Median over the baseline median, minus one.
    pub relative_overhead: Option<f64>,
    /// Steady-state counters of the last invocation.
    pub stats: CacheStats,
}

impl BenchReport {
    fn from_times(config: BenchConfig, times_ms: Vec<Vec<f64>>, stats: CacheStats) -> Self {
        let mut kept: Vec<f64> = times_ms
            .iter()
            .flat_map(|inv| inv[config.warmup..].iter().copied())
            .collect();
        kept.sort_by(f64::total_cmp);
        let mean_ms = kept.iter().sum::<f64>() / kept.len() as f64;
        BenchReport {
            config,
            times_ms,
            median_ms: median(&kept),
            mean_ms,
            relative_overhead: None,
            stats,
        }
    }

    /// Records the overhead of this report against `baseline`.
    pub fn relative_to(mut self, baseline: &BenchReport) -> Self {
        self.relative_overhead = Some(self.median_ms / baseline.median_ms - 1.0);
        self
    }

    /// Number of iterations that entered the aggregates.
    pub fn measured(&self) -> usize {
        self.times_ms
            .iter()
            .map(|t| t.len() - self.config.warmup)
            .sum()
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// `p` with its main expression evaluated `n` times in sequence; the last
/// result is the program's value.
pub fn replicate_main(p: &Program, n: usize) -> Program {
    let mut out = p.clone();
    let mut main = p.main.clone();
    for i in (1..n).rev() {
        main = Expr::let_in(format!("rep{i}"), p.main.clone(), main);
    }
    out.main = main;
    out
}

fn check(config: &BenchConfig) -> Result<(), BenchError> {
    if config.invocations == 0 {
        return Err(BenchError::NoInvocations);
    }
    if config.iterations <= config.warmup {
        return Err(BenchError::NoIterations {
            iterations: config.iterations,
            warmup: config.warmup,
        });
    }
    Ok(())
}

fn timed(rt: &mut Runtime<'_>, fuel: u64) -> Result<f64, BenchError> {
    let start = Instant::now();
    let ev = rt.run(fuel);
    let ms = start.elapsed().as_secs_f64() * 1e3;
    match ev.outcome {
        Outcome::Value(_) => Ok(ms),
        other => Err(BenchError::Failed(other)),
    }
}

/// Times the main expression of `p` compiled and run as `config` says.
pub fn bench(p: &Program, config: BenchConfig) -> Result<BenchReport, BenchError> {
    check(&config)?;
    let img = compile_program(p, config.mode)?;
    bench_image(&img, config)
}

pub fn bench_image(img: &RuntimeImage, config: BenchConfig) -> Result<BenchReport, BenchError> {
    check(&config)?;
    let mut times = Vec::with_capacity(config.invocations);
    let mut stats = CacheStats::default();
    for _ in 0..config.invocations {
        let mut rt = Runtime::new(img, config.run);
        let mut inv = Vec::with_capacity(config.iterations);
        for i in 0..config.iterations {
            if i == config.warmup {
                rt.reset_stats();
            }
            inv.push(timed(&mut rt, config.fuel)?);
        }
        stats = rt.stats();
        times.push(inv);
    }
    Ok(BenchReport::from_times(config, times, stats))
}

/// Baseline and candidate measured together.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub baseline: BenchReport,
    pub candidate: BenchReport,
}

impl Comparison {
    pub fn overhead(&self) -> f64 {
        self.candidate.relative_overhead.unwrap_or(0.0)
    }
}

/// Benchmarks `p` under two configurations, alternating iterations between
/// them so that drift in machine load affects both alike.
pub fn compare(
    p: &Program,
    baseline: BenchConfig,
    candidate: BenchConfig,
) -> Result<Comparison, BenchError> {
    check(&baseline)?;
    check(&candidate)?;
    let imgs = [
        compile_program(p, baseline.mode)?,
        compile_program(p, candidate.mode)?,
    ];
    let configs = [baseline, candidate];
    let mut times: [Vec<Vec<f64>>; 2] = Default::default();
    let mut stats: [CacheStats; 2] = Default::default();
    let invocations = baseline.invocations.max(candidate.invocations);
    let iterations = baseline.iterations.max(candidate.iterations);
    for inv in 0..invocations {
        let mut rts: Vec<Runtime<'_>> = imgs
            .iter()
            .zip(&configs)
            .map(|(img, c)| Runtime::new(img, c.run))
            .collect();
        let mut run = [Vec::new(), Vec::new()];
        for i in 0..iterations {
            let order = if (inv + i) % 2 == 0 { [0, 1] } else { [1, 0] };
            for k in order {
                let c = &configs[k];
                if inv >= c.invocations || i >= c.iterations {
                    continue;
                }
                if i == c.warmup {
                    rts[k].reset_stats();
                }
                run[k].push(timed(&mut rts[k], c.fuel)?);
            }
        }
        for k in 0..2 {
            if !run[k].is_empty() {
                stats[k] = rts[k].stats();
                times[k].push(std::mem::take(&mut run[k]));
            }
        }
    }
    let [tb, tc] = times;
    let [sb, sc] = stats;
    let baseline = BenchReport::from_times(baseline, tb, sb);
    let candidate = BenchReport::from_times(candidate, tc, sc).relative_to(&baseline);
    Ok(Comparison {
        baseline,
        candidate,
    })
}
