mod report;

use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use protolite::compiler::{
    compile_program, desugar, unreachable_protected_sends, CompileError, CompileMode, RuntimeImage,
};
use protolite::lang::{parse, validate, ParseError, Program, ValidationReport};
use protolite::metrics::{
    bench, compare, diff_corpus, differential_run, measure_image, replicate_main,
    worst_case_ratios, BenchConfig, BenchError, GenConfig,
};
use protolite::outcome::{Outcome, DEFAULT_FUEL};
use protolite::runtime::{RunConfig, Runtime};

const FUEL_VAR: &str = "PROTOLITE_FUEL";
/// Default step budget of `diff`; generated programs may loop forever.
const DIFF_FUEL: u64 = 10_000;

#[derive(Parser)]
#[command(
    name = "protolite",
    version,
    about = "Run and inspect protolite programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile and run a program.
    Run {
        file: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Validate a program.
    Check {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Show the compiled method dictionaries and rewritten bodies.
    Desugar {
        file: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Compare the reference evaluator with the compiled runtime, on a file
    /// or on generated programs.
    Diff {
        file: Option<PathBuf>,
        /// Seed range of generated programs, inclusive, as `a..b`.
        #[arg(long, conflicts_with_all = ["file", "seed"])]
        seeds: Option<String>,
        #[arg(long, conflicts_with = "file")]
        seed: Option<u64>,
        /// Generate programs without protected methods.
        #[arg(long)]
        protected_free: bool,
        #[arg(long)]
        fuel: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Time the main expression, against the baseline compilation.
    Bench {
        file: PathBuf,
        #[command(flatten)]
        opts: Opts,
        #[arg(long, default_value_t = 10)]
        invocations: usize,
        #[arg(long, default_value_t = 15)]
        iterations: usize,
        #[arg(long, default_value_t = 5)]
        warmup: usize,
        /// Evaluate the main expression this many times per iteration.
        #[arg(long, default_value_t = 1)]
        replicate: usize,
    },
    /// Cache statistics of one run and the image's memory report.
    Stats {
        file: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Args, Clone, Copy)]
struct Opts {
    #[arg(long)]
    no_global_cache: bool,
    #[arg(long)]
    no_inline_cache: bool,
    /// Compile without mangling.
    #[arg(long, conflicts_with = "worst_case")]
    no_protect: bool,
    /// Double-register every method of every class.
    #[arg(long)]
    worst_case: bool,
    #[arg(long)]
    fuel: Option<u64>,
    #[arg(long)]
    json: bool,
}

impl Opts {
    fn mode(&self) -> CompileMode {
        if self.no_protect {
            CompileMode::Baseline
        } else if self.worst_case {
            CompileMode::WorstCase
        } else {
            CompileMode::Protected
        }
    }

    fn run_config(&self) -> RunConfig {
        RunConfig::new(!self.no_global_cache, !self.no_inline_cache)
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}:{source}", path.display())]
    Parse { path: PathBuf, source: ParseError },
    #[error("{report}")]
    Invalid { report: ValidationReport },
    #[error("{0}")]
    Usage(String),
    #[error("benchmark failed: {0}")]
    Bench(BenchError),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 3,
            CliError::Bench(BenchError::Failed(_)) => 1,
            _ => 2,
        }
    }
}

impl From<CompileError> for CliError {
    fn from(e: CompileError) -> Self {
        match e {
            CompileError::Invalid(report) => CliError::Invalid { report },
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Compile(c) => c.into(),
            other => CliError::Bench(other),
        }
    }
}

fn load(path: &Path) -> Result<Program, CliError> {
    let src = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&src).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

fn fuel(flag: Option<u64>) -> Result<u64, CliError> {
    fuel_or(flag, DEFAULT_FUEL)
}

fn fuel_or(flag: Option<u64>, default: u64) -> Result<u64, CliError> {
    if let Some(f) = flag {
        return Ok(f);
    }
    match std::env::var(FUEL_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{FUEL_VAR}={v} is not a step count"))),
        Err(_) => Ok(default),
    }
}

fn seed_range(text: &str) -> Result<Range<u64>, CliError> {
    let bad = || CliError::Usage(format!("bad seed range `{text}`, expected a..b"));
    let (a, b) = text.split_once("..").ok_or_else(bad)?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    if b < a {
        return Err(bad());
    }
    Ok(a..b + 1)
}

fn print_json(v: &impl serde::Serialize) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("reports serialize")
    );
}

fn compile(p: &Program, opts: &Opts) -> Result<RuntimeImage, CliError> {
    Ok(compile_program(p, opts.mode())?)
}

fn outcome_code(outcome: &Outcome) -> u8 {
    match outcome {
        Outcome::Value(_) => 0,
        _ => 1,
    }
}

fn cmd_run(file: &Path, opts: Opts) -> Result<u8, CliError> {
    let p = load(file)?;
    let img = compile(&p, &opts)?;
    let ev = Runtime::new(&img, opts.run_config()).run(fuel(opts.fuel)?);
    if opts.json {
        print_json(&ev);
    } else {
        match &ev.outcome {
            Outcome::Value(v) => println!("{v}"),
            other => eprintln!("{other}"),
        }
    }
    Ok(outcome_code(&ev.outcome))
}

fn cmd_check(file: &Path, json: bool) -> Result<u8, CliError> {
    let p = load(file)?;
    let report = validate(&p);
    let warnings = if report.violations.is_empty() {
        unreachable_protected_sends(&p)
    } else {
        Vec::new()
    };
    if json {
        print_json(
            &json!({ "violations": report.violations, "unreachableProtectedSends": warnings }),
        );
    } else {
        print!("{report}");
        for w in &warnings {
            println!(
                "warning: {}>>{} self-sends {}, which only subclasses define, as protected; the send compiles plain and cannot reach it",
                w.class, w.method, w.selector
            );
        }
    }
    Ok(if report.violations.is_empty() { 0 } else { 2 })
}

fn cmd_desugar(file: &Path, opts: Opts) -> Result<u8, CliError> {
    let img = compile(&load(file)?, &opts)?;
    if opts.json {
        print_json(&img.layout());
    } else {
        print!("{}", desugar(&img));
    }
    Ok(0)
}

fn cmd_diff(
    file: Option<&Path>,
    seeds: Option<&str>,
    seed: Option<u64>,
    protected_free: bool,
    fuel_flag: Option<u64>,
    json: bool,
) -> Result<u8, CliError> {
    let fuel = fuel_or(fuel_flag, DIFF_FUEL)?;
    if let Some(file) = file {
        let p = load(file)?;
        let r = differential_run(file.display().to_string(), &p, fuel)?;
        if json {
            print_json(&r);
        } else {
            if let Some(d) = &r.detail {
                println!("{}: {d}", r.id);
            }
            println!("{}/1 agree", r.passed() as u8);
        }
        return Ok(if r.passed() { 0 } else { 1 });
    }
    let range = match (seeds, seed) {
        (Some(s), _) => seed_range(s)?,
        (None, Some(s)) => s..s + 1,
        (None, None) => 0..1000,
    };
    let cfg = if protected_free {
        GenConfig::protected_free()
    } else {
        GenConfig::default()
    };
    let results = diff_corpus(range, &cfg, fuel);
    let agreed = results.iter().filter(|r| r.result.passed()).count();
    if json {
        print_json(&results);
    } else {
        for r in results.iter().filter(|r| !r.result.passed()) {
            println!(
                "seed {}: {}",
                r.seed,
                r.result.detail.as_deref().unwrap_or("disagreement")
            );
            if let Some(src) = &r.source {
                println!("{src}");
            }
        }
        println!("{agreed}/{} agree", results.len());
    }
    Ok(if agreed == results.len() { 0 } else { 1 })
}

struct BenchArgs {
    invocations: usize,
    iterations: usize,
    warmup: usize,
    replicate: usize,
}

fn cmd_bench(file: &Path, opts: Opts, args: BenchArgs) -> Result<u8, CliError> {
    let p = load(file)?;
    if args.replicate == 0 {
        return Err(CliError::Usage("--replicate must be at least 1".into()));
    }
    let p = replicate_main(&p, args.replicate);
    let config = BenchConfig {
        mode: opts.mode(),
        run: opts.run_config(),
        invocations: args.invocations,
        iterations: args.iterations,
        warmup: args.warmup,
        fuel: fuel(opts.fuel)?,
    };
    let (report, baseline) = if config.mode == CompileMode::Baseline {
        (bench(&p, config)?, None)
    } else {
        let base = BenchConfig {
            mode: CompileMode::Baseline,
            ..config
        };
        let cmp = compare(&p, base, config)?;
        (cmp.candidate, Some(cmp.baseline))
    };
    if opts.json {
        print_json(&json!({ "report": report, "baseline": baseline }));
    } else {
        print!("{}", report::bench(&report, baseline.as_ref()));
    }
    Ok(0)
}

fn cmd_stats(file: &Path, opts: Opts) -> Result<u8, CliError> {
    let p = load(file)?;
    let img = compile(&p, &opts)?;
    let mut rt = Runtime::new(&img, opts.run_config());
    let ev = rt.run(fuel(opts.fuel)?);
    let stats = rt.stats();
    let memory = measure_image(&img);
    let ratios = worst_case_ratios(&p)?;
    if opts.json {
        let [p1, p2, p3, miss] = stats.percentages();
        print_json(&json!({
            "mode": opts.mode(),
            "evaluation": ev,
            "stats": stats,
            "percentages": { "probe1": p1, "probe2": p2, "probe3": p3, "misses": miss },
            "memory": memory,
            "worstCase": ratios,
        }));
    } else {
        print!(
            "{}",
            report::stats(opts.mode(), &ev, &stats, &memory, &ratios)
        );
    }
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run { file, opts } => cmd_run(&file, opts),
        Command::Check { file, json } => cmd_check(&file, json),
        Command::Desugar { file, opts } => cmd_desugar(&file, opts),
        Command::Diff {
            file,
            seeds,
            seed,
            protected_free,
            fuel,
            json,
        } => cmd_diff(
            file.as_deref(),
            seeds.as_deref(),
            seed,
            protected_free,
            fuel,
            json,
        ),
        Command::Bench {
            file,
            opts,
            invocations,
            iterations,
            warmup,
            replicate,
        } => cmd_bench(
            &file,
            opts,
            BenchArgs {
                invocations,
                iterations,
                warmup,
                replicate,
            },
        ),
        Command::Stats { file, opts } => cmd_stats(&file, opts),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            match &e {
                CliError::Invalid { .. } => eprint!("{e}"),
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(e.code())
        }
    }
}
