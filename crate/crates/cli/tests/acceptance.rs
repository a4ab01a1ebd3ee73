//! Acceptance criteria, one pass/fail line each. Runs without the libtest
//! harness so the lines are always printed.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use protolite::compiler::{
    compile_program, install_method, rewrite_scope, CompileError, CompileMode, InstallError,
    RuntimeImage,
};
use protolite::lang::{parse, Expr, MethodDef, Program, Rule};
use protolite::metrics::{
    compare, diff_corpus, differential_run, generate_program, measure_image, replicate_main,
    BenchConfig, GenConfig, SeedResult,
};
use protolite::outcome::{Evaluation, Outcome, RuntimeError, Value, DEFAULT_FUEL};
use protolite::reference::eval_program;
use protolite::runtime::{run_image, RunConfig, Runtime};

type Check = Result<String, String>;

const FUZZ_FUEL: u64 = 10_000;
const FUZZ_SEEDS: std::ops::Range<u64> = 0..1000;

fn programs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../programs")
}

fn load(name: &str) -> Program {
    let src = std::fs::read_to_string(programs_dir().join(name)).expect("program file");
    parse(&src).expect("program parses")
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_protolite"))
        .args(args)
        .current_dir(programs_dir())
        .env_remove("PROTOLITE_FUEL")
        .output()
        .expect("protolite binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || {
        format!("{what} took {t:.2?}, limit {limit:?}")
    })
}

fn golden_suite() -> Check {
    let start = Instant::now();
    let cases = [
        (
            "appendixB_callProtected_A.stl",
            Outcome::Value(Value::Int(11)),
        ),
        (
            "appendixB_callProtected_B.stl",
            Outcome::Value(Value::Int(42)),
        ),
        (
            "appendixB_protectedMethod.stl",
            Outcome::RuntimeError(RuntimeError::DoesNotUnderstand {
                class: "A".into(),
                selector: "protectedMethod".into(),
            }),
        ),
        (
            "appendixB_raiseError.stl",
            Outcome::RuntimeError(RuntimeError::DoesNotUnderstand {
                class: "A".into(),
                selector: "protectedMethod".into(),
            }),
        ),
        ("appendixB_sum.stl", Outcome::Value(Value::Int(84))),
        (
            "appendixB_publicInSubclass.stl",
            Outcome::Value(Value::Int(36)),
        ),
    ];
    for (file, expected) in &cases {
        let p = load(file);
        let reference = eval_program(&p, DEFAULT_FUEL).map_err(|r| format!("{file}: {r}"))?;
        ensure(&reference.outcome == expected, || {
            format!(
                "{file}: reference gave {}, expected {expected}",
                reference.outcome
            )
        })?;
        let img = compile_program(&p, CompileMode::Protected).map_err(|e| e.to_string())?;
        for config in RunConfig::all() {
            let (ev, _) = run_image(&img, config, DEFAULT_FUEL);
            ensure(ev == reference, || {
                format!(
                    "{file}: runtime under {config:?} gave {} in {} steps",
                    ev.outcome, ev.steps
                )
            })?;
        }
    }
    within(start, Duration::from_secs(1), "golden suite")?;
    let sum = cli(&["run", "appendixB_sum.stl"]);
    ensure(
        stdout(&sum).trim() == "84" && sum.status.code() == Some(0),
        || {
            format!(
                "`run appendixB_sum.stl` printed {:?}, {:?}",
                stdout(&sum),
                sum.status
            )
        },
    )?;
    let err = cli(&["run", "appendixB_raiseError.stl"]);
    ensure(
        stderr(&err).contains("DoesNotUnderstand") && err.status.code() == Some(1),
        || {
            format!(
                "`run appendixB_raiseError.stl` gave {:?}, {:?}",
                stderr(&err),
                err.status
            )
        },
    )?;
    Ok(format!(
        "6 programs x (reference + 4 cache configs) in {:.2?}",
        start.elapsed()
    ))
}

fn narrowing() -> Check {
    let p = load("narrowing.stl");
    match compile_program(&p, CompileMode::Protected) {
        Err(CompileError::Invalid(r)) if r.has(Rule::OverridingPublicMethod) => {}
        other => {
            return Err(format!(
                "whole-program compile gave {:?}",
                other.map(|_| ())
            ))
        }
    }
    let mut open = p.clone();
    let stack = open
        .class_mut("Stack")
        .ok_or("narrowing.stl has no Stack")?;
    stack.protected_methods.retain(|m| m.selector != "size");
    let img = compile_program(&open, CompileMode::Protected).map_err(|e| e.to_string())?;
    match install_method(
        &img,
        "Stack",
        MethodDef::protected("size", &[], Expr::Int(0)),
    ) {
        Err(InstallError::Invalid(r)) if r.has(Rule::OverridingPublicMethod) => {}
        other => return Err(format!("install gave {:?}", other.map(|_| ()))),
    }
    let out = cli(&["run", "narrowing.stl"]);
    ensure(
        out.status.code() == Some(2) && stderr(&out).contains("OVERRIDINGPUBLICMETHOD"),
        || {
            format!(
                "`run narrowing.stl` gave {:?}, {:?}",
                stderr(&out),
                out.status
            )
        },
    )?;
    Ok("rejected by compile, by install and by the CLI (exit 2)".into())
}

struct Corpus {
    protected: Vec<SeedResult>,
    free: Vec<SeedResult>,
    elapsed: Duration,
}

fn corpus() -> Corpus {
    let start = Instant::now();
    let protected = diff_corpus(FUZZ_SEEDS, &GenConfig::default(), FUZZ_FUEL);
    let free = diff_corpus(FUZZ_SEEDS, &GenConfig::protected_free(), FUZZ_FUEL);
    Corpus {
        protected,
        free,
        elapsed: start.elapsed(),
    }
}

fn fuzz(c: &Corpus) -> Check {
    for r in c.protected.iter().chain(&c.free) {
        ensure(r.result.passed(), || {
            format!(
                "seed {}: {}\n{}",
                r.seed,
                r.result.detail.as_deref().unwrap_or("disagreement"),
                r.source.as_deref().unwrap_or("")
            )
        })?;
    }
    for r in &c.free {
        ensure(
            r.result.baseline.is_some() && r.result.dictionaries_agree == Some(true),
            || {
                format!(
                    "seed {}: protected-free program missed the three-way check",
                    r.seed
                )
            },
        )?;
    }
    let with_protected = c
        .protected
        .iter()
        .filter(|r| generate_program(r.seed, &GenConfig::default()).uses_protected())
        .count();
    ensure(with_protected >= 500, || {
        format!("only {with_protected} generated programs use protected methods")
    })?;
    ensure(c.elapsed < Duration::from_secs(60), || {
        format!("corpus took {:.2?}", c.elapsed)
    })?;
    let out = cli(&["diff", "--seeds", "0..999"]);
    ensure(stdout(&out).trim_end().ends_with("1000/1000 agree"), || {
        format!("`diff --seeds 0..999` printed {:?}", stdout(&out))
    })?;
    Ok(format!(
        "{}/{} protected-free three-way, {}/{} with protected methods ({with_protected} use them), {:.2?}",
        c.free.len(),
        c.free.len(),
        c.protected.len(),
        c.protected.len(),
        c.elapsed
    ))
}

/// Per-class entries, mangled symbols and compiled methods derived from
/// the source alone.
fn counting_law(p: &Program) -> (Vec<(String, usize)>, usize, usize) {
    let scope = rewrite_scope(p);
    let mut mangled = BTreeSet::new();
    let mut per_class = Vec::new();
    let mut methods = 0;
    for c in &p.classes {
        let public = c.public_methods.len();
        let protected = c.protected_methods.len();
        methods += public + protected;
        let n = if scope.contains(&c.name) {
            mangled.extend(c.methods().map(|m| m.selector.clone()));
            2 * public + protected
        } else {
            public + protected
        };
        per_class.push((c.name.clone(), n));
    }
    per_class.sort();
    (per_class, mangled.len(), methods)
}

fn accounting() -> Check {
    let mut programs: Vec<Program> = FUZZ_SEEDS
        .map(|s| generate_program(s, &GenConfig::default()))
        .collect();
    programs.push(load("listing1.stl"));
    for (i, p) in programs.iter().enumerate() {
        let report = measure_image(&compile_program(p, CompileMode::Protected).unwrap());
        let (per_class, mangled, methods) = counting_law(p);
        let measured: Vec<(String, usize)> = report
            .per_class
            .iter()
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        ensure(measured == per_class, || {
            format!("program {i}: entries {measured:?}, law {per_class:?}")
        })?;
        ensure(report.mangled_symbols == mangled, || {
            format!(
                "program {i}: {} mangled symbols, law {mangled}",
                report.mangled_symbols
            )
        })?;
        let base = measure_image(&compile_program(p, CompileMode::Baseline).unwrap());
        ensure(
            report.compiled_methods == methods && base.compiled_methods == methods,
            || format!("program {i}: compiled methods changed under mangling"),
        )?;
    }
    let out = cli(&["stats", "--worst-case", "listing1.stl"]);
    let text = stdout(&out);
    let wanted = [
        "A  4 entries",
        "B  7 entries",
        "entries 11, symbols 4 plain + 5 mangled, compiled methods 7",
        "worst case over baseline: dictionaries",
    ];
    for w in wanted {
        ensure(text.contains(w), || {
            format!("`stats --worst-case listing1.stl` lacks {w:?}:\n{text}")
        })?;
    }
    Ok(format!(
        "{} programs match the entry and symbol laws",
        programs.len()
    ))
}

/// Ten classes with ten methods each, every method sent from main.
fn keyed_workload() -> Program {
    let mut src = String::new();
    let mut main = Vec::new();
    for c in 0..10 {
        src.push_str(&format!("class W{c} extends Object {{"));
        for s in 0..10 {
            src.push_str(&format!(
                " method s{s}() {{ self.t{s}() }} method t{s}() {{ {s} }}"
            ));
            main.push(format!("(new W{c}).s{s}()"));
        }
        src.push_str(" }\n");
    }
    parse(&format!("{src} main {{ {} }}", main.join(" + "))).unwrap()
}

fn steady_state_misses(img: &RuntimeImage) -> Result<(u64, u64), String> {
    let mut rt = Runtime::new(img, RunConfig::new(true, false));
    let first = rt.run(DEFAULT_FUEL);
    rt.reset_stats();
    let second = rt.run(DEFAULT_FUEL);
    ensure(first == second, || {
        "warm run changed the result".to_string()
    })?;
    let stats = rt.stats();
    Ok((stats.misses, stats.distinct_keys))
}

fn caches(c: &Corpus) -> Check {
    let mut runs = 0;
    for (r, cfg) in c
        .protected
        .iter()
        .map(|r| (r, GenConfig::default()))
        .chain(c.free.iter().map(|r| (r, GenConfig::protected_free())))
    {
        let p = generate_program(r.seed, &cfg);
        let img = compile_program(&p, CompileMode::Protected).unwrap();
        let results: Vec<Evaluation> = RunConfig::all()
            .into_iter()
            .map(|config| run_image(&img, config, FUZZ_FUEL).0)
            .collect();
        ensure(results.iter().all(|e| e == &results[0]), || {
            format!(
                "seed {}: cache configurations disagree: {results:?}",
                r.seed
            )
        })?;
        runs += 4;
    }
    let p = keyed_workload();
    let base = compile_program(&p, CompileMode::Baseline).unwrap();
    let worst = compile_program(&p, CompileMode::WorstCase).unwrap();
    let (misses, base_keys) = steady_state_misses(&base)?;
    ensure(base_keys <= 200, || {
        format!("workload has {base_keys} keys")
    })?;
    ensure(misses == 0, || format!("{misses} steady-state misses"))?;
    let (worst_misses, worst_keys) = steady_state_misses(&worst)?;
    ensure(worst_misses == 0, || {
        format!("{worst_misses} steady-state misses, worst case")
    })?;
    ensure(worst_keys <= 2 * base_keys, || {
        format!("worst case has {worst_keys} keys against {base_keys}")
    })?;
    Ok(format!(
        "{runs} transparent runs; steady-state misses 0 over {base_keys} keys; worst case {worst_keys} keys"
    ))
}

/// First-probe slot, restated independently of the runtime.
fn oracle_slot(class: u32, symbol: u32) -> u32 {
    let mix = class.wrapping_mul(0x9E37_79B1) ^ symbol.wrapping_mul(0x85EB_CA77);
    mix >> 22
}

fn probes() -> Check {
    let mut src = String::new();
    for c in 0..10 {
        src.push_str(&format!("class C{c} extends Object {{"));
        for s in 0..30 {
            src.push_str(&format!(" method s{s}() {{ {s} }}"));
        }
        src.push_str(" }\n");
    }
    let img = compile_program(
        &parse(&format!("{src} main {{ nil }}")).unwrap(),
        CompileMode::Protected,
    )
    .unwrap();
    let mut keys = Vec::new();
    for c in 0..10 {
        for s in 0..30 {
            let class = img.class_id(&format!("C{c}")).unwrap().0;
            let symbol = img.symbol(&format!("s{s}")).unwrap().0;
            keys.push((c, s, oracle_slot(class, symbol)));
        }
    }
    let (a, b) = keys
        .iter()
        .enumerate()
        .find_map(|(i, a)| keys[i + 1..].iter().find(|b| b.2 == a.2).map(|b| (*a, *b)))
        .ok_or("no first-probe collision among 300 keys")?;
    let send = |k: (i32, i32, u32)| format!("(new C{}).s{}()", k.0, k.1);
    let main = [send(a), send(b), send(a), send(b)].join(" + ");
    let path = std::env::temp_dir().join(format!("protolite-collision-{}.stl", std::process::id()));
    std::fs::write(&path, format!("{src} main {{ {main} }}")).map_err(|e| e.to_string())?;
    let path_text = path.to_str().unwrap();
    let json_out = cli(&["stats", "--no-inline-cache", "--json", path_text]);
    let text_out = cli(&["stats", "--no-inline-cache", path_text]);
    let _ = std::fs::remove_file(&path);
    let v: serde_json::Value =
        serde_json::from_slice(&json_out.stdout).map_err(|e| format!("stats --json: {e}"))?;
    let probe2 = v["stats"]["probe2"].as_u64().unwrap_or(0);
    ensure(probe2 >= 1, || format!("no probe-2 hit: {}", v["stats"]))?;
    for field in ["probe1", "probe2", "probe3", "misses"] {
        ensure(v["percentages"][field].is_f64(), || {
            format!("percentages lack {field}")
        })?;
    }
    let text = stdout(&text_out);
    for label in ["probe 1", "probe 2", "probe 3", "miss"] {
        ensure(
            text.lines()
                .any(|l| l.trim_start().starts_with(label) && l.contains('%')),
            || format!("stats output lacks a {label} line:\n{text}"),
        )?;
    }
    Ok(format!(
        "C{}>>s{} and C{}>>s{} share slot {}; probe-2 hits {probe2}; histogram {}",
        a.0, a.1, b.0, b.1, a.2, v["percentages"]
    ))
}

fn send_heavy() -> Program {
    let p = parse(
        "class Shape extends Object {
           fields: size;
           method init(n) { size := n }
           method area() { self.side() + self.side() }
           method side() { size }
           method grow(k) { size := self.side() + k }
         }
         class Square extends Shape { method side() { super.side() + 1 } }
         class Cube extends Square { method area() { super.area() + self.side() } }
         main {
           let a = new Shape in let b = new Square in let c = new Cube in
           let i = a.init(1) + b.init(2) + c.init(3) in
           let g = a.grow(1) + b.grow(2) + c.grow(3) in
           a.area() + b.area() + c.area() + a.side() + b.side() + c.side()
         }",
    )
    .unwrap();
    replicate_main(&p, 400)
}

fn overhead() -> Check {
    let start = Instant::now();
    let p = send_heavy();
    let baseline = BenchConfig {
        mode: CompileMode::Baseline,
        ..BenchConfig::default()
    };
    let worst = BenchConfig {
        mode: CompileMode::WorstCase,
        ..baseline
    };
    let cmp = compare(&p, baseline, worst).map_err(|e| e.to_string())?;
    let overhead = cmp.overhead();
    let measured = cmp.candidate.measured();
    ensure(measured == 100, || {
        format!("{measured} measured iterations, expected 100")
    })?;
    within(start, Duration::from_secs(120), "benchmark")?;
    ensure(overhead <= 0.15, || {
        format!(
            "worst-case median {:.3} ms vs baseline {:.3} ms: {:+.1}%",
            cmp.candidate.median_ms,
            cmp.baseline.median_ms,
            100.0 * overhead
        )
    })?;
    Ok(format!(
        "median {:.3} ms worst case vs {:.3} ms baseline, overhead {:+.2}% (10 x 15, 5 warm-up)",
        cmp.candidate.median_ms,
        cmp.baseline.median_ms,
        100.0 * overhead
    ))
}

const PROPAGATION_DESUGAR: &str = "\
scope: A B
roots: A

class A extends Base
  __protectedMethod -> A>>protectedMethod protected
  __run -> A>>run public [shared]
  run -> A>>run public [shared]
  protectedMethod() { self.copy() }
  run() { self.__protectedMethod() }

class B extends A
  __copy -> B>>copy public [shared]
  copy -> B>>copy public [shared]
  copy() { 2 }

class Base extends Object
  copy -> Base>>copy public
  copy() { 1 }

main { (new B).run() + (new A).run() }
deferred: -
";

fn propagation() -> Check {
    let out = cli(&["desugar", "propagation.stl"]);
    let text = stdout(&out);
    ensure(text == PROPAGATION_DESUGAR, || {
        format!("desugar propagation.stl printed:\n{text}")
    })?;
    let p = load("propagation.stl");
    let img = compile_program(&p, CompileMode::Protected).unwrap();
    let root = img.class_named("Base").unwrap();
    let mangled_in_root = root
        .dictionary
        .iter()
        .filter(|(s, _)| img.symbols().is_mangled(*s))
        .count();
    ensure(mangled_in_root == 0, || {
        format!("Base has {mangled_in_root} mangled entries")
    })?;
    let r = differential_run("propagation", &p, DEFAULT_FUEL).map_err(|e| e.to_string())?;
    ensure(r.passed(), || format!("{:?}", r.detail))?;
    ensure(r.runtime.outcome == Outcome::Value(Value::Int(3)), || {
        format!("propagation.stl gave {}", r.runtime.outcome)
    })?;
    Ok("root unmangled, middle self-send plain, leaf override found (2 + 1 = 3)".into())
}

fn deferred() -> Check {
    let p = load("deferred.stl");
    let img = compile_program(&p, CompileMode::Protected).unwrap();
    let body = |img: &RuntimeImage| img.layout().classes["A"].entries["anyMethod"].body.clone();
    ensure(body(&img) == "self.unknown()", || {
        format!("before install: {}", body(&img))
    })?;
    ensure(img.deferred_sites().len() == 1, || {
        "site not recorded as deferred".into()
    })?;
    let before = run_image(&img, RunConfig::default(), DEFAULT_FUEL).0;
    ensure(
        matches!(
            before.outcome,
            Outcome::RuntimeError(RuntimeError::DoesNotUnderstand { .. })
        ),
        || format!("before install: {}", before.outcome),
    )?;
    let unknown = MethodDef::protected("unknown", &[], Expr::Int(7));
    let next = install_method(&img, "A", unknown.clone()).map_err(|e| e.to_string())?;
    ensure(body(&next) == "self.__unknown()", || {
        format!("after install: {}", body(&next))
    })?;
    ensure(next.deferred_sites().is_empty(), || {
        "site still deferred".into()
    })?;
    let mut whole = p.clone();
    whole.class_mut("A").unwrap().add_method(unknown);
    let reference = eval_program(&whole, DEFAULT_FUEL).unwrap();
    for config in RunConfig::all() {
        let after = run_image(&next, config, DEFAULT_FUEL).0;
        ensure(after == reference, || {
            format!(
                "after install: {} vs reference {}",
                after.outcome, reference.outcome
            )
        })?;
    }
    ensure(reference.outcome == Outcome::Value(Value::Int(7)), || {
        format!("reference gave {}", reference.outcome)
    })?;
    Ok("plain and deferred, then mangled after install; run gives 7".into())
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn main() {
    let corpus = corpus();
    let criteria: Vec<Criterion<'_>> = vec![
        ("golden suite", Box::new(golden_suite)),
        ("narrowing rejection", Box::new(narrowing)),
        ("differential fuzz equivalence", Box::new(|| fuzz(&corpus))),
        ("entry/symbol accounting", Box::new(accounting)),
        ("cache behaviour", Box::new(|| caches(&corpus))),
        ("probe histogram", Box::new(probes)),
        ("overhead bound", Box::new(overhead)),
        ("propagation check", Box::new(propagation)),
        ("deferred site", Box::new(deferred)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!(
        "{}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
