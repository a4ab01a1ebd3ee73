use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn programs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../programs")
}

fn protolite(args: &[&str], fuel_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_protolite"));
    cmd.args(args)
        .current_dir(programs())
        .env_remove("PROTOLITE_FUEL");
    if let Some(f) = fuel_env {
        cmd.env("PROTOLITE_FUEL", f);
    }
    cmd.output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn temp_program(name: &str, src: &str) -> PathBuf {
    let path =
        std::env::temp_dir().join(format!("protolite-cli-{}-{name}.stl", std::process::id()));
    std::fs::write(&path, src).unwrap();
    path
}

#[test]
fn exit_codes_follow_the_outcome() {
    let out = protolite(&["run", "appendixB_callProtected_B.stl"], None);
    assert_eq!(
        (out.status.code(), text(&out.stdout).trim()),
        (Some(0), "42")
    );
    let out = protolite(&["run", "appendixB_protectedMethod.stl"], None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(
        text(&out.stderr).trim(),
        "error: DoesNotUnderstand: A>>protectedMethod"
    );
    let out = protolite(&["run", "missing.stl"], None);
    assert_eq!(out.status.code(), Some(3));
    let bad = temp_program("syntax", "class A extends { }");
    let out = protolite(&["run", bad.to_str().unwrap()], None);
    std::fs::remove_file(bad).unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("syntax error"));
}

#[test]
fn fuel_comes_from_the_flag_then_the_environment() {
    let looping = temp_program(
        "loop",
        "class A extends Object { method m() { self.m() } } main { (new A).m() }",
    );
    let path = looping.to_str().unwrap();
    let out = protolite(&["run", "--json", path], Some("25"));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(v["outcome"]["outcome"], "fuel_exhausted");
    assert_eq!(v["steps"], 25);
    let out = protolite(&["run", "--json", "--fuel", "7", path], Some("25"));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["steps"], 7);
    let out = protolite(&["run", path], Some("lots"));
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_file(looping).unwrap();
}

#[test]
fn worst_case_and_no_protect_are_exclusive() {
    let out = protolite(
        &["run", "--worst-case", "--no-protect", "listing1.stl"],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("cannot be used with"));
}

#[test]
fn results_do_not_depend_on_cache_flags_or_mode() {
    for flags in [
        &[][..],
        &["--no-global-cache"],
        &["--no-inline-cache"],
        &["--no-global-cache", "--no-inline-cache"],
        &["--worst-case"],
    ] {
        let mut args = vec!["run"];
        args.extend_from_slice(flags);
        args.push("appendixB_sum.stl");
        let out = protolite(&args, None);
        assert_eq!(text(&out.stdout).trim(), "84", "{flags:?}");
    }
    // Without mangling protected methods are ordinary public ones.
    let out = protolite(&["run", "--no-protect", "appendixB_raiseError.stl"], None);
    assert_eq!(text(&out.stdout).trim(), "11");
}

#[test]
fn check_reports_rules_and_unreachable_hooks() {
    let out = protolite(&["check", "listing1.stl"], None);
    assert_eq!(
        (out.status.code(), text(&out.stdout)),
        (Some(0), "ok\n".to_string())
    );
    let out = protolite(&["check", "--json", "narrowing.stl"], None);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["violations"][0]["rule"], "OVERRIDINGPUBLICMETHOD");
    let hook = temp_program(
        "hook",
        "class T extends Object { method run() { self.step() } }
         class C extends T { protected method step() { 1 } }
         main { (new C).run() }",
    );
    let out = protolite(&["check", hook.to_str().unwrap()], None);
    std::fs::remove_file(hook).unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("warning: T>>run self-sends step"));
}

#[test]
fn desugar_shows_shared_and_mangled_entries() {
    let out = protolite(&["desugar", "listing1.stl"], None);
    let s = text(&out.stdout);
    assert!(s.contains("  __protectedMethod -> A>>protectedMethod protected\n"));
    assert!(s.contains("  callProtected -> A>>callProtected public [shared]\n"));
    assert!(s.contains("  __callProtected -> A>>callProtected public [shared]\n"));
    let out = protolite(&["desugar", "--no-protect", "listing1.stl"], None);
    assert!(!text(&out.stdout).contains("__"));
}

#[test]
fn diff_reports_agreement_for_files_and_seeds() {
    let out = protolite(&["diff", "propagation.stl"], None);
    assert_eq!(text(&out.stdout), "1/1 agree\n");
    let out = protolite(&["diff", "--seeds", "10..19", "--protected-free"], None);
    assert_eq!(text(&out.stdout), "10/10 agree\n");
    let out = protolite(&["diff", "--seeds", "5..2"], None);
    assert_eq!(out.status.code(), Some(2));
    let out = protolite(&["diff", "--seed", "3", "--json"], None);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["seed"], 3);
    assert_eq!(v[0]["result"]["agree"], true);
}

#[test]
fn stats_prints_probe_shares_memory_and_ratios() {
    let out = protolite(&["stats", "--json", "listing1.stl"], None);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["memory"]["per_class"]["A"], 4);
    assert_eq!(v["memory"]["per_class"]["B"], 7);
    assert_eq!(v["evaluation"]["outcome"]["detail"]["value"], 84);
    let shares: f64 = ["probe1", "probe2", "probe3", "misses"]
        .iter()
        .map(|k| v["percentages"][k].as_f64().unwrap())
        .sum();
    assert!((shares - 100.0).abs() < 1e-9);
    assert!(v["worstCase"]["symbols"].as_f64().unwrap() >= 1.0);
}

#[test]
fn bench_reports_medians_and_overhead() {
    let out = protolite(
        &[
            "bench",
            "--invocations",
            "2",
            "--iterations",
            "4",
            "--warmup",
            "1",
            "--replicate",
            "5",
            "--json",
            "appendixB_sum.stl",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["report"]["times_ms"].as_array().unwrap().len(), 2);
    assert!(v["report"]["relative_overhead"].is_f64());
    assert!(v["baseline"]["median_ms"].is_f64());
    let out = protolite(
        &[
            "bench",
            "--iterations",
            "5",
            "--warmup",
            "5",
            "appendixB_sum.stl",
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(2));
    let out = protolite(&["bench", "appendixB_raiseError.stl"], None);
    assert_eq!(out.status.code(), Some(1));
}
