use std::collections::BTreeSet;

use proptest::prelude::*;
use protolite::compiler::{compile_program, install_method, rewrite_scope, CompileMode};
use protolite::lang::{parse, program_to_string, validate, Hierarchy, Program, Visibility};
use protolite::metrics::{generate_program, measure_image, GenConfig};
use protolite::runtime::{default_lookup, run_image, RunConfig};

const FUEL: u64 = 3_000;

fn program() -> impl Strategy<Value = Program> {
    (any::<u64>(), any::<bool>()).prop_map(|(seed, protected)| {
        let cfg = if protected {
            GenConfig::default()
        } else {
            GenConfig::protected_free()
        };
        generate_program(seed, &cfg)
    })
}

/// Flips the visibility of one method, which may break the narrowing rule.
fn flip_one(p: &Program, pick: usize) -> Program {
    let mut q = p.clone();
    let all: Vec<(usize, String)> = q
        .classes
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.methods().map(move |m| (i, m.selector.clone())))
        .collect();
    if all.is_empty() {
        return q;
    }
    let (i, sel) = &all[pick % all.len()];
    let class = &mut q.classes[*i];
    let mut m = class.method(sel).unwrap().clone();
    class.public_methods.retain(|x| &x.selector != sel);
    class.protected_methods.retain(|x| &x.selector != sel);
    m.visibility = match m.visibility {
        Visibility::Public => Visibility::Protected,
        Visibility::Protected => Visibility::Public,
    };
    class.add_method(m);
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn printing_then_parsing_round_trips(p in program()) {
        let text = program_to_string(&p);
        prop_assert_eq!(parse(&text).unwrap().without_positions(), p);
    }

    #[test]
    fn validation_ignores_class_order(p in program(), pick in any::<usize>(), rot in any::<usize>()) {
        let q = flip_one(&p, pick);
        let mut r = q.clone();
        r.classes.reverse();
        let n = r.classes.len();
        r.classes.rotate_left(rot % n);
        prop_assert_eq!(validate(&q), validate(&r));
    }

    #[test]
    fn image_lookup_agrees_with_source_lookup(p in program()) {
        let img = compile_program(&p, CompileMode::Protected).unwrap();
        let h = Hierarchy::new(&p);
        let scope = rewrite_scope(&p);
        let selectors: BTreeSet<&str> = p
            .classes
            .iter()
            .flat_map(|c| c.methods().map(|m| m.selector.as_str()))
            .collect();
        for c in &p.classes {
            let id = img.class_id(&c.name).unwrap();
            for &sel in &selectors {
                let public = h.lookup_public(&c.name, sel).unwrap().map(|(k, _)| k.to_string());
                let plain = img
                    .symbol(sel)
                    .and_then(|s| default_lookup(&img, id, s))
                    .map(|m| m.origin.clone());
                prop_assert_eq!(plain, public);

                let closest = h
                    .lookup(&c.name, sel)
                    .unwrap()
                    .map(|(k, _)| k.to_string())
                    .filter(|k| scope.contains(k));
                let mangled = img
                    .symbol(&format!("__{sel}"))
                    .and_then(|s| default_lookup(&img, id, s))
                    .map(|m| m.origin.clone());
                prop_assert_eq!(mangled, closest);
            }
        }
    }

    #[test]
    fn entries_and_symbols_follow_the_counting_laws(p in program()) {
        let scope = rewrite_scope(&p);
        let report = measure_image(&compile_program(&p, CompileMode::Protected).unwrap());
        let mut mangled = BTreeSet::new();
        for c in &p.classes {
            let expected = if scope.contains(&c.name) {
                mangled.extend(c.methods().map(|m| m.selector.as_str()));
                2 * c.public_methods.len() + c.protected_methods.len()
            } else {
                c.public_methods.len()
            };
            prop_assert_eq!(report.per_class[&c.name], expected);
        }
        prop_assert_eq!(report.mangled_symbols, mangled.len());
        prop_assert_eq!(report.compiled_methods, p.method_count());
    }

    #[test]
    fn installing_a_method_converges_with_whole_program_compilation(
        p in program(),
        pick in any::<usize>(),
    ) {
        let all: Vec<(String, String)> = p
            .classes
            .iter()
            .flat_map(|c| c.methods().map(|m| (c.name.clone(), m.selector.clone())))
            .collect();
        prop_assume!(!all.is_empty());
        let (class, sel) = &all[pick % all.len()];
        let m = p.class(class).unwrap().method(sel).unwrap().clone();
        let mut without = p.clone();
        let c = without.class_mut(class).unwrap();
        c.public_methods.retain(|x| &x.selector != sel);
        c.protected_methods.retain(|x| &x.selector != sel);
        let before = compile_program(&without, CompileMode::Protected).unwrap();
        let after = install_method(&before, class, m).unwrap();
        let whole = compile_program(&p, CompileMode::Protected).unwrap();
        prop_assert_eq!(after.layout(), whole.layout());
        prop_assert_eq!(
            run_image(&after, RunConfig::default(), FUEL).0,
            run_image(&whole, RunConfig::default(), FUEL).0
        );
    }

    #[test]
    fn caches_are_transparent(p in program()) {
        let img = compile_program(&p, CompileMode::Protected).unwrap();
        let (expected, _) = run_image(&img, RunConfig::new(false, false), FUEL);
        for config in RunConfig::all() {
            let (ev, stats) = run_image(&img, config.with_shadow_check(), FUEL);
            prop_assert_eq!(&ev, &expected);
            prop_assert_eq!(stats.shadow_mismatches, 0);
        }
    }

    #[test]
    fn compile_modes_agree_on_protected_free_programs(seed in any::<u64>()) {
        let p = generate_program(seed, &GenConfig::protected_free());
        let runs: Vec<_> = [CompileMode::Baseline, CompileMode::Protected, CompileMode::WorstCase]
            .into_iter()
            .map(|mode| run_image(&compile_program(&p, mode).unwrap(), RunConfig::default(), FUEL))
            .collect();
        prop_assert_eq!(&runs[0].0, &runs[1].0);
        prop_assert!(runs[0].0.outcome.equivalent(&runs[2].0.outcome));
        prop_assert_eq!(runs[0].0.steps, runs[2].0.steps);
        prop_assert!(runs[2].1.distinct_keys <= 2 * runs[0].1.distinct_keys);
    }
}
