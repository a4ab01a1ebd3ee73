use rayon::prelude::*;
use serde::Serialize;

use crate::compiler::{compile_program, CompileError, CompileMode};
use crate::lang::{program_to_string, Program};
use crate::outcome::Evaluation;
use crate::reference::Reference;
use crate::runtime::{RunConfig, Runtime};

use super::generate::{generate_program, GenConfig};

/// Reference evaluation against the compiled runtime for one program. For
/// protected-free programs the baseline compilation is run as well.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiffResult {
    pub id: String,
    pub reference: Evaluation,
    pub runtime: Evaluation,
    pub baseline: Option<Evaluation>,
    /// Outcomes are equivalent up to the mangling prefix, across every
    /// evaluation that was run.
    pub agree: bool,
    pub steps_agree: bool,
    /// Protected-free programs only: baseline and mangled dictionaries are
    /// identical.
    pub dictionaries_agree: Option<bool>,
    pub shadow_mismatches: u64,
    pub detail: Option<String>,
}

impl DiffResult {
    /// Every check held.
    pub fn passed(&self) -> bool {
        self.agree
            && self.steps_agree
            && self.dictionaries_agree != Some(false)
            && self.shadow_mismatches == 0
    }
}

/// Runs `p` on the reference evaluator and on its mangled image with all
/// caches on and shadow lookups checked.
pub fn differential_run(
    id: impl Into<String>,
    p: &Program,
    fuel: u64,
) -> Result<DiffResult, CompileError> {
    let img = compile_program(p, CompileMode::Protected)?;
    let reference = Reference::new(p)
        .map_err(CompileError::Invalid)?
        .eval(fuel)
        .0;
    let mut rt = Runtime::new(&img, RunConfig::default().with_shadow_check());
    let runtime = rt.run(fuel);
    let shadow_mismatches = rt.stats().shadow_mismatches;

    let (baseline, dictionaries_agree) = if p.uses_protected() {
        (None, None)
    } else {
        let base = compile_program(p, CompileMode::Baseline)?;
        let ev = Runtime::new(&base, RunConfig::default()).run(fuel);
        (Some(ev), Some(base.layout() == img.layout()))
    };

    let all: Vec<&Evaluation> = [Some(&runtime), baseline.as_ref()]
        .into_iter()
        .flatten()
        .collect();
    let agree = all.iter().all(|e| e.outcome.equivalent(&reference.outcome));
    let steps_agree = all.iter().all(|e| e.steps == reference.steps);
    let mut problems = Vec::new();
    if !agree || !steps_agree {
        problems.push(format!(
            "reference {} in {} steps, runtime {} in {} steps",
            reference.outcome, reference.steps, runtime.outcome, runtime.steps
        ));
        if let Some(b) = &baseline {
            problems.push(format!("baseline {} in {} steps", b.outcome, b.steps));
        }
    }
    if dictionaries_agree == Some(false) {
        problems.push("baseline and mangled dictionaries differ".to_string());
    }
    if shadow_mismatches > 0 {
        problems.push(format!(
            "{shadow_mismatches} cached lookups disagreed with the slow path"
        ));
    }
    Ok(DiffResult {
        id: id.into(),
        reference,
        runtime,
        baseline,
        agree,
        steps_agree,
        dictionaries_agree,
        shadow_mismatches,
        detail: (!problems.is_empty()).then(|| problems.join("; ")),
    })
}

/// A generated program's differential result, with its source when it
/// failed.
#[derive(Debug, Clone, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub result: DiffResult,
    pub source: Option<String>,
}

/// Differential runs over generated programs, in parallel, ordered by seed.
pub fn diff_corpus(seeds: std::ops::Range<u64>, config: &GenConfig, fuel: u64) -> Vec<SeedResult> {
    seeds
        .into_par_iter()
        .map(|seed| {
            let p = generate_program(seed, config);
            let result = differential_run(format!("seed {seed}"), &p, fuel)
                .expect("generated programs are valid");
            let source = (!result.passed()).then(|| program_to_string(&p));
            SeedResult {
                seed,
                result,
                source,
            }
        })
        .collect()
}
