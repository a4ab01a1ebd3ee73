//! Well-formedness predicates for programs, including the visibility
//! overriding rules that forbid narrowing a public method to protected.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::ast::{Program, Visibility, OBJECT};
use super::hierarchy::Hierarchy;

/// Predicates in the order they are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Rule {
    ClassesOnce,
    FieldOncePerClass,
    FieldsUniquelyDefined,
    MethodOncePerClass,
    CompleteClasses,
    WellFoundedClasses,
    ClassMethodsOk,
    OverridingPublicMethod,
    OverridingProtectedMethod,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::ClassesOnce => "CLASSESONCE",
            Rule::FieldOncePerClass => "FIELDONCEPERCLASS",
            Rule::FieldsUniquelyDefined => "FIELDSUNIQUELYDEFINED",
            Rule::MethodOncePerClass => "METHODONCEPERCLASS",
            Rule::CompleteClasses => "COMPLETECLASSES",
            Rule::WellFoundedClasses => "WELLFOUNDEDCLASSES",
            Rule::ClassMethodsOk => "CLASSMETHODSOK",
            Rule::OverridingPublicMethod => "OVERRIDINGPUBLICMETHOD",
            Rule::OverridingProtectedMethod => "OVERRIDINGPROTECTEDMETHOD",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub rule: Rule,
    pub class: String,
    pub member: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.member {
            Some(m) => write!(
                f,
                "{} in {}>>{}: {}",
                self.rule, self.class, m, self.message
            ),
            None => write!(f, "{} in {}: {}", self.rule, self.class, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, rule: Rule, class: &str, member: Option<&str>, message: String) {
        self.0.push(Violation {
            rule,
            class: class.to_string(),
            member: member.map(str::to_string),
            message,
        });
    }
}

/// Checks every predicate and returns all violations, sorted by rule, then
/// class, then member.
pub fn validate(p: &Program) -> ValidationReport {
    let h = Hierarchy::new(p);
    let mut out = Collector(Vec::new());

    for (i, c) in p.classes.iter().enumerate() {
        if c.name == OBJECT {
            out.push(
                Rule::ClassesOnce,
                &c.name,
                None,
                "Object is built in and cannot be redefined".into(),
            );
        }
        for d in &p.classes[i + 1..] {
            if d.name == c.name {
                out.push(
                    Rule::ClassesOnce,
                    &c.name,
                    None,
                    format!("class declared twice (at {} and {})", c.pos, d.pos),
                );
            }
        }
    }

    for c in &p.classes {
        let mut seen = HashSet::new();
        for f in &c.fields {
            if !seen.insert(f) {
                out.push(
                    Rule::FieldOncePerClass,
                    &c.name,
                    Some(f),
                    "field declared twice".into(),
                );
            }
        }
    }

    for c in &p.classes {
        for f in &c.fields {
            for ancestor in h.chain(&c.name).into_iter().flatten().skip(1) {
                let declares = h
                    .class(ancestor)
                    .ok()
                    .flatten()
                    .is_some_and(|a| a.fields.contains(f));
                if declares {
                    out.push(
                        Rule::FieldsUniquelyDefined,
                        &c.name,
                        Some(f),
                        format!("field already defined in ancestor {ancestor}"),
                    );
                }
            }
        }
    }

    for c in &p.classes {
        let mut seen = HashSet::new();
        for m in c.methods() {
            if !seen.insert(&m.selector) {
                out.push(
                    Rule::MethodOncePerClass,
                    &c.name,
                    Some(&m.selector),
                    "method defined twice in the same class".into(),
                );
            }
        }
    }

    for c in &p.classes {
        if c.superclass != OBJECT && !p.classes.iter().any(|d| d.name == c.superclass) {
            out.push(
                Rule::CompleteClasses,
                &c.name,
                None,
                format!("superclass {} is not defined", c.superclass),
            );
        }
    }

    for c in &p.classes {
        let mut cur = c.superclass.as_str();
        let mut seen = HashSet::new();
        while let Some(d) = p.classes.iter().find(|d| d.name == cur) {
            if d.name == c.name {
                out.push(
                    Rule::WellFoundedClasses,
                    &c.name,
                    None,
                    "class inherits from itself".into(),
                );
                break;
            }
            if !seen.insert(cur) {
                break;
            }
            cur = &d.superclass;
        }
    }

    for c in &p.classes {
        for m in c.methods() {
            let ancestors = h.chain(&c.name).into_iter().flatten().skip(1);
            let overridden: Vec<_> = ancestors
                .filter_map(|a| h.class(a).ok().flatten())
                .filter_map(|a| a.method(&m.selector).map(|om| (a, om)))
                .collect();
            if let Some((a, om)) = overridden.iter().find(|(_, om)| om.arity() != m.arity()) {
                out.push(
                    Rule::ClassMethodsOk,
                    &c.name,
                    Some(&m.selector),
                    format!(
                        "arity {} differs from {}>>{} with arity {}",
                        m.arity(),
                        a.name,
                        om.selector,
                        om.arity()
                    ),
                );
            }
            if let Some((a, _)) = overridden
                .iter()
                .find(|(_, om)| om.visibility == Visibility::Public)
            {
                if m.visibility != Visibility::Public {
                    out.push(
                        Rule::OverridingPublicMethod,
                        &c.name,
                        Some(&m.selector),
                        format!(
                            "protected method overrides public {}>>{}",
                            a.name, m.selector
                        ),
                    );
                }
            }
            for (a, om) in &overridden {
                let allowed = match (om.visibility, m.visibility) {
                    (Visibility::Protected, Visibility::Public | Visibility::Protected) => true,
                    (Visibility::Public, _) => true,
                };
                if !allowed {
                    out.push(
                        Rule::OverridingProtectedMethod,
                        &c.name,
                        Some(&m.selector),
                        format!("invalid override of protected {}>>{}", a.name, om.selector),
                    );
                }
            }
        }
    }

    let mut violations = out.0;
    violations.sort();
    ValidationReport { violations }
}
