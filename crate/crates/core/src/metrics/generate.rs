use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::compiler::rewrite_scope;
use crate::lang::{ClassDef, Expr, Hierarchy, MethodDef, Program, Visibility, OBJECT};

/// Size and shape limits for generated programs.
#[derive(Debug, Clone, Serialize)]
pub struct GenConfig {
    pub max_classes: usize,
    pub max_methods: usize,
    pub max_depth: usize,
    pub max_fields: usize,
    /// Size of the selector pool shared by all classes.
    pub selectors: usize,
    /// Nesting depth of generated method bodies.
    pub body_depth: usize,
    /// Probability that a method is protected, where that is allowed.
    pub protected: f64,
    /// Probability that a program may recurse without bound.
    pub unranked: f64,
    /// Probability that a send picks its selector blindly instead of from
    /// those the receiver understands.
    pub blind: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_classes: 8,
            max_methods: 6,
            max_depth: 5,
            max_fields: 2,
            selectors: 10,
            body_depth: 3,
            protected: 0.35,
            unranked: 0.1,
            blind: 0.03,
        }
    }
}

impl GenConfig {
    pub fn protected_free() -> Self {
        GenConfig {
            protected: 0.0,
            ..Self::default()
        }
    }
}

/// Selectors each class can be sent, by kind of send.
#[derive(Default)]
struct Targets {
    object: Vec<usize>,
    self_send: Vec<usize>,
    super_send: Vec<usize>,
    /// Selectors a self-send may use at all.
    self_allowed: Vec<usize>,
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    cfg: &'a GenConfig,
    arity: Vec<usize>,
    classes: Vec<ClassDef>,
    targets: Vec<Targets>,
    ranked: bool,
    fresh: usize,
}

/// Context of the body being generated.
struct Scope {
    class: Option<usize>,
    fields: Vec<String>,
    vars: Vec<String>,
    /// Sends may only use selectors below this index in ranked programs.
    rank: usize,
}

fn selector(s: usize) -> String {
    format!("m{s}")
}

/// Builds a valid program from `seed`. Ranked programs (most of them) only
/// send selectors of lower index than the enclosing method's, so they
/// terminate. No class outside the rewrite scope self-sends a selector that
/// only descendants define, as protected.
pub fn generate_program(seed: u64, cfg: &GenConfig) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ranked = !rng.gen_bool(cfg.unranked);
    let arity = (0..cfg.selectors).map(|_| rng.gen_range(0..=2)).collect();
    let mut g = Gen {
        rng,
        cfg,
        arity,
        classes: Vec::new(),
        targets: Vec::new(),
        ranked,
        fresh: 0,
    };
    g.skeleton();
    g.index_targets();
    for i in 0..g.classes.len() {
        g.fill_bodies(i);
    }
    let main = g.main();
    Program::new(g.classes, main)
}

impl Gen<'_> {
    /// Classes, fields and method signatures with placeholder bodies.
    fn skeleton(&mut self) {
        let n = self.rng.gen_range(1..=self.cfg.max_classes);
        let mut depth: Vec<usize> = Vec::new();
        let mut field_count = 0;
        for i in 0..n {
            let parents: Vec<usize> = (0..i).filter(|&p| depth[p] < self.cfg.max_depth).collect();
            let parent = if parents.is_empty() || self.rng.gen_bool(0.3) {
                None
            } else {
                parents.choose(&mut self.rng).copied()
            };
            let mut class = ClassDef::new(
                format!("K{i}"),
                parent.map_or(OBJECT.to_string(), |p| self.classes[p].name.clone()),
            );
            for _ in 0..self.rng.gen_range(0..=self.cfg.max_fields) {
                class.fields.push(format!("f{field_count}"));
                field_count += 1;
            }
            depth.push(parent.map_or(1, |p| depth[p] + 1));

            let count = self
                .rng
                .gen_range(0..=self.cfg.max_methods.min(self.cfg.selectors));
            let mut pool: Vec<usize> = (0..self.cfg.selectors).collect();
            pool.shuffle(&mut self.rng);
            pool.truncate(count);
            pool.sort();
            for s in pool {
                let name = selector(s);
                let public_above = self.ancestors(&class).iter().any(|&a| {
                    self.classes[a]
                        .public_methods
                        .iter()
                        .any(|m| m.selector == name)
                });
                let visibility = if !public_above && self.rng.gen_bool(self.cfg.protected) {
                    Visibility::Protected
                } else {
                    Visibility::Public
                };
                let params: Vec<String> = (0..self.arity[s]).map(|k| format!("p{k}")).collect();
                let params: Vec<&str> = params.iter().map(String::as_str).collect();
                class.add_method(MethodDef::new(visibility, name, &params, Expr::Nil));
            }
            self.classes.push(class);
        }
    }

    fn ancestors(&self, class: &ClassDef) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = &class.superclass;
        while let Some(p) = self.classes.iter().position(|c| &c.name == cur) {
            out.push(p);
            cur = &self.classes[p].superclass;
        }
        out
    }

    fn index_targets(&mut self) {
        let skeleton = Program::new(self.classes.clone(), Expr::Nil);
        let h = Hierarchy::new(&skeleton);
        let scope = rewrite_scope(&skeleton);
        for c in &self.classes {
            let descendants = h.descendants(&c.name).unwrap_or_default();
            let protected_below = |s: &str| {
                descendants
                    .iter()
                    .any(|d| matches!(h.defines_protected(d, s), Ok(true)))
            };
            let mut t = Targets::default();
            for s in 0..self.cfg.selectors {
                let name = selector(s);
                let on_chain = matches!(h.lookup(&c.name, &name), Ok(Some(_)));
                if matches!(h.lookup_public(&c.name, &name), Ok(Some(_))) {
                    t.object.push(s);
                }
                if matches!(h.lookup(&c.superclass, &name), Ok(Some(_))) {
                    t.super_send.push(s);
                }
                let hidden = !on_chain && !scope.contains(&c.name) && protected_below(&name);
                if hidden {
                    continue;
                }
                t.self_allowed.push(s);
                if on_chain {
                    t.self_send.push(s);
                }
            }
            self.targets.push(t);
        }
    }

    fn fill_bodies(&mut self, i: usize) {
        let mut fields = self.classes[i].fields.clone();
        for a in self.ancestors(&self.classes[i]) {
            fields.extend(self.classes[a].fields.iter().cloned());
        }
        let sigs: Vec<(String, Vec<String>)> = self.classes[i]
            .methods()
            .map(|m| (m.selector.clone(), m.params.clone()))
            .collect();
        for (name, params) in sigs {
            let s: usize = name[1..].parse().expect("generated selector");
            let mut scope = Scope {
                class: Some(i),
                fields: fields.clone(),
                vars: params,
                rank: if self.ranked { s } else { self.cfg.selectors },
            };
            let body = self.expr(&mut scope, self.cfg.body_depth);
            let class = &mut self.classes[i];
            let m = class
                .public_methods
                .iter_mut()
                .chain(class.protected_methods.iter_mut())
                .find(|m| m.selector == name)
                .expect("signature exists");
            m.body = body;
        }
    }

    fn main(&mut self) -> Expr {
        let mut scope = Scope {
            class: None,
            fields: Vec::new(),
            vars: Vec::new(),
            rank: self.cfg.selectors,
        };
        let mut e = self.object_send_to_new(&mut scope, 1);
        for _ in 0..self.rng.gen_range(0..3) {
            let next = self.object_send_to_new(&mut scope, 1);
            e = Expr::plus(e, next);
        }
        e
    }

    /// Picks a selector below the scope's rank, preferring `preferred`.
    fn pick(
        &mut self,
        scope: &Scope,
        preferred: &[usize],
        allowed: Option<&[usize]>,
    ) -> Option<usize> {
        let ok: Vec<usize> = preferred
            .iter()
            .copied()
            .filter(|&s| s < scope.rank)
            .collect();
        if !self.rng.gen_bool(self.cfg.blind) {
            return ok.choose(&mut self.rng).copied();
        }
        let any: Vec<usize> = (0..scope.rank)
            .filter(|s| allowed.is_none_or(|a| a.contains(s)))
            .collect();
        any.choose(&mut self.rng).copied()
    }

    fn args(&mut self, scope: &mut Scope, s: usize, depth: usize) -> Vec<Expr> {
        let mut arity = self.arity[s];
        if self.rng.gen_bool(0.02) {
            arity += 1;
        }
        (0..arity).map(|_| self.expr(scope, depth)).collect()
    }

    fn object_send_to_new(&mut self, scope: &mut Scope, depth: usize) -> Expr {
        let understood: Vec<usize> = (0..self.classes.len())
            .filter(|&c| self.targets[c].object.iter().any(|&s| s < scope.rank))
            .collect();
        let c = match understood.choose(&mut self.rng) {
            Some(&c) => c,
            None => self.rng.gen_range(0..self.classes.len()),
        };
        let preferred = self.targets[c].object.clone();
        match self.pick(scope, &preferred, None) {
            Some(s) => {
                let args = self.args(scope, s, depth);
                Expr::send(Expr::New(self.classes[c].name.clone()), selector(s), args)
            }
            None => Expr::New(self.classes[c].name.clone()),
        }
    }

    fn leaf(&mut self, scope: &Scope) -> Expr {
        loop {
            match self.rng.gen_range(0..8) {
                0..=2 => return Expr::Int(self.rng.gen_range(-3..10)),
                3 if !scope.vars.is_empty() => {
                    return Expr::Var(scope.vars.choose(&mut self.rng).unwrap().clone())
                }
                4 if !scope.fields.is_empty() => {
                    return Expr::FieldGet(scope.fields.choose(&mut self.rng).unwrap().clone())
                }
                5 if scope.class.is_some() => return Expr::SelfRef,
                6 => {
                    let c = self.classes.choose(&mut self.rng).unwrap().name.clone();
                    return Expr::New(c);
                }
                7 if self.rng.gen_bool(0.1) => return Expr::Nil,
                _ => {}
            }
        }
    }

    fn expr(&mut self, scope: &mut Scope, depth: usize) -> Expr {
        if depth == 0 || self.rng.gen_bool(0.25) {
            return self.leaf(scope);
        }
        let class = scope.class;
        match (self.rng.gen_range(0..10), class) {
            (0, _) => {
                let a = self.expr(scope, depth - 1);
                let b = self.expr(scope, depth - 1);
                Expr::plus(a, b)
            }
            (1, _) if !scope.fields.is_empty() => {
                let f = scope.fields.choose(&mut self.rng).unwrap().clone();
                Expr::field_set(f, self.expr(scope, depth - 1))
            }
            (2, _) => {
                let bound = if class.is_some() && self.rng.gen_bool(0.3) {
                    Expr::SelfRef
                } else {
                    self.expr(scope, depth - 1)
                };
                let var = format!("v{}", self.fresh);
                self.fresh += 1;
                scope.vars.push(var.clone());
                let body = self.expr(scope, depth - 1);
                scope.vars.pop();
                Expr::let_in(var, bound, body)
            }
            (3..=5, Some(c)) => {
                let preferred = self.targets[c].self_send.clone();
                let allowed = self.targets[c].self_allowed.clone();
                match self.pick(scope, &preferred, Some(&allowed)) {
                    Some(s) => {
                        let args = self.args(scope, s, depth - 1);
                        Expr::self_send(selector(s), args)
                    }
                    None => self.leaf(scope),
                }
            }
            (6, Some(_)) if self.rng.gen_bool(0.05) => {
                Expr::self_send(format!("u{}", self.rng.gen_range(0..3)), Vec::new())
            }
            (6, Some(c)) => {
                let preferred = self.targets[c].super_send.clone();
                match self.pick(scope, &preferred, None) {
                    Some(s) => {
                        let args = self.args(scope, s, depth - 1);
                        Expr::super_send(selector(s), args)
                    }
                    None => self.leaf(scope),
                }
            }
            (7..=8, _) => self.object_send_to_new(scope, depth - 1),
            (9, _) if self.rng.gen_bool(0.3) => {
                let receiver = self.receiver(scope);
                match self.pick(scope, &[], None) {
                    Some(s) => {
                        let args = self.args(scope, s, depth - 1);
                        Expr::send(receiver, selector(s), args)
                    }
                    None => self.leaf(scope),
                }
            }
            _ => self.leaf(scope),
        }
    }

    fn receiver(&mut self, scope: &Scope) -> Expr {
        match self.rng.gen_range(0..3) {
            0 if !scope.vars.is_empty() => {
                Expr::Var(scope.vars.choose(&mut self.rng).unwrap().clone())
            }
            1 if !scope.fields.is_empty() => {
                Expr::FieldGet(scope.fields.choose(&mut self.rng).unwrap().clone())
            }
            _ => Expr::New(self.classes.choose(&mut self.rng).unwrap().name.clone()),
        }
    }
}
