use std::collections::HashSet;

use serde::Serialize;

use crate::compiler::{ClassId, Code, CompiledMethod, RuntimeImage, SendKind, SendSite, SymbolId};
use crate::lang::{OBJECT, PLUS};
use crate::outcome::{Evaluation, Outcome, RuntimeError, Value, INTEGER_CLASS};

use super::cache::{CacheStats, GlobalCache, IcHistogram, InlineCache};

/// Walks the superclass chain from `class` and returns the first method
/// registered under `symbol`. Visibility plays no part: it is encoded in
/// which symbols each dictionary holds.
pub fn default_lookup(
    img: &RuntimeImage,
    class: ClassId,
    symbol: SymbolId,
) -> Option<&CompiledMethod> {
    let mut cur = Some(class);
    while let Some(c) = cur {
        let class = img.class(c);
        if let Some(m) = class.dictionary.get(symbol) {
            return Some(m);
        }
        cur = class.superclass;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RunConfig {
    pub global_cache: bool,
    pub inline_cache: bool,
    /// Compare every cached answer with an uncached lookup.
    pub shadow_check: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            global_cache: true,
            inline_cache: true,
            shadow_check: false,
        }
    }
}

impl RunConfig {
    pub fn new(global_cache: bool, inline_cache: bool) -> Self {
        RunConfig {
            global_cache,
            inline_cache,
            shadow_check: false,
        }
    }

    /// The four cache configurations, all caches first.
    pub fn all() -> [RunConfig; 4] {
        [(true, true), (true, false), (false, true), (false, false)]
            .map(|(g, i)| RunConfig::new(g, i))
    }

    pub fn with_shadow_check(mut self) -> Self {
        self.shadow_check = true;
        self
    }
}

enum Stop {
    Fuel,
    Error(RuntimeError),
}

impl From<RuntimeError> for Stop {
    fn from(e: RuntimeError) -> Self {
        Stop::Error(e)
    }
}

#[derive(Debug, Clone)]
struct Object {
    class: ClassId,
    fields: Vec<Value>,
}

#[derive(Clone, Copy)]
struct Frame {
    receiver: Value,
    base: usize,
}

/// Interpreter for one image. Caches and statistics persist across runs of
/// the same instance; the heap does not.
pub struct Runtime<'i> {
    image: &'i RuntimeImage,
    config: RunConfig,
    global: GlobalCache<'i>,
    inline: Vec<InlineCache<'i>>,
    stats: CacheStats,
    keys: HashSet<(ClassId, SymbolId)>,
    heap: Vec<Object>,
    stack: Vec<Value>,
    steps: u64,
    fuel: u64,
}

impl<'i> Runtime<'i> {
    pub fn new(image: &'i RuntimeImage, config: RunConfig) -> Self {
        Runtime {
            image,
            config,
            global: GlobalCache::default(),
            inline: vec![InlineCache::Empty; image.site_count()],
            stats: CacheStats::default(),
            keys: HashSet::new(),
            heap: Vec::new(),
            stack: Vec::new(),
            steps: 0,
            fuel: 0,
        }
    }

    pub fn image(&self) -> &'i RuntimeImage {
        self.image
    }

    pub fn config(&self) -> RunConfig {
        self.config
    }

    /// Evaluates the main expression with at most `fuel` reduction steps.
    /// Steps are counted exactly as the reference evaluator counts them.
    pub fn run(&mut self, fuel: u64) -> Evaluation {
        self.heap.clear();
        self.stack.clear();
        self.steps = 0;
        self.fuel = fuel;
        let main = self.image.main();
        if let Some(field) = &main.unknown_field {
            let e = RuntimeError::UnknownField {
                class: OBJECT.to_string(),
                field: field.clone(),
            };
            return Evaluation {
                outcome: Outcome::RuntimeError(e),
                steps: 0,
            };
        }
        self.stack.resize(main.frame_size, Value::Nil);
        let frame = Frame {
            receiver: Value::Nil,
            base: 0,
        };
        let outcome = match self.eval(&main.body, frame) {
            Ok(v) => Outcome::Value(v),
            Err(Stop::Fuel) => Outcome::FuelExhausted,
            Err(Stop::Error(e)) => Outcome::RuntimeError(e),
        };
        self.stack.clear();
        Evaluation {
            outcome,
            steps: self.steps,
        }
    }

    pub fn stats(&self) -> CacheStats {
        let mut ic = IcHistogram::default();
        for c in &self.inline {
            match c {
                InlineCache::Empty => {}
                InlineCache::Monomorphic(..) => ic.mono += 1,
                InlineCache::Polymorphic(_) => ic.poly += 1,
                InlineCache::Megamorphic => ic.mega += 1,
            }
        }
        CacheStats {
            distinct_keys: self.keys.len() as u64,
            ic,
            ..self.stats.clone()
        }
    }

    /// Zeroes the counters and the observed key set but keeps cache
    /// contents, so a warmed-up runtime can be measured.
    pub fn reset_stats(&mut self) {
        self.stats = CacheStats::default();
        self.keys.clear();
    }

    /// Empties both cache levels.
    pub fn flush(&mut self) {
        self.global.flush();
        self.inline.iter_mut().for_each(|c| *c = InlineCache::Empty);
    }

    pub fn global_cache(&self) -> &GlobalCache<'i> {
        &self.global
    }

    fn tick(&self) -> Result<(), Stop> {
        if self.steps >= self.fuel {
            Err(Stop::Fuel)
        } else {
            Ok(())
        }
    }

    fn eval(&mut self, code: &'i Code, fr: Frame) -> Result<Value, Stop> {
        match code {
            Code::Const(v) => Ok(*v),
            Code::SelfRef => Ok(fr.receiver),
            Code::Local { slot, .. } => Ok(self.stack[fr.base + slot]),
            Code::FreeVar(name) => {
                self.tick()?;
                Err(RuntimeError::UnknownVariable { name: name.clone() }.into())
            }
            Code::New { class, .. } => {
                self.tick()?;
                let fields = vec![Value::Nil; self.image.class(*class).layout.len()];
                self.heap.push(Object {
                    class: *class,
                    fields,
                });
                self.steps += 1;
                Ok(Value::Oid((self.heap.len() - 1) as u32))
            }
            Code::NewUnknown(name) => {
                self.tick()?;
                Err(RuntimeError::UnknownClass {
                    class: name.clone(),
                }
                .into())
            }
            Code::GetField { slot, .. } => {
                self.tick()?;
                let v = self.object(fr.receiver).fields[*slot];
                self.steps += 1;
                Ok(v)
            }
            Code::SetField { slot, value, .. } => {
                let v = self.eval(value, fr)?;
                self.tick()?;
                let Value::Oid(o) = fr.receiver else {
                    unreachable!("fields are only reachable from methods")
                };
                self.heap[o as usize].fields[*slot] = v;
                self.steps += 1;
                Ok(v)
            }
            Code::UnknownField(field) => {
                self.tick()?;
                let class = match fr.receiver {
                    Value::Oid(_) => self.class_name(fr.receiver).to_string(),
                    _ => OBJECT.to_string(),
                };
                Err(RuntimeError::UnknownField {
                    class,
                    field: field.clone(),
                }
                .into())
            }
            Code::Let {
                slot, bound, body, ..
            } => {
                let v = self.eval(bound, fr)?;
                self.tick()?;
                self.stack[fr.base + slot] = v;
                self.steps += 1;
                stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.eval(body, fr))
            }
            Code::Send(site) => self.send(site, fr),
        }
    }

    fn object(&self, v: Value) -> &Object {
        match v {
            Value::Oid(o) => &self.heap[o as usize],
            _ => unreachable!("receiver is an object"),
        }
    }

    fn class_name(&self, v: Value) -> &'i str {
        &self.image.class(self.object(v).class).name
    }

    fn send(&mut self, site: &'i SendSite, fr: Frame) -> Result<Value, Stop> {
        let recv = match &site.receiver {
            Some(r) => self.eval(r, fr)?,
            None => fr.receiver,
        };
        let base = self.stack.len();
        for a in &site.args {
            let v = self.eval(a, fr)?;
            self.stack.push(v);
        }
        self.tick()?;
        let class = match recv {
            Value::Nil => {
                return Err(RuntimeError::NilReceiver {
                    selector: site.selector_text.clone(),
                }
                .into())
            }
            Value::Int(a) if site.selector_text == PLUS => {
                let result = match &self.stack[base..] {
                    [Value::Int(b)] => a.wrapping_add(*b),
                    _ => {
                        return Err(RuntimeError::PrimitiveFailed {
                            selector: site.selector_text.clone(),
                        }
                        .into())
                    }
                };
                self.stack.truncate(base);
                self.steps += 1;
                return Ok(Value::Int(result));
            }
            Value::Int(_) => {
                return Err(RuntimeError::DoesNotUnderstand {
                    class: INTEGER_CLASS.to_string(),
                    selector: site.selector_text.clone(),
                }
                .into())
            }
            Value::Oid(o) => self.heap[o as usize].class,
        };
        let start = match site.kind {
            SendKind::Super => site.start.expect("super-sends have a start class"),
            _ => class,
        };
        let Some(method) = self.lookup(site, start) else {
            return Err(RuntimeError::DoesNotUnderstand {
                class: self.image.class(class).name.clone(),
                selector: site.selector_text.clone(),
            }
            .into());
        };
        let got = self.stack.len() - base;
        if method.arity() != got {
            return Err(RuntimeError::ArityMismatch {
                class: method.origin.clone(),
                selector: site.selector_text.clone(),
                expected: method.arity(),
                got,
            }
            .into());
        }
        if let Some(field) = &method.unknown_field {
            return Err(RuntimeError::UnknownField {
                class: method.origin.clone(),
                field: field.clone(),
            }
            .into());
        }
        self.steps += 1;
        self.stack.resize(base + method.frame_size, Value::Nil);
        let frame = Frame {
            receiver: recv,
            base,
        };
        let v = stacker::maybe_grow(256 * 1024, 16 * 1024 * 1024, || {
            self.eval(&method.body, frame)
        })?;
        self.stack.truncate(base);
        Ok(v)
    }

    fn lookup(&mut self, site: &'i SendSite, class: ClassId) -> Option<&'i CompiledMethod> {
        let symbol = site.symbol;
        self.stats.lookups += 1;
        self.keys.insert((class, symbol));
        let ic = &mut self.inline[site.id.0 as usize];
        let cached = if self.config.inline_cache {
            ic.find(class)
        } else {
            None
        };
        let found = match cached {
            Some(m) => {
                self.stats.ic_hits += 1;
                Some(m)
            }
            None => {
                let found = if self.config.global_cache {
                    self.global_lookup(class, symbol)
                } else {
                    default_lookup(self.image, class, symbol)
                };
                if let Some(m) = found {
                    if self.config.inline_cache && self.inline[site.id.0 as usize].record(class, m)
                    {
                        self.stats.ic_fills += 1;
                    }
                }
                found
            }
        };
        if self.config.shadow_check {
            let truth = default_lookup(self.image, class, symbol);
            let same = match (found, truth) {
                (Some(a), Some(b)) => std::ptr::eq(a, b),
                (None, None) => true,
                _ => false,
            };
            if !same {
                self.stats.shadow_mismatches += 1;
            }
        }
        found
    }

    fn global_lookup(&mut self, class: ClassId, symbol: SymbolId) -> Option<&'i CompiledMethod> {
        self.stats.global_lookups += 1;
        if let Some((probe, m)) = self.global.probe(class, symbol) {
            match probe {
                0 => self.stats.probe1 += 1,
                1 => self.stats.probe2 += 1,
                _ => self.stats.probe3 += 1,
            }
            return Some(m);
        }
        self.stats.misses += 1;
        let found = default_lookup(self.image, class, symbol);
        if let Some(m) = found {
            self.global.install(class, symbol, m);
        }
        found
    }
}

/// Runs `img` once on a fresh runtime.
pub fn run_image(img: &RuntimeImage, config: RunConfig, fuel: u64) -> (Evaluation, CacheStats) {
    let mut rt = Runtime::new(img, config);
    let ev = rt.run(fuel);
    (ev, rt.stats())
}
