use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::lang::{
    validate, Expr, Hierarchy, MethodDef, Program, ValidationReport, Visibility, OBJECT,
};

use super::code::{ClassId, Code, CompiledMethod, SendKind, SendSite, SiteId, SiteTag};
use super::symbol::{SymbolId, SymbolTable};

/// How a program is lowered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompileMode {
    /// Mangling and double registration limited to the rewrite scope.
    #[default]
    Protected,
    /// No mangling at all; protected methods are installed as public ones.
    Baseline,
    /// Every class is rewritten, so every public method is double-registered.
    WorstCase,
}

impl fmt::Display for CompileMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompileMode::Protected => "protected",
            CompileMode::Baseline => "baseline",
            CompileMode::WorstCase => "worst-case",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("invalid program:\n{0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstallError {
    #[error("invalid program after installation:\n{0}")]
    Invalid(ValidationReport),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MethodDictionary {
    entries: BTreeMap<SymbolId, Arc<CompiledMethod>>,
}

impl MethodDictionary {
    pub fn get(&self, symbol: SymbolId) -> Option<&Arc<CompiledMethod>> {
        self.entries.get(&symbol)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SymbolId, &Arc<CompiledMethod>)> {
        self.entries.iter().map(|(s, m)| (*s, m))
    }

    fn insert(&mut self, symbol: SymbolId, method: Arc<CompiledMethod>) {
        self.entries.insert(symbol, method);
    }
}

#[derive(Debug, Clone)]
pub struct ClassImage {
    pub name: String,
    pub superclass: Option<ClassId>,
    /// Field names in slot order, inherited fields first.
    pub layout: Vec<String>,
    pub dictionary: MethodDictionary,
}

/// The main expression after lowering, run with a nil receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MainCode {
    pub body: Code,
    pub frame_size: usize,
    pub unknown_field: Option<String>,
}

/// Self- or super-send left plain because its selector is defined nowhere
/// it could be reached from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct DeferredSite {
    pub class: String,
    pub method: String,
    pub selector: String,
}

/// Compiled program: classes with method dictionaries keyed by (possibly
/// mangled) symbols.
#[derive(Debug, Clone)]
pub struct RuntimeImage {
    program: Program,
    mode: CompileMode,
    symbols: SymbolTable,
    classes: Vec<ClassImage>,
    index: HashMap<String, ClassId>,
    scope: BTreeSet<String>,
    main: Arc<MainCode>,
    site_count: u32,
}

/// Classes that define a protected method, plus all their descendants.
pub fn rewrite_scope(p: &Program) -> BTreeSet<String> {
    let h = Hierarchy::new(p);
    let mut scope = BTreeSet::new();
    for c in p.classes.iter().filter(|c| c.defines_protected()) {
        scope.insert(c.name.clone());
        for d in h.descendants(&c.name).unwrap_or_default() {
            scope.insert(d.to_string());
        }
    }
    scope
}

/// Scope classes whose superclass is outside the scope.
pub fn protection_roots(p: &Program, scope: &BTreeSet<String>) -> BTreeSet<String> {
    p.classes
        .iter()
        .filter(|c| scope.contains(&c.name) && !scope.contains(&c.superclass))
        .map(|c| c.name.clone())
        .collect()
}

fn scope_for(p: &Program, mode: CompileMode) -> BTreeSet<String> {
    match mode {
        CompileMode::Protected => rewrite_scope(p),
        CompileMode::Baseline => BTreeSet::new(),
        CompileMode::WorstCase => p.classes.iter().map(|c| c.name.clone()).collect(),
    }
}

/// Tag decision for one send site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Resolution {
    tag: SiteTag,
    deferred: bool,
}

const PLAIN: Resolution = Resolution {
    tag: SiteTag::Plain,
    deferred: false,
};

struct Compiler<'p> {
    h: Hierarchy<'p>,
    scope: BTreeSet<String>,
    ids: HashMap<&'p str, ClassId>,
}

impl<'p> Compiler<'p> {
    fn new(program: &'p Program, scope: BTreeSet<String>) -> Self {
        let h = Hierarchy::new(program);
        let ids = h
            .class_names()
            .enumerate()
            .map(|(i, c)| (c, ClassId(i as u32)))
            .collect();
        Compiler { h, scope, ids }
    }

    fn in_scope(&self, class: &str) -> bool {
        self.scope.contains(class)
    }

    /// Self-sends in a rewritten class are mangled when the closest
    /// definition from the enclosing class is itself rewritten, or when only
    /// descendants define the selector. A closest definition above the
    /// protection root keeps the site plain. Super-sends follow the same
    /// rule from the superclass, without the descendant case.
    fn resolve(&self, kind: SendKind, enclosing: &str, selector: &str) -> Resolution {
        if kind == SendKind::Object || !self.in_scope(enclosing) {
            return PLAIN;
        }
        let start = match kind {
            SendKind::SelfSend => Some(enclosing),
            _ => self.h.superclass(enclosing).ok().flatten(),
        };
        if let Some((found, _)) = start.and_then(|s| self.h.lookup(s, selector).ok().flatten()) {
            let tag = if self.in_scope(found) {
                SiteTag::Mangled
            } else {
                SiteTag::Plain
            };
            return Resolution {
                tag,
                deferred: false,
            };
        }
        let below = kind == SendKind::SelfSend
            && self
                .h
                .descendants(enclosing)
                .unwrap_or_default()
                .into_iter()
                .any(|d| {
                    self.h
                        .class(d)
                        .ok()
                        .flatten()
                        .is_some_and(|def| def.method(selector).is_some())
                });
        if below {
            Resolution {
                tag: SiteTag::Mangled,
                deferred: false,
            }
        } else {
            Resolution {
                tag: SiteTag::Plain,
                deferred: true,
            }
        }
    }

    fn layout(&self, class: &str) -> Vec<String> {
        self.h
            .fields_of(class)
            .unwrap_or_default()
            .into_iter()
            .map(str::to_string)
            .collect()
    }

    fn lower_method(
        &self,
        class: &str,
        m: &MethodDef,
        symbols: &mut SymbolTable,
        next_site: &mut u32,
    ) -> CompiledMethod {
        let layout = self.layout(class);
        let mut l = Lowering {
            c: self,
            class,
            layout: &layout,
            symbols,
            next_site,
            env: m
                .params
                .iter()
                .cloned()
                .enumerate()
                .map(|(i, p)| (p, i))
                .collect(),
            frame: m.params.len(),
        };
        let body = l.expr(&m.body);
        let frame_size = l.frame;
        let selector = symbols.intern(&m.selector);
        CompiledMethod {
            origin: class.to_string(),
            class: self.ids[class],
            selector,
            selector_text: m.selector.clone(),
            visibility: m.visibility,
            params: m.params.clone(),
            frame_size,
            body,
            unknown_field: unknown_field(&m.body, &layout),
        }
    }

    fn lower_main(&self, main: &Expr, symbols: &mut SymbolTable, next_site: &mut u32) -> MainCode {
        let mut l = Lowering {
            c: self,
            class: OBJECT,
            layout: &[],
            symbols,
            next_site,
            env: Vec::new(),
            frame: 0,
        };
        let body = l.expr(main);
        MainCode {
            body,
            frame_size: l.frame,
            unknown_field: unknown_field(main, &[]),
        }
    }

    /// Installs `m` in `dict` following the class's scope membership: plain
    /// only outside the scope; mangled, and plain too for public methods,
    /// inside it.
    fn register(
        &self,
        class: &str,
        m: Arc<CompiledMethod>,
        symbols: &mut SymbolTable,
        dict: &mut MethodDictionary,
    ) {
        let plain = m.selector;
        if self.in_scope(class) {
            let mangled = symbols
                .mangle(plain)
                .expect("source selectors are never mangled");
            dict.insert(mangled, m.clone());
            if m.visibility == Visibility::Public {
                dict.insert(plain, m);
            }
        } else {
            dict.insert(plain, m);
        }
    }

    fn compile_class(
        &self,
        name: &str,
        symbols: &mut SymbolTable,
        next_site: &mut u32,
    ) -> MethodDictionary {
        let mut dict = MethodDictionary::default();
        if let Some(def) = self.h.class(name).ok().flatten() {
            for m in def.methods() {
                let cm = Arc::new(self.lower_method(name, m, symbols, next_site));
                self.register(name, cm, symbols, &mut dict);
            }
        }
        dict
    }
}

fn unknown_field(body: &Expr, layout: &[String]) -> Option<String> {
    let mut first = None;
    body.walk(&mut |e| {
        if first.is_some() {
            return;
        }
        if let Expr::FieldGet(f) | Expr::FieldSet(f, _) = e {
            if !layout.contains(f) {
                first = Some(f.clone());
            }
        }
    });
    first
}

struct Lowering<'a, 'p> {
    c: &'a Compiler<'p>,
    class: &'a str,
    layout: &'a [String],
    symbols: &'a mut SymbolTable,
    next_site: &'a mut u32,
    env: Vec<(String, usize)>,
    frame: usize,
}

impl Lowering<'_, '_> {
    fn expr(&mut self, e: &Expr) -> Code {
        stacker::maybe_grow(64 * 1024, 1024 * 1024, || self.expr_inner(e))
    }

    fn field_slot(&self, f: &str) -> Option<usize> {
        self.layout.iter().position(|x| x == f)
    }

    fn expr_inner(&mut self, e: &Expr) -> Code {
        match e {
            Expr::New(c) => match self.c.ids.get(c.as_str()) {
                Some(&class) => Code::New {
                    class,
                    name: c.clone(),
                },
                None => Code::NewUnknown(c.clone()),
            },
            Expr::Var(x) => match self.env.iter().rev().find(|(n, _)| n == x) {
                Some((_, slot)) => Code::Local {
                    slot: *slot,
                    name: x.clone(),
                },
                None => Code::FreeVar(x.clone()),
            },
            Expr::SelfRef => Code::SelfRef,
            Expr::Nil => Code::Const(crate::outcome::Value::Nil),
            Expr::Int(n) => Code::Const(crate::outcome::Value::Int(*n)),
            Expr::FieldGet(f) => match self.field_slot(f) {
                Some(slot) => Code::GetField {
                    slot,
                    name: f.clone(),
                },
                None => Code::UnknownField(f.clone()),
            },
            Expr::FieldSet(f, v) => match self.field_slot(f) {
                Some(slot) => Code::SetField {
                    slot,
                    name: f.clone(),
                    value: Box::new(self.expr(v)),
                },
                None => Code::UnknownField(f.clone()),
            },
            Expr::Send {
                receiver,
                selector,
                args,
            } => {
                if **receiver == Expr::SelfRef {
                    self.send(SendKind::SelfSend, None, selector, args)
                } else {
                    self.send(SendKind::Object, Some(receiver), selector, args)
                }
            }
            Expr::SuperSend { selector, args } => self.send(SendKind::Super, None, selector, args),
            Expr::Let { var, bound, body } => {
                let bound = self.expr(bound);
                let slot = self.frame;
                self.frame += 1;
                self.env.push((var.clone(), slot));
                let body = self.expr(body);
                self.env.pop();
                Code::Let {
                    slot,
                    name: var.clone(),
                    bound: Box::new(bound),
                    body: Box::new(body),
                }
            }
        }
    }

    fn send(
        &mut self,
        kind: SendKind,
        receiver: Option<&Expr>,
        selector: &str,
        args: &[Expr],
    ) -> Code {
        let id = SiteId(*self.next_site);
        *self.next_site += 1;
        let Resolution { tag, deferred } = self.c.resolve(kind, self.class, selector);
        let plain = self.symbols.intern(selector);
        let symbol = match tag {
            SiteTag::Plain => plain,
            SiteTag::Mangled => self
                .symbols
                .mangle(plain)
                .expect("source selectors are never mangled"),
        };
        let start = match kind {
            SendKind::Super => self
                .c
                .h
                .superclass(self.class)
                .ok()
                .flatten()
                .map(|s| self.c.ids[s]),
            _ => None,
        };
        let receiver = receiver.map(|r| self.expr(r));
        let args = args.iter().map(|a| self.expr(a)).collect();
        Code::Send(Box::new(SendSite {
            id,
            kind,
            receiver,
            selector: plain,
            selector_text: selector.to_string(),
            symbol,
            tag,
            deferred,
            start,
            args,
        }))
    }
}

/// Lowers a validated program.
pub fn compile_program(p: &Program, mode: CompileMode) -> Result<RuntimeImage, CompileError> {
    let report = validate(p);
    if !report.is_valid() {
        return Err(CompileError::Invalid(report));
    }
    let compiler = Compiler::new(p, scope_for(p, mode));
    let mut symbols = SymbolTable::new();
    let mut next_site = 0;
    let mut classes = Vec::new();
    let mut index = HashMap::new();
    for name in compiler.h.class_names() {
        let id = ClassId(classes.len() as u32);
        index.insert(name.to_string(), id);
        let dictionary = compiler.compile_class(name, &mut symbols, &mut next_site);
        classes.push(ClassImage {
            name: name.to_string(),
            superclass: compiler
                .h
                .superclass(name)
                .ok()
                .flatten()
                .map(|s| compiler.ids[s]),
            layout: compiler.layout(name),
            dictionary,
        });
    }
    let main = compiler.lower_main(&p.main, &mut symbols, &mut next_site);
    Ok(RuntimeImage {
        program: p.clone(),
        mode,
        symbols,
        classes,
        index,
        scope: compiler.scope,
        main: Arc::new(main),
        site_count: next_site,
    })
}

/// Lowers one method body as it would be compiled in `enclosing`, returning
/// its rendering (mangled sites shown with the prefix) and the selectors of
/// its deferred sites.
pub fn rewrite_body(p: &Program, enclosing: &str, body: &Expr) -> (String, Vec<String>) {
    let compiler = Compiler::new(p, rewrite_scope(p));
    let mut symbols = SymbolTable::new();
    let mut next_site = 0;
    let m = MethodDef::public("_", &[], body.clone());
    let cm = compiler.lower_method(enclosing, &m, &mut symbols, &mut next_site);
    let deferred = cm
        .sites()
        .into_iter()
        .filter(|s| s.deferred)
        .map(|s| s.selector_text.clone())
        .collect();
    (cm.body.render(), deferred)
}

/// Self-sends in classes outside the rewrite scope whose selector is
/// undefined on the enclosing chain but protected in some descendant. They
/// compile plain and so never reach the protected method, although the
/// source semantics would activate it on a descendant receiver.
pub fn unreachable_protected_sends(p: &Program) -> Vec<DeferredSite> {
    let h = Hierarchy::new(p);
    let scope = rewrite_scope(p);
    let mut out = Vec::new();
    for c in p.classes.iter().filter(|c| !scope.contains(&c.name)) {
        let descendants = h.descendants(&c.name).unwrap_or_default();
        for m in c.methods() {
            m.body.walk(&mut |e| {
                let Expr::Send { selector, .. } = e else {
                    return;
                };
                if !e.is_self_send() || matches!(h.lookup(&c.name, selector), Ok(Some(_))) {
                    return;
                }
                let hidden = descendants
                    .iter()
                    .any(|d| matches!(h.defines_protected(d, selector), Ok(true)));
                if hidden {
                    out.push(DeferredSite {
                        class: c.name.clone(),
                        method: m.selector.clone(),
                        selector: selector.clone(),
                    });
                }
            });
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Adds `m` to `class`, returning the updated image; `img` is left intact.
pub fn install_method(
    img: &RuntimeImage,
    class: &str,
    m: MethodDef,
) -> Result<RuntimeImage, InstallError> {
    let mut program = img.program.clone();
    let Some(def) = program.class_mut(class) else {
        return Err(InstallError::UnknownClass(class.to_string()));
    };
    def.add_method(m.clone());
    let report = validate(&program);
    if !report.is_valid() {
        return Err(InstallError::Invalid(report));
    }

    let scope = scope_for(&program, img.mode);
    let compiler = Compiler::new(&program, scope);
    let mut next = img.clone();
    let mut next_site = img.site_count;
    let grew = compiler.scope.len() != img.scope.len();

    let mut recompiled = BTreeSet::new();
    if grew {
        recompiled.insert(class);
        recompiled.extend(compiler.h.descendants(class).unwrap_or_default());
        for &c in &recompiled {
            let id = compiler.ids[c];
            next.classes[id.0 as usize].dictionary =
                compiler.compile_class(c, &mut next.symbols, &mut next_site);
        }
    } else {
        let cm = Arc::new(compiler.lower_method(class, &m, &mut next.symbols, &mut next_site));
        let id = compiler.ids[class];
        compiler.register(
            class,
            cm,
            &mut next.symbols,
            &mut next.classes[id.0 as usize].dictionary,
        );
    }

    // Sites elsewhere whose selector gained a definition may need a new tag.
    for cdef in &program.classes {
        let c = cdef.name.as_str();
        if recompiled.contains(c) || !compiler.in_scope(c) {
            continue;
        }
        let id = compiler.ids[c];
        for md in cdef.methods() {
            let Some(old) = next.method_of(id, &md.selector).cloned() else {
                continue;
            };
            let stale = old.sites().iter().any(|s| {
                s.selector_text == m.selector
                    && s.kind != SendKind::Object
                    && resolution_of(s) != compiler.resolve(s.kind, c, &s.selector_text)
            });
            if stale {
                let cm = Arc::new(compiler.lower_method(c, md, &mut next.symbols, &mut next_site));
                compiler.register(
                    c,
                    cm,
                    &mut next.symbols,
                    &mut next.classes[id.0 as usize].dictionary,
                );
            }
        }
    }

    next.scope = compiler.scope;
    next.site_count = next_site;
    next.program = program;
    Ok(next)
}

fn resolution_of(s: &SendSite) -> Resolution {
    Resolution {
        tag: s.tag,
        deferred: s.deferred,
    }
}

impl RuntimeImage {
    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn mode(&self) -> CompileMode {
        self.mode
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    pub fn classes(&self) -> &[ClassImage] {
        &self.classes
    }

    pub fn class(&self, id: ClassId) -> &ClassImage {
        &self.classes[id.0 as usize]
    }

    pub fn class_id(&self, name: &str) -> Option<ClassId> {
        self.index.get(name).copied()
    }

    pub fn class_named(&self, name: &str) -> Option<&ClassImage> {
        self.class_id(name).map(|id| self.class(id))
    }

    pub fn scope(&self) -> &BTreeSet<String> {
        &self.scope
    }

    pub fn roots(&self) -> BTreeSet<String> {
        protection_roots(&self.program, &self.scope)
    }

    pub fn main(&self) -> &MainCode {
        &self.main
    }

    /// Number of send sites ever allocated; bounds [`SiteId`]s.
    pub fn site_count(&self) -> usize {
        self.site_count as usize
    }

    pub fn symbol(&self, text: &str) -> Option<SymbolId> {
        self.symbols.get(text)
    }

    /// The method `class` itself defines for `selector`, whichever symbol it
    /// is registered under.
    pub fn method_of(&self, class: ClassId, selector: &str) -> Option<&Arc<CompiledMethod>> {
        let dict = &self.class(class).dictionary;
        let plain = self.symbols.get(selector)?;
        let mangled = self
            .symbols
            .get(&format!("{}{selector}", crate::lang::MANGLING_PREFIX));
        dict.get(plain)
            .into_iter()
            .chain(mangled.and_then(|s| dict.get(s)))
            .find(|m| m.class == class)
    }

    /// Distinct compiled methods of every class, in class then selector
    /// order.
    pub fn methods(&self) -> Vec<&Arc<CompiledMethod>> {
        let mut out: Vec<&Arc<CompiledMethod>> = Vec::new();
        for c in &self.classes {
            let mut own: Vec<&Arc<CompiledMethod>> = Vec::new();
            for (_, m) in c.dictionary.iter() {
                if !own.iter().any(|o| Arc::ptr_eq(o, m)) {
                    own.push(m);
                }
            }
            own.sort_by(|a, b| a.selector_text.cmp(&b.selector_text));
            out.extend(own);
        }
        out
    }

    pub fn deferred_sites(&self) -> Vec<DeferredSite> {
        let mut out: Vec<DeferredSite> = self
            .methods()
            .into_iter()
            .flat_map(|m| {
                m.sites()
                    .into_iter()
                    .filter(|s| s.deferred)
                    .map(|s| DeferredSite {
                        class: m.origin.clone(),
                        method: m.selector_text.clone(),
                        selector: s.selector_text.clone(),
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        out.sort();
        out
    }

    /// Symbol-independent description of the image, for comparing images
    /// built in different ways.
    pub fn layout(&self) -> ImageLayout {
        let classes = self
            .classes
            .iter()
            .skip(1)
            .map(|c| {
                let entries = c
                    .dictionary
                    .iter()
                    .map(|(sym, m)| {
                        let shared = c
                            .dictionary
                            .iter()
                            .any(|(other, n)| other != sym && Arc::ptr_eq(m, n));
                        let entry = EntryLayout {
                            origin: m.origin.clone(),
                            selector: m.selector_text.clone(),
                            visibility: m.visibility,
                            shared,
                            params: m.params.clone(),
                            body: m.body.render(),
                        };
                        (self.symbols.text(sym).to_string(), entry)
                    })
                    .collect();
                let superclass = c
                    .superclass
                    .map_or_else(|| OBJECT.to_string(), |s| self.class(s).name.clone());
                (
                    c.name.clone(),
                    ClassLayout {
                        superclass,
                        fields: c.layout.clone(),
                        entries,
                    },
                )
            })
            .collect();
        ImageLayout {
            scope: self.scope.clone(),
            roots: self.roots(),
            classes,
            main: self.main.body.render(),
            deferred: self.deferred_sites(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntryLayout {
    pub origin: String,
    pub selector: String,
    pub visibility: Visibility,
    /// Another symbol of the same dictionary maps to this very method.
    pub shared: bool,
    pub params: Vec<String>,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassLayout {
    pub superclass: String,
    pub fields: Vec<String>,
    pub entries: BTreeMap<String, EntryLayout>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImageLayout {
    pub scope: BTreeSet<String>,
    pub roots: BTreeSet<String>,
    pub classes: BTreeMap<String, ClassLayout>,
    pub main: String,
    pub deferred: Vec<DeferredSite>,
}

impl ImageLayout {
    /// Dictionaries only, for comparing images compiled in different modes.
    pub fn dictionaries(&self) -> BTreeMap<&str, &BTreeMap<String, EntryLayout>> {
        self.classes
            .iter()
            .map(|(n, c)| (n.as_str(), &c.entries))
            .collect()
    }
}

impl fmt::Display for ImageLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |s: &BTreeSet<String>| {
            if s.is_empty() {
                "-".to_string()
            } else {
                s.iter().cloned().collect::<Vec<_>>().join(" ")
            }
        };
        writeln!(f, "scope: {}", list(&self.scope))?;
        writeln!(f, "roots: {}", list(&self.roots))?;
        for (name, c) in &self.classes {
            writeln!(f)?;
            writeln!(f, "class {name} extends {}", c.superclass)?;
            if !c.fields.is_empty() {
                writeln!(f, "  fields: {}", c.fields.join(" "))?;
            }
            for (sym, e) in &c.entries {
                let shared = if e.shared { " [shared]" } else { "" };
                writeln!(
                    f,
                    "  {sym} -> {}>>{} {}{shared}",
                    e.origin, e.selector, e.visibility
                )?;
            }
            let mut bodies: Vec<&EntryLayout> = Vec::new();
            for e in c.entries.values() {
                if !bodies.iter().any(|b| b.selector == e.selector) {
                    bodies.push(e);
                }
            }
            bodies.sort_by(|a, b| a.selector.cmp(&b.selector));
            for e in bodies {
                writeln!(
                    f,
                    "  {}({}) {{ {} }}",
                    e.selector,
                    e.params.join(", "),
                    e.body
                )?;
            }
        }
        writeln!(f)?;
        writeln!(f, "main {{ {} }}", self.main)?;
        if self.deferred.is_empty() {
            writeln!(f, "deferred: -")?;
        } else {
            for d in &self.deferred {
                writeln!(
                    f,
                    "deferred: {}>>{} sends {}",
                    d.class, d.method, d.selector
                )?;
            }
        }
        Ok(())
    }
}

/// Textual dump of an image: dictionaries, lowered bodies and deferred
/// sites, in class and symbol order.
pub fn desugar(img: &RuntimeImage) -> String {
    img.layout().to_string()
}
