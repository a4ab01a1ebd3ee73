//! Program model for the surface language.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Name of the built-in root class.
pub const OBJECT: &str = "Object";

/// Prefix reserved for mangled selectors. Source programs may not use it for
/// selectors, fields or variables.
pub const MANGLING_PREFIX: &str = "__";

/// Source position (1-based). `Pos::default()` marks synthesized nodes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Protected,
}

impl fmt::Display for Visibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Visibility::Public => "public",
            Visibility::Protected => "protected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    New(String),
    Var(String),
    SelfRef,
    Nil,
    /// Integer literal; the only primitive data besides objects.
    Int(i64),
    FieldGet(String),
    FieldSet(String, Box<Expr>),
    Send {
        receiver: Box<Expr>,
        selector: String,
        args: Vec<Expr>,
    },
    SuperSend {
        selector: String,
        args: Vec<Expr>,
    },
    Let {
        var: String,
        bound: Box<Expr>,
        body: Box<Expr>,
    },
}

/// Selector of the built-in integer addition.
pub const PLUS: &str = "+";

impl Expr {
    pub fn send(receiver: Expr, selector: impl Into<String>, args: Vec<Expr>) -> Expr {
        Expr::Send {
            receiver: Box::new(receiver),
            selector: selector.into(),
            args,
        }
    }

    pub fn self_send(selector: impl Into<String>, args: Vec<Expr>) -> Expr {
        Expr::send(Expr::SelfRef, selector, args)
    }

    pub fn super_send(selector: impl Into<String>, args: Vec<Expr>) -> Expr {
        Expr::SuperSend {
            selector: selector.into(),
            args,
        }
    }

    pub fn plus(lhs: Expr, rhs: Expr) -> Expr {
        Expr::send(lhs, PLUS, vec![rhs])
    }

    pub fn let_in(var: impl Into<String>, bound: Expr, body: Expr) -> Expr {
        Expr::Let {
            var: var.into(),
            bound: Box::new(bound),
            body: Box::new(body),
        }
    }

    pub fn field_set(field: impl Into<String>, value: Expr) -> Expr {
        Expr::FieldSet(field.into(), Box::new(value))
    }

    /// True for sends whose receiver is syntactically `self`.
    pub fn is_self_send(&self) -> bool {
        matches!(self, Expr::Send { receiver, .. } if **receiver == Expr::SelfRef)
    }

    /// Pre-order walk over this expression and all subexpressions.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::FieldSet(_, e) => e.walk(f),
            Expr::Send { receiver, args, .. } => {
                receiver.walk(f);
                args.iter().for_each(|a| a.walk(f));
            }
            Expr::SuperSend { args, .. } => args.iter().for_each(|a| a.walk(f)),
            Expr::Let { bound, body, .. } => {
                bound.walk(f);
                body.walk(f);
            }
            Expr::New(_)
            | Expr::Var(_)
            | Expr::SelfRef
            | Expr::Nil
            | Expr::Int(_)
            | Expr::FieldGet(_) => {}
        }
    }

    pub fn contains_super_send(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::SuperSend { .. }));
        found
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDef {
    pub selector: String,
    pub params: Vec<String>,
    pub body: Expr,
    pub visibility: Visibility,
    pub pos: Pos,
}

impl MethodDef {
    pub fn new(
        visibility: Visibility,
        selector: impl Into<String>,
        params: &[&str],
        body: Expr,
    ) -> Self {
        MethodDef {
            selector: selector.into(),
            params: params.iter().map(|p| p.to_string()).collect(),
            body,
            visibility,
            pos: Pos::default(),
        }
    }

    pub fn public(selector: impl Into<String>, params: &[&str], body: Expr) -> Self {
        Self::new(Visibility::Public, selector, params, body)
    }

    pub fn protected(selector: impl Into<String>, params: &[&str], body: Expr) -> Self {
        Self::new(Visibility::Protected, selector, params, body)
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    pub name: String,
    pub superclass: String,
    pub fields: Vec<String>,
    pub public_methods: Vec<MethodDef>,
    pub protected_methods: Vec<MethodDef>,
    pub pos: Pos,
}

impl ClassDef {
    pub fn new(name: impl Into<String>, superclass: impl Into<String>) -> Self {
        ClassDef {
            name: name.into(),
            superclass: superclass.into(),
            fields: Vec::new(),
            public_methods: Vec::new(),
            protected_methods: Vec::new(),
            pos: Pos::default(),
        }
    }

    pub fn with_fields(mut self, fields: &[&str]) -> Self {
        self.fields = fields.iter().map(|f| f.to_string()).collect();
        self
    }

    /// Adds a method to the list matching its visibility.
    pub fn with_method(mut self, m: MethodDef) -> Self {
        self.add_method(m);
        self
    }

    pub fn add_method(&mut self, m: MethodDef) {
        match m.visibility {
            Visibility::Public => self.public_methods.push(m),
            Visibility::Protected => self.protected_methods.push(m),
        }
    }

    /// Public methods first, then protected ones.
    pub fn methods(&self) -> impl Iterator<Item = &MethodDef> {
        self.public_methods.iter().chain(&self.protected_methods)
    }

    pub fn method(&self, selector: &str) -> Option<&MethodDef> {
        self.methods().find(|m| m.selector == selector)
    }

    pub fn defines_protected(&self) -> bool {
        !self.protected_methods.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub classes: Vec<ClassDef>,
    pub main: Expr,
}

impl Program {
    pub fn new(classes: Vec<ClassDef>, main: Expr) -> Self {
        Program { classes, main }
    }

    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn class_mut(&mut self, name: &str) -> Option<&mut ClassDef> {
        self.classes.iter_mut().find(|c| c.name == name)
    }

    pub fn uses_protected(&self) -> bool {
        self.classes.iter().any(ClassDef::defines_protected)
    }

    /// Copy with every source position reset, for structural comparison.
    pub fn without_positions(&self) -> Program {
        let mut p = self.clone();
        for c in &mut p.classes {
            c.pos = Pos::default();
            for m in c
                .public_methods
                .iter_mut()
                .chain(c.protected_methods.iter_mut())
            {
                m.pos = Pos::default();
            }
        }
        p
    }

    /// Number of method definitions across all classes.
    pub fn method_count(&self) -> usize {
        self.classes
            .iter()
            .map(|c| c.public_methods.len() + c.protected_methods.len())
            .sum()
    }
}

pub fn is_reserved(name: &str) -> bool {
    name.starts_with(MANGLING_PREFIX)
}
