//! Concrete syntax: lexer and recursive-descent parser for `.stl` sources.
//!
//! ```text
//! program := class* 'main' '{' expr '}'
//! class   := 'class' Ident 'extends' Ident '{' ('fields' ':' Ident* ';')? method* '}'
//! method  := 'protected'? 'method' Ident '(' (Ident (',' Ident)*)? ')' '{' expr '}'
//! expr    := 'let' Ident '=' expr 'in' expr | Ident ':=' expr | sum
//! sum     := postfix ('+' postfix)*
//! postfix := primary ('.' Ident '(' args ')')*
//! primary := 'new' Ident | 'nil' | 'self' | Int | Ident | '(' expr ')'
//!          | 'super' '.' Ident '(' args ')'
//! ```
//!
//! Bare identifiers resolve to a variable when lexically bound (parameter or
//! `let`), otherwise to a field of the enclosing class (own or inherited),
//! otherwise to a free variable.

use std::collections::HashSet;

use thiserror::Error;

use super::ast::{is_reserved, ClassDef, Expr, MethodDef, Pos, Program, Visibility, OBJECT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: selector `{selector}` uses the reserved `__` prefix")]
    ReservedSelector { pos: Pos, selector: String },
    #[error("{pos}: name `{name}` uses the reserved `__` prefix")]
    ReservedName { pos: Pos, name: String },
}

impl ParseError {
    pub fn pos(&self) -> Pos {
        match self {
            ParseError::Syntax { pos, .. }
            | ParseError::ReservedSelector { pos, .. }
            | ParseError::ReservedName { pos, .. } => *pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Kw(&'static str),
    Punct(&'static str),
    Eof,
}

const KEYWORDS: &[&str] = &[
    "class",
    "extends",
    "fields",
    "method",
    "protected",
    "main",
    "new",
    "nil",
    "self",
    "super",
    "let",
    "in",
];

const PUNCT: &[&str] = &[":=", "{", "}", "(", ")", ",", ";", ":", ".", "+", "="];

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Int(n) => format!("integer `{n}`"),
        Tok::Kw(k) => format!("keyword `{k}`"),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let negative = c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit());
        if c.is_ascii_digit() || negative {
            let start = i;
            let mut j = i + usize::from(negative);
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let text: String = chars[start..j].iter().collect();
            let n = text.parse::<i64>().map_err(|_| ParseError::Syntax {
                pos,
                message: format!("integer literal `{text}` out of range"),
            })?;
            advance(&mut i, &mut line, &mut col, j - start);
            out.push((Tok::Int(n), pos));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            let mut j = i;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let text: String = chars[start..j].iter().collect();
            advance(&mut i, &mut line, &mut col, j - start);
            let tok = match KEYWORDS.iter().find(|k| **k == text) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(text),
            };
            out.push((tok, pos));
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCT.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                advance(&mut i, &mut line, &mut col, p.len());
                out.push((Tok::Punct(p), pos));
            }
            None => {
                return Err(ParseError::Syntax {
                    pos,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn unexpected<T>(&self, wanted: &str) -> Result<T, ParseError> {
        self.error(format!(
            "expected {wanted}, found {}",
            describe(self.peek())
        ))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Kw(k) if *k == kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.unexpected(&format!("`{p}`"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.unexpected(what),
        }
    }

    /// A selector, field or variable name: rejects the reserved prefix.
    fn name(&mut self, what: &str, selector: bool) -> Result<String, ParseError> {
        let pos = self.pos();
        let name = self.ident(what)?;
        if is_reserved(&name) {
            return Err(if selector {
                ParseError::ReservedSelector {
                    pos,
                    selector: name,
                }
            } else {
                ParseError::ReservedName { pos, name }
            });
        }
        Ok(name)
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut classes = Vec::new();
        while matches!(self.peek(), Tok::Kw("class")) {
            classes.push(self.class()?);
        }
        self.expect_kw("main")?;
        self.expect_punct("{")?;
        let main_pos = self.pos();
        let main = self.expr(false)?;
        self.expect_punct("}")?;
        if *self.peek() != Tok::Eof {
            return self.unexpected("end of input");
        }
        if main.contains_super_send() {
            return Err(ParseError::Syntax {
                pos: main_pos,
                message: "`super` is only allowed inside a method body".into(),
            });
        }
        Ok(Program { classes, main })
    }

    fn class(&mut self) -> Result<ClassDef, ParseError> {
        let pos = self.pos();
        self.expect_kw("class")?;
        let name = self.ident("class name")?;
        self.expect_kw("extends")?;
        let superclass = self.ident("superclass name")?;
        self.expect_punct("{")?;
        let mut class = ClassDef::new(name, superclass);
        class.pos = pos;
        if self.eat_kw("fields") {
            self.expect_punct(":")?;
            while !self.eat_punct(";") {
                let f = self.name("field name or `;`", false)?;
                class.fields.push(f);
            }
        }
        while !self.eat_punct("}") {
            class.add_method(self.method()?);
        }
        Ok(class)
    }

    fn method(&mut self) -> Result<MethodDef, ParseError> {
        let pos = self.pos();
        let visibility = if self.eat_kw("protected") {
            Visibility::Protected
        } else {
            Visibility::Public
        };
        self.expect_kw("method")?;
        let selector = self.name("method name", true)?;
        self.expect_punct("(")?;
        let mut params: Vec<String> = Vec::new();
        if !self.eat_punct(")") {
            loop {
                let ppos = self.pos();
                let p = self.name("parameter name", false)?;
                if params.contains(&p) {
                    return Err(ParseError::Syntax {
                        pos: ppos,
                        message: format!("duplicate parameter `{p}`"),
                    });
                }
                params.push(p);
                if self.eat_punct(")") {
                    break;
                }
                self.expect_punct(",")?;
            }
        }
        self.expect_punct("{")?;
        let body = self.expr(true)?;
        self.expect_punct("}")?;
        Ok(MethodDef {
            selector,
            params,
            body,
            visibility,
            pos,
        })
    }

    fn expr(&mut self, in_method: bool) -> Result<Expr, ParseError> {
        stacker::maybe_grow(64 * 1024, 1024 * 1024, || self.expr_inner(in_method))
    }

    fn expr_inner(&mut self, in_method: bool) -> Result<Expr, ParseError> {
        if self.eat_kw("let") {
            let var = self.name("variable name", false)?;
            self.expect_punct("=")?;
            let bound = self.expr(in_method)?;
            self.expect_kw("in")?;
            let body = self.expr(in_method)?;
            return Ok(Expr::let_in(var, bound, body));
        }
        if let (Tok::Ident(_), Tok::Punct(":=")) = (self.peek(), &self.toks[self.at + 1].0) {
            let field = self.name("field name", false)?;
            self.bump();
            let value = self.expr(in_method)?;
            return Ok(Expr::field_set(field, value));
        }
        let mut lhs = self.postfix(in_method)?;
        while self.eat_punct("+") {
            let rhs = self.postfix(in_method)?;
            lhs = Expr::plus(lhs, rhs);
        }
        Ok(lhs)
    }

    fn postfix(&mut self, in_method: bool) -> Result<Expr, ParseError> {
        let mut e = self.primary(in_method)?;
        while self.eat_punct(".") {
            let selector = self.name("selector", true)?;
            let args = self.args(in_method)?;
            e = Expr::send(e, selector, args);
        }
        Ok(e)
    }

    fn args(&mut self, in_method: bool) -> Result<Vec<Expr>, ParseError> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if self.eat_punct(")") {
            return Ok(args);
        }
        loop {
            args.push(self.expr(in_method)?);
            if self.eat_punct(")") {
                return Ok(args);
            }
            self.expect_punct(",")?;
        }
    }

    fn primary(&mut self, in_method: bool) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Kw("new") => {
                self.bump();
                Ok(Expr::New(self.ident("class name")?))
            }
            Tok::Kw("nil") => {
                self.bump();
                Ok(Expr::Nil)
            }
            Tok::Kw("self") => {
                self.bump();
                Ok(Expr::SelfRef)
            }
            Tok::Kw("super") => {
                self.bump();
                self.expect_punct(".")?;
                let selector = self.name("selector", true)?;
                let args = self.args(in_method)?;
                Ok(Expr::super_send(selector, args))
            }
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Ident(_) => Ok(Expr::Var(self.name("identifier", false)?)),
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr(in_method)?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => self.unexpected("an expression"),
        }
    }
}

/// All fields visible in `class`: its own and every ancestor's. Tolerates
/// missing or cyclic superclasses, which validation reports separately.
pub(crate) fn visible_fields(classes: &[ClassDef], class: &str) -> HashSet<String> {
    let mut out = HashSet::new();
    let mut seen = HashSet::new();
    let mut cur = class;
    while cur != OBJECT && seen.insert(cur.to_string()) {
        let Some(def) = classes.iter().find(|c| c.name == cur) else {
            break;
        };
        out.extend(def.fields.iter().cloned());
        cur = &def.superclass;
    }
    out
}

fn resolve(e: &mut Expr, bound: &mut Vec<String>, fields: &HashSet<String>) {
    stacker::maybe_grow(64 * 1024, 1024 * 1024, || match e {
        Expr::Var(name) => {
            if !bound.contains(name) && fields.contains(name) {
                *e = Expr::FieldGet(std::mem::take(name));
            }
        }
        Expr::FieldSet(_, v) => resolve(v, bound, fields),
        Expr::Send { receiver, args, .. } => {
            resolve(receiver, bound, fields);
            args.iter_mut().for_each(|a| resolve(a, bound, fields));
        }
        Expr::SuperSend { args, .. } => args.iter_mut().for_each(|a| resolve(a, bound, fields)),
        Expr::Let {
            var,
            bound: b,
            body,
        } => {
            resolve(b, bound, fields);
            bound.push(var.clone());
            resolve(body, bound, fields);
            bound.pop();
        }
        Expr::New(_) | Expr::SelfRef | Expr::Nil | Expr::Int(_) | Expr::FieldGet(_) => {}
    })
}

/// Parses a complete program from source text.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    let mut parser = Parser {
        toks: lex(source)?,
        at: 0,
    };
    let mut program = parser.program()?;
    let snapshot = program.classes.clone();
    for class in &mut program.classes {
        let fields = visible_fields(&snapshot, &class.name);
        for m in class
            .public_methods
            .iter_mut()
            .chain(class.protected_methods.iter_mut())
        {
            let mut bound = m.params.clone();
            resolve(&mut m.body, &mut bound, &fields);
        }
    }
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_class_body() {
        let p = parse("class A extends Object { } main { nil }").unwrap();
        assert_eq!(p.classes.len(), 1);
        let a = &p.classes[0];
        assert!(a.fields.is_empty() && a.public_methods.is_empty());
        assert!(a.protected_methods.is_empty());
        assert_eq!(p.main, Expr::Nil);
    }

    #[test]
    fn reserved_selector_is_rejected() {
        let err =
            parse("class A extends Object { method __x() { nil } } main { nil }").unwrap_err();
        assert!(
            matches!(err, ParseError::ReservedSelector { ref selector, .. } if selector == "__x")
        );
        let err = parse("main { (new A).__x() }").unwrap_err();
        assert!(matches!(err, ParseError::ReservedSelector { .. }));
        let err = parse("class A extends Object { fields: __f; } main { nil }").unwrap_err();
        assert!(matches!(err, ParseError::ReservedName { .. }));
    }

    #[test]
    fn syntax_error_has_position() {
        let err =
            parse("class A extends Object {\n  method m( { nil }\n} main { nil }").unwrap_err();
        match err {
            ParseError::Syntax { pos, .. } => assert_eq!(pos, Pos { line: 2, col: 13 }),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identifiers_resolve_to_fields_unless_bound() {
        let src = "class A extends Object { fields: f; }
                   class B extends A { method m(x) { let f = f in x + f } }
                   main { f }";
        let p = parse(src).unwrap();
        let body = &p.class("B").unwrap().public_methods[0].body;
        assert_eq!(
            *body,
            Expr::let_in(
                "f",
                Expr::FieldGet("f".into()),
                Expr::plus(Expr::Var("x".into()), Expr::Var("f".into()))
            )
        );
        assert_eq!(p.main, Expr::Var("f".into()));
    }

    #[test]
    fn super_in_main_is_rejected() {
        assert!(matches!(
            parse("main { super.m() }"),
            Err(ParseError::Syntax { .. })
        ));
    }

    #[test]
    fn duplicate_parameters_are_rejected() {
        assert!(parse("class A extends Object { method m(x, x) { x } } main { nil }").is_err());
    }

    #[test]
    fn sends_chain_and_plus_is_left_associative() {
        let p = parse("main { new A.m(1).n() + 2 + -3 }").unwrap();
        let recv = Expr::send(
            Expr::send(Expr::New("A".into()), "m", vec![Expr::Int(1)]),
            "n",
            vec![],
        );
        assert_eq!(
            p.main,
            Expr::plus(Expr::plus(recv, Expr::Int(2)), Expr::Int(-3))
        );
    }
}
