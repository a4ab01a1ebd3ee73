use std::collections::{BTreeMap, HashMap, HashSet};

use crate::lang::{
    validate, Expr, Hierarchy, MethodDef, Program, ValidationReport, Visibility, OBJECT, PLUS,
};
use crate::outcome::{Evaluation, Outcome, RuntimeError, Value, INTEGER_CLASS};

use super::redex::Redex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectRecord {
    pub class: String,
    pub fields: BTreeMap<String, Value>,
}

/// Heap of the reference evaluator. Object ids are allocated densely from 0
/// and never reused.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Store {
    objects: Vec<ObjectRecord>,
}

impl Store {
    pub fn get(&self, oid: u32) -> Option<&ObjectRecord> {
        self.objects.get(oid as usize)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &ObjectRecord)> {
        self.objects.iter().enumerate().map(|(i, r)| (i as u32, r))
    }

    fn alloc(&mut self, record: ObjectRecord) -> u32 {
        self.objects.push(record);
        (self.objects.len() - 1) as u32
    }
}

/// Result of attempting one reduction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Reduced(Redex),
    /// The redex is already a value; no rule applies.
    Normal(Value),
    Stuck(RuntimeError),
}

/// Small-step evaluator. Object-sends see public methods only; self- and
/// super-sends take the closest definition of any visibility.
pub struct Reference<'p> {
    program: &'p Program,
    hierarchy: Hierarchy<'p>,
    fields: HashMap<&'p str, HashSet<&'p str>>,
}

impl<'p> Reference<'p> {
    pub fn new(program: &'p Program) -> Result<Self, ValidationReport> {
        let report = validate(program);
        if !report.is_valid() {
            return Err(report);
        }
        let hierarchy = Hierarchy::new(program);
        let fields = hierarchy
            .class_names()
            .map(|c| {
                let fs = hierarchy.fields_of(c).unwrap_or_default();
                (c, fs.into_iter().collect())
            })
            .collect();
        Ok(Reference {
            program,
            hierarchy,
            fields,
        })
    }

    pub fn hierarchy(&self) -> &Hierarchy<'p> {
        &self.hierarchy
    }

    /// Translates `e`, written in a method of `class`, into a redex running
    /// on behalf of `owner`.
    pub fn translate(&self, e: &Expr, owner: Value, class: &str) -> Result<Redex, RuntimeError> {
        stacker::maybe_grow(64 * 1024, 1024 * 1024, || {
            self.translate_inner(e, owner, class)
        })
    }

    fn translate_inner(&self, e: &Expr, owner: Value, class: &str) -> Result<Redex, RuntimeError> {
        let unknown_field = |f: &str| RuntimeError::UnknownField {
            class: class.to_string(),
            field: f.to_string(),
        };
        let has_field = |f: &str| self.fields.get(class).is_some_and(|fs| fs.contains(f));
        let all = |args: &[Expr]| -> Result<Vec<Redex>, RuntimeError> {
            args.iter()
                .map(|a| self.translate(a, owner, class))
                .collect()
        };
        Ok(match e {
            Expr::New(c) => Redex::New(c.clone()),
            Expr::Var(x) => Redex::Var(x.clone()),
            Expr::SelfRef => Redex::Val(owner),
            Expr::Nil => Redex::Val(Value::Nil),
            Expr::Int(n) => Redex::Val(Value::Int(*n)),
            Expr::FieldGet(f) => {
                if !has_field(f) {
                    return Err(unknown_field(f));
                }
                Redex::FieldGet {
                    owner,
                    field: f.clone(),
                }
            }
            Expr::FieldSet(f, v) => {
                if !has_field(f) {
                    return Err(unknown_field(f));
                }
                Redex::FieldSet {
                    owner,
                    field: f.clone(),
                    value: Box::new(self.translate(v, owner, class)?),
                }
            }
            Expr::Send {
                receiver,
                selector,
                args,
            } if **receiver == Expr::SelfRef => Redex::SelfSend {
                owner,
                class: class.to_string(),
                selector: selector.clone(),
                args: all(args)?,
            },
            Expr::Send {
                receiver,
                selector,
                args,
            } => Redex::ObjectSend {
                receiver: Box::new(self.translate(receiver, owner, class)?),
                selector: selector.clone(),
                args: all(args)?,
            },
            Expr::SuperSend { selector, args } => Redex::SuperSend {
                owner,
                class: class.to_string(),
                selector: selector.clone(),
                args: all(args)?,
            },
            Expr::Let { var, bound, body } => Redex::Let {
                var: var.clone(),
                bound: Box::new(self.translate(bound, owner, class)?),
                body: Box::new(self.translate(body, owner, class)?),
            },
        })
    }

    /// The initial redex: the main expression translated with a nil owner in
    /// the context of `Object`.
    pub fn initial_redex(&self) -> Result<Redex, RuntimeError> {
        self.translate(&self.program.main, Value::Nil, OBJECT)
    }

    /// Performs one leftmost reduction.
    pub fn step(&self, mut r: Redex, store: &mut Store) -> Step {
        if let Some(v) = r.as_value() {
            return Step::Normal(v);
        }
        match self.reduce(&mut r, store) {
            Ok(()) => Step::Reduced(r),
            Err(e) => {
                r.dismantle();
                Step::Stuck(e)
            }
        }
    }

    /// Reduces the leftmost non-value subterm of `r` in place: descends
    /// through the evaluation context to the innermost pending redex, then
    /// contracts it.
    fn reduce(&self, r: &mut Redex, store: &mut Store) -> Result<(), RuntimeError> {
        let mut cur = r;
        while let Some(i) = cur.pending_child() {
            cur = cur.child_mut(i);
        }
        self.contract(cur, store)
    }

    /// Applies the reduction rule at `r`, whose context positions all hold
    /// values.
    fn contract(&self, r: &mut Redex, store: &mut Store) -> Result<(), RuntimeError> {
        match r {
            Redex::Val(_) => unreachable!("values are in normal form"),
            Redex::New(c) => {
                let fields = self
                    .fields
                    .get(c.as_str())
                    .ok_or_else(|| RuntimeError::UnknownClass { class: c.clone() })?;
                let oid = store.alloc(ObjectRecord {
                    class: c.clone(),
                    fields: fields.iter().map(|f| (f.to_string(), Value::Nil)).collect(),
                });
                *r = Redex::Val(Value::Oid(oid));
            }
            Redex::Var(x) => return Err(RuntimeError::UnknownVariable { name: x.clone() }),
            Redex::FieldGet { owner, field } => {
                let v = object(store, *owner)
                    .and_then(|o| o.fields.get(field.as_str()).copied())
                    .ok_or_else(|| self.missing_field(store, *owner, field))?;
                *r = Redex::Val(v);
            }
            Redex::FieldSet {
                owner,
                field,
                value,
            } => {
                let v = value
                    .as_value()
                    .expect("pending children are reduced first");
                {
                    let slot = match owner {
                        Value::Oid(o) => store
                            .objects
                            .get_mut(*o as usize)
                            .and_then(|rec| rec.fields.get_mut(field.as_str())),
                        _ => None,
                    };
                    match slot {
                        Some(slot) => *slot = v,
                        None => return Err(self.missing_field(store, *owner, field)),
                    }
                    *r = Redex::Val(v);
                }
            }
            Redex::ObjectSend {
                receiver,
                selector,
                args,
            } => {
                let recv = receiver
                    .as_value()
                    .expect("pending children are reduced first");
                let vals = values(args);
                *r = self.object_send(recv, selector, &vals, store)?;
            }
            Redex::SelfSend {
                owner,
                selector,
                args,
                ..
            } => {
                let vals = values(args);
                *r = self.self_send(*owner, selector, &vals, store)?;
            }
            Redex::SuperSend {
                owner,
                class,
                selector,
                args,
            } => {
                let vals = values(args);
                *r = self.super_send(*owner, class, selector, &vals, store)?;
            }
            Redex::Let { var, bound, body } => {
                let v = bound
                    .as_value()
                    .expect("pending children are reduced first");
                let mut body = std::mem::replace(&mut **body, Redex::Val(Value::Nil));
                body.substitute(var, v);
                *r = body;
            }
        }
        Ok(())
    }

    fn missing_field(&self, store: &Store, owner: Value, field: &str) -> RuntimeError {
        RuntimeError::UnknownField {
            class: object(store, owner).map_or_else(|| OBJECT.to_string(), |o| o.class.clone()),
            field: field.to_string(),
        }
    }

    /// Receiver checks shared by every kind of send: nil receivers and the
    /// integer primitive. Returns the receiver's class for object receivers.
    fn receiver_class<'s>(
        &self,
        recv: Value,
        selector: &str,
        args: &[Value],
        store: &'s Store,
    ) -> Result<Result<&'s str, Value>, RuntimeError> {
        match recv {
            Value::Nil => Err(RuntimeError::NilReceiver {
                selector: selector.to_string(),
            }),
            Value::Int(a) if selector == PLUS => match args {
                [Value::Int(b)] => Ok(Err(Value::Int(a.wrapping_add(*b)))),
                _ => Err(RuntimeError::PrimitiveFailed {
                    selector: selector.to_string(),
                }),
            },
            Value::Int(_) => Err(RuntimeError::DoesNotUnderstand {
                class: INTEGER_CLASS.to_string(),
                selector: selector.to_string(),
            }),
            Value::Oid(o) => Ok(Ok(store
                .get(o)
                .map(|rec| rec.class.as_str())
                .expect("oids index allocated objects"))),
        }
    }

    fn object_send(
        &self,
        recv: Value,
        selector: &str,
        args: &[Value],
        store: &Store,
    ) -> Result<Redex, RuntimeError> {
        let class = match self.receiver_class(recv, selector, args, store)? {
            Ok(c) => c,
            Err(v) => return Ok(Redex::Val(v)),
        };
        let found = self.hierarchy.lookup_public(class, selector).ok().flatten();
        self.activate(recv, class, selector, found, args)
    }

    fn self_send(
        &self,
        recv: Value,
        selector: &str,
        args: &[Value],
        store: &Store,
    ) -> Result<Redex, RuntimeError> {
        let class = match self.receiver_class(recv, selector, args, store)? {
            Ok(c) => c,
            Err(v) => return Ok(Redex::Val(v)),
        };
        let found = self.lookup_any(class, selector);
        self.activate(recv, class, selector, found, args)
    }

    fn super_send(
        &self,
        recv: Value,
        enclosing: &str,
        selector: &str,
        args: &[Value],
        store: &Store,
    ) -> Result<Redex, RuntimeError> {
        let class = match self.receiver_class(recv, selector, args, store)? {
            Ok(c) => c,
            Err(v) => return Ok(Redex::Val(v)),
        };
        let found = self
            .hierarchy
            .superclass(enclosing)
            .ok()
            .flatten()
            .and_then(|start| self.lookup_any(start, selector));
        self.activate(recv, class, selector, found, args)
    }

    /// Closest definition of either visibility: the protected lookup and the
    /// public lookup are both tried and the nearer hit wins.
    fn lookup_any(&self, class: &str, selector: &str) -> Option<(&'p str, &'p MethodDef)> {
        let h = &self.hierarchy;
        let protected = h
            .lookup_where(class, selector, |m| m.visibility == Visibility::Protected)
            .ok()
            .flatten();
        let public = h.lookup_public(class, selector).ok().flatten();
        match (protected, public) {
            (Some(a), Some(b)) => {
                // the nearer class is the one that is a subclass of the other
                if h.subclass_of(a.0, b.0).unwrap_or(false) {
                    Some(a)
                } else {
                    Some(b)
                }
            }
            (a, b) => a.or(b),
        }
    }

    fn activate(
        &self,
        recv: Value,
        receiver_class: &str,
        selector: &str,
        found: Option<(&'p str, &'p MethodDef)>,
        args: &[Value],
    ) -> Result<Redex, RuntimeError> {
        let Some((class, method)) = found else {
            return Err(RuntimeError::DoesNotUnderstand {
                class: receiver_class.to_string(),
                selector: selector.to_string(),
            });
        };
        if method.arity() != args.len() {
            return Err(RuntimeError::ArityMismatch {
                class: class.to_string(),
                selector: selector.to_string(),
                expected: method.arity(),
                got: args.len(),
            });
        }
        let mut body = self.translate(&method.body, recv, class)?;
        for (param, arg) in method.params.iter().zip(args) {
            body.substitute(param, *arg);
        }
        Ok(body)
    }

    /// Runs the main expression until it produces a value, gets stuck or
    /// exhausts `fuel` reduction steps.
    pub fn eval(&self, fuel: u64) -> (Evaluation, Store) {
        self.eval_traced(fuel, &mut |_, _| {})
    }

    /// Like [`Reference::eval`], calling `trace` with every intermediate
    /// redex and its step number.
    pub fn eval_traced(
        &self,
        fuel: u64,
        trace: &mut dyn FnMut(u64, &Redex),
    ) -> (Evaluation, Store) {
        let mut store = Store::default();
        let mut r = match self.initial_redex() {
            Ok(r) => r,
            Err(e) => {
                let outcome = Outcome::RuntimeError(e);
                return (Evaluation { outcome, steps: 0 }, store);
            }
        };
        let mut steps = 0;
        loop {
            trace(steps, &r);
            if let Some(v) = r.as_value() {
                let outcome = Outcome::Value(v);
                return (Evaluation { outcome, steps }, store);
            }
            if steps >= fuel {
                r.dismantle();
                let outcome = Outcome::FuelExhausted;
                return (Evaluation { outcome, steps }, store);
            }
            if let Err(e) = self.reduce(&mut r, &mut store) {
                r.dismantle();
                let outcome = Outcome::RuntimeError(e);
                return (Evaluation { outcome, steps }, store);
            }
            steps += 1;
        }
    }
}

fn object(store: &Store, v: Value) -> Option<&ObjectRecord> {
    match v {
        Value::Oid(o) => store.get(o),
        _ => None,
    }
}

fn values(args: &[Redex]) -> Vec<Value> {
    args.iter()
        .map(|a| a.as_value().expect("arguments are values"))
        .collect()
}

/// Validates and evaluates `program` with the reference semantics.
pub fn eval_program(program: &Program, fuel: u64) -> Result<Evaluation, ValidationReport> {
    Ok(Reference::new(program)?.eval(fuel).0)
}
