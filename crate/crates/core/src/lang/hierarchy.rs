//! Class-hierarchy relations over a program: subclassing, member definition
//! and method lookup.

use std::collections::HashMap;

use thiserror::Error;

use super::ast::{ClassDef, MethodDef, Program, Visibility, OBJECT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown class `{0}`")]
pub struct UnknownClass(pub String);

/// Relation oracle built from a program. `Object` is always present as the
/// empty root. Chains stop early on missing or cyclic superclasses, so the
/// oracle can be built for invalid programs too.
#[derive(Debug, Clone)]
pub struct Hierarchy<'p> {
    index: HashMap<&'p str, usize>,
    defs: Vec<Option<&'p ClassDef>>,
    /// For each class, itself followed by its ancestors (Object last when
    /// the chain is well founded).
    chains: Vec<Vec<usize>>,
}

impl<'p> Hierarchy<'p> {
    pub fn new(program: &'p Program) -> Self {
        let mut index = HashMap::new();
        let mut defs: Vec<Option<&ClassDef>> = vec![None];
        index.insert(OBJECT, 0);
        for c in &program.classes {
            if !index.contains_key(c.name.as_str()) {
                index.insert(c.name.as_str(), defs.len());
                defs.push(Some(c));
            }
        }
        let chains = (0..defs.len())
            .map(|start| {
                let mut chain = vec![start];
                let mut cur = start;
                while let Some(def) = defs[cur] {
                    match index.get(def.superclass.as_str()) {
                        Some(&next) if !chain.contains(&next) => {
                            chain.push(next);
                            cur = next;
                        }
                        _ => break,
                    }
                }
                chain
            })
            .collect();
        Hierarchy {
            index,
            defs,
            chains,
        }
    }

    fn id(&self, class: &str) -> Result<usize, UnknownClass> {
        self.index
            .get(class)
            .copied()
            .ok_or_else(|| UnknownClass(class.to_string()))
    }

    fn name(&self, id: usize) -> &'p str {
        self.defs[id].map_or(OBJECT, |d| d.name.as_str())
    }

    pub fn contains(&self, class: &str) -> bool {
        self.index.contains_key(class)
    }

    pub fn class(&self, class: &str) -> Result<Option<&'p ClassDef>, UnknownClass> {
        Ok(self.defs[self.id(class)?])
    }

    /// Every class name, Object first, then declaration order.
    pub fn class_names(&self) -> impl Iterator<Item = &'p str> + '_ {
        (0..self.defs.len()).map(|i| self.name(i))
    }

    pub fn superclass(&self, class: &str) -> Result<Option<&'p str>, UnknownClass> {
        let id = self.id(class)?;
        Ok(self.chains[id].get(1).map(|&s| self.name(s)))
    }

    /// `class` followed by its ancestors, nearest first.
    pub fn chain(&self, class: &str) -> Result<impl Iterator<Item = &'p str> + '_, UnknownClass> {
        let id = self.id(class)?;
        Ok(self.chains[id].iter().map(|&i| self.name(i)))
    }

    pub fn direct_subclass(&self, class: &str, superclass: &str) -> Result<bool, UnknownClass> {
        let (c, s) = (self.id(class)?, self.id(superclass)?);
        Ok(self.chains[c].get(1) == Some(&s))
    }

    /// Reflexive-transitive subclass relation.
    pub fn subclass_of(&self, class: &str, ancestor: &str) -> Result<bool, UnknownClass> {
        let (c, a) = (self.id(class)?, self.id(ancestor)?);
        Ok(self.chains[c].contains(&a))
    }

    /// Classes below `class` (strict descendants), in declaration order.
    pub fn descendants(&self, class: &str) -> Result<Vec<&'p str>, UnknownClass> {
        let a = self.id(class)?;
        Ok((0..self.defs.len())
            .filter(|&c| c != a && self.chains[c].contains(&a))
            .map(|c| self.name(c))
            .collect())
    }

    fn defines(&self, class: &str, selector: &str, vis: Visibility) -> Result<bool, UnknownClass> {
        let id = self.id(class)?;
        Ok(self.defs[id]
            .and_then(|d| d.method(selector))
            .is_some_and(|m| m.visibility == vis))
    }

    pub fn defines_public(&self, class: &str, selector: &str) -> Result<bool, UnknownClass> {
        self.defines(class, selector, Visibility::Public)
    }

    pub fn defines_protected(&self, class: &str, selector: &str) -> Result<bool, UnknownClass> {
        self.defines(class, selector, Visibility::Protected)
    }

    /// All fields of `class` including inherited ones, root-most first.
    pub fn fields_of(&self, class: &str) -> Result<Vec<&'p str>, UnknownClass> {
        let id = self.id(class)?;
        Ok(self.chains[id]
            .iter()
            .rev()
            .filter_map(|&c| self.defs[c])
            .flat_map(|d| d.fields.iter().map(String::as_str))
            .collect())
    }

    /// Closest definition of `selector` at or above `class` accepted by
    /// `accept`, with the class where it was found.
    pub fn lookup_where(
        &self,
        class: &str,
        selector: &str,
        accept: impl Fn(&MethodDef) -> bool,
    ) -> Result<Option<(&'p str, &'p MethodDef)>, UnknownClass> {
        let id = self.id(class)?;
        Ok(self.chains[id].iter().find_map(|&c| {
            let def = self.defs[c]?;
            def.method(selector)
                .filter(|m| accept(m))
                .map(|m| (def.name.as_str(), m))
        }))
    }

    /// Closest definition regardless of visibility.
    pub fn lookup(
        &self,
        class: &str,
        selector: &str,
    ) -> Result<Option<(&'p str, &'p MethodDef)>, UnknownClass> {
        self.lookup_where(class, selector, |_| true)
    }

    /// Closest public definition, skipping protected ones.
    pub fn lookup_public(
        &self,
        class: &str,
        selector: &str,
    ) -> Result<Option<(&'p str, &'p MethodDef)>, UnknownClass> {
        self.lookup_where(class, selector, |m| m.visibility == Visibility::Public)
    }
}
