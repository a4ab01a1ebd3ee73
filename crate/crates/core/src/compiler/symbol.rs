use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::lang::MANGLING_PREFIX;

/// Interned selector. Ids are dense and only meaningful for the table that
/// produced them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SymbolId(pub u32);

impl fmt::Display for SymbolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("selector `{0}` is already mangled")]
pub struct AlreadyMangled(pub String);

/// One entry per distinct selector text.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    texts: Vec<String>,
    index: HashMap<String, SymbolId>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, text: &str) -> SymbolId {
        if let Some(&id) = self.index.get(text) {
            return id;
        }
        let id = SymbolId(self.texts.len() as u32);
        self.texts.push(text.to_string());
        self.index.insert(text.to_string(), id);
        id
    }

    pub fn get(&self, text: &str) -> Option<SymbolId> {
        self.index.get(text).copied()
    }

    pub fn text(&self, id: SymbolId) -> &str {
        &self.texts[id.0 as usize]
    }

    pub fn is_mangled(&self, id: SymbolId) -> bool {
        self.text(id).starts_with(MANGLING_PREFIX)
    }

    /// Interns the mangled form of `id`.
    pub fn mangle(&mut self, id: SymbolId) -> Result<SymbolId, AlreadyMangled> {
        let text = self.text(id);
        if text.starts_with(MANGLING_PREFIX) {
            return Err(AlreadyMangled(text.to_string()));
        }
        let mangled = format!("{MANGLING_PREFIX}{text}");
        Ok(self.intern(&mangled))
    }

    /// The plain form of a mangled symbol, if it has been interned.
    pub fn unmangled(&self, id: SymbolId) -> Option<SymbolId> {
        self.text(id)
            .strip_prefix(MANGLING_PREFIX)
            .and_then(|t| self.get(t))
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (SymbolId, &str)> {
        self.texts
            .iter()
            .enumerate()
            .map(|(i, t)| (SymbolId(i as u32), t.as_str()))
    }
}
