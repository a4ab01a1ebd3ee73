use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;

use crate::compiler::{compile_program, CompileError, CompileMode, RuntimeImage};
use crate::lang::Program;

/// Modelled cost of one dictionary entry.
pub const ENTRY_BYTES: u64 = 16;
/// Modelled fixed cost of one symbol, on top of its text length.
pub const SYMBOL_HEADER_BYTES: u64 = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MemoryReport {
    /// Dictionary entries per class.
    pub per_class: BTreeMap<String, usize>,
    pub total_entries: usize,
    /// Distinct dictionary keys without the mangling prefix.
    pub plain_symbols: usize,
    /// Distinct dictionary keys with the mangling prefix.
    pub mangled_symbols: usize,
    /// Distinct compiled methods; double registration does not add any.
    pub compiled_methods: usize,
    pub dictionary_bytes: u64,
    pub symbol_bytes: u64,
}

impl MemoryReport {
    pub fn symbols(&self) -> usize {
        self.plain_symbols + self.mangled_symbols
    }

    pub fn estimated_bytes(&self) -> u64 {
        self.dictionary_bytes + self.symbol_bytes
    }
}

/// Counts dictionary entries, symbols and compiled methods of `img`.
pub fn measure_image(img: &RuntimeImage) -> MemoryReport {
    let mut per_class = BTreeMap::new();
    let mut keys = BTreeSet::new();
    let mut methods: Vec<*const crate::compiler::CompiledMethod> = Vec::new();
    for class in img.classes().iter().skip(1) {
        per_class.insert(class.name.clone(), class.dictionary.len());
        for (sym, m) in class.dictionary.iter() {
            keys.insert(sym);
            methods.push(Arc::as_ptr(m));
        }
    }
    methods.sort();
    methods.dedup();
    let symbols = img.symbols();
    let mangled_symbols = keys.iter().filter(|&&s| symbols.is_mangled(s)).count();
    let total_entries: usize = per_class.values().sum();
    let symbol_bytes = keys
        .iter()
        .map(|&s| SYMBOL_HEADER_BYTES + symbols.text(s).len() as u64)
        .sum();
    MemoryReport {
        per_class,
        total_entries,
        plain_symbols: keys.len() - mangled_symbols,
        mangled_symbols,
        compiled_methods: methods.len(),
        dictionary_bytes: total_entries as u64 * ENTRY_BYTES,
        symbol_bytes,
    }
}

/// Worst-case image over baseline image, for entries, symbols and modelled
/// bytes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstCaseRatios {
    pub dictionaries: f64,
    pub symbols: f64,
    pub total: f64,
}

pub fn worst_case_ratios(p: &Program) -> Result<WorstCaseRatios, CompileError> {
    let worst = measure_image(&compile_program(p, CompileMode::WorstCase)?);
    let base = measure_image(&compile_program(p, CompileMode::Baseline)?);
    let ratio = |a: f64, b: f64| if b == 0.0 { 1.0 } else { a / b };
    Ok(WorstCaseRatios {
        dictionaries: ratio(worst.total_entries as f64, base.total_entries as f64),
        symbols: ratio(worst.symbols() as f64, base.symbols() as f64),
        total: ratio(
            worst.estimated_bytes() as f64,
            base.estimated_bytes() as f64,
        ),
    })
}
