use serde::Serialize;

use crate::compiler::{ClassId, CompiledMethod, SymbolId};

/// Number of slots in the global lookup cache.
pub const GLOBAL_CACHE_SIZE: usize = 1024;

/// Slots consulted per lookup before falling back to the slow path.
pub const PROBES: usize = 3;

/// Entries a polymorphic inline cache holds before going megamorphic.
pub const POLYMORPHIC_LIMIT: usize = 6;

/// First probe slot of a key: the top ten bits of a multiplicative mix of
/// both ids. Later probes are the following slots, wrapping around.
pub fn probe_slot(class: ClassId, symbol: SymbolId) -> usize {
    let h = class.0.wrapping_mul(0x9E37_79B1) ^ symbol.0.wrapping_mul(0x85EB_CA77);
    (h >> 22) as usize
}

#[derive(Debug, Clone, Copy)]
struct Slot<'i> {
    class: ClassId,
    symbol: SymbolId,
    method: &'i CompiledMethod,
}

/// Fixed-size hash table from (receiver class, symbol) to method.
#[derive(Debug, Clone)]
pub struct GlobalCache<'i> {
    slots: Vec<Option<Slot<'i>>>,
}

impl Default for GlobalCache<'_> {
    fn default() -> Self {
        GlobalCache {
            slots: vec![None; GLOBAL_CACHE_SIZE],
        }
    }
}

impl<'i> GlobalCache<'i> {
    fn probes(class: ClassId, symbol: SymbolId) -> impl Iterator<Item = usize> {
        let h0 = probe_slot(class, symbol);
        (0..PROBES).map(move |i| (h0 + i) % GLOBAL_CACHE_SIZE)
    }

    /// The cached method and the probe (0-based) that found it.
    pub fn probe(&self, class: ClassId, symbol: SymbolId) -> Option<(usize, &'i CompiledMethod)> {
        Self::probes(class, symbol).enumerate().find_map(|(i, s)| {
            self.slots[s]
                .filter(|slot| slot.class == class && slot.symbol == symbol)
                .map(|slot| (i, slot.method))
        })
    }

    /// Stores a lookup result in the first free probe slot, evicting the
    /// first probe slot when all are taken.
    pub fn install(&mut self, class: ClassId, symbol: SymbolId, method: &'i CompiledMethod) {
        let target = Self::probes(class, symbol)
            .find(|&s| self.slots[s].is_none())
            .unwrap_or_else(|| probe_slot(class, symbol));
        self.slots[target] = Some(Slot {
            class,
            symbol,
            method,
        });
    }

    pub fn flush(&mut self) {
        self.slots.iter_mut().for_each(|s| *s = None);
    }

    pub fn occupied(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }
}

/// Per-site cache of receiver class to method.
#[derive(Debug, Clone, Default)]
pub enum InlineCache<'i> {
    #[default]
    Empty,
    Monomorphic(ClassId, &'i CompiledMethod),
    Polymorphic(Vec<(ClassId, &'i CompiledMethod)>),
    Megamorphic,
}

impl<'i> InlineCache<'i> {
    pub fn find(&self, class: ClassId) -> Option<&'i CompiledMethod> {
        match self {
            InlineCache::Monomorphic(c, m) if *c == class => Some(m),
            InlineCache::Polymorphic(entries) => {
                entries.iter().find(|(c, _)| *c == class).map(|(_, m)| *m)
            }
            _ => None,
        }
    }

    /// Records a lookup result; returns whether an entry was added.
    pub fn record(&mut self, class: ClassId, method: &'i CompiledMethod) -> bool {
        if self.find(class).is_some() {
            return false;
        }
        match self {
            InlineCache::Empty => *self = InlineCache::Monomorphic(class, method),
            InlineCache::Monomorphic(c, m) => {
                *self = InlineCache::Polymorphic(vec![(*c, *m), (class, method)]);
            }
            InlineCache::Polymorphic(entries) if entries.len() < POLYMORPHIC_LIMIT => {
                entries.push((class, method));
            }
            InlineCache::Polymorphic(_) => *self = InlineCache::Megamorphic,
            InlineCache::Megamorphic => return false,
        }
        !matches!(self, InlineCache::Megamorphic)
    }
}

/// Number of inline caches in each non-empty state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IcHistogram {
    pub mono: u64,
    pub poly: u64,
    pub mega: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub probe1: u64,
    pub probe2: u64,
    pub probe3: u64,
    pub misses: u64,
    #[serde(rename = "distinctKeys")]
    pub distinct_keys: u64,
    pub ic: IcHistogram,
    /// Global-cache consultations.
    #[serde(skip)]
    pub global_lookups: u64,
    /// Lookups requested by sends to objects, whatever answered them.
    #[serde(skip)]
    pub lookups: u64,
    #[serde(skip)]
    pub ic_hits: u64,
    #[serde(skip)]
    pub ic_fills: u64,
    /// Cached answers that differed from an uncached lookup.
    #[serde(skip)]
    pub shadow_mismatches: u64,
}

impl CacheStats {
    pub fn hits(&self) -> u64 {
        self.probe1 + self.probe2 + self.probe3
    }

    /// Probe 1, 2 and 3 hit and miss shares of all global-cache
    /// consultations, in percent.
    pub fn percentages(&self) -> [f64; 4] {
        let total = self.global_lookups.max(1) as f64;
        [self.probe1, self.probe2, self.probe3, self.misses].map(|n| 100.0 * n as f64 / total)
    }
}
