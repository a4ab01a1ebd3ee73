//! Execution of runtime images with a single visibility-blind method lookup,
//! a global lookup cache and per-site inline caches.

mod cache;
mod machine;

pub use cache::{
    probe_slot, CacheStats, GlobalCache, IcHistogram, InlineCache, GLOBAL_CACHE_SIZE,
    POLYMORPHIC_LIMIT, PROBES,
};
pub use machine::{default_lookup, run_image, RunConfig, Runtime};
