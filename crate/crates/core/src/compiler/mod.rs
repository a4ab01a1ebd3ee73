//! Lowering of programs into runtime images: self- and super-send selector
//! mangling, double registration of public methods and incremental method
//! installation.

mod code;
mod image;
mod symbol;

pub use code::{ClassId, Code, CompiledMethod, SendKind, SendSite, SiteId, SiteTag};
pub use image::{
    compile_program, desugar, install_method, protection_roots, rewrite_body, rewrite_scope,
    unreachable_protected_sends, ClassImage, ClassLayout, CompileError, CompileMode, DeferredSite,
    EntryLayout, ImageLayout, InstallError, MainCode, MethodDictionary, RuntimeImage,
};
pub use symbol::{AlreadyMangled, SymbolId, SymbolTable};
