//! Rule-keyed module networks assembled per sentence from its parse.

mod check;
mod checkpoint;
mod module;
mod registry;

pub use check::module_grad_check;
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, MAGIC, VERSION};
pub use module::{module_forward, slot, Architecture, ModuleParams};
pub use registry::{compose_sentence, compose_sentence_lazy, required_modules, ModuleRegistry};

pub(crate) use module::derive_seed;
