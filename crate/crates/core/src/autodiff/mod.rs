//! Dense tensors, a reverse-mode tape, gradient checking and Adam.

mod adam;
mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{analytic_gradients, grad_check, max_relative_error, numeric_gradients};
pub use params::{Gradients, ParamId, Parameters};
pub use tape::{NodeId, Tape};
pub use tensor::{mse_value, Tensor};
