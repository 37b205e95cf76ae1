//! Dense f64 tensor engine with reverse-mode differentiation.
//!
//! Built for small-graph recurrent and attention models: a fresh [`Tape`] is
//! recorded per training step, parameters persist in a [`ParamStore`] across
//! steps, and [`gradient_check`] verifies any scalar-valued builder against
//! central finite differences.

mod check;
mod error;
mod init;
mod optim;
mod params;
mod tape;

pub use check::gradient_check;
pub use error::{Result, TensorError};
pub use init::{glorot_uniform, uniform};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{Ctx, ParamId, ParamStore};
pub use tape::{Tape, Value};
