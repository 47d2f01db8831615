//! Minimal reverse-mode differentiable computation engine, sized to the
//! models in this crate: a dense-tensor tape, ADAM with a one-cycle
//! schedule, gradient accumulation, and checkpoint I/O.

pub mod checkpoint;
pub mod kernels;
pub mod optim;
pub mod params;
pub mod tape;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use optim::{Adam, GradAccumulator, OneCycle};
pub use params::{Param, ParamSet};
pub use tape::{Tape, Var, LAYERNORM_EPS};
