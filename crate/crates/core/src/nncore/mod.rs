//! Dense numeric core: matrices, affine/activation/softmax ops with their
//! hand-written backward passes, optimizers, seeded initialization, and a
//! central-difference gradient oracle.

mod dd;
mod finite_diff;
mod matrix;
mod ops;
mod optim;
mod params;
mod rng;

pub use dd::DoubleDouble;
pub use finite_diff::{finite_difference_grad, max_relative_error, relative_error};
pub use matrix::Matrix;
pub use ops::{
    concat_cols, dense_backward, dense_forward, relu, relu_backward, softmax_rows, split_cols, Dense,
};
pub use optim::{Adam, Optimizer, Sgd};
pub use params::{Param, ParamId, ParameterSet};
pub use rng::Rng;
