//! Randomized value functions: features, value families, the perturbed
//! regularized least-squares solve, backprop and Adam.

mod adam;
mod features;
mod linear;
mod mlp;

pub use adam::AdamState;
pub use features::{features_cartpole4, one_hot};
pub use linear::{regularized_lsq_solve, LinearParams, NormalEquations, RegConfig};
pub use mlp::{glorot_init, q_gradient, MlpParams, MlpShape, MlpWorkspace};

use crate::Result;

/// A value family: per-action values for a feature vector.
pub trait ValueFunction {
    fn n_actions(&self) -> usize;
    fn q_eval(&self, features: &[f64]) -> Result<Vec<f64>>;
}
