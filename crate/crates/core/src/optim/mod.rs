//! Full-batch optimizers over flat parameter vectors.

mod adam;
mod lbfgs;

pub use adam::AdamState;
pub use lbfgs::{LbfgsState, LbfgsStep};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
