//! Good-lattice-point sampling and a small physics-informed network trainer.

pub mod domains;
pub mod error;
pub mod lowdisc;
pub mod net;
pub mod optim;
pub mod problems;
pub mod qmcbench;
pub mod train;

pub use error::{Error, Result};
