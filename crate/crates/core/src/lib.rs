#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod backward;
pub mod dissipation;
pub mod entropy;
pub mod error;
pub mod initial;
pub mod monte_carlo;
pub mod presets;
pub mod quad;
pub mod rng;
pub mod runner;
pub mod stats;
pub mod transport;
pub mod viscous;

pub use error::{Error, Result};
