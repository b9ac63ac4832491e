//! Matrix completion by deep matrix factorization with a learned
//! Dirichlet-energy regularizer, plus baselines and numerical checks of the
//! training dynamics.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod dmf;
pub mod error;
pub mod matrix;
pub mod reg;
pub mod rng;
pub mod svd;
pub mod theory;
pub mod train;

pub use data::{GroundTruth, MaskKind, SamplingMask, Which};
pub use dmf::{FactorChain, InitScheme};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use reg::{LaplacianPair, Parameterization, RegParam, Transform};
pub use rng::SeededRng;
pub use svd::{svd, Svd};
pub use train::{ModelState, Optimizer, TrainConfig};
