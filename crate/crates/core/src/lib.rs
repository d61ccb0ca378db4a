//! Multi-agent tumor-board consensus engine with reinforcement-learned
//! moderation.
//!
//! Numeric kernels (matrix statistics, networks) are generic over
//! [`Scalar`]; the simulator runs in `f64`. The aliases below name the
//! concrete instantiations.

pub mod agents;
pub mod config;
pub mod consensus;
pub mod domain;
pub mod error;
pub mod evidence;
pub mod rl;
pub mod rng;
pub mod scalar;
pub mod sim;

pub use config::AppConfig;
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix64 = domain::Matrix<f64>;
pub type Matrix32 = domain::Matrix<f32>;
pub type ConsensusMatrix64 = domain::ConsensusMatrix<f64>;
pub type ConsensusMatrix32 = domain::ConsensusMatrix<f32>;
pub type Mlp64 = rl::Mlp<f64>;
pub type Mlp32 = rl::Mlp<f32>;
