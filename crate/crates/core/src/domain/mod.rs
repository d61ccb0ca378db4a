//! Data model shared by every other module.

mod audit;
mod case;
mod evidence;
mod matrix;
mod opinion;
mod role;
mod state;
mod treatment;

pub use audit::*;
pub use case::*;
pub use evidence::*;
pub use matrix::*;
pub use opinion::*;
pub use role::*;
pub use state::*;
pub use treatment::*;
