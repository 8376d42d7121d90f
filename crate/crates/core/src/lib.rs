//! Adaptive signal control for a pedestrian-heavy urban corridor.

pub mod demand;
pub mod env;
pub mod error;
pub mod eval;
pub mod microsim;
pub mod network;
pub mod ppo;
pub mod signal;

pub use error::{Error, Result};
