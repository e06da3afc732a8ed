//! Two-versus-two beyond-visual-range air-combat simulator with an
//! evolutionary-enhanced, curriculum-driven MAPPO trainer.

pub mod airsim;
pub mod checkpoint;
pub mod config;
pub mod curriculum;
pub mod env;
pub mod error;
pub mod evo;
pub mod harness;
pub mod mappo;
pub mod net;
pub mod replay;
pub mod rng;
pub mod rollout;

pub use error::{Error, Result};
