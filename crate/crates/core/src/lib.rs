//! Multi-robot active target tracking with unknown occlusions.
//!
//! The crate is organised bottom-up: [`world`] holds ground truth and kinematics, [`sensing`]
//! turns it into noisy observations, [`tracking`] maintains each agent's estimate and the shared
//! occlusion map, [`planning`] scores and optimises receding-horizon plans, [`behavior`] mines
//! traces for cooperative patterns, and [`harness`] wires it all into seeded trials, batches and
//! exporters.

pub mod behavior;
pub mod error;
pub mod harness;
pub mod planning;
pub mod rng;
pub mod sensing;
pub mod tracking;
pub mod world;

pub use error::{Error, Result};
