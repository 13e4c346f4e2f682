//! Deterministic federated-learning simulator.
//!
//! The server keeps a reference direction and measures how far each client
//! update diverges from it. Updates are then pulled toward the reference in
//! proportion to that divergence ([`drag`]). A Byzantine-robust variant
//! builds the reference from a small trusted root dataset instead.
//! Classic baselines ([`baselines`]), client attacks ([`attacks`]) and a
//! reproducible round loop ([`engine`]) complete the toolkit.

pub mod attacks;
pub mod baselines;
pub mod drag;
pub mod engine;
pub mod error;
pub mod rng;
pub mod tasks;
pub mod vecmath;

pub use error::{Error, Result};
pub use vecmath::ParamVector;
pub mod verify;

#[cfg(feature = "io")]
pub mod io;
