//! Numerics for market-driven voluntary disclosure.
//!
//! The crate values a silent firm from a traded tracker (market sentiment),
//! solves for the optimal censoring threshold that becomes the firm's new
//! target, and computes the comparative statics of early disclosure. Every
//! closed form is paired with a Monte Carlo path oracle in [`oracle`].

pub mod censor;
pub mod error;
pub mod oracle;
pub mod output;
pub mod process;
pub mod profits;
pub mod quadrature;
pub mod rules;
pub mod scenario;
pub mod sentiment;
pub mod specialfn;
pub mod statics;
pub mod verify;

pub use error::{Error, ErrorKind, Result};
