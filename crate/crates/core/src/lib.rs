//! Disturbance observers with reset elements: frequency-domain design,
//! describing functions, stability under sinusoidal input and hybrid
//! time-domain simulation.

pub mod analysis;
pub mod arch;
pub mod config;
pub mod error;
pub mod export;
pub mod models;
pub mod numlin;
pub mod reset;
pub mod sim;
pub mod stab;

pub use error::{Error, Result};
