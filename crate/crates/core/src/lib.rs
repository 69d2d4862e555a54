//! Noncoherent space-time block codes built from qudit stabilizer codes.
//!
//! The crate covers the clock/shift operator algebra ([`gpauli`]), the
//! stabilizer code and its recovery operators ([`stab`]), symbol codebooks
//! ([`codebook`]), the block-fading Rayleigh channel ([`channel`]), the
//! encoder and maximum-likelihood decoder ([`codec`]) and a reproducible
//! Monte Carlo engine for bit-error-rate curves ([`simkit`]).

pub mod channel;
pub mod cli;
pub mod codebook;
pub mod codec;
pub mod config;
pub mod error;
pub mod gpauli;
pub mod linalg;
pub mod simkit;
pub mod stab;
pub mod verify;

pub use config::CodeConfig;
pub use error::{Error, Result};
pub use stab::StabilizerCode;
