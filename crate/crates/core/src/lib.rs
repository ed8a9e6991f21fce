//! Refutation certificates for semirandom k-LIN over finite fields and
//! finite Abelian groups.
//!
//! The crate provides exact domain arithmetic ([`algebra`]), the k-LIN
//! instance model with generators and evaluation ([`instance`]), Kikuchi
//! matrix construction and spectral bounds ([`kikuchi`]), the certified
//! refutation pipelines ([`refute`]), the brute-force local refuter
//! ([`simple`]), short-linear-dependency mining ([`deps`]), and max-entropy
//! pseudo-expectations with their verifier ([`sos`]).

pub mod algebra;
pub mod combin;
pub mod deps;
pub mod error;
pub mod instance;
pub mod kikuchi;
pub mod refute;
pub mod simple;
pub mod sos;

pub use error::{KlinError, Result};

/// Default cap on Kikuchi vertex-space size; override with `KLIN_CAP_N`.
pub const DEFAULT_CAP_N: u128 = 1 << 21;

/// Default cap on |G|^n for exhaustive assignment enumeration.
pub const DEFAULT_CAP_BRUTE: u128 = 1 << 22;

/// Effective vertex-space cap, honoring the `KLIN_CAP_N` environment override.
pub fn cap_n() -> u128 {
    std::env::var("KLIN_CAP_N")
        .ok()
        .and_then(|v| v.parse::<u128>().ok())
        .unwrap_or(DEFAULT_CAP_N)
}
