//! Analysis toolkit for multicarrier operation of a nonlinear satellite
//! transponder.
//!
//! The library models the classic chain: root-raised-cosine pulse shaping,
//! a Saleh travelling-wave-tube amplifier, and the output multiplexer's
//! gain/group-delay slopes. From that it derives first- and third-order
//! Volterra kernel tables, closed-form carrier-to-interference ratios with
//! an intersymbol/adjacent-channel breakdown, and a Monte Carlo reference
//! chain used to validate the formulas. A small allocator searches carrier
//! permutations for the max-min CIR placement.
//!
//! Evaluation modes follow the usual trade-off: `TH1` computes kernels per
//! call, `TH2` reuses a persistent kernel cache, `SIM` runs the waveform
//! chain end to end.

pub mod aci;
pub mod allocator;
pub mod cir;
pub mod error;
pub mod hpa;
pub mod kernels;
pub mod moments;
pub mod omux;
pub mod pulse;
pub mod scenario;
pub mod simchain;

pub use error::{Error, Result};
