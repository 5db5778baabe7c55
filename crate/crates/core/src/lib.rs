//! Adaptive CoMP zero-forcing beamforming in multi-tier heterogeneous
//! networks with delayed, quantized overhead messages.
//!
//! - [`net`]: PPP tiers, association, coordination-set selection.
//! - [`fading`]: Rayleigh gains under ZF, RVQ leakage.
//! - [`overhead`]: lifetime/delay/window model, link states, E[δ], COS time fraction.
//! - [`sir`]: SIR Monte Carlo and analytic CCDF bounds.
//! - [`throughput`]: ergodic throughput from CCDFs or Monte Carlo.
//! - [`experiment`]: scenario configs, sweeps, CSV/JSON output.

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod fading;
pub mod net;
pub mod numeric;
pub mod overhead;
pub mod sir;
pub mod throughput;

pub use error::{Error, Result};
