//! Simulation and numerical verification for semiflows with jumps:
//! piecewise-deterministic Markov processes driven by a deterministic
//! flow, a state-dependent jump intensity, and a parametrized family of
//! jump transformations.
//!
//! The crate provides
//! - exact trajectory and embedded-chain simulation with explosion
//!   detection ([`simulate`]),
//! - deterministic quadrature oracles for the embedded-chain kernel
//!   ([`kernel`]),
//! - Jacobian rank certificates for the smoothing conditions ([`rank`]),
//! - Foster-Lyapunov drift verification ([`drift`]),
//! - invariant-density estimation and stability diagnostics ([`density`]),
//! - built-in model instances, flagshipped by a two-dimensional gene
//!   expression model with bursting ([`models`]).
//!
//! The crate is `no_std`-compatible (with `alloc`); everything involving
//! files, configuration, and parallel drivers lives in the companion CLI
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod density;
pub mod drift;
pub mod error;
pub mod flow;
pub mod intensity;
pub mod jump;
pub mod kernel;
pub mod model;
pub mod models;
pub mod numeric;
pub mod rank;
pub mod simulate;
pub mod state;
pub mod stats;

pub use error::{CoreError, Result};
pub use flow::{FlowKind, Semiflow};
pub use intensity::Intensity;
pub use jump::{JumpDerivatives, JumpFamily, Theta, ThetaSampler, ThetaSpace};
pub use model::{HazardCrossing, PdmpModel};
pub use state::{ReferenceMeasure, State, StateSpace, MAX_DIM};
