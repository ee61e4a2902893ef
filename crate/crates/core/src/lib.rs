//! Numerical laboratory for large-N quantum dynamics.
//!
//! * [`on_model`]: exact radial Schrödinger evolution of the O(N) "quantum
//!   roll" model.
//! * [`effpot`]: leading- and next-to-leading-order large-N effective
//!   potential, gap equation, `y_min(N)` and the critical `N_c`.
//! * [`qvlasov`]: Bogoliubov / quantum Vlasov description of pair creation
//!   in an electric field, with Maxwell backreaction and entropy.
//! * [`classicality`]: uncertainty and phase-space correlation indicators.
//! * [`numerics`]: shared integrator, root finder, tridiagonal solver and
//!   quadrature.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classicality;
pub mod effpot;
pub mod numerics;
pub mod on_model;
pub mod qvlasov;

pub use numerics::{ToleranceSpec, Trajectory};
pub use on_model::{LargeNParams, RadialGrid, RadialWavefunction};
pub use qvlasov::{BackgroundField, KineticRecord, ModeState};
