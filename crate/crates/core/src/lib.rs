//! Doubly-periodic solutions of the φ⁴ Klein–Gordon field, coupled
//! field–dimer (polaron) dynamics, fluctuation analysis about classical
//! backgrounds, and conditional density matrices for bipartite quantum states.
//!
//! * [`series`]: exact algebra on truncated double sine series.
//! * [`lindstedt`]: Poincaré–Lindstedt standing waves and their resonance system.
//! * [`elliptic`]: Jacobi-elliptic traveling waves.
//! * [`dynamics`]: Strang-split evolution with energy and momentum diagnostics.
//! * [`fluctuation`]: linearization, Floquet multipliers and zero modes.
//! * [`qcond`]: partial traces and conditional density matrices.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod fluctuation;
pub mod jet;
pub mod lindstedt;
pub mod qcond;
pub mod series;
pub mod spectral;

pub use error::{Error, Result};
pub use jet::FieldJet;
pub use series::SineSeries2D;
