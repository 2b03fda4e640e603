//! Numerical evolution of 2+1 dimensional wave maps into the unit sphere,
//! together with a double-null diagnostic harness.
//!
//! The solver integrates `□φ = φ·Q₀(∇φ,∇φ)` for `φ: R^{2+1} → S² ⊂ R³` on a
//! uniform Cartesian grid (leapfrog with pointwise sphere projection). The
//! diagnostic side reconstructs outgoing/incoming null cones from the Cauchy
//! evolution and measures the norm hierarchy, flux balances, null-form
//! cancellations and Sobolev-type inequalities that control short-pulse data,
//! across sweeps of the pulse width δ.

pub mod analytic;
pub mod conediag;
pub mod config;
pub mod error;
pub mod evolve;
pub mod fit;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod jet;
pub mod nullform;
pub mod pulse;
pub mod snapshot;
pub mod sobolev;
pub mod vec3;

pub use error::{Error, Result};
pub use vec3::V3;
