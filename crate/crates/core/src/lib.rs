//! Core numerics for gravitationally induced entanglement (GIE) studies:
//! two delocalized massive particles behind an electromagnetic shield, with
//! Casimir / magnetic-dipole couplings, geometric run-to-run noise, trap
//! fluctuations, and thermally populated shield vibrations.
//!
//! Layout:
//! - [`constants`], [`materials`], [`geometry`], [`params`]: scalar inputs and
//!   closed-form estimators (couplings, shield sizing, squeezing bounds).
//! - [`jet`], [`hamiltonians`]: second-order expansions of the exact
//!   potentials into labeled quadratic forms.
//! - [`linalg`], [`quadrature`], [`bessel`]: dense numerics shared by the
//!   engines.
//! - [`gaussian`], [`negativity`]: covariance-matrix propagation, ensemble
//!   averaging, Markovian diffusion, and logarithmic negativity.
//! - [`cat`]: analytic two-level cat-state evolution and dephasing.
//! - [`fock`]: continuous cat states in a truncated number basis.
//! - [`shield`]: modal analysis of the circular shield plate.

pub mod bessel;
pub mod cat;
pub mod constants;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod geometry;
pub mod hamiltonians;
pub mod jet;
pub mod linalg;
pub mod materials;
pub mod negativity;
pub mod params;
pub mod quadrature;
pub mod shield;

pub use error::{CoreError, Result};
