//! Numerical engine for magnetic pseudodifferential calculus over torus hulls.
//!
//! The hull is a torus `T^d` carrying a linear (Kronecker) flow of `R^n`;
//! coefficient functions are finite Fourier series, magnetic fields are
//! antisymmetric matrices of such functions, and on top of that the crate
//! builds magnetic fluxes and 2-cocycles, twisted crossed-product and
//! magnetic Moyal products, covariant Hilbert-space representations on a
//! grid of `L²(X)`, and a desk-scale audit of the strict-deformation
//! quantization axioms together with the `O(ħ²)` product expansion.
//!
//! Modules follow the layering of the theory:
//!
//! - [`hull`] — the dynamical system, hull functions, exact translation and
//!   derivation operators, seminorms, stabilizer search.
//! - [`flux`] — magnetic fields, triangle fluxes, the scaled flux and its
//!   ε-derivatives, cocycles and their identities, gauge/Stokes checks.
//! - [`symbols`] — Schwartz-type symbols with a dual backing store
//!   (analytic atoms / sampled mode×grid tensors), partial Fourier
//!   transform, weighted seminorms, involution.
//! - [`algebra`] — the untwisted and magnetic twisted products, the magnetic
//!   Moyal product, Poisson brackets in both realizations, the semiclassical
//!   expansion remainder, and the L¹ norm surrogate.
//! - [`representation`] — kernel matrices for the covariant representations,
//!   intertwiners, equivariance and morphism defects, norm estimation.
//! - [`audit`] — quantization-axiom sweeps, slope fits, consolidated
//!   reporting.
//! - [`config`] — JSON descriptors and the run configuration shared with the
//!   `magweyl` CLI.

pub mod algebra;
pub mod audit;
pub mod config;
pub mod error;
pub mod flux;
pub mod hull;
pub mod numerics;
pub mod representation;
pub mod symbols;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
