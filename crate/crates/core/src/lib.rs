//! Certified reduced-basis solver for parametrized non-symmetric generalized
//! eigenvalue problems of the form `A_mu u = lambda B_mu u`, targeting the
//! eigenvalue of smallest modulus and its effective multiplication factor
//! `k = 1/lambda`.
//!
//! The crate provides:
//! - sparse/dense eigensolvers by inverse power iteration plus a dense
//!   full-spectrum oracle ([`linalg`]),
//! - a two-group neutron-diffusion high-fidelity model generator with affine
//!   parameter decomposition ([`hifi`]),
//! - reduced-basis data structures and Galerkin eigensolves ([`rom`]),
//! - a posteriori estimators and prefactor analysis ([`estimators`]),
//! - exact online residual norms from offline factorizations ([`residual`]),
//! - the greedy offline training loop ([`greedy`]),
//! - persistence (Matrix Market, CSV, manifests) and the CLI driver
//!   ([`persist`], [`config`], [`driver`]).

pub mod config;
pub mod driver;
pub mod estimators;
pub mod greedy;
pub mod hifi;
pub mod linalg;
pub mod persist;
pub mod residual;
pub mod rom;
