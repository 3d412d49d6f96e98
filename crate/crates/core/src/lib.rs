//! Relative spectral perturbation theory for dense real symmetric matrices.
//!
//! The crate models a selfadjoint operator `H` and a symmetric perturbation
//! `A` by dense matrices and provides
//!
//! * the operator calculus the rest is built on ([`operator`]),
//! * compression of `A` against `H₁ = a + b|H|` and the relative bound
//!   constants ([`relative_form`]),
//! * the form-sum, resolvent and block (Schur complement) constructions
//!   ([`constructions`]),
//! * interval arithmetic for spectral inclusion windows ([`inclusion`]),
//! * eigenvalue tracking along `H + εA` and two-sided enclosures
//!   ([`tracker`]),
//! * Matrix Market / plain text matrix IO ([`io`]).

pub mod constructions;
pub mod error;
pub mod inclusion;
pub mod io;
pub mod operator;
pub mod relative_form;
pub mod tracker;

pub use error::{Error, Result};
pub use operator::{EigenSystem, SignSplit, SpectralGap, SymmetricOperator, ZeroPolicy};
pub use relative_form::{BoundPair, CompressedPerturbation, FactoredPerturbation};
