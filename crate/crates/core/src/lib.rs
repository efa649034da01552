//! Divisor sums over reducible binary cubic forms.
//!
//! Sieves and triple Dirichlet convolutions ([`arith`]), linear form
//! triples and planar regions ([`forms`]), congruence lattices and their
//! densities ([`lattice`]), Euler-product constants ([`series`]), direct
//! divisor sums ([`sums`]), bilinear point counts ([`bilinear`]) and the
//! experiment layer ([`fit`], [`experiment`], [`report`], [`config`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arith;
pub mod bilinear;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod forms;
pub mod lattice;
pub mod report;
pub mod series;
pub mod sums;

pub use error::{Error, Result};
