//! Physics-constrained data-driven hyperelasticity.
//!
//! The strain energy of an incompressible material is expanded as a sum of
//! convex, non-decreasing scalar functions of normalized invariants and of
//! convex blends of pairs of them (mixed invariants). Each scalar function is
//! backed by one of three model families:
//!
//! - [`cann`]: a fixed polynomial/exponential expansion with non-negative weights,
//! - [`icnn`]: an input-convex network with softplus² activations,
//! - [`node`]: the time-one flow map of a learned scalar ODE, which interpolates
//!   the energy derivative directly.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, benchmark
//! orchestration and the command-line tool live in the `polyfit` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bench;
pub mod cann;
pub mod data;
mod error;
pub mod icnn;
pub mod kinematics;
pub mod loading;
pub mod node;
pub mod potential;
mod rng;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use rng::derive_seed;
