//! Certification toolkit for deterministic truthful scheduling on unrelated
//! machines.
//!
//! The crate has three jobs:
//!
//!  1. **Audit** arbitrary allocation mechanisms for weak monotonicity, the
//!     necessary condition for truthfulness ([`truthfulness`]).
//!  2. **Play** the adversarial lower-bound game against a pluggable
//!     mechanism oracle and produce a replayable [`adversary::Certificate`]
//!     proving either a makespan ratio or a monotonicity violation.
//!  3. **Compute** the lower bound `rho(n)` itself, both analytically via
//!     root finding and through an independent grid-search oracle over the
//!     underlying nonlinear program ([`bounds`]).
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats and the CLI
//! live in the companion `schedcert` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adversary;
pub mod bounds;
pub mod instances;
pub mod mechanisms;
pub mod truthfulness;

pub use instances::{
    build_matrix, makespan, optimal_makespan, Allocation, CostMatrix, ExtendedCost, GameParams,
    MatrixKind,
};
pub use mechanisms::Mechanism;
