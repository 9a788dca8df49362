//! Desk-scale numerical laboratory for the product Hardy space
//! `H^1_{L1,L2}` of a pair of one-dimensional non-negative self-adjoint
//! operators with Gaussian heat-kernel bounds.
//!
//! Everything lives on finite grids: the two spatial axes are uniform cell
//! grids, the two scale variables run over geometric grids with `dt/t`
//! weights, and all operators are dense matrices handled through their
//! full eigendecompositions.  The crate provides
//!
//! * dyadic product geometry (maximal subrectangles, strong maximal
//!   function, Journé sums) in [`grid`],
//! * one-axis spectral calculus (heat/wave kernels, Gaussian-bound fits,
//!   propagation diagnostics) in [`operator`],
//! * tensor and joint functional calculus on the product grid in
//!   [`product`],
//! * the product area integral and tent-space functionals in [`square`],
//! * tent-space and Hardy atomic decompositions in [`atomic`],
//! * singular-integral kernel-condition checkers and Riesz transforms in
//!   [`singular`],
//! * Marcinkiewicz-type joint spectral multipliers in [`multiplier`].

pub mod atomic;
pub mod constants;
mod error;
pub mod grid;
pub mod multiplier;
pub mod operator;
pub mod product;
pub mod report;
pub mod singular;
pub mod square;
pub(crate) mod util;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
