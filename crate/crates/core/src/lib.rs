//! Numerical accessibility laboratory for partially hyperbolic skew products
//! `F(x, y) = (A x, g_x(y))` over linear Anosov maps of the 2-torus with
//! area-preserving fiber maps on a 2-torus fiber.
//!
//! Modules, bottom-up:
//! - [`torus`]: points, minimal images and radial bumps.
//! - [`anosov`]: the base map, leaves, bracket, periodic points, quadrilaterals.
//! - [`fiber`]: fiber map families, cocycles, domination/bunching certificates.
//! - [`holonomy`]: stable/unstable fiber holonomies and su-path projections.
//! - [`accessibility`]: loop maps, fixed points, class exploration, classification.
//! - [`perturbation`]: Hamiltonian bump translations and trivial-class destruction.
//! - [`monotone`]: exact bounded-variation and monotone fixed-set algorithms.
//! - [`ergodic`]: Birkhoff-average and shadowing probes.

// `!(a < b)` is used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accessibility;
pub mod anosov;
pub mod ergodic;
pub mod error;
pub mod fiber;
pub mod holonomy;
pub mod monotone;
pub mod perturbation;
pub mod torus;

pub use error::{Error, Result};
