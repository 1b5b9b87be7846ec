//! Likelihood-based bootstrap confidence regions for the operating conditions
//! that maximize a fitted second-order response surface over a rectangular
//! experimental region.
//!
//! The pipeline is:
//!
//! 1. fit the six-parameter quadratic by least squares ([`model::fit`]);
//! 2. locate the constrained maximum with a clamped Nelder–Mead simplex
//!    ([`optim::constrained_max`]);
//! 3. build a balanced residual-bootstrap cloud of maximizers
//!    ([`bootstrap::bootstrap_xcm`]);
//! 4. pick bandwidths ([`bandwidth`]) and fit a boundary-corrected biweight
//!    product-kernel density to the cloud ([`kde::DensityEstimate`]);
//! 5. threshold the density at the level capturing `(1 - alpha) * b` cloud
//!    points and render the region as contour polygons ([`region`]).
//!
//! [`sim`] wraps the whole thing in a Monte Carlo coverage harness.

pub mod bandwidth;
pub mod bootstrap;
pub mod contour;
mod error;
pub mod kde;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod region;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
