//! Random trigonometric polynomials: sampling, root counting, variance
//! experiments and the analytic constants that govern them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cg;
pub mod charprobe;
pub mod diophantine;
pub mod edgeworth;
pub mod ensemble;
pub mod error;
pub mod mcstats;
pub mod polyeval;
pub mod quad;
pub mod rootcount;

pub use ensemble::{CoefficientSample, DistributionSpec, MomentProfile};
pub use error::{Error, Result};
