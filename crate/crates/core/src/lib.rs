//! Shot-noise sums `S = Σ R_k^{−γ}` over a homogeneous Poisson process in
//! `ℝ^d`: tail-sum cumulants, exponential tilting, Edgeworth density
//! expansions, a characteristic-function inversion oracle, the conditional
//! density of the nearest radius given the total, and Gibbs samplers for the
//! conditional point configuration.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditional;
pub mod edgeworth;
pub mod error;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod sampler;
pub mod special;
pub mod tilt;

pub use error::{Error, Result};
pub use model::ModelParams;
pub use tilt::{solve_xi, TiltState};
