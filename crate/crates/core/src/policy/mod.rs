//! Parametric stochastic policies over a cubic polynomial state basis.
//!
//! The market maker uses a diagonal bivariate Normal over the reservation
//! offset and spread; the adversary uses one scaled Beta per controlled
//! market parameter. Both expose the score `d log pi(a|s) / d theta`, which
//! doubles as the compatible feature vector of the critic.

mod basis;
mod beta;
mod gaussian;
mod snapshot;

pub use basis::{FeatureBasis, Features, N_FEATURES};
pub use beta::{BetaDim, BetaPolicy, BetaSample, BETA_EDGE_NUDGE};
pub use gaussian::{GaussianPolicy, GaussianSample, ModeQuotes, NormalDiag, SampledQuotes};
pub use snapshot::{BetaDimWeights, PolicyKind, PolicySnapshot, POLICY_FORMAT, POLICY_VERSION};

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Derivative of [`softplus`].
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
