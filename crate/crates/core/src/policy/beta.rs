use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use super::{dot, sigmoid, softplus, FeatureBasis, Features, N_FEATURES};
use crate::adversary::ControlledParam;
use crate::error::{Error, Result};

/// Unit samples are kept this far from 0 and 1 so the log-density and its
/// score stay finite.
pub const BETA_EDGE_NUDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaDim {
    pub param: ControlledParam,
    pub lo: f64,
    pub hi: f64,
}

impl BetaDim {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn to_unit(&self, value: f64) -> f64 {
        (value - self.lo) / self.width()
    }

    pub fn from_unit(&self, x: f64) -> f64 {
        self.lo + self.width() * x
    }
}

/// One Beta distribution per controlled parameter, shifted and scaled onto
/// `[lo, hi]`. Shape parameters are `softplus(w . phi) + 1`.
///
/// Weight layout per dimension: `[alpha raw | beta raw]`, dimensions in the
/// order of `dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaPolicy {
    pub basis: FeatureBasis,
    dims: Vec<BetaDim>,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaSample {
    /// Draws on `(0, 1)`, nudged away from the edges.
    pub unit: Vec<f64>,
    /// Draws mapped onto each dimension's interval.
    pub values: Vec<f64>,
}

impl BetaPolicy {
    pub fn zeros(basis: FeatureBasis, dims: Vec<BetaDim>) -> Result<Self> {
        let n = 2 * N_FEATURES * dims.len();
        Self::from_weights(basis, dims, vec![0.0; n])
    }

    pub fn from_weights(basis: FeatureBasis, dims: Vec<BetaDim>, weights: Vec<f64>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Config("Beta policy needs at least one dimension".into()));
        }
        for d in &dims {
            if !(d.lo < d.hi) || !d.lo.is_finite() || !d.hi.is_finite() {
                return Err(Error::Config(format!("invalid Beta interval [{}, {}]", d.lo, d.hi)));
            }
        }
        let expected = 2 * N_FEATURES * dims.len();
        if weights.len() != expected {
            return Err(Error::Dimension { expected, found: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidPolicy("non-finite Beta policy weight".into()));
        }
        Ok(BetaPolicy { basis, dims, weights })
    }

    pub fn dims(&self) -> &[BetaDim] {
        &self.dims
    }

    pub fn n_params(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn alpha_weights(&self, i: usize) -> &[f64] {
        let o = 2 * N_FEATURES * i;
        &self.weights[o..o + N_FEATURES]
    }

    fn beta_weights(&self, i: usize) -> &[f64] {
        let o = 2 * N_FEATURES * i + N_FEATURES;
        &self.weights[o..o + N_FEATURES]
    }

    /// Mutable `(alpha raw, beta raw)` weights of dimension `i`.
    pub fn shape_weights_mut(&mut self, i: usize) -> (&mut [f64], &mut [f64]) {
        let o = 2 * N_FEATURES * i;
        self.weights[o..o + 2 * N_FEATURES].split_at_mut(N_FEATURES)
    }

    pub fn features(&self, t: f64, h: f64) -> Features {
        self.basis.features(t, h)
    }

    fn raw_shapes(&self, phi: &Features, i: usize) -> (f64, f64) {
        (dot(self.alpha_weights(i), phi), dot(self.beta_weights(i), phi))
    }

    /// `(alpha, beta)` of dimension `i`; both are at least 1.
    pub fn shapes(&self, phi: &Features, i: usize) -> (f64, f64) {
        let (ra, rb) = self.raw_shapes(phi, i);
        (softplus(ra) + 1.0, softplus(rb) + 1.0)
    }

    /// Most probable value per dimension. When `alpha + beta == 2` the
    /// density is flat; the interval midpoint is returned and the flag set.
    pub fn mode(&self, phi: &Features) -> Vec<(f64, bool)> {
        (0..self.dims.len())
            .map(|i| {
                let (a, b) = self.shapes(phi, i);
                let d = &self.dims[i];
                if a + b - 2.0 <= 0.0 {
                    (d.from_unit(0.5), true)
                } else {
                    (d.from_unit((a - 1.0) / (a + b - 2.0)), false)
                }
            })
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, phi: &Features, rng: &mut R) -> Result<BetaSample> {
        let mut unit = Vec::with_capacity(self.dims.len());
        let mut values = Vec::with_capacity(self.dims.len());
        for (i, d) in self.dims.iter().enumerate() {
            let (a, b) = self.shapes(phi, i);
            let dist = rand_distr::Beta::new(a, b)
                .map_err(|e| Error::InvalidPolicy(format!("Beta({a}, {b}): {e}")))?;
            let x: f64 = rng.sample(dist);
            let x = x.clamp(BETA_EDGE_NUDGE, 1.0 - BETA_EDGE_NUDGE);
            unit.push(x);
            values.push(d.from_unit(x));
        }
        Ok(BetaSample { unit, values })
    }

    /// Log-density of values on the scaled intervals.
    pub fn log_density(&self, phi: &Features, values: &[f64]) -> f64 {
        self.dims
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let (a, b) = self.shapes(phi, i);
                let x = d.to_unit(values[i]);
                (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b) - d.width().ln()
            })
            .sum()
    }

    /// Score with respect to all weights for values on the scaled intervals.
    /// Values on (or outside) an interval edge have no finite score.
    pub fn score(&self, phi: &Features, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.dims.len() {
            return Err(Error::Dimension { expected: self.dims.len(), found: values.len() });
        }
        let mut unit = Vec::with_capacity(values.len());
        for (d, &v) in self.dims.iter().zip(values) {
            let x = d.to_unit(v);
            if !(x > 0.0 && x < 1.0) {
                return Err(Error::UndefinedScore(format!(
                    "value {v} is not strictly inside [{}, {}]",
                    d.lo, d.hi
                )));
            }
            unit.push(x);
        }
        let mut out = vec![0.0; self.n_params()];
        self.score_unit_into(phi, &unit, &mut out);
        Ok(out)
    }

    /// Score for unit-interval draws (as produced by [`Self::sample`]).
    pub fn score_unit_into(&self, phi: &Features, unit: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_params());
        for (i, &x) in unit.iter().enumerate() {
            let (ra, rb) = self.raw_shapes(phi, i);
            let (a, b) = (softplus(ra) + 1.0, softplus(rb) + 1.0);
            let common = digamma(a + b);
            let ga = (x.ln() - digamma(a) + common) * sigmoid(ra);
            let gb = ((1.0 - x).ln() - digamma(b) + common) * sigmoid(rb);
            let o = 2 * N_FEATURES * i;
            for k in 0..N_FEATURES {
                out[o + k] = ga * phi[k];
                out[o + N_FEATURES + k] = gb * phi[k];
            }
        }
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}
