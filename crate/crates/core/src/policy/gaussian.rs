use rand::Rng;
use rand_distr::StandardNormal;

use super::{dot, sigmoid, softplus, FeatureBasis, Features, N_FEATURES};
use crate::error::{Error, Result};
use crate::market_sim::{MarketState, QuoteSource, SPREAD_FLOOR};

const BLOCKS: usize = 4;
const MEAN_P: usize = 0;
const MEAN_PSI: usize = 1;
const VAR_P: usize = 2;
const VAR_PSI: usize = 3;

/// Diagonal bivariate Normal over `(p_tilde, psi)`.
///
/// Weight layout (each block has one weight per basis feature):
/// `[mean p_tilde | raw mean psi | raw var p_tilde | raw var psi]`.
/// The psi mean and both variances pass through softplus; each variance
/// then gets `min_variance` added, which is 0 unless set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub basis: FeatureBasis,
    weights: Vec<f64>,
    min_variance: f64,
}

/// Moments of the action distribution at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalDiag {
    pub mean: [f64; 2],
    pub var: [f64; 2],
    /// Pre-softplus linear outputs, kept for the chain rule.
    raw_mean_psi: f64,
    raw_var: [f64; 2],
}

/// A draw from the policy, before any environment-side clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSample {
    pub p_tilde: f64,
    pub psi: f64,
}

impl GaussianSample {
    /// The action handed to the environment: psi floored at the spread
    /// floor. Scores are always taken at the raw sample.
    pub fn action(&self) -> (f64, f64) {
        (self.p_tilde, self.psi.max(SPREAD_FLOOR))
    }
}

impl GaussianPolicy {
    pub const N_PARAMS: usize = BLOCKS * N_FEATURES;
    /// Variance floor used for trained market makers unless configured
    /// otherwise.
    pub const DEFAULT_MIN_VARIANCE: f64 = 0.01;

    /// All-zero weights: p_tilde mean 0, psi mean ln 2, both variances ln 2.
    pub fn zeros(basis: FeatureBasis) -> Self {
        GaussianPolicy { basis, weights: vec![0.0; Self::N_PARAMS], min_variance: 0.0 }
    }

    pub fn from_weights(basis: FeatureBasis, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != Self::N_PARAMS {
            return Err(Error::Dimension { expected: Self::N_PARAMS, found: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidPolicy("non-finite Gaussian policy weight".into()));
        }
        Ok(GaussianPolicy { basis, weights, min_variance: 0.0 })
    }

    /// Lower bound on both action variances. Keeps the compatible features,
    /// which scale like 1/variance, bounded as the policy sharpens.
    pub fn with_min_variance(mut self, v: f64) -> Result<Self> {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidPolicy(format!("min_variance must be finite and non-negative, got {v}")));
        }
        self.min_variance = v;
        Ok(self)
    }

    pub fn min_variance(&self) -> f64 {
        self.min_variance
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn block(&self, b: usize) -> &[f64] {
        &self.weights[b * N_FEATURES..(b + 1) * N_FEATURES]
    }

    pub fn block_mut(&mut self, b: usize) -> &mut [f64] {
        &mut self.weights[b * N_FEATURES..(b + 1) * N_FEATURES]
    }

    /// Weights of the p_tilde mean.
    pub fn mean_p_tilde_weights_mut(&mut self) -> &mut [f64] {
        self.block_mut(MEAN_P)
    }

    /// Raw (pre-softplus) weights of the psi mean.
    pub fn mean_psi_weights_mut(&mut self) -> &mut [f64] {
        self.block_mut(MEAN_PSI)
    }

    pub fn var_weights_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        let (head, tail) = self.weights.split_at_mut(VAR_PSI * N_FEATURES);
        (&mut head[VAR_P * N_FEATURES..], tail)
    }

    pub fn features(&self, t: f64, h: f64) -> Features {
        self.basis.features(t, h)
    }

    pub fn distribution(&self, phi: &Features) -> NormalDiag {
        let raw_mean_psi = dot(self.block(MEAN_PSI), phi);
        let raw_var = [dot(self.block(VAR_P), phi), dot(self.block(VAR_PSI), phi)];
        NormalDiag {
            mean: [dot(self.block(MEAN_P), phi), softplus(raw_mean_psi)],
            var: [softplus(raw_var[0]) + self.min_variance, softplus(raw_var[1]) + self.min_variance],
            raw_mean_psi,
            raw_var,
        }
    }

    /// Most probable action, which for a Normal is its mean.
    pub fn mode(&self, phi: &Features) -> (f64, f64) {
        let d = self.distribution(phi);
        (d.mean[0], d.mean[1])
    }

    pub fn sample<R: Rng + ?Sized>(&self, phi: &Features, rng: &mut R) -> Result<GaussianSample> {
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidPolicy("non-finite Gaussian policy weight".into()));
        }
        let d = self.distribution(phi);
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        Ok(GaussianSample {
            p_tilde: d.mean[0] + d.var[0].sqrt() * z0,
            psi: d.mean[1] + d.var[1].sqrt() * z1,
        })
    }

    pub fn log_density(&self, phi: &Features, action: (f64, f64)) -> f64 {
        let d = self.distribution(phi);
        let a = [action.0, action.1];
        (0..2)
            .map(|i| {
                let r = a[i] - d.mean[i];
                -0.5 * (2.0 * std::f64::consts::PI * d.var[i]).ln() - r * r / (2.0 * d.var[i])
            })
            .sum()
    }

    /// Writes `d log pi(a|s) / d theta` into `out` (length [`Self::N_PARAMS`]).
    pub fn score_into(&self, phi: &Features, action: (f64, f64), out: &mut [f64]) {
        debug_assert_eq!(out.len(), Self::N_PARAMS);
        let d = self.distribution(phi);
        let r = [action.0 - d.mean[0], action.1 - d.mean[1]];
        let g_mean_p = r[0] / d.var[0];
        let g_mean_psi = r[1] / d.var[1] * sigmoid(d.raw_mean_psi);
        let g_var = |i: usize| {
            let v = d.var[i];
            (r[i] * r[i] / (2.0 * v * v) - 0.5 / v) * sigmoid(d.raw_var[i])
        };
        let coeffs = [g_mean_p, g_mean_psi, g_var(0), g_var(1)];
        for (b, c) in coeffs.iter().enumerate() {
            for (o, f) in out[b * N_FEATURES..(b + 1) * N_FEATURES].iter_mut().zip(phi) {
                *o = c * f;
            }
        }
    }

    pub fn score(&self, phi: &Features, action: (f64, f64)) -> Vec<f64> {
        let mut out = vec![0.0; Self::N_PARAMS];
        self.score_into(phi, action, &mut out);
        out
    }
}

/// Quotes drawn from a frozen policy, one sample per step.
#[derive(Debug, Clone, Copy)]
pub struct SampledQuotes<'a>(pub &'a GaussianPolicy);

impl QuoteSource for SampledQuotes<'_> {
    fn action(&mut self, state: &MarketState, rng: &mut dyn rand::RngCore) -> Result<(f64, f64)> {
        let phi = self.0.features(state.t, state.h as f64);
        Ok(self.0.sample(&phi, rng)?.action())
    }
}

/// Deterministic quotes at the policy's most probable action.
#[derive(Debug, Clone, Copy)]
pub struct ModeQuotes<'a>(pub &'a GaussianPolicy);

impl QuoteSource for ModeQuotes<'_> {
    fn action(&mut self, state: &MarketState, _: &mut dyn rand::RngCore) -> Result<(f64, f64)> {
        let (p, psi) = self.0.mode(&self.0.features(state.t, state.h as f64));
        Ok((p, psi.max(SPREAD_FLOOR)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use std::f64::consts::LN_2;

    fn basis() -> FeatureBasis {
        FeatureBasis::new(50.0)
    }

    fn random_policy(rng: &mut impl Rng) -> GaussianPolicy {
        let w = (0..GaussianPolicy::N_PARAMS).map(|_| rng.random_range(-0.5..0.5)).collect();
        GaussianPolicy::from_weights(basis(), w).unwrap()
    }

    #[test]
    fn zero_weights_give_softplus_zero_moments() {
        let p = GaussianPolicy::zeros(basis());
        let d = p.distribution(&basis().features(0.3, 17.0));
        assert_eq!(d.mean[0], 0.0);
        assert_abs_diff_eq!(d.mean[1], LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(d.var[0], LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(d.var[1], LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(d.mean[1], std::f64::consts::LN_2, epsilon = 1e-4);
    }

    #[test]
    fn vanishing_variance_samples_the_mean() {
        let mut p = GaussianPolicy::zeros(basis());
        p.mean_p_tilde_weights_mut()[0] = 0.25;
        p.mean_psi_weights_mut()[0] = 1.0;
        let (vp, vs) = p.var_weights_mut();
        vp[0] = -1e4;
        vs[0] = -1e4;
        let mut rng = stream(1, Purpose::Misc, 0);
        let phi = basis().features(0.5, 3.0);
        let s = p.sample(&phi, &mut rng).unwrap();
        assert_eq!(s.p_tilde, 0.25);
        assert_eq!(s.psi, softplus(1.0));
    }

    #[test]
    fn variance_floor_shifts_variance_only() {
        let mut p = GaussianPolicy::zeros(basis()).with_min_variance(0.01).unwrap();
        let (vp, _) = p.var_weights_mut();
        vp[0] = -1e4;
        let d = p.distribution(&basis().features(0.5, 0.0));
        assert_eq!(d.var[0], 0.01);
        assert_abs_diff_eq!(d.var[1], LN_2 + 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(d.mean[1], LN_2, epsilon = 1e-15);
        assert!(GaussianPolicy::zeros(basis()).with_min_variance(-1.0).is_err());
    }

    #[test]
    fn environment_action_respects_spread_floor() {
        let mut p = GaussianPolicy::zeros(basis());
        p.mean_psi_weights_mut()[0] = -3.0;
        let mut rng = stream(2, Purpose::Misc, 0);
        let phi = basis().features(0.1, 0.0);
        for _ in 0..1_000_000 {
            let (_, psi) = p.sample(&phi, &mut rng).unwrap().action();
            assert!(psi >= SPREAD_FLOOR);
        }
    }

    #[test]
    fn score_at_mean_has_zero_mean_block() {
        let mut rng = stream(3, Purpose::Misc, 0);
        let p = random_policy(&mut rng);
        let phi = basis().features(0.4, -12.0);
        let d = p.distribution(&phi);
        let g = p.score(&phi, (d.mean[0], d.mean[1]));
        assert!(g[..2 * N_FEATURES].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn score_matches_central_differences() {
        let mut rng = stream(4, Purpose::Misc, 0);
        for _ in 0..200 {
            let floor = if rng.random_bool(0.5) { 0.0 } else { 0.01 };
            let mut p = random_policy(&mut rng).with_min_variance(floor).unwrap();
            let phi = basis().features(rng.random_range(0.0..1.0), rng.random_range(-50.0..50.0));
            let a = (rng.random_range(-1.0..1.0), rng.random_range(0.0..3.0));
            let g = p.score(&phi, a);
            for i in 0..GaussianPolicy::N_PARAMS {
                let w = p.weights()[i];
                let h = 1e-6;
                p.weights_mut()[i] = w + h;
                let up = p.log_density(&phi, a);
                p.weights_mut()[i] = w - h;
                let down = p.log_density(&phi, a);
                p.weights_mut()[i] = w;
                let fd = (up - down) / (2.0 * h);
                assert!((g[i] - fd).abs() <= 1e-5 * fd.abs().max(1.0), "param {i}: {} vs {fd}", g[i]);
            }
        }
    }

    #[test]
    fn constant_feature_scales_its_own_gradient_linearly() {
        let p = GaussianPolicy::zeros(basis());
        let phi = basis().features(0.2, 10.0);
        let mut scaled = phi;
        scaled[0] *= 3.0;
        let a = (0.4, 1.1);
        let g = p.score(&phi, a);
        let gs = p.score(&scaled, a);
        // Zero weights make the distribution independent of phi, so only the
        // constant-feature components change.
        for b in 0..4 {
            let i = b * N_FEATURES;
            assert_abs_diff_eq!(gs[i], 3.0 * g[i], epsilon = 1e-12);
            for j in 1..N_FEATURES {
                assert_eq!(gs[i + j], g[i + j]);
            }
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let p = GaussianPolicy::zeros(basis());
        let phi = basis().features(0.0, 0.0);
        let (n, lo, hi) = (800usize, -8.0, 8.0);
        let step = (hi - lo) / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = (lo + (i as f64 + 0.5) * step, lo + (j as f64 + 0.5) * step);
                total += p.log_density(&phi, a).exp() * step * step;
            }
        }
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }
}
