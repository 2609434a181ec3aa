use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::dot;

/// Gaussian prototypes on a tensor grid over normalised `(t, h / scale)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbfGrid {
    pub t_centers: Vec<f64>,
    pub h_centers: Vec<f64>,
    pub width_t: f64,
    pub width_h: f64,
    pub inventory_scale: f64,
}

impl RbfGrid {
    /// 10 x 10 cell-centred grid over `[0, 1] x [-1, 1]`, widths equal to the
    /// grid spacing.
    pub fn standard(inventory_scale: f64) -> Self {
        Self::uniform(10, 10, inventory_scale)
    }

    pub fn uniform(n_t: usize, n_h: usize, inventory_scale: f64) -> Self {
        RbfGrid {
            t_centers: (0..n_t).map(|i| (i as f64 + 0.5) / n_t as f64).collect(),
            h_centers: (0..n_h).map(|j| -1.0 + (2 * j + 1) as f64 / n_h as f64).collect(),
            width_t: 1.0 / n_t as f64,
            width_h: 2.0 / n_h as f64,
            inventory_scale,
        }
    }

    pub fn len(&self) -> usize {
        self.t_centers.len() * self.h_centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Config("RBF grid has no prototypes".into()));
        }
        if !(self.width_t > 0.0 && self.width_h > 0.0 && self.inventory_scale > 0.0) {
            return Err(Error::Config("RBF widths and inventory scale must be positive".into()));
        }
        Ok(())
    }

    /// Activations, `t` major: prototype `(i, j)` lands at `i * n_h + j`.
    pub fn features_into(&self, t: f64, h: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        let y = h / self.inventory_scale;
        let n_h = self.h_centers.len();
        let mut gh = [0.0; 32];
        let gh: &mut [f64] = if n_h <= 32 { &mut gh[..n_h] } else { &mut vec![0.0; n_h][..] };
        for (g, c) in gh.iter_mut().zip(&self.h_centers) {
            let d = (y - c) / self.width_h;
            *g = (-0.5 * d * d).exp();
        }
        for (i, c) in self.t_centers.iter().enumerate() {
            let d = (t - c) / self.width_t;
            let gt = (-0.5 * d * d).exp();
            for (o, g) in out[i * n_h..(i + 1) * n_h].iter_mut().zip(gh.iter()) {
                *o = gt * g;
            }
        }
    }

    pub fn features(&self, t: f64, h: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.features_into(t, h, &mut out);
        out
    }
}

/// Compatible linear critic
/// `Q(s, a) = w_v . phi_rbf(s) + w_a . grad_theta log pi(a | s)`
/// with accumulating eligibility traces.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub rbf: RbfGrid,
    pub w_v: Vec<f64>,
    pub w_a: Vec<f64>,
    e_v: Vec<f64>,
    e_a: Vec<f64>,
    pub trace_decay: f64,
    pub step_rule: StepRule,
}

/// How the critic's learning rate is applied to each update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// The configured rate, unchanged.
    #[default]
    Constant,
    /// The configured rate, reduced on any update where it would overshoot
    /// that update's own TD target.
    Bounded,
}

impl Critic {
    pub fn new(rbf: RbfGrid, n_policy_params: usize, trace_decay: f64) -> Result<Self> {
        rbf.validate()?;
        if !(0.0..=1.0).contains(&trace_decay) {
            return Err(Error::Config(format!("trace decay must lie in [0, 1], got {trace_decay}")));
        }
        let n = rbf.len();
        Ok(Critic {
            rbf,
            w_v: vec![0.0; n],
            w_a: vec![0.0; n_policy_params],
            e_v: vec![0.0; n],
            e_a: vec![0.0; n_policy_params],
            trace_decay,
            step_rule: StepRule::Constant,
        })
    }

    /// Rebuilds a critic from stored weights with cleared traces.
    pub fn from_weights(rbf: RbfGrid, w_v: Vec<f64>, w_a: Vec<f64>, trace_decay: f64) -> Result<Self> {
        let mut c = Critic::new(rbf, w_a.len(), trace_decay)?;
        if w_v.len() != c.w_v.len() {
            return Err(Error::Dimension { expected: c.w_v.len(), found: w_v.len() });
        }
        c.w_v = w_v;
        c.w_a = w_a;
        Ok(c)
    }

    pub fn with_step_rule(mut self, rule: StepRule) -> Self {
        self.step_rule = rule;
        self
    }

    pub fn n_state_features(&self) -> usize {
        self.w_v.len()
    }

    pub fn n_policy_params(&self) -> usize {
        self.w_a.len()
    }

    fn check(&self, phi: &[f64], score: &[f64]) -> Result<()> {
        if phi.len() != self.w_v.len() {
            return Err(Error::Dimension { expected: self.w_v.len(), found: phi.len() });
        }
        if score.len() != self.w_a.len() {
            return Err(Error::Dimension { expected: self.w_a.len(), found: score.len() });
        }
        Ok(())
    }

    pub fn value(&self, phi: &[f64], score: &[f64]) -> Result<f64> {
        self.check(phi, score)?;
        Ok(self.value_unchecked(phi, score))
    }

    fn value_unchecked(&self, phi: &[f64], score: &[f64]) -> f64 {
        dot(&self.w_v, phi) + dot(&self.w_a, score)
    }

    pub fn state_value(&self, phi: &[f64]) -> f64 {
        dot(&self.w_v, phi)
    }

    pub fn traces(&self) -> (&[f64], &[f64]) {
        (&self.e_v, &self.e_a)
    }

    pub fn reset_traces(&mut self) {
        self.e_v.fill(0.0);
        self.e_a.fill(0.0);
    }

    /// One semi-gradient SARSA(lambda) update, undiscounted. `next` is the
    /// successor's `(phi, score)`, absent on the terminal transition.
    /// Returns the TD error.
    pub fn sarsa_update(
        &mut self,
        current: (&[f64], &[f64]),
        reward: f64,
        next: Option<(&[f64], &[f64])>,
        lr: f64,
    ) -> Result<f64> {
        self.check(current.0, current.1)?;
        let bootstrap = match next {
            Some((phi, score)) => {
                self.check(phi, score)?;
                self.value_unchecked(phi, score)
            }
            None => 0.0,
        };
        let td = reward + bootstrap - self.value_unchecked(current.0, current.1);
        if !td.is_finite() {
            return Err(Error::Invariant(format!("non-finite TD error (reward {reward}, bootstrap {bootstrap})")));
        }
        let lambda = self.trace_decay;
        for (e, g) in self.e_v.iter_mut().zip(current.0) {
            *e = lambda * *e + g;
        }
        for (e, g) in self.e_a.iter_mut().zip(current.1) {
            *e = lambda * *e + g;
        }
        let mut lr = lr;
        if self.step_rule == StepRule::Bounded {
            // |e . (x - x')| is the rate at which this update shrinks its own
            // TD error; a step above its inverse overshoots.
            let mut rate = dot(&self.e_v, current.0) + dot(&self.e_a, current.1);
            if let Some((phi, score)) = next {
                rate -= dot(&self.e_v, phi) + dot(&self.e_a, score);
            }
            let rate = rate.abs();
            if rate * lr > 1.0 {
                lr = 1.0 / rate;
            }
        }
        let step = lr * td;
        for (w, e) in self.w_v.iter_mut().zip(&self.e_v) {
            *w += step * e;
        }
        for (w, e) in self.w_a.iter_mut().zip(&self.e_a) {
            *w += step * e;
        }
        Ok(td)
    }

    /// Natural-gradient actor step: `theta += lr * w_a`, then `w_a` is scaled
    /// by `retention` (0 resets it, since the compatible features it was
    /// fitted to have changed).
    pub fn natural_step(&mut self, theta: &mut [f64], lr: f64, retention: f64) -> Result<()> {
        if theta.len() != self.w_a.len() {
            return Err(Error::Dimension { expected: self.w_a.len(), found: theta.len() });
        }
        for (t, w) in theta.iter_mut().zip(&self.w_a) {
            *t += lr * w;
        }
        if retention == 0.0 {
            self.w_a.fill(0.0);
        } else {
            self.w_a.iter_mut().for_each(|w| *w *= retention);
        }
        Ok(())
    }

    pub fn weight_norm(&self) -> f64 {
        (dot(&self.w_v, &self.w_v) + dot(&self.w_a, &self.w_a)).sqrt()
    }
}
