//! Versioned on-disk policy format.
//!
//! ```json
//! {
//!   "format": "robust-mm/policy",
//!   "version": 1,
//!   "basis": { "degree": 3, "inventory_scale": 50.0 },
//!   "policy": {
//!     "kind": "gaussian",
//!     "mean_p_tilde": [10 weights],
//!     "mean_psi_raw": [10 weights],
//!     "var_p_tilde_raw": [10 weights],
//!     "var_psi_raw": [10 weights],
//!     "min_variance": 0.01
//!   }
//! }
//! ```
//!
//! A Beta policy has `"kind": "beta"` and a `dims` array whose entries carry
//! `param` (`"b"`, `"A"` or `"k"`), the interval `lo`/`hi`, and the
//! `alpha_raw`/`beta_raw` weight vectors. Feature order is
//! `1, t, h, t^2, t h, h^2, t^3, t^2 h, t h^2, h^3` with `h` divided by
//! `inventory_scale`; shape and variance outputs are pre-softplus.

use serde::{Deserialize, Serialize};

use super::{BetaDim, BetaPolicy, FeatureBasis, GaussianPolicy, N_FEATURES};
use crate::adversary::ControlledParam;
use crate::error::{Error, Result};

pub const POLICY_FORMAT: &str = "robust-mm/policy";
pub const POLICY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySnapshot {
    pub format: String,
    pub version: u32,
    pub basis: FeatureBasis,
    pub policy: PolicyKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyKind {
    Gaussian {
        mean_p_tilde: Vec<f64>,
        mean_psi_raw: Vec<f64>,
        var_p_tilde_raw: Vec<f64>,
        var_psi_raw: Vec<f64>,
        #[serde(default)]
        min_variance: f64,
    },
    Beta {
        dims: Vec<BetaDimWeights>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaDimWeights {
    pub param: ControlledParam,
    pub lo: f64,
    pub hi: f64,
    pub alpha_raw: Vec<f64>,
    pub beta_raw: Vec<f64>,
}

impl From<&GaussianPolicy> for PolicySnapshot {
    fn from(p: &GaussianPolicy) -> Self {
        let block = |b: usize| p.weights()[b * N_FEATURES..(b + 1) * N_FEATURES].to_vec();
        PolicySnapshot {
            format: POLICY_FORMAT.into(),
            version: POLICY_VERSION,
            basis: p.basis,
            policy: PolicyKind::Gaussian {
                mean_p_tilde: block(0),
                mean_psi_raw: block(1),
                var_p_tilde_raw: block(2),
                var_psi_raw: block(3),
                min_variance: p.min_variance(),
            },
        }
    }
}

impl From<&BetaPolicy> for PolicySnapshot {
    fn from(p: &BetaPolicy) -> Self {
        let dims = p
            .dims()
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let o = 2 * N_FEATURES * i;
                BetaDimWeights {
                    param: d.param,
                    lo: d.lo,
                    hi: d.hi,
                    alpha_raw: p.weights()[o..o + N_FEATURES].to_vec(),
                    beta_raw: p.weights()[o + N_FEATURES..o + 2 * N_FEATURES].to_vec(),
                }
            })
            .collect();
        PolicySnapshot {
            format: POLICY_FORMAT.into(),
            version: POLICY_VERSION,
            basis: p.basis,
            policy: PolicyKind::Beta { dims },
        }
    }
}

fn check_len(v: &[f64], name: &str) -> Result<()> {
    if v.len() != N_FEATURES {
        return Err(Error::Snapshot(format!(
            "{name} has {} weights, expected {N_FEATURES}",
            v.len()
        )));
    }
    Ok(())
}

impl PolicySnapshot {
    pub fn validate(&self) -> Result<()> {
        if self.format != POLICY_FORMAT {
            return Err(Error::Snapshot(format!("unknown policy format '{}'", self.format)));
        }
        if self.version != POLICY_VERSION {
            return Err(Error::Snapshot(format!(
                "policy snapshot version {} is not supported (expected {POLICY_VERSION})",
                self.version
            )));
        }
        self.basis.validate()
    }

    pub fn to_gaussian(&self) -> Result<GaussianPolicy> {
        self.validate()?;
        match &self.policy {
            PolicyKind::Gaussian { mean_p_tilde, mean_psi_raw, var_p_tilde_raw, var_psi_raw, min_variance } => {
                let blocks = [
                    (mean_p_tilde, "mean_p_tilde"),
                    (mean_psi_raw, "mean_psi_raw"),
                    (var_p_tilde_raw, "var_p_tilde_raw"),
                    (var_psi_raw, "var_psi_raw"),
                ];
                let mut w = Vec::with_capacity(GaussianPolicy::N_PARAMS);
                for (b, name) in blocks {
                    check_len(b, name)?;
                    w.extend_from_slice(b);
                }
                GaussianPolicy::from_weights(self.basis, w)?
                    .with_min_variance(*min_variance)
                    .map_err(|e| Error::Snapshot(e.to_string()))
            }
            PolicyKind::Beta { .. } => Err(Error::Snapshot("expected a Gaussian policy, found Beta".into())),
        }
    }

    pub fn to_beta(&self) -> Result<BetaPolicy> {
        self.validate()?;
        match &self.policy {
            PolicyKind::Beta { dims } => {
                let mut w = Vec::with_capacity(2 * N_FEATURES * dims.len());
                let mut bd = Vec::with_capacity(dims.len());
                for d in dims {
                    check_len(&d.alpha_raw, "alpha_raw")?;
                    check_len(&d.beta_raw, "beta_raw")?;
                    w.extend_from_slice(&d.alpha_raw);
                    w.extend_from_slice(&d.beta_raw);
                    bd.push(BetaDim { param: d.param, lo: d.lo, hi: d.hi });
                }
                BetaPolicy::from_weights(self.basis, bd, w)
            }
            PolicyKind::Gaussian { .. } => Err(Error::Snapshot("expected a Beta policy, found Gaussian".into())),
        }
    }
}
