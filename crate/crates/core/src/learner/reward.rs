use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inventory penalties. `zeta` charges `h^2` every step (running penalty),
/// `eta` charges `h^2` once at the end of the episode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskParams {
    pub eta: f64,
    pub zeta: f64,
}

impl RiskParams {
    pub const NEUTRAL: RiskParams = RiskParams { eta: 0.0, zeta: 0.0 };

    pub fn running(zeta: f64) -> Self {
        RiskParams { eta: 0.0, zeta }
    }

    pub fn terminal(eta: f64) -> Self {
        RiskParams { eta, zeta: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta", self.eta), ("zeta", self.zeta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("risk parameter {name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn is_neutral(&self) -> bool {
        self.eta == 0.0 && self.zeta == 0.0
    }
}

/// Market maker's step reward. `h` is the inventory after the step.
pub fn reward(delta_pi: f64, h: i32, terminal: bool, risk: &RiskParams) -> f64 {
    let h2 = (h as f64) * (h as f64);
    let mut r = delta_pi - risk.zeta * h2;
    if terminal {
        r -= risk.eta * h2;
    }
    r
}
