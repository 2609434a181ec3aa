use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_FEATURES: usize = 10;
pub type Features = [f64; N_FEATURES];

/// Monomials of `(t, h / h_scale)` up to total degree three, ordered
/// `1, t, h, t^2, t h, h^2, t^3, t^2 h, t h^2, h^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureBasis {
    pub degree: u32,
    pub inventory_scale: f64,
}

impl FeatureBasis {
    pub fn new(inventory_scale: f64) -> Self {
        FeatureBasis { degree: 3, inventory_scale }
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree != 3 {
            return Err(Error::Snapshot(format!("unsupported basis degree {}", self.degree)));
        }
        if !(self.inventory_scale > 0.0) {
            return Err(Error::Snapshot("basis inventory_scale must be positive".into()));
        }
        Ok(())
    }

    pub fn features(&self, t: f64, h: f64) -> Features {
        let y = h / self.inventory_scale;
        let (t2, y2) = (t * t, y * y);
        [1.0, t, y, t2, t * y, y2, t2 * t, t2 * y, t * y2, y2 * y]
    }
}
