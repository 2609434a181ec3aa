use std::io::Write;

use serde::Serialize;

use crate::adversary::ControlledParam;
use crate::error::{Error, Result};
use crate::policy::{BetaPolicy, GaussianPolicy};

/// Most probable market-maker action at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MmSurfaceRow {
    pub t: f64,
    pub h: f64,
    pub p_tilde: f64,
    pub psi: f64,
}

/// Most probable value of one adversary-controlled parameter at one state.
/// `flat` marks a uniform Beta, whose mode is reported as the midpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdversarySurfaceRow {
    pub t: f64,
    pub h: f64,
    pub param: String,
    pub value: f64,
    pub flat: bool,
}

/// `n` evenly spaced points from `lo` to `hi` inclusive (`lo` alone when
/// `n == 1`).
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn check_grids(t: &[f64], h: &[f64], h_bound: f64) -> Result<()> {
    if t.is_empty() || h.is_empty() {
        return Err(Error::Config("surface grids must be non-empty".into()));
    }
    if let Some(x) = t.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Config(format!("time grid point {x} outside [0, 1]")));
    }
    if let Some(x) = h.iter().find(|x| !(x.abs() <= h_bound)) {
        return Err(Error::Config(format!("inventory grid point {x} outside [-{h_bound}, {h_bound}]")));
    }
    Ok(())
}

/// Rows are t-major: every h for the first t, then the next t.
pub fn mm_surface(policy: &GaussianPolicy, t_grid: &[f64], h_grid: &[f64]) -> Result<Vec<MmSurfaceRow>> {
    check_grids(t_grid, h_grid, policy.basis.inventory_scale)?;
    let mut rows = Vec::with_capacity(t_grid.len() * h_grid.len());
    for &t in t_grid {
        for &h in h_grid {
            let (p_tilde, psi) = policy.mode(&policy.features(t, h));
            rows.push(MmSurfaceRow { t, h, p_tilde, psi });
        }
    }
    Ok(rows)
}

/// One row per grid point and controlled parameter, t-major.
pub fn adversary_surface(policy: &BetaPolicy, t_grid: &[f64], h_grid: &[f64]) -> Result<Vec<AdversarySurfaceRow>> {
    check_grids(t_grid, h_grid, policy.basis.inventory_scale)?;
    let mut rows = Vec::with_capacity(t_grid.len() * h_grid.len() * policy.dims().len());
    for &t in t_grid {
        for &h in h_grid {
            let modes = policy.mode(&policy.features(t, h));
            for (dim, (value, flat)) in policy.dims().iter().zip(modes) {
                rows.push(AdversarySurfaceRow { t, h, param: dim.param.symbol().into(), value, flat });
            }
        }
    }
    Ok(rows)
}

/// Share of grid points with `h != 0` at which the adversary's most probable
/// drift has the sign opposite to the inventory. A zero drift counts as not
/// opposing.
pub fn opposing_drift_share(policy: &BetaPolicy, t_grid: &[f64], h_grid: &[f64]) -> Result<f64> {
    let dim = policy
        .dims()
        .iter()
        .position(|d| d.param == ControlledParam::Drift)
        .ok_or_else(|| Error::Config("the adversary does not control the drift".into()))?;
    check_grids(t_grid, h_grid, policy.basis.inventory_scale)?;
    let (mut hits, mut total) = (0usize, 0usize);
    for &t in t_grid {
        for &h in h_grid.iter().filter(|h| **h != 0.0) {
            let b = policy.mode(&policy.features(t, h))[dim].0;
            total += 1;
            hits += usize::from(b * h < 0.0);
        }
    }
    if total == 0 {
        return Err(Error::Config("the inventory grid has no non-zero points".into()));
    }
    Ok(hits as f64 / total as f64)
}

pub fn write_csv<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
