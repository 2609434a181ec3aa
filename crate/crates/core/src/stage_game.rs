//! The single-stage market-making game.
//!
//! The market maker picks offsets `(delta_bid, delta_ask)`, the adversary
//! picks `(b, A_bid, A_ask, k_bid, k_ask)`, and the market maker receives
//! the expected one-step change in mark-to-market value
//!
//! ```text
//! f = A_bid e^{-k_bid delta_bid} (delta_bid + b)
//!   + A_ask e^{-k_ask delta_ask} (delta_ask - b) + b h
//! ```
//!
//! which the adversary pays. Besides closed-form responses this module
//! carries a brute-force grid oracle that measures how much either player
//! gains by deviating unilaterally from a profile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boxes the adversary chooses from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBounds {
    pub b_lo: f64,
    pub b_hi: f64,
    pub a_lo: f64,
    pub a_hi: f64,
    pub k_lo: f64,
    pub k_hi: f64,
}

impl Default for ParamBounds {
    /// `b in [-5, 5]`, `A in [105, 175]`, `k in [1.125, 1.875]`.
    fn default() -> Self {
        ParamBounds { b_lo: -5.0, b_hi: 5.0, a_lo: 105.0, a_hi: 175.0, k_lo: 1.125, k_hi: 1.875 }
    }
}

impl ParamBounds {
    /// Adversary controls the drift only; intensity and decay are pinned.
    pub fn drift_only(b_lo: f64, b_hi: f64, arrival: f64, decay: f64) -> Self {
        ParamBounds { b_lo, b_hi, a_lo: arrival, a_hi: arrival, k_lo: decay, k_hi: decay }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.b_lo, self.b_hi, self.a_lo, self.a_hi, self.k_lo, self.k_hi];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("parameter bounds must be finite".into()));
        }
        if self.b_lo > self.b_hi {
            return Err(Error::Config(format!("drift bounds [{}, {}] are reversed", self.b_lo, self.b_hi)));
        }
        if !(self.a_lo > 0.0 && self.a_lo <= self.a_hi) {
            return Err(Error::Config(format!("arrival bounds [{}, {}] must satisfy 0 < lo <= hi", self.a_lo, self.a_hi)));
        }
        if !(self.k_lo > 0.0 && self.k_lo <= self.k_hi) {
            return Err(Error::Config(format!("decay bounds [{}, {}] must satisfy 0 < lo <= hi", self.k_lo, self.k_hi)));
        }
        Ok(())
    }
}

/// A pure strategy profile of the single-stage game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageProfile {
    pub delta_bid: f64,
    pub delta_ask: f64,
    pub drift: f64,
    pub a_bid: f64,
    pub a_ask: f64,
    pub k_bid: f64,
    pub k_ask: f64,
    pub inventory: f64,
}

impl StageProfile {
    fn intensities(&self) -> (f64, f64) {
        (
            self.a_bid * (-self.k_bid * self.delta_bid).exp(),
            self.a_ask * (-self.k_ask * self.delta_ask).exp(),
        )
    }

    pub fn with_offsets(mut self, delta_bid: f64, delta_ask: f64) -> Self {
        self.delta_bid = delta_bid;
        self.delta_ask = delta_ask;
        self
    }
}

/// Market maker's expected payoff.
pub fn stage_payoff(p: &StageProfile) -> f64 {
    let (lb, la) = p.intensities();
    lb * (p.delta_bid + p.drift) + la * (p.delta_ask - p.drift) + p.drift * p.inventory
}

/// `(df/d delta_bid, df/d delta_ask)`, i.e.
/// `lambda_bid (1 - k_bid (delta_bid + b))` and
/// `lambda_ask (1 - k_ask (delta_ask - b))`.
pub fn payoff_gradient_delta(p: &StageProfile) -> (f64, f64) {
    let (lb, la) = p.intensities();
    (
        lb * (1.0 - p.k_bid * (p.delta_bid + p.drift)),
        la * (1.0 - p.k_ask * (p.delta_ask - p.drift)),
    )
}

/// Hessian in the offsets; it is diagonal.
pub fn payoff_hessian_delta(p: &StageProfile) -> [[f64; 2]; 2] {
    let (lb, la) = p.intensities();
    [
        [p.k_bid * lb * (p.k_bid * (p.delta_bid + p.drift) - 2.0), 0.0],
        [0.0, p.k_ask * la * (p.k_ask * (p.delta_ask - p.drift) - 2.0)],
    ]
}

/// `df/db = lambda_bid - lambda_ask + h`. The payoff is linear in `b`.
pub fn drift_sensitivity(p: &StageProfile) -> f64 {
    let (lb, la) = p.intensities();
    lb - la + p.inventory
}

/// True iff both offsets lie where the payoff is concave:
/// `delta_bid <= 2/k_bid - b` and `delta_ask <= 2/k_ask + b`.
pub fn is_concave_region(p: &StageProfile) -> bool {
    p.delta_bid <= 2.0 / p.k_bid - p.drift && p.delta_ask <= 2.0 / p.k_ask + p.drift
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MmResponse {
    pub delta_bid: f64,
    pub delta_ask: f64,
    /// Set when an unconstrained optimum was negative and floored at zero.
    pub clamped: bool,
}

/// Market maker's best response to a drift: the per-side maximiser of the
/// payoff, `delta_bid = 1/k_bid - b`, `delta_ask = 1/k_ask + b`, floored at
/// zero. The maximiser does not depend on the arrival rates.
pub fn mm_best_response(drift: f64, k_bid: f64, k_ask: f64) -> MmResponse {
    let bid = 1.0 / k_bid - drift;
    let ask = 1.0 / k_ask + drift;
    MmResponse { delta_bid: bid.max(0.0), delta_ask: ask.max(0.0), clamped: bid < 0.0 || ask < 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdversaryResponse {
    pub drift: f64,
    pub a_bid: f64,
    pub a_ask: f64,
    pub k_bid: f64,
    pub k_ask: f64,
}

/// Per-side `(A, k)` minimising `A e^{-k delta} c` over the bound corners.
/// Ties go to the lower arrival rate and the higher decay.
fn side_response(delta: f64, coeff: f64, b: &ParamBounds) -> (f64, f64) {
    let mut best = (b.a_lo, b.k_hi);
    let mut best_val = b.a_lo * (-b.k_hi * delta).exp() * coeff;
    for a in [b.a_lo, b.a_hi] {
        for k in [b.k_hi, b.k_lo] {
            let v = a * (-k * delta).exp() * coeff;
            if v < best_val {
                best = (a, k);
                best_val = v;
            }
        }
    }
    best
}

/// Adversary's `(A, k)` response with the drift held at `drift`.
pub fn adversary_intensity_response(
    delta_bid: f64,
    delta_ask: f64,
    drift: f64,
    bounds: &ParamBounds,
) -> (f64, f64, f64, f64) {
    let (a_bid, k_bid) = side_response(delta_bid, delta_bid + drift, bounds);
    let (a_ask, k_ask) = side_response(delta_ask, delta_ask - drift, bounds);
    (a_bid, a_ask, k_bid, k_ask)
}

/// Adversary's best response to fixed offsets and inventory.
///
/// Given the others, the payoff is monotone in each adversary coordinate, so
/// a minimiser sits on a corner of the box; both drift bounds are tried with
/// the matching per-side `(A, k)` corners. Ties go to `b_lo`, `A_lo`, `k_hi`.
pub fn adversary_best_response(
    delta_bid: f64,
    delta_ask: f64,
    inventory: f64,
    bounds: &ParamBounds,
) -> AdversaryResponse {
    let eval = |drift: f64| {
        let (a_bid, a_ask, k_bid, k_ask) = adversary_intensity_response(delta_bid, delta_ask, drift, bounds);
        let r = AdversaryResponse { drift, a_bid, a_ask, k_bid, k_ask };
        let p = StageProfile { delta_bid, delta_ask, drift, a_bid, a_ask, k_bid, k_ask, inventory };
        (r, stage_payoff(&p))
    };
    let (lo, v_lo) = eval(bounds.b_lo);
    let (hi, v_hi) = eval(bounds.b_hi);
    if v_hi < v_lo {
        hi
    } else {
        lo
    }
}

/// What the adversary controls in [`nash_equilibrium`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayMode {
    /// Arrival rate and decay pinned; the adversary sets the drift only.
    Fixed { arrival: f64, decay: f64 },
    /// The adversary also sets `A` and `k` within the bounds.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormEquilibrium {
    pub profile: StageProfile,
    pub payoff: f64,
    /// `h == 0`: every drift in the bounds is an equally valid choice; the
    /// lower bound is returned.
    pub continuum: bool,
    /// Whether the offsets lie inside the payoff's concave region.
    pub in_concave_region: bool,
    /// Free mode only: whether evaluating the bound corners at the returned
    /// offsets and drift reproduces `A = A_lo`, `k = k_hi` on both sides.
    pub intensity_bounds_confirmed: Option<bool>,
}

/// Closed-form stage profile with the drift at the bound opposing the
/// inventory (`b_lo` for `h > 0`, `b_hi` for `h < 0`) and offsets
/// `delta_bid = 1/k + b`, `delta_ask = 1/k - b`.
///
/// In free mode `A` and `k` are chosen by corner evaluation at those offsets
/// (expected: `A_lo`, `k_hi`). Fails when the concave box
/// `[0, 2/k - b] x [0, 2/k + b]` is empty at the chosen drift or an offset
/// is negative.
///
/// This profile is not checked for optimality here; see
/// [`verify_equilibrium_grid`] and [`drift_saddle_point`].
pub fn nash_equilibrium(bounds: &ParamBounds, inventory: f64, mode: DecayMode) -> Result<ClosedFormEquilibrium> {
    bounds.validate()?;
    let (drift, continuum) = if inventory > 0.0 {
        (bounds.b_lo, false)
    } else if inventory < 0.0 {
        (bounds.b_hi, false)
    } else {
        (bounds.b_lo, true)
    };
    let offsets = |k_bid: f64, k_ask: f64| (1.0 / k_bid + drift, 1.0 / k_ask - drift);

    let (a_bid, a_ask, k_bid, k_ask, confirmed) = match mode {
        DecayMode::Fixed { arrival, decay } => (arrival, arrival, decay, decay, None),
        DecayMode::Free => {
            let (db, da) = offsets(bounds.k_hi, bounds.k_hi);
            let (a_bid, a_ask, k_bid, k_ask) = adversary_intensity_response(db.max(0.0), da.max(0.0), drift, bounds);
            let ok = a_bid == bounds.a_lo && a_ask == bounds.a_lo && k_bid == bounds.k_hi && k_ask == bounds.k_hi;
            (a_bid, a_ask, k_bid, k_ask, Some(ok))
        }
    };
    if 2.0 / k_bid - drift < 0.0 || 2.0 / k_ask + drift < 0.0 {
        return Err(Error::InfeasibleEquilibrium(format!(
            "concave box [0, 2/k - b] x [0, 2/k + b] is empty at b = {drift} \
             (2/k_bid - b = {:.6}, 2/k_ask + b = {:.6})",
            2.0 / k_bid - drift,
            2.0 / k_ask + drift
        )));
    }
    let (delta_bid, delta_ask) = offsets(k_bid, k_ask);
    if delta_bid < 0.0 || delta_ask < 0.0 {
        return Err(Error::InfeasibleEquilibrium(format!(
            "closed-form offsets ({delta_bid:.6}, {delta_ask:.6}) are negative at b = {drift}"
        )));
    }
    let profile = StageProfile { delta_bid, delta_ask, drift, a_bid, a_ask, k_bid, k_ask, inventory };
    Ok(ClosedFormEquilibrium {
        profile,
        payoff: stage_payoff(&profile),
        continuum,
        in_concave_region: is_concave_region(&profile),
        intensity_bounds_confirmed: confirmed,
    })
}

/// Saddle point of the drift-only game (arrival and decay pinned).
///
/// The market maker's optimal value `g(b) = max_delta f(delta, b)` is convex
/// in `b` with slope `drift_sensitivity` at the best response, so the
/// adversary's minimiser is found by bisection on that slope.
pub fn drift_saddle_point(b_lo: f64, b_hi: f64, arrival: f64, decay: f64, inventory: f64) -> Result<StageProfile> {
    ParamBounds::drift_only(b_lo, b_hi, arrival, decay).validate()?;
    let at = |b: f64| {
        let r = mm_best_response(b, decay, decay);
        StageProfile {
            delta_bid: r.delta_bid,
            delta_ask: r.delta_ask,
            drift: b,
            a_bid: arrival,
            a_ask: arrival,
            k_bid: decay,
            k_ask: decay,
            inventory,
        }
    };
    let slope = |b: f64| drift_sensitivity(&at(b));
    if slope(b_lo) >= 0.0 {
        return Ok(at(b_lo));
    }
    if slope(b_hi) <= 0.0 {
        return Ok(at(b_hi));
    }
    let (mut lo, mut hi) = (b_lo, b_hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(at(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exploitability {
    /// Best payoff increase the market maker finds on the grid.
    pub mm_gain: f64,
    /// Best payoff decrease the adversary finds on the grid.
    pub adversary_gain: f64,
}

impl Exploitability {
    pub fn value(&self) -> f64 {
        self.mm_gain.max(self.adversary_gain).max(0.0)
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi <= lo || n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Brute-force unilateral-deviation oracle.
///
/// The market maker deviates over a `resolution^2` grid of the concave box
/// `[0, 2/k_bid - b] x [0, 2/k_ask + b]` at the profile's market parameters.
/// The adversary deviates over `resolution` drifts and, per side,
/// `resolution^2` `(A, k)` pairs from `bounds` (collapsed to one point where
/// an interval is degenerate). Every grid point is evaluated with
/// [`stage_payoff`]'s formula; the adversary's payoff is its negation.
pub fn verify_equilibrium_grid(profile: &StageProfile, bounds: &ParamBounds, resolution: usize) -> Result<Exploitability> {
    if resolution < 2 {
        return Err(Error::Config("grid resolution must be at least 2".into()));
    }
    bounds.validate()?;
    let current = stage_payoff(profile);

    let bid_hi = (2.0 / profile.k_bid - profile.drift).max(0.0);
    let ask_hi = (2.0 / profile.k_ask + profile.drift).max(0.0);
    let mut mm_best = f64::NEG_INFINITY;
    for &db in &grid(0.0, bid_hi, resolution) {
        for &da in &grid(0.0, ask_hi, resolution) {
            mm_best = mm_best.max(stage_payoff(&profile.with_offsets(db, da)));
        }
    }

    let a_grid = grid(bounds.a_lo, bounds.a_hi, resolution);
    let k_grid = grid(bounds.k_lo, bounds.k_hi, resolution);
    let decay_bid: Vec<f64> = k_grid.iter().map(|k| (-k * profile.delta_bid).exp()).collect();
    let decay_ask: Vec<f64> = k_grid.iter().map(|k| (-k * profile.delta_ask).exp()).collect();
    let side_min = |decays: &[f64], coeff: f64| {
        let mut m = f64::INFINITY;
        for &a in &a_grid {
            for &e in decays {
                m = m.min(a * e * coeff);
            }
        }
        m
    };
    let mut adv_best = f64::INFINITY;
    for &b in &grid(bounds.b_lo, bounds.b_hi, resolution) {
        let v = side_min(&decay_bid, profile.delta_bid + b) + side_min(&decay_ask, profile.delta_ask - b) + b * profile.inventory;
        adv_best = adv_best.min(v);
    }

    Ok(Exploitability { mm_gain: mm_best - current, adversary_gain: current - adv_best })
}
