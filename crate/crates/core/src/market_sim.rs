//! Discrete-time market dynamics: arithmetic Brownian midprice, exponential
//! fill intensities, unit-size limit orders and mark-to-market accounting.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest spread the environment will quote. Sampled spreads below this
/// value are raised to it before the quote is built.
pub const SPREAD_FLOOR: f64 = 1e-4;

/// Market parameters chosen (or fixed) by the adversary, plus volatility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    pub drift: f64,
    pub volatility: f64,
    pub arrival_bid: f64,
    pub arrival_ask: f64,
    pub decay_bid: f64,
    pub decay_ask: f64,
}

impl MarketParams {
    pub const DEFAULT_DRIFT: f64 = 0.0;
    pub const DEFAULT_VOLATILITY: f64 = 2.0;
    pub const DEFAULT_ARRIVAL: f64 = 140.0;
    pub const DEFAULT_DECAY: f64 = 1.5;

    /// Symmetric parameters (same arrival rate and decay on both sides).
    pub fn symmetric(drift: f64, volatility: f64, arrival: f64, decay: f64) -> Self {
        MarketParams {
            drift,
            volatility,
            arrival_bid: arrival,
            arrival_ask: arrival,
            decay_bid: decay,
            decay_ask: decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("arrival_bid", self.arrival_bid),
            ("arrival_ask", self.arrival_ask),
            ("decay_bid", self.decay_bid),
            ("decay_ask", self.decay_ask),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.volatility >= 0.0 && self.volatility.is_finite()) {
            return Err(Error::Config(format!("volatility must be >= 0, got {}", self.volatility)));
        }
        if !self.drift.is_finite() {
            return Err(Error::Config("drift must be finite".into()));
        }
        Ok(())
    }
}

impl Default for MarketParams {
    fn default() -> Self {
        MarketParams::symmetric(
            Self::DEFAULT_DRIFT,
            Self::DEFAULT_VOLATILITY,
            Self::DEFAULT_ARRIVAL,
            Self::DEFAULT_DECAY,
        )
    }
}

/// Episode geometry and inventory limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub terminal_time: f64,
    pub z0: f64,
    /// Inclusive range of starting inventories used in training.
    pub h0_range: (i32, i32),
    pub h_min: i32,
    pub h_max: i32,
    /// Range of starting times used in training; snapped to the time grid.
    pub t0_range: (f64, f64),
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.005,
            terminal_time: 1.0,
            z0: 100.0,
            h0_range: (-50, 50),
            h_min: -50,
            h_max: 50,
            t0_range: (0.0, 0.95),
        }
    }
}

impl SimConfig {
    /// Number of steps in a full-horizon episode.
    pub fn n_steps(&self) -> usize {
        (self.terminal_time / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("sim.dt must be positive, got {}", self.dt)));
        }
        if !(self.terminal_time > 0.0) {
            return Err(Error::Config("sim.terminal_time must be positive".into()));
        }
        let steps = self.terminal_time / self.dt;
        if (steps - steps.round()).abs() > 1e-6 || steps.round() < 1.0 {
            return Err(Error::Config(format!(
                "sim.terminal_time / sim.dt must be a positive integer, got {steps}"
            )));
        }
        if !self.z0.is_finite() {
            return Err(Error::Config("sim.z0 must be finite".into()));
        }
        if self.h_min >= self.h_max {
            return Err(Error::Config(format!(
                "sim.h_min ({}) must be below sim.h_max ({})",
                self.h_min, self.h_max
            )));
        }
        let (lo, hi) = self.h0_range;
        if lo > hi || lo < self.h_min || hi > self.h_max {
            return Err(Error::Config(format!(
                "sim.h0_range ({lo}, {hi}) must be ordered and inside [h_min, h_max]"
            )));
        }
        let (t_lo, t_hi) = self.t0_range;
        if !(t_lo >= 0.0 && t_lo <= t_hi && t_hi < self.terminal_time) {
            return Err(Error::Config(format!(
                "sim.t0_range ({t_lo}, {t_hi}) must be ordered and inside [0, terminal_time)"
            )));
        }
        if self.start_steps().is_empty() {
            return Err(Error::Config("sim.t0_range contains no grid point".into()));
        }
        Ok(())
    }

    /// Grid indices whose time falls in `t0_range`.
    pub fn start_steps(&self) -> std::ops::RangeInclusive<usize> {
        let eps = 1e-9;
        let lo = ((self.t0_range.0 / self.dt) - eps).ceil().max(0.0) as usize;
        let hi = ((self.t0_range.1 / self.dt) + eps).floor() as usize;
        let hi = hi.min(self.n_steps().saturating_sub(1));
        lo..=hi
    }

    /// Largest absolute inventory, used to normalise features.
    pub fn inventory_scale(&self) -> f64 {
        self.h_min.unsigned_abs().max(self.h_max.unsigned_abs()) as f64
    }

    /// Training start: time uniform over the grid points of `t0_range`,
    /// inventory uniform over the integers of `h0_range`.
    pub fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R) -> EpisodeStart {
        let steps = self.start_steps();
        let start_step = rng.random_range(steps);
        let h0 = rng.random_range(self.h0_range.0..=self.h0_range.1);
        EpisodeStart { start_step, h0 }
    }
}

/// Where an episode begins on the time grid and with what inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeStart {
    pub start_step: usize,
    pub h0: i32,
}

impl EpisodeStart {
    /// Full trading day from a flat book.
    pub const EVALUATION: EpisodeStart = EpisodeStart { start_step: 0, h0: 0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub t: f64,
    /// Steps taken since the episode started.
    pub n: usize,
    pub z: f64,
    pub h: i32,
    pub x: f64,
}

impl MarketState {
    pub fn wealth(&self) -> f64 {
        mark_to_market(self.x, self.h, self.z)
    }
}

/// Bid and ask offsets from the midprice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub delta_bid: f64,
    pub delta_ask: f64,
}

impl Quote {
    /// Builds offsets from a reservation-price offset and a spread:
    /// `delta_bid = psi/2 - p_tilde`, `delta_ask = psi/2 + p_tilde`, each
    /// floored at zero independently.
    pub fn from_action(p_tilde: f64, psi: f64) -> Result<Quote> {
        if !p_tilde.is_finite() || !psi.is_finite() {
            return Err(Error::InvalidAction(format!("non-finite action ({p_tilde}, {psi})")));
        }
        if psi <= 0.0 {
            return Err(Error::InvalidAction(format!("spread must be positive, got {psi}")));
        }
        Ok(Quote {
            delta_bid: (0.5 * psi - p_tilde).max(0.0),
            delta_ask: (0.5 * psi + p_tilde).max(0.0),
        })
    }

    pub fn symmetric(delta: f64) -> Quote {
        Quote { delta_bid: delta, delta_ask: delta }
    }

    pub fn spread(&self) -> f64 {
        self.delta_bid + self.delta_ask
    }

    /// Offset of the quote midpoint from the midprice.
    pub fn reservation_offset(&self) -> f64 {
        0.5 * (self.delta_ask - self.delta_bid)
    }

    pub fn bid_price(&self, z: f64) -> f64 {
        z - self.delta_bid
    }

    pub fn ask_price(&self, z: f64) -> f64 {
        z + self.delta_ask
    }
}

/// Maps a raw market-maker action onto a valid quote: the sampled spread is
/// floored at [`SPREAD_FLOOR`] and negative offsets are clamped.
pub fn interpret_action(p_tilde: f64, psi: f64) -> Result<Quote> {
    if !psi.is_finite() {
        return Err(Error::InvalidAction(format!("non-finite spread {psi}")));
    }
    Quote::from_action(p_tilde, psi.max(SPREAD_FLOOR))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FillResult {
    pub bid_filled: bool,
    pub ask_filled: bool,
}

/// Midprice after one step, `z + b dt + sigma sqrt(dt) noise`.
pub fn step_price(z: f64, params: &MarketParams, dt: f64, noise: f64) -> f64 {
    z + params.drift * dt + params.volatility * dt.sqrt() * noise
}

/// Fill intensity `A exp(-k delta)`.
pub fn intensity(delta: f64, arrival: f64, decay: f64) -> f64 {
    arrival * (-decay * delta).exp()
}

/// Probability that at least one market order consumes a quote at offset
/// `delta` within `dt`: `1 - exp(-A exp(-k delta) dt)`.
pub fn fill_probability(delta: f64, arrival: f64, decay: f64, dt: f64) -> Result<f64> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::InvalidAction(format!("negative quote offset {delta}")));
    }
    Ok(-(-intensity(delta, arrival, decay) * dt).exp_m1())
}

/// Samples both sides independently. A side whose fill would push the
/// inventory outside `[h_min, h_max]` never fills. Two uniforms are always
/// consumed so the stream position does not depend on the inventory.
pub fn sample_fills<R: Rng + ?Sized>(
    quote: &Quote,
    params: &MarketParams,
    state: &MarketState,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<FillResult> {
    let p_bid = fill_probability(quote.delta_bid, params.arrival_bid, params.decay_bid, cfg.dt)?;
    let p_ask = fill_probability(quote.delta_ask, params.arrival_ask, params.decay_ask, cfg.dt)?;
    let u_bid: f64 = rng.random();
    let u_ask: f64 = rng.random();
    Ok(FillResult {
        bid_filled: state.h < cfg.h_max && u_bid < p_bid,
        ask_filled: state.h > cfg.h_min && u_ask < p_ask,
    })
}

/// Advances inventory, cash and time. Executions happen at the quotes set
/// around the pre-step midprice.
pub fn apply_step(
    state: &MarketState,
    quote: &Quote,
    fills: FillResult,
    new_z: f64,
    cfg: &SimConfig,
) -> Result<MarketState> {
    let bought = fills.bid_filled as i32;
    let sold = fills.ask_filled as i32;
    let h = state.h + bought - sold;
    if h < cfg.h_min || h > cfg.h_max {
        return Err(Error::Invariant(format!(
            "inventory {h} outside [{}, {}]",
            cfg.h_min, cfg.h_max
        )));
    }
    let x = state.x + quote.delta_ask * sold as f64 + quote.delta_bid * bought as f64
        - state.z * (h - state.h) as f64;
    Ok(MarketState { t: state.t + cfg.dt, n: state.n + 1, z: new_z, h, x })
}

/// Portfolio value `x + h z`.
pub fn mark_to_market(x: f64, h: i32, z: f64) -> f64 {
    x + h as f64 * z
}

/// Result of one environment transition.
#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub prev: MarketState,
    pub next: MarketState,
    pub quote: Quote,
    pub params: MarketParams,
    pub fills: FillResult,
    pub delta_pi: f64,
    pub terminal: bool,
}

/// A single episode on the time grid.
#[derive(Debug, Clone)]
pub struct Episode {
    cfg: SimConfig,
    start_step: usize,
    total_steps: usize,
    state: MarketState,
    initial_wealth: f64,
}

impl Episode {
    pub fn new(cfg: &SimConfig, start: EpisodeStart) -> Result<Episode> {
        let total_steps = cfg.n_steps();
        if start.start_step >= total_steps {
            return Err(Error::Config(format!(
                "start step {} beyond horizon of {total_steps} steps",
                start.start_step
            )));
        }
        if start.h0 < cfg.h_min || start.h0 > cfg.h_max {
            return Err(Error::Config(format!("initial inventory {} outside bounds", start.h0)));
        }
        let state = MarketState {
            t: start.start_step as f64 * cfg.dt,
            n: 0,
            z: cfg.z0,
            h: start.h0,
            x: 0.0,
        };
        Ok(Episode {
            cfg: cfg.clone(),
            start_step: start.start_step,
            total_steps,
            initial_wealth: state.wealth(),
            state,
        })
    }

    pub fn state(&self) -> &MarketState {
        &self.state
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn initial_wealth(&self) -> f64 {
        self.initial_wealth
    }

    pub fn remaining_steps(&self) -> usize {
        self.total_steps - self.start_step - self.state.n
    }

    pub fn is_done(&self) -> bool {
        self.remaining_steps() == 0
    }

    /// Samples fills first, then the price innovation.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        quote: Quote,
        params: MarketParams,
        rng: &mut R,
    ) -> Result<Transition> {
        if self.is_done() {
            return Err(Error::Invariant("step called on a finished episode".into()));
        }
        let prev = self.state;
        let fills = sample_fills(&quote, &params, &prev, &self.cfg, rng)?;
        let noise: f64 = rng.sample(StandardNormal);
        let new_z = step_price(prev.z, &params, self.cfg.dt, noise);
        let mut next = apply_step(&prev, &quote, fills, new_z, &self.cfg)?;
        // Keep time on the grid rather than accumulating dt.
        next.t = (self.start_step + next.n) as f64 * self.cfg.dt;
        self.state = next;
        Ok(Transition {
            prev,
            next,
            quote,
            params,
            fills,
            delta_pi: next.wealth() - prev.wealth(),
            terminal: self.is_done(),
        })
    }
}

/// Supplies the market maker's raw action `(p_tilde, psi)` for a state.
pub trait QuoteSource {
    fn action(&mut self, state: &MarketState, rng: &mut dyn rand::RngCore) -> Result<(f64, f64)>;
}

/// Supplies market parameters at the start of an episode and at each step.
pub trait ParamSource {
    fn on_episode_start(&mut self, state: &MarketState, rng: &mut dyn rand::RngCore) -> MarketParams;
    fn on_step(&mut self, state: &MarketState, rng: &mut dyn rand::RngCore) -> MarketParams;
}

/// A constant quote, ignoring state.
#[derive(Debug, Clone, Copy)]
pub struct ConstantQuote(pub Quote);

impl QuoteSource for ConstantQuote {
    fn action(&mut self, _: &MarketState, _: &mut dyn rand::RngCore) -> Result<(f64, f64)> {
        Ok((self.0.reservation_offset(), self.0.spread()))
    }
}

/// Parameters that never change.
#[derive(Debug, Clone, Copy)]
pub struct ConstantParams(pub MarketParams);

impl ParamSource for ConstantParams {
    fn on_episode_start(&mut self, _: &MarketState, _: &mut dyn rand::RngCore) -> MarketParams {
        self.0
    }

    fn on_step(&mut self, _: &MarketState, _: &mut dyn rand::RngCore) -> MarketParams {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub state: MarketState,
    pub p_tilde: f64,
    pub psi: f64,
    pub quote: Quote,
    pub params: MarketParams,
    pub fills: FillResult,
    pub delta_pi: f64,
    pub h_next: i32,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpisodeStats {
    /// Change in mark-to-market value over the episode.
    pub terminal_wealth: f64,
    pub terminal_inventory: i32,
    /// Time-average of the quoted spread.
    pub mean_spread: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    /// Row-per-step CSV. `reward` maps a step onto the reward column.
    pub fn write_csv<W: Write>(&self, out: W, reward: impl Fn(&StepRecord) -> f64) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "n", "t", "z", "h", "x", "delta_bid", "delta_ask", "b", "A_bid", "A_ask", "k_bid",
            "k_ask", "bid_filled", "ask_filled", "reward",
        ])?;
        for s in &self.steps {
            w.write_record(&[
                s.state.n.to_string(),
                s.state.t.to_string(),
                s.state.z.to_string(),
                s.state.h.to_string(),
                s.state.x.to_string(),
                s.quote.delta_bid.to_string(),
                s.quote.delta_ask.to_string(),
                s.params.drift.to_string(),
                s.params.arrival_bid.to_string(),
                s.params.arrival_ask.to_string(),
                s.params.decay_bid.to_string(),
                s.params.decay_ask.to_string(),
                (s.fills.bid_filled as u8).to_string(),
                (s.fills.ask_filled as u8).to_string(),
                reward(s).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rolls out one episode. The parameter source is consulted at the start of
/// the episode and then before every step; the quote source acts after it.
pub fn run_episode<Q, P, R>(
    mm: &mut Q,
    adversary: &mut P,
    cfg: &SimConfig,
    start: EpisodeStart,
    rng: &mut R,
) -> Result<(Trajectory, EpisodeStats)>
where
    Q: QuoteSource + ?Sized,
    P: ParamSource + ?Sized,
    R: rand::RngCore,
{
    let mut episode = Episode::new(cfg, start)?;
    let mut trajectory = Trajectory { steps: Vec::with_capacity(episode.remaining_steps()) };
    let mut params = adversary.on_episode_start(episode.state(), rng);
    let mut spread_sum = 0.0;
    let mut first = true;
    while !episode.is_done() {
        let state = *episode.state();
        if !first {
            params = adversary.on_step(&state, rng);
        }
        first = false;
        let (p_tilde, psi) = mm.action(&state, rng)?;
        let quote = interpret_action(p_tilde, psi).map_err(|e| Error::EpisodeAborted {
            step: state.n,
            reason: e.to_string(),
        })?;
        let tr = episode.step(quote, params, rng)?;
        spread_sum += quote.spread();
        trajectory.steps.push(StepRecord {
            state,
            p_tilde,
            psi,
            quote,
            params,
            fills: tr.fills,
            delta_pi: tr.delta_pi,
            h_next: tr.next.h,
            terminal: tr.terminal,
        });
    }
    let last = episode.state();
    let steps = trajectory.steps.len();
    let stats = EpisodeStats {
        terminal_wealth: last.wealth() - episode.initial_wealth(),
        terminal_inventory: last.h,
        mean_spread: spread_sum / steps as f64,
        steps,
    };
    Ok((trajectory, stats))
}
