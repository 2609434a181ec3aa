//! Adversary regimes: a fixed market, a market redrawn each episode, and a
//! learning adversary that sets parameters every step.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_sim::{MarketParams, MarketState, ParamSource};
use crate::policy::{BetaDim, BetaPolicy, BetaSample, FeatureBasis, PolicySnapshot};
use crate::stage_game::ParamBounds;

/// Market parameter a strategic adversary may set. Arrival rates and decays
/// are shared by both sides of the book.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ControlledParam {
    #[serde(rename = "b")]
    Drift,
    #[serde(rename = "A")]
    Arrival,
    #[serde(rename = "k")]
    Decay,
}

impl ControlledParam {
    pub fn symbol(self) -> &'static str {
        match self {
            ControlledParam::Drift => "b",
            ControlledParam::Arrival => "A",
            ControlledParam::Decay => "k",
        }
    }

    pub fn interval(self, bounds: &ParamBounds) -> (f64, f64) {
        match self {
            ControlledParam::Drift => (bounds.b_lo, bounds.b_hi),
            ControlledParam::Arrival => (bounds.a_lo, bounds.a_hi),
            ControlledParam::Decay => (bounds.k_lo, bounds.k_hi),
        }
    }

    fn apply(self, params: &mut MarketParams, value: f64) {
        match self {
            ControlledParam::Drift => params.drift = value,
            ControlledParam::Arrival => {
                params.arrival_bid = value;
                params.arrival_ask = value;
            }
            ControlledParam::Decay => {
                params.decay_bid = value;
                params.decay_ask = value;
            }
        }
    }
}

impl std::str::FromStr for ControlledParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "b" | "drift" => Ok(ControlledParam::Drift),
            "A" | "a" | "arrival" => Ok(ControlledParam::Arrival),
            "k" | "decay" => Ok(ControlledParam::Decay),
            other => Err(Error::Config(format!("unknown adversary parameter '{other}' (expected b, A or k)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AdversaryRegime {
    Fixed { params: MarketParams },
    /// One uniform draw per parameter at the start of each episode.
    Random { base: MarketParams, bounds: ParamBounds },
    /// A Beta policy over the controlled parameters, queried every step.
    /// Uncontrolled parameters stay at `base`.
    Strategic { base: MarketParams, policy: BetaPolicy },
}

impl AdversaryRegime {
    pub fn fixed() -> Self {
        AdversaryRegime::Fixed { params: MarketParams::default() }
    }

    pub fn random() -> Self {
        AdversaryRegime::Random { base: MarketParams::default(), bounds: ParamBounds::default() }
    }

    /// Strategic adversary with a freshly initialised (all-zero) policy.
    pub fn strategic(
        controlled: &[ControlledParam],
        bounds: &ParamBounds,
        basis: FeatureBasis,
    ) -> Result<Self> {
        let mut controlled = controlled.to_vec();
        controlled.sort();
        controlled.dedup();
        if controlled.is_empty() {
            return Err(Error::Config("strategic adversary must control at least one parameter".into()));
        }
        let dims = controlled
            .iter()
            .map(|&param| {
                let (lo, hi) = param.interval(bounds);
                BetaDim { param, lo, hi }
            })
            .collect();
        Ok(AdversaryRegime::Strategic {
            base: MarketParams::default(),
            policy: BetaPolicy::zeros(basis, dims)?,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            AdversaryRegime::Fixed { .. } => "fixed",
            AdversaryRegime::Random { .. } => "random",
            AdversaryRegime::Strategic { .. } => "strategic",
        }
    }

    pub fn policy(&self) -> Option<&BetaPolicy> {
        match self {
            AdversaryRegime::Strategic { policy, .. } => Some(policy),
            _ => None,
        }
    }

    pub fn policy_mut(&mut self) -> Option<&mut BetaPolicy> {
        match self {
            AdversaryRegime::Strategic { policy, .. } => Some(policy),
            _ => None,
        }
    }

    /// Runtime parameter source for one or more episodes.
    pub fn source(&self) -> Adversary<'_> {
        Adversary { regime: self, current: self.base(), last_sample: None }
    }

    fn base(&self) -> MarketParams {
        match self {
            AdversaryRegime::Fixed { params } => *params,
            AdversaryRegime::Random { base, .. } | AdversaryRegime::Strategic { base, .. } => *base,
        }
    }
}

/// On-disk form of an [`AdversaryRegime`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegimeSpec {
    Fixed { params: MarketParams },
    Random { base: MarketParams, bounds: ParamBounds },
    Strategic { base: MarketParams, policy: PolicySnapshot },
}

impl From<&AdversaryRegime> for RegimeSpec {
    fn from(r: &AdversaryRegime) -> Self {
        match r {
            AdversaryRegime::Fixed { params } => RegimeSpec::Fixed { params: *params },
            AdversaryRegime::Random { base, bounds } => RegimeSpec::Random { base: *base, bounds: *bounds },
            AdversaryRegime::Strategic { base, policy } => {
                RegimeSpec::Strategic { base: *base, policy: PolicySnapshot::from(policy) }
            }
        }
    }
}

impl RegimeSpec {
    pub fn to_regime(&self) -> Result<AdversaryRegime> {
        Ok(match self {
            RegimeSpec::Fixed { params } => {
                params.validate()?;
                AdversaryRegime::Fixed { params: *params }
            }
            RegimeSpec::Random { base, bounds } => {
                base.validate()?;
                bounds.validate()?;
                AdversaryRegime::Random { base: *base, bounds: *bounds }
            }
            RegimeSpec::Strategic { base, policy } => {
                base.validate()?;
                AdversaryRegime::Strategic { base: *base, policy: policy.to_beta()? }
            }
        })
    }
}

/// Parameters from a strategic policy sample.
pub fn params_from_sample(base: &MarketParams, policy: &BetaPolicy, sample: &BetaSample) -> MarketParams {
    let mut p = *base;
    for (d, &v) in policy.dims().iter().zip(&sample.values) {
        d.param.apply(&mut p, v);
    }
    p
}

/// Uniform draw of `(b, A, k)` from `bounds`, in that order.
pub fn draw_random<R: Rng + ?Sized>(base: &MarketParams, bounds: &ParamBounds, rng: &mut R) -> MarketParams {
    let mut uniform = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    let drift = uniform(bounds.b_lo, bounds.b_hi);
    let arrival = uniform(bounds.a_lo, bounds.a_hi);
    let decay = uniform(bounds.k_lo, bounds.k_hi);
    MarketParams::symmetric(drift, base.volatility, arrival, decay)
}

/// Stateful view of a regime while episodes are running.
#[derive(Debug, Clone)]
pub struct Adversary<'a> {
    regime: &'a AdversaryRegime,
    current: MarketParams,
    last_sample: Option<BetaSample>,
}

impl Adversary<'_> {
    /// The most recent strategic draw, used for the adversary's score.
    pub fn last_sample(&self) -> Option<&BetaSample> {
        self.last_sample.as_ref()
    }

    pub fn current(&self) -> MarketParams {
        self.current
    }

    pub fn regime(&self) -> &AdversaryRegime {
        self.regime
    }

    fn strategic_step(&mut self, state: &MarketState, rng: &mut dyn RngCore) -> MarketParams {
        if let AdversaryRegime::Strategic { base, policy } = self.regime {
            let phi = policy.features(state.t, state.h as f64);
            // Shapes are always >= 1 and finite for finite weights.
            let sample = policy.sample(&phi, rng).expect("Beta shapes are valid");
            self.current = params_from_sample(base, policy, &sample);
            self.last_sample = Some(sample);
        }
        self.current
    }
}

impl ParamSource for Adversary<'_> {
    fn on_episode_start(&mut self, state: &MarketState, rng: &mut dyn RngCore) -> MarketParams {
        match self.regime {
            AdversaryRegime::Fixed { params } => self.current = *params,
            AdversaryRegime::Random { base, bounds } => self.current = draw_random(base, bounds, rng),
            AdversaryRegime::Strategic { .. } => return self.strategic_step(state, rng),
        }
        self.current
    }

    fn on_step(&mut self, state: &MarketState, rng: &mut dyn RngCore) -> MarketParams {
        match self.regime {
            AdversaryRegime::Strategic { .. } => self.strategic_step(state, rng),
            _ => self.current,
        }
    }
}
