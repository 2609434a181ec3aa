//! Versioned TOML run configuration.
//!
//! ```toml
//! version = 1
//! name = "rn-fixed"
//! seed = 7
//! # output_dir = "runs/rn-fixed"   # default: $ROBUST_MM_OUTPUT/<name> or runs/<name>
//!
//! [adversary]
//! kind = "strategic"               # fixed | random | strategic
//! controlled = ["b"]               # strategic only: any of b, A, k
//!
//! [reward]
//! eta = 0.0
//! zeta = 0.01
//!
//! [train]
//! train_episodes = 50000
//!
//! [eval]
//! episodes = 10000
//! regimes = ["fixed", "random"]
//! ```
//!
//! Every section is optional except the three top-level keys; unknown keys
//! anywhere are rejected. `sim`, `train`, `adversary.bounds` and
//! `adversary.market` take the field names of the corresponding library
//! types.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::{AdversaryRegime, ControlledParam};
use crate::error::{Error, Result};
use crate::learner::{RiskParams, TrainConfig};
use crate::market_sim::{MarketParams, SimConfig};
use crate::policy::{FeatureBasis, GaussianPolicy};
use crate::stage_game::ParamBounds;

pub const CONFIG_VERSION: u32 = 1;
pub const OUTPUT_ENV: &str = "ROBUST_MM_OUTPUT";
pub const DESK_EVAL_EPISODES: usize = 10_000;
pub const PAPER_EVAL_EPISODES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    Fixed,
    Random,
    Strategic,
}

impl RegimeKind {
    pub fn name(self) -> &'static str {
        match self {
            RegimeKind::Fixed => "fixed",
            RegimeKind::Random => "random",
            RegimeKind::Strategic => "strategic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdversaryConfig {
    pub kind: RegimeKind,
    pub controlled: Vec<ControlledParam>,
    pub bounds: ParamBounds,
    pub market: MarketParams,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        AdversaryConfig {
            kind: RegimeKind::Fixed,
            controlled: vec![ControlledParam::Drift],
            bounds: ParamBounds::default(),
            market: MarketParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub min_variance: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { min_variance: GaussianPolicy::DEFAULT_MIN_VARIANCE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub episodes: usize,
    pub regimes: Vec<RegimeKind>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { episodes: DESK_EVAL_EPISODES, regimes: vec![RegimeKind::Fixed] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub name: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub reward: RiskParams,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl RunConfig {
    /// Minimal valid configuration with every section at its default.
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            name: name.into(),
            seed,
            output_dir: None,
            sim: SimConfig::default(),
            adversary: AdversaryConfig::default(),
            reward: RiskParams::default(),
            policy: PolicyConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Every field written out, defaults included.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialise configuration: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "version: configuration schema {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.name.trim().is_empty() {
            return Err(Error::Config("name: must not be empty".into()));
        }
        self.sim.validate()?;
        self.adversary.market.validate().map_err(|e| prefix("adversary.market", e))?;
        self.adversary.bounds.validate().map_err(|e| prefix("adversary.bounds", e))?;
        if self.adversary.kind == RegimeKind::Strategic && self.adversary.controlled.is_empty() {
            return Err(Error::Config("adversary.controlled: a strategic adversary must control at least one parameter".into()));
        }
        self.reward.validate()?;
        if !(self.policy.min_variance >= 0.0 && self.policy.min_variance.is_finite()) {
            return Err(Error::Config(format!(
                "policy.min_variance: must be finite and non-negative, got {}",
                self.policy.min_variance
            )));
        }
        self.train.validate()?;
        if self.eval.episodes == 0 {
            return Err(Error::Config("eval.episodes: must be at least 1".into()));
        }
        if self.eval.regimes.is_empty() {
            return Err(Error::Config("eval.regimes: list at least one test regime".into()));
        }
        Ok(())
    }

    /// Restores the full training and evaluation budgets.
    pub fn apply_paper_scale(&mut self) {
        self.train.train_episodes = TrainConfig::PAPER_TRAIN_EPISODES;
        self.eval.episodes = PAPER_EVAL_EPISODES;
    }

    pub fn basis(&self) -> FeatureBasis {
        FeatureBasis::new(self.sim.inventory_scale())
    }

    pub fn initial_market_maker(&self) -> Result<GaussianPolicy> {
        GaussianPolicy::zeros(self.basis()).with_min_variance(self.policy.min_variance)
    }

    /// The adversary the market maker trains against, freshly initialised.
    pub fn training_regime(&self) -> Result<AdversaryRegime> {
        let a = &self.adversary;
        Ok(match a.kind {
            RegimeKind::Fixed => AdversaryRegime::Fixed { params: a.market },
            RegimeKind::Random => AdversaryRegime::Random { base: a.market, bounds: a.bounds },
            RegimeKind::Strategic => {
                let mut r = AdversaryRegime::strategic(&a.controlled, &a.bounds, self.basis())?;
                if let AdversaryRegime::Strategic { base, .. } = &mut r {
                    *base = a.market;
                }
                r
            }
        })
    }

    /// Output directory: `output_dir` if set, else `<root>/<name>` where
    /// root is `$ROBUST_MM_OUTPUT` or `runs`.
    pub fn output_path(&self) -> PathBuf {
        match &self.output_dir {
            Some(p) => p.clone(),
            None => output_root().join(&self.name),
        }
    }
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

fn prefix(section: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{section}: {m}")),
        other => Error::Config(format!("{section}: {other}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "version = 1\nname = \"t\"\nseed = 3\n";

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c, RunConfig::new("t", 3));
        assert_eq!(c.train.train_episodes, 50_000);
        assert_eq!(c.eval.episodes, DESK_EVAL_EPISODES);
    }

    #[test]
    fn seed_is_mandatory() {
        let e = RunConfig::from_toml("version = 1\nname = \"t\"\n").unwrap_err();
        assert!(e.to_string().contains("seed"), "{e}");
    }

    #[test]
    fn unknown_keys_name_the_field() {
        let e = RunConfig::from_toml(&format!("{MINIMAL}[train]\nlr_polcy = 0.1\n")).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("lr_polcy"), "{msg}");
        let e = RunConfig::from_toml(&format!("{MINIMAL}colour = 1\n")).unwrap_err();
        assert!(e.to_string().contains("colour"));
    }

    #[test]
    fn invalid_values_name_the_field() {
        let e = RunConfig::from_toml(&format!("{MINIMAL}[eval]\nepisodes = 0\n")).unwrap_err();
        assert!(e.to_string().contains("eval.episodes"));
        let e = RunConfig::from_toml(&format!("{MINIMAL}[train]\nlr_critic = -1.0\n")).unwrap_err();
        assert!(e.to_string().contains("lr_critic"));
        let e = RunConfig::from_toml("version = 2\nname = \"t\"\nseed = 3\n").unwrap_err();
        assert!(e.to_string().contains("version"));
    }

    #[test]
    fn both_risk_terms_are_accepted() {
        let c = RunConfig::from_toml(&format!("{MINIMAL}[reward]\neta = 1.0\nzeta = 0.01\n")).unwrap();
        assert_eq!((c.reward.eta, c.reward.zeta), (1.0, 0.01));
    }

    #[test]
    fn resolved_copy_round_trips() {
        let mut c = RunConfig::from_toml(&format!(
            "{MINIMAL}[adversary]\nkind = \"strategic\"\ncontrolled = [\"b\", \"k\"]\n[eval]\nregimes = [\"fixed\", \"random\"]\n"
        ))
        .unwrap();
        c.output_dir = Some("out/x".into());
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
        assert!(text.contains("lr_policy"));
    }

    #[test]
    fn strategic_regime_uses_configured_market() {
        let mut c = RunConfig::new("t", 1);
        c.adversary.kind = RegimeKind::Strategic;
        c.adversary.market.volatility = 3.0;
        match c.training_regime().unwrap() {
            AdversaryRegime::Strategic { base, policy } => {
                assert_eq!(base.volatility, 3.0);
                assert_eq!(policy.dims().len(), 1);
            }
            other => panic!("{other:?}"),
        }
    }
}
