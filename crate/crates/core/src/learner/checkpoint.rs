//! Training checkpoints: both policies, both critics and the environment
//! they were trained in, as one JSON document.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Critic, RbfGrid, RiskParams};
use crate::adversary::{AdversaryRegime, RegimeSpec};
use crate::error::{Error, Result};
use crate::market_sim::SimConfig;
use crate::policy::{GaussianPolicy, PolicySnapshot};

pub const CHECKPOINT_FORMAT: &str = "robust-mm/checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticSnapshot {
    pub rbf: RbfGrid,
    pub trace_decay: f64,
    pub w_v: Vec<f64>,
    pub w_a: Vec<f64>,
}

impl From<&Critic> for CriticSnapshot {
    fn from(c: &Critic) -> Self {
        CriticSnapshot { rbf: c.rbf.clone(), trace_decay: c.trace_decay, w_v: c.w_v.clone(), w_a: c.w_a.clone() }
    }
}

impl CriticSnapshot {
    pub fn to_critic(&self) -> Result<Critic> {
        Critic::from_weights(self.rbf.clone(), self.w_v.clone(), self.w_a.clone(), self.trace_decay)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Main-phase episodes completed when the checkpoint was taken.
    pub episode: usize,
    pub seed: u64,
    pub sim: SimConfig,
    pub risk: RiskParams,
    pub adversary: RegimeSpec,
    pub market_maker: PolicySnapshot,
    pub mm_critic: CriticSnapshot,
    pub adversary_critic: Option<CriticSnapshot>,
}

impl Checkpoint {
    pub fn validate(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Snapshot(format!("unknown checkpoint format '{}'", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Snapshot(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        self.sim.validate()?;
        self.risk.validate()?;
        self.market_maker.validate()
    }

    pub fn market_maker(&self) -> Result<GaussianPolicy> {
        self.market_maker.to_gaussian()
    }

    pub fn regime(&self) -> Result<AdversaryRegime> {
        self.adversary.to_regime()
    }

    /// The market maker of `self` facing the strategic adversary (policy and
    /// critic) of `other`. Both must come from the same environment.
    pub fn pair_with(&self, other: &Checkpoint) -> Result<Checkpoint> {
        if self.sim != other.sim {
            return Err(Error::Config("checkpoints were trained in different simulator configurations".into()));
        }
        if self.risk != other.risk {
            return Err(Error::Config("checkpoints were trained with different reward parameters".into()));
        }
        if other.adversary_critic.is_none() {
            return Err(Error::Config("the adversary checkpoint has no strategic adversary".into()));
        }
        Ok(Checkpoint {
            adversary: other.adversary.clone(),
            adversary_critic: other.adversary_critic.clone(),
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let c: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Snapshot(format!("{}: {e}", path.display())))?;
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::ControlledParam;
    use crate::learner::{TrainConfig, Trainer};
    use crate::policy::FeatureBasis;
    use crate::stage_game::ParamBounds;

    fn ckpt(regime: AdversaryRegime, risk: RiskParams) -> Checkpoint {
        let mm = GaussianPolicy::zeros(FeatureBasis::new(50.0)).with_min_variance(0.01).unwrap();
        Trainer::new(SimConfig::default(), regime, mm, risk, TrainConfig::default(), 4).unwrap().checkpoint()
    }

    fn strategic() -> AdversaryRegime {
        AdversaryRegime::strategic(&[ControlledParam::Drift], &ParamBounds::default(), FeatureBasis::new(50.0)).unwrap()
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let c = ckpt(strategic(), RiskParams::running(0.01));
        c.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.market_maker().unwrap().min_variance(), 0.01);
        assert_eq!(back.to_json().unwrap(), c.to_json().unwrap());
    }

    #[test]
    fn wrong_version_is_a_snapshot_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let mut c = ckpt(AdversaryRegime::fixed(), RiskParams::NEUTRAL);
        c.version = 99;
        fs::write(&path, serde_json::to_string(&c).unwrap()).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Snapshot(_))));
    }

    #[test]
    fn pairing_requires_matching_environments() {
        let mm = ckpt(AdversaryRegime::fixed(), RiskParams::NEUTRAL);
        let adv = ckpt(strategic(), RiskParams::NEUTRAL);
        let pair = mm.pair_with(&adv).unwrap();
        assert_eq!(pair.market_maker, mm.market_maker);
        assert_eq!(pair.adversary, adv.adversary);
        assert!(pair.adversary_critic.is_some());

        let other_risk = ckpt(strategic(), RiskParams::running(0.01));
        assert!(matches!(mm.pair_with(&other_risk), Err(Error::Config(_))));
        let mut other_sim = adv.clone();
        other_sim.sim.dt = 0.01;
        assert!(matches!(mm.pair_with(&other_sim), Err(Error::Config(_))));
        assert!(matches!(adv.pair_with(&mm), Err(Error::Config(_))));
    }
}
