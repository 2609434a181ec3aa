use serde::Serialize;

use super::{evaluate_outcomes, EpisodeOutcome};
use crate::error::{Error, Result};
use crate::learner::{Checkpoint, TrainConfig, Trainer};
use crate::rng::{child_seed, stream, Purpose};
use crate::stats::mean_std;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Player {
    MarketMaker,
    Adversary,
}

#[derive(Debug, Clone)]
pub struct AuditConfig {
    /// Retraining episodes per direction.
    pub budget: usize,
    /// Tolerance as a fraction of the pair's mean episodic reward magnitude.
    pub epsilon_rel: f64,
    pub eval_episodes: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub workers: Option<usize>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            budget: 10_000,
            epsilon_rel: 0.02,
            eval_episodes: 10_000,
            seed: 0,
            train: TrainConfig::default(),
            workers: None,
        }
    }
}

/// Gain of one player after retraining against the other, frozen.
///
/// Rewards are from the retrained player's side (the adversary's is the
/// market maker's negated). Pre and post evaluations share episode seeds,
/// so `std_error` is the standard error of the paired differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionReport {
    pub retrained: Player,
    pub pre_mean_reward: f64,
    pub post_mean_reward: f64,
    pub delta: f64,
    pub std_error: f64,
    pub epsilon: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ApproximateNe,
    Exploitable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub budget: usize,
    pub eval_episodes: usize,
    pub directions: Vec<DirectionReport>,
    pub verdict: Verdict,
    /// Set when no retraining happened, so the verdict carries no evidence.
    pub vacuous: bool,
}

impl AuditReport {
    pub fn verdict_text(&self) -> &'static str {
        match (self.verdict, self.vacuous) {
            (Verdict::ApproximateNe, true) => "approximate NE (vacuous)",
            (Verdict::ApproximateNe, false) => "approximate NE",
            (Verdict::Exploitable, _) => "exploitable",
        }
    }
}

/// Empirical best-response check of a trained market maker / strategic
/// adversary pair.
///
/// For each player in turn, the other is frozen and the player resumes
/// learning from its checkpointed policy and critic for `budget` episodes.
/// The pair is an approximate equilibrium when neither retrained player
/// improves its mean episodic reward by more than
/// `epsilon_rel * |pre-retraining mean reward| + 2 * std_error`.
pub fn best_response_audit(ckpt: &Checkpoint, cfg: &AuditConfig) -> Result<AuditReport> {
    ckpt.validate()?;
    if ckpt.adversary_critic.is_none() {
        return Err(Error::Config("the audit needs a checkpoint with a strategic adversary".into()));
    }
    if !(cfg.epsilon_rel >= 0.0 && cfg.epsilon_rel.is_finite()) {
        return Err(Error::Config(format!("audit epsilon must be non-negative, got {}", cfg.epsilon_rel)));
    }
    let eval_seed = child_seed(cfg.seed, Purpose::Audit, 0);
    let sim = &ckpt.sim;
    let risk = &ckpt.risk;
    let mm = ckpt.market_maker()?;
    let regime = ckpt.regime()?;
    let pre = evaluate_outcomes(&mm, &regime, sim, risk, cfg.eval_episodes, eval_seed, cfg.workers)?;
    let pre_mm_reward = mean_std(&rewards(&pre)).0;
    let epsilon = cfg.epsilon_rel * pre_mm_reward.abs();

    let mut directions = Vec::with_capacity(2);
    for (i, player) in [Player::MarketMaker, Player::Adversary].into_iter().enumerate() {
        let post = if cfg.budget == 0 {
            pre.clone()
        } else {
            let train_seed = child_seed(cfg.seed, Purpose::Audit, 1 + i as u64);
            let mut t = Trainer::from_checkpoint(ckpt, cfg.train.clone(), train_seed)?.with_workers(cfg.workers);
            match player {
                Player::MarketMaker => t.freeze_adversary(),
                Player::Adversary => t.freeze_market_maker(),
            }
            t.learn(cfg.budget, &mut stream(train_seed, Purpose::Train, 0))?;
            evaluate_outcomes(t.market_maker(), t.regime(), sim, risk, cfg.eval_episodes, eval_seed, cfg.workers)?
        };
        let sign = match player {
            Player::MarketMaker => 1.0,
            Player::Adversary => -1.0,
        };
        let diffs: Vec<f64> = pre.iter().zip(&post).map(|(a, b)| sign * (b.reward - a.reward)).collect();
        let (delta, sd) = mean_std(&diffs);
        let std_error = if diffs.len() > 1 { sd / (diffs.len() as f64).sqrt() } else { 0.0 };
        directions.push(DirectionReport {
            retrained: player,
            pre_mean_reward: sign * pre_mm_reward,
            post_mean_reward: sign * mean_std(&rewards(&post)).0,
            delta,
            std_error,
            epsilon,
            within_tolerance: delta <= epsilon + 2.0 * std_error,
        });
    }
    let verdict = if directions.iter().all(|d| d.within_tolerance) {
        Verdict::ApproximateNe
    } else {
        Verdict::Exploitable
    };
    Ok(AuditReport {
        budget: cfg.budget,
        eval_episodes: cfg.eval_episodes,
        directions,
        verdict,
        vacuous: cfg.budget == 0,
    })
}

fn rewards(outcomes: &[EpisodeOutcome]) -> Vec<f64> {
    outcomes.iter().map(|o| o.reward).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{AdversaryRegime, ControlledParam};
    use crate::learner::RiskParams;
    use crate::market_sim::SimConfig;
    use crate::policy::{FeatureBasis, GaussianPolicy};
    use crate::stage_game::ParamBounds;

    fn checkpoint() -> Checkpoint {
        let sim = SimConfig::default();
        let basis = FeatureBasis::new(sim.inventory_scale());
        let regime = AdversaryRegime::strategic(&[ControlledParam::Drift], &ParamBounds::default(), basis).unwrap();
        let cfg = TrainConfig { pretrain_episodes: 0, ..TrainConfig::default() };
        let mm = GaussianPolicy::zeros(basis);
        Trainer::new(sim, regime, mm, RiskParams::NEUTRAL, cfg, 3).unwrap().checkpoint()
    }

    #[test]
    fn zero_budget_is_vacuous() {
        let cfg = AuditConfig { budget: 0, eval_episodes: 50, seed: 1, ..Default::default() };
        let r = best_response_audit(&checkpoint(), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::ApproximateNe);
        assert_eq!(r.verdict_text(), "approximate NE (vacuous)");
        for d in &r.directions {
            assert_eq!(d.delta, 0.0);
            assert_eq!(d.std_error, 0.0);
            assert_eq!(d.pre_mean_reward, d.post_mean_reward);
        }
        // Roles are mirror images: the adversary's reward is the negation.
        assert_eq!(r.directions[0].pre_mean_reward, -r.directions[1].pre_mean_reward);
    }

    #[test]
    fn audit_is_deterministic() {
        let cfg = AuditConfig { budget: 20, eval_episodes: 40, seed: 2, ..Default::default() };
        let a = best_response_audit(&checkpoint(), &cfg).unwrap();
        let b = best_response_audit(&checkpoint(), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(!a.vacuous);
    }

    #[test]
    fn non_strategic_pairs_are_rejected() {
        let sim = SimConfig::default();
        let mm = GaussianPolicy::zeros(FeatureBasis::new(50.0));
        let ckpt = Trainer::new(sim, AdversaryRegime::fixed(), mm, RiskParams::NEUTRAL, TrainConfig::default(), 0)
            .unwrap()
            .checkpoint();
        let cfg = AuditConfig { budget: 0, eval_episodes: 10, ..Default::default() };
        assert!(matches!(best_response_audit(&ckpt, &cfg), Err(Error::Config(_))));
    }
}
