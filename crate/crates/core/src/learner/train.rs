use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    reward, Checkpoint, Critic, CriticSnapshot, RbfGrid, RiskParams, StepRule, CHECKPOINT_FORMAT, CHECKPOINT_VERSION,
};
use crate::adversary::{draw_random, params_from_sample, AdversaryRegime, RegimeSpec};
use crate::error::{Error, Result};
use crate::harness::evaluate;
use crate::market_sim::{interpret_action, Episode, SimConfig};
use crate::policy::{GaussianPolicy, PolicySnapshot};
use crate::rng::{child_seed, stream, Purpose, Rng};

/// Learning hyperparameters shared by both players.
///
/// The defaults are tuned to learn within desk-scale budgets (a few times
/// 10^4 episodes). [`TrainConfig::literal`] gives the slower textbook
/// schedule: small constant rates and advantage weights discarded after
/// every policy step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Critic-only episodes with the initial policies frozen.
    pub pretrain_episodes: usize,
    pub pretrain_lr: f64,
    pub train_episodes: usize,
    /// Critic updates between natural-gradient policy steps.
    pub policy_update_period: usize,
    pub lr_critic: f64,
    pub lr_policy: f64,
    pub trace_decay: f64,
    /// Factor applied to the critic's advantage weights after each policy
    /// step; 0 discards them.
    pub advantage_retention: f64,
    pub critic_step: StepRule,
    /// Any weight vector with a larger Euclidean norm aborts training.
    pub divergence_ceiling: f64,
    /// Main-phase episodes between checkpoints; 0 keeps only the final one.
    pub checkpoint_every: usize,
    /// Full-horizon evaluation episodes behind each training-log row.
    pub checkpoint_eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            pretrain_episodes: 1000,
            pretrain_lr: 1e-3,
            train_episodes: 50_000,
            policy_update_period: 100,
            lr_critic: 1e-4,
            lr_policy: 5e-4,
            trace_decay: 0.97,
            advantage_retention: 1.0,
            critic_step: StepRule::Bounded,
            divergence_ceiling: 1e6,
            checkpoint_every: 5000,
            checkpoint_eval_episodes: 200,
        }
    }
}

impl TrainConfig {
    pub const PAPER_TRAIN_EPISODES: usize = 1_000_000;

    pub fn literal() -> Self {
        TrainConfig {
            lr_policy: 1e-4,
            advantage_retention: 0.0,
            critic_step: StepRule::Constant,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("pretrain_lr", self.pretrain_lr),
            ("lr_critic", self.lr_critic),
            ("lr_policy", self.lr_policy),
            ("divergence_ceiling", self.divergence_ceiling),
        ];
        for (name, v) in rates {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("train.{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.trace_decay) {
            return Err(Error::Config(format!("train.trace_decay must lie in [0, 1], got {}", self.trace_decay)));
        }
        if !(0.0..=1.0).contains(&self.advantage_retention) {
            return Err(Error::Config(format!(
                "train.advantage_retention must lie in [0, 1], got {}",
                self.advantage_retention
            )));
        }
        if self.policy_update_period == 0 {
            return Err(Error::Config("train.policy_update_period must be at least 1".into()));
        }
        if self.checkpoint_eval_episodes == 0 {
            return Err(Error::Config("train.checkpoint_eval_episodes must be at least 1".into()));
        }
        Ok(())
    }
}

/// One row of the training log, from a full-horizon evaluation of the
/// current policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub checkpoint_episode: usize,
    pub mean_wealth: f64,
    pub std_wealth: f64,
    pub sharpe: f64,
    pub mean_inv: f64,
    pub std_inv: f64,
    pub mean_spread: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub market_maker: GaussianPolicy,
    pub regime: AdversaryRegime,
    pub checkpoint: Checkpoint,
    pub log: Vec<LogRow>,
    pub checkpoint_paths: Vec<PathBuf>,
}

/// Scratch vectors for the current and previous step.
struct Buffers {
    rbf: [Vec<f64>; 2],
    mm: [Vec<f64>; 2],
    adv: [Vec<f64>; 2],
}

impl Buffers {
    fn new(n_rbf: usize, n_mm: usize, n_adv: usize) -> Self {
        Buffers {
            rbf: [vec![0.0; n_rbf], vec![0.0; n_rbf]],
            mm: [vec![0.0; n_mm], vec![0.0; n_mm]],
            adv: [vec![0.0; n_adv], vec![0.0; n_adv]],
        }
    }

    fn swap(&mut self) {
        self.rbf.swap(0, 1);
        self.mm.swap(0, 1);
        self.adv.swap(0, 1);
    }
}

/// Runs NAC-S(lambda) for the market maker and, if strategic, the adversary.
///
/// Each step the adversary acts, then the market maker, then the market
/// moves. The critic update for a transition happens once the successor
/// actions are known; every `policy_update_period` updates each learning
/// player takes a natural-gradient step. The market maker learns from the
/// risk-adjusted reward, the adversary from its negation.
#[derive(Debug, Clone)]
pub struct Trainer {
    sim: SimConfig,
    cfg: TrainConfig,
    risk: RiskParams,
    seed: u64,
    mm: GaussianPolicy,
    regime: AdversaryRegime,
    mm_critic: Critic,
    adversary_critic: Option<Critic>,
    learn_mm: bool,
    learn_adversary: bool,
    updates: u64,
    episodes: usize,
    workers: Option<usize>,
}

impl Trainer {
    pub fn new(
        sim: SimConfig,
        regime: AdversaryRegime,
        mm: GaussianPolicy,
        risk: RiskParams,
        cfg: TrainConfig,
        seed: u64,
    ) -> Result<Self> {
        sim.validate()?;
        cfg.validate()?;
        risk.validate()?;
        let rbf = RbfGrid::standard(sim.inventory_scale());
        let mm_critic = Critic::new(rbf.clone(), GaussianPolicy::N_PARAMS, cfg.trace_decay)?.with_step_rule(cfg.critic_step);
        let adversary_critic = match regime.policy() {
            Some(p) => Some(Critic::new(rbf, p.n_params(), cfg.trace_decay)?.with_step_rule(cfg.critic_step)),
            None => None,
        };
        Ok(Trainer {
            learn_adversary: adversary_critic.is_some(),
            sim,
            cfg,
            risk,
            seed,
            mm,
            regime,
            mm_critic,
            adversary_critic,
            learn_mm: true,
            updates: 0,
            episodes: 0,
            workers: None,
        })
    }

    /// Resumes from a checkpoint with fresh traces.
    pub fn from_checkpoint(ckpt: &Checkpoint, cfg: TrainConfig, seed: u64) -> Result<Self> {
        ckpt.validate()?;
        let mut t = Trainer::new(ckpt.sim.clone(), ckpt.regime()?, ckpt.market_maker()?, ckpt.risk, cfg, seed)?;
        let (decay, rule) = (t.cfg.trace_decay, t.cfg.critic_step);
        t.mm_critic = ckpt.mm_critic.to_critic()?.with_step_rule(rule);
        t.mm_critic.trace_decay = decay;
        if let (Some(slot), Some(snap)) = (t.adversary_critic.as_mut(), &ckpt.adversary_critic) {
            *slot = snap.to_critic()?.with_step_rule(rule);
            slot.trace_decay = decay;
        }
        t.episodes = ckpt.episode;
        Ok(t)
    }

    pub fn with_workers(mut self, workers: Option<usize>) -> Self {
        self.workers = workers;
        self
    }

    pub fn freeze_market_maker(&mut self) {
        self.learn_mm = false;
    }

    pub fn freeze_adversary(&mut self) {
        self.learn_adversary = false;
    }

    pub fn market_maker(&self) -> &GaussianPolicy {
        &self.mm
    }

    pub fn market_maker_mut(&mut self) -> &mut GaussianPolicy {
        &mut self.mm
    }

    pub fn regime(&self) -> &AdversaryRegime {
        &self.regime
    }

    pub fn mm_critic(&self) -> &Critic {
        &self.mm_critic
    }

    pub fn adversary_critic(&self) -> Option<&Critic> {
        self.adversary_critic.as_ref()
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            episode: self.episodes,
            seed: self.seed,
            sim: self.sim.clone(),
            risk: self.risk,
            adversary: RegimeSpec::from(&self.regime),
            market_maker: PolicySnapshot::from(&self.mm),
            mm_critic: CriticSnapshot::from(&self.mm_critic),
            adversary_critic: self.adversary_critic.as_ref().map(CriticSnapshot::from),
        }
    }

    fn buffers(&self) -> Buffers {
        let n_adv = self.adversary_critic.as_ref().map_or(0, Critic::n_policy_params);
        Buffers::new(self.mm_critic.n_state_features(), GaussianPolicy::N_PARAMS, n_adv)
    }

    /// Full protocol: critic pretraining, then joint learning with periodic
    /// checkpoints. With `out` set, checkpoints go to `out/checkpoints/` and
    /// the log to `out/training_log.csv`.
    pub fn run(mut self, out: Option<&Path>) -> Result<TrainOutcome> {
        let ckpt_dir = match out {
            Some(dir) => {
                let d = dir.join("checkpoints");
                fs::create_dir_all(&d)?;
                Some(d)
            }
            None => None,
        };
        let mut log_writer = match out {
            Some(dir) => Some(csv::Writer::from_path(dir.join("training_log.csv"))?),
            None => None,
        };
        let mut log = Vec::new();
        let mut paths: Vec<PathBuf> = Vec::new();
        let mut bufs = self.buffers();

        let mut rng = stream(self.seed, Purpose::Pretrain, 0);
        for _ in 0..self.cfg.pretrain_episodes {
            let r = self.learn_episode(&mut rng, self.cfg.pretrain_lr, false, &mut bufs);
            self.guard(r, paths.last())?;
        }
        // Pretraining fits the state-value part; advantage weights learned
        // under the frozen initial policies would otherwise be replayed by
        // the first policy steps.
        self.mm_critic.w_a.fill(0.0);
        if let Some(c) = self.adversary_critic.as_mut() {
            c.w_a.fill(0.0);
        }

        let mut checkpoint = |t: &Trainer, log: &mut Vec<LogRow>, paths: &mut Vec<PathBuf>| -> Result<()> {
            let row = t.log_row()?;
            if let Some(w) = log_writer.as_mut() {
                w.serialize(row)?;
                w.flush()?;
            }
            log.push(row);
            if let Some(d) = &ckpt_dir {
                let p = d.join(format!("episode_{:07}.json", t.episodes));
                t.checkpoint().save(&p)?;
                paths.push(p);
            }
            Ok(())
        };
        checkpoint(&self, &mut log, &mut paths)?;

        let mut rng = stream(self.seed, Purpose::Train, 0);
        for e in 1..=self.cfg.train_episodes {
            let r = self.learn_episode(&mut rng, self.cfg.lr_critic, true, &mut bufs);
            self.episodes += 1;
            self.guard(r, paths.last())?;
            let every = self.cfg.checkpoint_every;
            if (every > 0 && e % every == 0) || e == self.cfg.train_episodes {
                checkpoint(&self, &mut log, &mut paths)?;
            }
        }

        Ok(TrainOutcome {
            checkpoint: self.checkpoint(),
            market_maker: self.mm,
            regime: self.regime,
            log,
            checkpoint_paths: paths,
        })
    }

    /// Main-phase learning for `n` episodes on `rng`, without pretraining,
    /// checkpoints or logging.
    pub fn learn(&mut self, n: usize, rng: &mut Rng) -> Result<()> {
        let mut bufs = self.buffers();
        for _ in 0..n {
            let r = self.learn_episode(rng, self.cfg.lr_critic, true, &mut bufs);
            self.episodes += 1;
            self.guard(r, None)?;
        }
        Ok(())
    }

    fn log_row(&self) -> Result<LogRow> {
        let seed = child_seed(self.seed, Purpose::Checkpoint, 0);
        let r = evaluate(
            &self.mm,
            &self.regime,
            &self.sim,
            &self.risk,
            self.cfg.checkpoint_eval_episodes,
            seed,
            self.workers,
        )?;
        Ok(LogRow {
            checkpoint_episode: self.episodes,
            mean_wealth: r.mean_wealth,
            std_wealth: r.std_wealth,
            sharpe: r.sharpe,
            mean_inv: r.mean_inv,
            std_inv: r.std_inv,
            mean_spread: r.mean_spread,
        })
    }

    /// Turns numerical failures into a divergence report and checks the
    /// weight-norm ceiling.
    fn guard(&self, step: Result<()>, last: Option<&PathBuf>) -> Result<()> {
        let diverged = |reason: String| Error::Divergence {
            episode: self.episodes,
            reason,
            last_checkpoint: last.cloned(),
        };
        match step {
            Ok(()) => {}
            Err(
                e @ (Error::Invariant(_)
                | Error::EpisodeAborted { .. }
                | Error::InvalidPolicy(_)
                | Error::InvalidAction(_)),
            ) => return Err(diverged(e.to_string())),
            Err(e) => return Err(e),
        }
        let ceiling = self.cfg.divergence_ceiling;
        let mut norms = vec![
            ("market maker policy", norm(self.mm.weights())),
            ("market maker critic", self.mm_critic.weight_norm()),
        ];
        if let Some(p) = self.regime.policy() {
            norms.push(("adversary policy", norm(p.weights())));
        }
        if let Some(c) = &self.adversary_critic {
            norms.push(("adversary critic", c.weight_norm()));
        }
        for (name, n) in norms {
            if !(n.is_finite() && n <= ceiling) {
                return Err(diverged(format!("{name} weight norm {n:.3e} exceeds ceiling {ceiling:.1e}")));
            }
        }
        Ok(())
    }

    fn learn_episode(&mut self, rng: &mut Rng, lr: f64, update_policy: bool, b: &mut Buffers) -> Result<()> {
        let start = self.sim.sample_start(rng);
        let mut episode = Episode::new(&self.sim, start)?;
        self.mm_critic.reset_traces();
        if let Some(c) = self.adversary_critic.as_mut() {
            c.reset_traces();
        }
        let mut params = match &self.regime {
            AdversaryRegime::Fixed { params } => *params,
            AdversaryRegime::Random { base, bounds } => draw_random(base, bounds, rng),
            AdversaryRegime::Strategic { base, .. } => *base,
        };
        let mut pending: Option<f64> = None;
        while !episode.is_done() {
            let s = *episode.state();
            let h = s.h as f64;
            self.mm_critic.rbf.features_into(s.t, h, &mut b.rbf[0]);
            if let AdversaryRegime::Strategic { base, policy } = &self.regime {
                let phi = policy.features(s.t, h);
                let sample = policy.sample(&phi, rng)?;
                params = params_from_sample(base, policy, &sample);
                if self.learn_adversary {
                    policy.score_unit_into(&phi, &sample.unit, &mut b.adv[0]);
                }
            }
            let phi = self.mm.features(s.t, h);
            let g = self.mm.sample(&phi, rng)?;
            if self.learn_mm {
                self.mm.score_into(&phi, (g.p_tilde, g.psi), &mut b.mm[0]);
            }
            if let Some(r) = pending {
                self.update(b, r, true, lr, update_policy)?;
            }
            let (p_tilde, psi) = g.action();
            let quote = interpret_action(p_tilde, psi)
                .map_err(|e| Error::EpisodeAborted { step: s.n, reason: e.to_string() })?;
            let tr = episode.step(quote, params, rng)?;
            pending = Some(reward(tr.delta_pi, tr.next.h, tr.terminal, &self.risk));
            b.swap();
        }
        match pending {
            Some(r) => self.update(b, r, false, lr, update_policy),
            None => Ok(()),
        }
    }

    /// Critic updates for the transition held in slot 1, bootstrapping from
    /// slot 0 when `has_next`.
    fn update(&mut self, b: &Buffers, r: f64, has_next: bool, lr: f64, update_policy: bool) -> Result<()> {
        if self.learn_mm {
            let next = has_next.then(|| (&b.rbf[0][..], &b.mm[0][..]));
            self.mm_critic.sarsa_update((&b.rbf[1], &b.mm[1]), r, next, lr)?;
        }
        let adversary_reward = -r;
        if r + adversary_reward != 0.0 {
            return Err(Error::Invariant(format!("rewards {r} and {adversary_reward} do not cancel")));
        }
        if self.learn_adversary {
            if let Some(c) = self.adversary_critic.as_mut() {
                let next = has_next.then(|| (&b.rbf[0][..], &b.adv[0][..]));
                c.sarsa_update((&b.rbf[1], &b.adv[1]), adversary_reward, next, lr)?;
            }
        }
        if !update_policy {
            return Ok(());
        }
        self.updates += 1;
        if self.updates.is_multiple_of(self.cfg.policy_update_period as u64) {
            let (lr, keep) = (self.cfg.lr_policy, self.cfg.advantage_retention);
            if self.learn_mm {
                self.mm_critic.natural_step(self.mm.weights_mut(), lr, keep)?;
            }
            if self.learn_adversary {
                if let (Some(c), Some(p)) = (self.adversary_critic.as_mut(), self.regime.policy_mut()) {
                    c.natural_step(p.weights_mut(), lr, keep)?;
                }
            }
        }
        Ok(())
    }
}

fn norm(w: &[f64]) -> f64 {
    w.iter().map(|x| x * x).sum::<f64>().sqrt()
}
