use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryRegime;
use crate::error::{Error, Result};
use crate::learner::{reward, RiskParams};
use crate::market_sim::{run_episode, EpisodeStart, SimConfig};
use crate::policy::{GaussianPolicy, SampledQuotes};
use crate::rng::{stream, Purpose};
use crate::stats::mean_std;

/// Summary of a batch of full-horizon evaluation episodes.
///
/// Standard deviations use the `n - 1` denominator. `std_spread` is taken
/// across per-episode average spreads. `mean_reward` is the market maker's
/// episodic reward under the risk parameters of the evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_episodes: usize,
    pub mean_wealth: f64,
    pub std_wealth: f64,
    pub sharpe: f64,
    pub mean_inv: f64,
    pub std_inv: f64,
    pub mean_spread: f64,
    pub std_spread: f64,
    pub mean_reward: f64,
    pub std_reward: f64,
}

/// Per-episode outcome, kept so callers can pair episodes across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpisodeOutcome {
    pub wealth: f64,
    pub inventory: i32,
    pub spread: f64,
    pub reward: f64,
}

impl EvalReport {
    pub fn from_outcomes(outcomes: &[EpisodeOutcome]) -> Self {
        let col = |f: fn(&EpisodeOutcome) -> f64| outcomes.iter().map(f).collect::<Vec<_>>();
        let (mean_wealth, std_wealth) = mean_std(&col(|o| o.wealth));
        let (mean_inv, std_inv) = mean_std(&col(|o| o.inventory as f64));
        let (mean_spread, std_spread) = mean_std(&col(|o| o.spread));
        let (mean_reward, std_reward) = mean_std(&col(|o| o.reward));
        EvalReport {
            n_episodes: outcomes.len(),
            mean_wealth,
            std_wealth,
            sharpe: sharpe(mean_wealth, std_wealth),
            mean_inv,
            std_inv,
            mean_spread,
            std_spread,
            mean_reward,
            std_reward,
        }
    }

    pub fn variance(&self) -> f64 {
        self.std_wealth * self.std_wealth
    }

    pub fn wealth_std_error(&self) -> f64 {
        self.std_wealth / (self.n_episodes as f64).sqrt()
    }
}

/// Mean over standard deviation; undefined (NaN) for a degenerate sample.
pub fn sharpe(mean: f64, std: f64) -> f64 {
    if std > 0.0 {
        mean / std
    } else {
        f64::NAN
    }
}

/// Runs `f` on a pool capped at `workers` threads (all cores when `None`).
pub(crate) fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::Config("worker count must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Full-horizon episodes (`t0 = 0`, `H0 = 0`) of a frozen market maker
/// against `regime`. Episode `i` always uses child stream `i` of `seed`, so
/// the outcome vector does not depend on scheduling.
pub fn evaluate_outcomes(
    mm: &GaussianPolicy,
    regime: &AdversaryRegime,
    sim: &SimConfig,
    risk: &RiskParams,
    n_episodes: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<Vec<EpisodeOutcome>> {
    if n_episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    sim.validate()?;
    let one = |i: usize| -> Result<EpisodeOutcome> {
        let mut rng = stream(seed, Purpose::Evaluate, i as u64);
        let mut quotes = SampledQuotes(mm);
        let mut adversary = regime.source();
        let (traj, stats) = run_episode(&mut quotes, &mut adversary, sim, EpisodeStart::EVALUATION, &mut rng)?;
        let total: f64 = traj.steps.iter().map(|s| reward(s.delta_pi, s.h_next, s.terminal, risk)).sum();
        Ok(EpisodeOutcome {
            wealth: stats.terminal_wealth,
            inventory: stats.terminal_inventory,
            spread: stats.mean_spread,
            reward: total,
        })
    };
    with_workers(workers, || (0..n_episodes).into_par_iter().map(one).collect::<Result<Vec<_>>>())?
}

pub fn evaluate(
    mm: &GaussianPolicy,
    regime: &AdversaryRegime,
    sim: &SimConfig,
    risk: &RiskParams,
    n_episodes: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<EvalReport> {
    let outcomes = evaluate_outcomes(mm, regime, sim, risk, n_episodes, seed, workers)?;
    Ok(EvalReport::from_outcomes(&outcomes))
}
