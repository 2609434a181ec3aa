//! Best-response audit of a trained market maker / strategic adversary
//! pair, then of the same pair with the market maker's skew shifted by a
//! constant.
//!
//!     cargo run --release --example audit_equilibrium -- [episodes] [budget] [seed]

use robust_mm::adversary::{AdversaryRegime, ControlledParam};
use robust_mm::cli::format_audit;
use robust_mm::harness::{best_response_audit, AuditConfig};
use robust_mm::learner::{RiskParams, TrainConfig, Trainer};
use robust_mm::market_sim::SimConfig;
use robust_mm::policy::{FeatureBasis, GaussianPolicy, PolicySnapshot};
use robust_mm::stage_game::ParamBounds;

fn main() -> robust_mm::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes: usize = args.next().map_or(50_000, |s| s.parse().expect("episodes"));
    let budget: usize = args.next().map_or(10_000, |s| s.parse().expect("budget"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let sim = SimConfig::default();
    let basis = FeatureBasis::new(sim.inventory_scale());
    let regime = AdversaryRegime::strategic(&[ControlledParam::Drift], &ParamBounds::default(), basis)?;
    let mm = GaussianPolicy::zeros(basis).with_min_variance(GaussianPolicy::DEFAULT_MIN_VARIANCE)?;
    let cfg = TrainConfig { train_episodes: episodes, checkpoint_every: 0, ..Default::default() };
    let trained = Trainer::new(sim, regime, mm, RiskParams::NEUTRAL, cfg, seed)?.run(None)?.checkpoint;

    let audit = AuditConfig { budget, seed, ..Default::default() };
    println!("trained pair");
    print!("{}", format_audit(&best_response_audit(&trained, &audit)?));

    let mut skewed = trained.market_maker()?;
    skewed.mean_p_tilde_weights_mut()[0] += 1.0;
    let perturbed = robust_mm::learner::Checkpoint { market_maker: PolicySnapshot::from(&skewed), ..trained };
    println!("\nmarket maker skew shifted by +1");
    print!("{}", format_audit(&best_response_audit(&perturbed, &audit)?));
    Ok(())
}
