//! Trains a risk-neutral and a running-penalty market maker against the
//! fixed-parameter adversary and compares them on held-out episodes.
//!
//!     cargo run --release --example train_fixed -- [episodes] [seed]

use robust_mm::adversary::AdversaryRegime;
use robust_mm::harness::evaluate;
use robust_mm::learner::{RiskParams, TrainConfig, Trainer};
use robust_mm::market_sim::SimConfig;
use robust_mm::policy::{FeatureBasis, GaussianPolicy};

fn main() -> robust_mm::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes: usize = args.next().map_or(50_000, |s| s.parse().expect("episodes"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let sim = SimConfig::default();
    let cfg = TrainConfig { train_episodes: episodes, checkpoint_every: 0, ..Default::default() };
    let regime = AdversaryRegime::fixed();

    println!("{:<14} {:>8} {:>8} {:>7} {:>8} {:>8} {:>7}", "agent", "wealth", "std", "sharpe", "inv", "inv std", "spread");
    for (name, risk) in [("risk-neutral", RiskParams::NEUTRAL), ("running 0.01", RiskParams::running(0.01))] {
        let mm = GaussianPolicy::zeros(FeatureBasis::new(sim.inventory_scale()))
            .with_min_variance(GaussianPolicy::DEFAULT_MIN_VARIANCE)?;
        let out = Trainer::new(sim.clone(), regime.clone(), mm, risk, cfg.clone(), seed)?.run(None)?;
        let r = evaluate(&out.market_maker, &regime, &sim, &risk, 10_000, seed + 1000, None)?;
        println!(
            "{name:<14} {:>8.2} {:>8.2} {:>7.2} {:>8.2} {:>8.2} {:>7.3}",
            r.mean_wealth, r.std_wealth, r.sharpe, r.mean_inv, r.std_inv, r.mean_spread
        );
    }
    Ok(())
}
