//! One trading day with a constant symmetric quote against the fixed
//! market, written step by step as CSV.
//!
//!     cargo run --example simulate_episode -- [delta] [seed] > day.csv

use robust_mm::learner::{reward, RiskParams};
use robust_mm::market_sim::{run_episode, ConstantParams, ConstantQuote, EpisodeStart, MarketParams, Quote, SimConfig};
use robust_mm::rng::{stream, Purpose};

fn main() -> robust_mm::Result<()> {
    let mut args = std::env::args().skip(1);
    let delta: f64 = args.next().map_or(1.0 / MarketParams::DEFAULT_DECAY, |s| s.parse().expect("delta"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));

    let sim = SimConfig::default();
    let mut rng = stream(seed, Purpose::Misc, 0);
    let (traj, stats) = run_episode(
        &mut ConstantQuote(Quote::symmetric(delta)),
        &mut ConstantParams(MarketParams::default()),
        &sim,
        EpisodeStart::EVALUATION,
        &mut rng,
    )?;
    let risk = RiskParams::NEUTRAL;
    traj.write_csv(std::io::stdout().lock(), |s| reward(s.delta_pi, s.h_next, s.terminal, &risk))?;
    eprintln!(
        "delta {delta:.4}: {} steps, terminal wealth {:.2}, inventory {}, {} fills",
        stats.steps,
        stats.terminal_wealth,
        stats.terminal_inventory,
        traj.steps.iter().map(|s| s.fills.bid_filled as usize + s.fills.ask_filled as usize).sum::<usize>()
    );
    Ok(())
}
