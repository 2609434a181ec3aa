//! Trains a risk-neutral market maker against a strategic drift-setting
//! adversary, then checks the adversary's sign rule and evaluates the
//! market maker in every regime.
//!
//!     cargo run --release --example train_strategic -- [episodes] [seed]

use robust_mm::adversary::{AdversaryRegime, ControlledParam};
use robust_mm::harness::{cross_test, format_table, grid, opposing_drift_share, ReportLine};
use robust_mm::learner::{RiskParams, TrainConfig, Trainer};
use robust_mm::market_sim::SimConfig;
use robust_mm::policy::{FeatureBasis, GaussianPolicy};
use robust_mm::stage_game::ParamBounds;

fn main() -> robust_mm::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes: usize = args.next().map_or(50_000, |s| s.parse().expect("episodes"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let sim = SimConfig::default();
    let basis = FeatureBasis::new(sim.inventory_scale());
    let regime = AdversaryRegime::strategic(&[ControlledParam::Drift], &ParamBounds::default(), basis)?;
    let mm = GaussianPolicy::zeros(basis).with_min_variance(GaussianPolicy::DEFAULT_MIN_VARIANCE)?;
    let cfg = TrainConfig { train_episodes: episodes, checkpoint_every: 0, ..Default::default() };
    let out = Trainer::new(sim.clone(), regime, mm, RiskParams::NEUTRAL, cfg, seed)?.run(None)?;

    let adversary = out.regime.policy().expect("strategic");
    let h: Vec<f64> = (-50..=50).filter(|h: &i32| h.abs() >= 10).map(f64::from).collect();
    let share = opposing_drift_share(adversary, &grid(0.0, 1.0, 21), &h)?;
    println!("adversary drift opposes inventory at {:.1}% of grid points with |h| >= 10\n", 100.0 * share);

    let regimes = [AdversaryRegime::fixed(), AdversaryRegime::random(), out.regime.clone()];
    let m = cross_test(&[("strategic-b".into(), out.market_maker)], &regimes, &sim, &RiskParams::NEUTRAL, 10_000, seed + 1000, None)?;
    let lines: Vec<ReportLine> = m
        .entries()
        .map(|(a, t, c)| ReportLine { agent: a.into(), test_regime: t.into(), report: c.report, variance_ratio: c.variance_ratio })
        .collect();
    print!("{}", format_table(&lines));
    Ok(())
}
