//! Exports the most probable actions of a checkpointed pair over a (t, h)
//! grid. Without a checkpoint, a short strategic run is trained first.
//!
//!     cargo run --release --example policy_surface -- [checkpoint.json] [out_dir]

use std::fs::File;
use std::path::PathBuf;

use robust_mm::adversary::{AdversaryRegime, ControlledParam};
use robust_mm::harness::{adversary_surface, grid, mm_surface, write_csv};
use robust_mm::learner::{Checkpoint, RiskParams, TrainConfig, Trainer};
use robust_mm::market_sim::SimConfig;
use robust_mm::policy::{FeatureBasis, GaussianPolicy};
use robust_mm::stage_game::ParamBounds;

fn main() -> robust_mm::Result<()> {
    let mut args = std::env::args().skip(1);
    let ckpt = match args.next().filter(|a| a != "-") {
        Some(path) => Checkpoint::load(path.as_ref())?,
        None => {
            let sim = SimConfig::default();
            let basis = FeatureBasis::new(sim.inventory_scale());
            let regime = AdversaryRegime::strategic(&[ControlledParam::Drift], &ParamBounds::default(), basis)?;
            let mm = GaussianPolicy::zeros(basis).with_min_variance(GaussianPolicy::DEFAULT_MIN_VARIANCE)?;
            let cfg = TrainConfig { train_episodes: 10_000, checkpoint_every: 0, ..Default::default() };
            Trainer::new(sim, regime, mm, RiskParams::NEUTRAL, cfg, 1)?.run(None)?.checkpoint
        }
    };
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "surface".into()));
    std::fs::create_dir_all(&dir)?;

    let mm = ckpt.market_maker()?;
    let scale = mm.basis.inventory_scale;
    let (t, h) = (grid(0.0, 1.0, 21), grid(-scale, scale, 101));
    write_csv(&mm_surface(&mm, &t, &h)?, File::create(dir.join("mm_surface.csv"))?)?;
    if let Some(p) = ckpt.regime()?.policy() {
        write_csv(&adversary_surface(p, &t, &h)?, File::create(dir.join("adversary_surface.csv"))?)?;
    }

    // A coarse text view of the skew: rows are t, columns are h.
    let coarse_h = grid(-scale, scale, 9);
    print!("{:>6}", "t \\ h");
    for x in &coarse_h {
        print!("{x:>8.0}");
    }
    println!();
    for r in mm_surface(&mm, &grid(0.0, 1.0, 5), &coarse_h)?.chunks(coarse_h.len()) {
        print!("{:>6.2}", r[0].t);
        for c in r {
            print!("{:>8.3}", c.p_tilde);
        }
        println!();
    }
    println!("surfaces written to {}", dir.display());
    Ok(())
}
