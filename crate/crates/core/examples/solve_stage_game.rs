//! Single-stage game: the closed-form profile, the drift-only saddle point
//! and their grid exploitability, plus the adversary's intensity response.
//!
//!     cargo run --release --example solve_stage_game

use robust_mm::stage_game::{
    adversary_intensity_response, drift_saddle_point, mm_best_response, nash_equilibrium, verify_equilibrium_grid,
    DecayMode, ParamBounds,
};

fn main() -> robust_mm::Result<()> {
    let (arrival, decay) = (140.0, 1.5);
    let bounds = ParamBounds::drift_only(-0.5, 0.5, arrival, decay);
    println!("drift-only game, b in [-0.5, 0.5], A = {arrival}, k = {decay}");
    println!("{:>5}  {:>24}  {:>10}  {:>24}  {:>10}", "h", "closed form (d+, d-, b)", "exploit.", "saddle point (d+, d-, b)", "exploit.");
    for h in [-10.0, -1.0, 0.0, 1.0, 10.0] {
        let cf = nash_equilibrium(&bounds, h, DecayMode::Fixed { arrival, decay })?;
        let sp = drift_saddle_point(-0.5, 0.5, arrival, decay, h)?;
        let x_cf = verify_equilibrium_grid(&cf.profile, &bounds, 401)?.value();
        let x_sp = verify_equilibrium_grid(&sp, &bounds, 401)?.value();
        let p = &cf.profile;
        println!(
            "{h:>5}  ({:>6.3}, {:>6.3}, {:>5.2})  {x_cf:>10.2e}  ({:>6.3}, {:>6.3}, {:>5.2})  {x_sp:>10.2e}",
            p.delta_bid, p.delta_ask, p.drift, sp.delta_bid, sp.delta_ask, sp.drift
        );
    }

    // With the market maker at its best response to a drift, the adversary
    // picks the lowest arrival rate and the steepest decay on both sides.
    let full = ParamBounds::default();
    let b = 0.0;
    let r = mm_best_response(b, full.k_hi, full.k_hi);
    let (a_bid, a_ask, k_bid, k_ask) = adversary_intensity_response(r.delta_bid, r.delta_ask, b, &full);
    println!("\nintensity response at b = {b}: A = ({a_bid}, {a_ask}), k = ({k_bid}, {k_ask})");

    match nash_equilibrium(&ParamBounds::drift_only(-5.0, 5.0, arrival, decay), 10.0, DecayMode::Fixed { arrival, decay }) {
        Ok(_) => println!("b in [-5, 5]: feasible"),
        Err(e) => println!("b in [-5, 5]: {e}"),
    }
    Ok(())
}
