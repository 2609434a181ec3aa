//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every seed below is fixed in advance. A FAIL line is a finding, not a
//! crash: the binary exits non-zero only when a criterion cannot be
//! evaluated at all.
//!
//!     cargo test --release --test acceptance

use std::fs;
use std::path::Path;
use std::time::Instant;

use clap::Parser;
use rand::Rng;

use robust_mm::adversary::{draw_random, AdversaryRegime, ControlledParam};
use robust_mm::cli::{self, Cli};
use robust_mm::harness::{
    best_response_audit, cross_test, evaluate, grid, opposing_drift_share, AuditConfig, AuditReport, Verdict,
};
use robust_mm::learner::{reward, Checkpoint, Critic, RbfGrid, RiskParams, TrainConfig, Trainer};
use robust_mm::market_sim::{
    fill_probability, interpret_action, mark_to_market, sample_fills, Episode, MarketParams, MarketState, Quote,
    SimConfig,
};
use robust_mm::policy::{FeatureBasis, GaussianPolicy, PolicySnapshot};
use robust_mm::rng::{child_seed, stream, Purpose};
use robust_mm::stage_game::{
    adversary_intensity_response, mm_best_response, nash_equilibrium, verify_equilibrium_grid, DecayMode, ParamBounds,
};

const SEED: u64 = 1;
const EVAL_EPISODES: usize = 10_000;
const DESK_EPISODES: usize = 50_000;
/// Training length of the strategic pair that is audited for criterion 9.
const AUDIT_PAIR_EPISODES: usize = 200_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = fn(&mut Shared) -> robust_mm::Result<Outcome>;

/// Trained agents reused across criteria 6 to 9.
#[derive(Default)]
struct Shared {
    rn_fixed: Option<GaussianPolicy>,
    strategic_desk: Option<Checkpoint>,
    strategic_long: Option<Checkpoint>,
}

fn sim() -> SimConfig {
    SimConfig::default()
}

fn basis() -> FeatureBasis {
    FeatureBasis::new(sim().inventory_scale())
}

fn fresh_mm() -> robust_mm::Result<GaussianPolicy> {
    GaussianPolicy::zeros(basis()).with_min_variance(GaussianPolicy::DEFAULT_MIN_VARIANCE)
}

fn desk_config() -> TrainConfig {
    TrainConfig { train_episodes: DESK_EPISODES, checkpoint_every: 0, ..Default::default() }
}

fn train(regime: AdversaryRegime, risk: RiskParams) -> robust_mm::Result<GaussianPolicy> {
    Ok(Trainer::new(sim(), regime, fresh_mm()?, risk, desk_config(), SEED)?.run(None)?.market_maker)
}

fn eval_seed() -> u64 {
    child_seed(SEED, Purpose::Evaluate, 0)
}

fn strategic_b() -> robust_mm::Result<AdversaryRegime> {
    AdversaryRegime::strategic(&[ControlledParam::Drift], &ParamBounds::default(), basis())
}

impl Shared {
    fn rn_fixed(&mut self) -> robust_mm::Result<GaussianPolicy> {
        if self.rn_fixed.is_none() {
            self.rn_fixed = Some(train(AdversaryRegime::fixed(), RiskParams::NEUTRAL)?);
        }
        Ok(self.rn_fixed.clone().unwrap())
    }

    /// One strategic-b run: its desk-scale checkpoint and its final state.
    fn strategic(&mut self) -> robust_mm::Result<(Checkpoint, Checkpoint)> {
        if self.strategic_long.is_none() {
            let dir = tempfile::tempdir()?;
            let cfg = TrainConfig {
                train_episodes: AUDIT_PAIR_EPISODES,
                checkpoint_every: DESK_EPISODES,
                ..Default::default()
            };
            let out = Trainer::new(sim(), strategic_b()?, fresh_mm()?, RiskParams::NEUTRAL, cfg, SEED)?
                .run(Some(dir.path()))?;
            let desk = dir.path().join("checkpoints").join(format!("episode_{DESK_EPISODES:07}.json"));
            self.strategic_desk = Some(Checkpoint::load(&desk)?);
            self.strategic_long = Some(out.checkpoint);
        }
        Ok((self.strategic_desk.clone().unwrap(), self.strategic_long.clone().unwrap()))
    }
}

// 1. Closed-form stage profile and its grid exploitability.
fn analytic_ne(_: &mut Shared) -> robust_mm::Result<Outcome> {
    let start = Instant::now();
    let bounds = ParamBounds::drift_only(-0.5, 0.5, 140.0, 1.5);
    let eq = nash_equilibrium(&bounds, 10.0, DecayMode::Fixed { arrival: 140.0, decay: 1.5 })?;
    let p = eq.profile;
    let (want_bid, want_ask) = (1.0 / 1.5 + (-0.5), 1.0 / 1.5 - (-0.5));
    let exact = p.drift == -0.5 && (p.delta_bid - want_bid).abs() <= 1e-12 && (p.delta_ask - want_ask).abs() <= 1e-12;
    let x = verify_equilibrium_grid(&p, &bounds, 401)?;
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        exact && x.value() <= 1e-3 && secs < 5.0,
        format!(
            "b* = {}, d+ = {:.12}, d- = {:.12} (formula {}); exploitability {:.4e} (<= 1e-3; mm {:.4e}, adversary {:.4e}); {secs:.2} s",
            p.drift,
            p.delta_bid,
            p.delta_ask,
            if exact { "matched" } else { "MISMATCH" },
            x.value(),
            x.mm_gain,
            x.adversary_gain
        ),
    ))
}

// 2. Adversary's intensity response at the market maker's best response.
fn intensity_response(_: &mut Shared) -> robust_mm::Result<Outcome> {
    let start = Instant::now();
    let bounds = ParamBounds::default();
    let respond = |b: f64, k: f64| {
        let r = mm_best_response(b, k, k);
        adversary_intensity_response(r.delta_bid, r.delta_ask, b, &bounds)
    };
    let expected = (bounds.a_lo, bounds.a_lo, bounds.k_hi, bounds.k_hi);
    let mut all = true;
    for b in grid(bounds.b_lo, bounds.b_hi, 11) {
        for k in [bounds.k_lo, 1.5, bounds.k_hi] {
            all &= respond(b, k) == expected;
        }
    }
    let (a_bid, a_ask, k_bid, k_ask) = respond(0.0, 1.5);
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        all && secs < 1.0,
        format!(
            "A = ({a_bid}, {a_ask}), k = ({k_bid}, {k_ask}) at b = 0, k = 1.5; all 33 drift/decay points give A_lo = 105, k_hi = 1.875: {all}; {secs:.3} s"
        ),
    ))
}

fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / fd.abs().max(1.0)
}

// 3. Scores and critic gradients against central differences.
fn gradients(_: &mut Shared) -> robust_mm::Result<Outcome> {
    let start = Instant::now();
    let mut rng = stream(SEED, Purpose::Misc, 3);
    let h = 1e-6;
    let b = basis();
    let (mut worst_g, mut worst_b, mut worst_c) = (0.0f64, 0.0f64, 0.0f64);

    for _ in 0..1000 {
        let weights: Vec<f64> = (0..GaussianPolicy::N_PARAMS).map(|_| rng.random_range(-0.5..0.5)).collect();
        let floor = if rng.random_bool(0.5) { 0.0 } else { GaussianPolicy::DEFAULT_MIN_VARIANCE };
        let mut p = GaussianPolicy::from_weights(b, weights)?.with_min_variance(floor)?;
        let phi = b.features(rng.random_range(0.0..1.0), rng.random_range(-50.0..50.0));
        let a = (rng.random_range(-1.0..1.0), rng.random_range(0.0..3.0));
        let g = p.score(&phi, a);
        for i in 0..GaussianPolicy::N_PARAMS {
            let w = p.weights()[i];
            p.weights_mut()[i] = w + h;
            let up = p.log_density(&phi, a);
            p.weights_mut()[i] = w - h;
            let down = p.log_density(&phi, a);
            p.weights_mut()[i] = w;
            worst_g = worst_g.max(rel_err(g[i], (up - down) / (2.0 * h)));
        }
    }

    let all = [ControlledParam::Drift, ControlledParam::Arrival, ControlledParam::Decay];
    let template = AdversaryRegime::strategic(&all, &ParamBounds::default(), b)?;
    for _ in 0..1000 {
        let mut p = template.policy().unwrap().clone();
        p.weights_mut().iter_mut().for_each(|w| *w = rng.random_range(-0.5..0.5));
        let phi = b.features(rng.random_range(0.0..1.0), rng.random_range(-50.0..50.0));
        let values: Vec<f64> = p.dims().iter().map(|d| d.from_unit(rng.random_range(0.02..0.98))).collect();
        let g = p.score(&phi, &values)?;
        for i in 0..p.n_params() {
            let w = p.weights()[i];
            p.weights_mut()[i] = w + h;
            let up = p.log_density(&phi, &values);
            p.weights_mut()[i] = w - h;
            let down = p.log_density(&phi, &values);
            p.weights_mut()[i] = w;
            worst_b = worst_b.max(rel_err(g[i], (up - down) / (2.0 * h)));
        }
    }

    // The critic step follows -d/dw of half the squared TD error with the
    // bootstrap target held fixed: td * (phi, score).
    let rbf = RbfGrid::standard(sim().inventory_scale());
    let mut critic = Critic::new(rbf.clone(), GaussianPolicy::N_PARAMS, 0.97)?;
    for _ in 0..1000 {
        critic.w_v.iter_mut().chain(critic.w_a.iter_mut()).for_each(|w| *w = rng.random_range(-1.0..1.0));
        let phi = rbf.features(rng.random_range(0.0..1.0), rng.random_range(-50.0..50.0));
        let score: Vec<f64> = (0..GaussianPolicy::N_PARAMS).map(|_| rng.random_range(-2.0..2.0)).collect();
        let target = rng.random_range(-5.0..5.0);
        let td = target - critic.value(&phi, &score)?;
        let n_v = critic.w_v.len();
        let loss = |c: &Critic| -> robust_mm::Result<f64> { Ok(0.5 * (target - c.value(&phi, &score)?).powi(2)) };
        for i in 0..n_v + critic.w_a.len() {
            let shifted = |dw: f64| {
                let mut c = critic.clone();
                if i < n_v {
                    c.w_v[i] += dw;
                } else {
                    c.w_a[i - n_v] += dw;
                }
                loss(&c)
            };
            let (up, down) = (shifted(h)?, shifted(-h)?);
            let x = if i < n_v { phi[i] } else { score[i - n_v] };
            worst_c = worst_c.max(rel_err(-td * x, (up - down) / (2.0 * h)));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let worst = worst_g.max(worst_b).max(worst_c);
    Ok(outcome(
        worst <= 1e-5 && secs < 30.0,
        format!(
            "max relative error: gaussian {worst_g:.2e}, beta {worst_b:.2e}, critic {worst_c:.2e} (<= 1e-5) over 10^3 triples each; {secs:.1} s"
        ),
    ))
}

// 4. Mark-to-market decomposition and reward telescoping.
fn accounting(_: &mut Shared) -> robust_mm::Result<Outcome> {
    let sim = sim();
    let mut rng = stream(SEED, Purpose::Misc, 4);
    let (mut worst_step, mut worst_sum) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let weights: Vec<f64> = (0..GaussianPolicy::N_PARAMS).map(|_| rng.random_range(-0.3..0.3)).collect();
        let mm = GaussianPolicy::from_weights(basis(), weights)?.with_min_variance(0.01)?;
        let params = draw_random(&MarketParams::default(), &ParamBounds::default(), &mut rng);
        let mut ep = Episode::new(&sim, sim.sample_start(&mut rng))?;
        let pi0 = ep.state().wealth();
        let mut total = 0.0;
        while !ep.is_done() {
            let s = *ep.state();
            let (p_tilde, psi) = mm.sample(&mm.features(s.t, s.h as f64), &mut rng)?.action();
            let quote = interpret_action(p_tilde, psi)?;
            let tr = ep.step(quote, params, &mut rng)?;
            let (prev, next): (MarketState, MarketState) = (tr.prev, tr.next);
            let bought = tr.fills.bid_filled as i32 as f64;
            let sold = tr.fills.ask_filled as i32 as f64;
            let parts = quote.delta_ask * sold + quote.delta_bid * bought + next.h as f64 * (next.z - prev.z);
            let mtm = mark_to_market(next.x, next.h, next.z) - mark_to_market(prev.x, prev.h, prev.z);
            worst_step = worst_step.max((tr.delta_pi - parts).abs()).max((tr.delta_pi - mtm).abs());
            total += reward(tr.delta_pi, next.h, tr.terminal, &RiskParams::NEUTRAL);
        }
        worst_sum = worst_sum.max((total - (ep.state().wealth() - pi0)).abs());
    }
    Ok(outcome(
        worst_step <= 1e-9 && worst_sum <= 1e-9,
        format!("max step decomposition error {worst_step:.2e}, max |sum R - (PI_N - PI_0)| {worst_sum:.2e} (<= 1e-9) over 10^3 episodes"),
    ))
}

// 5. Monte-Carlo fill frequencies.
fn fill_calibration(_: &mut Shared) -> robust_mm::Result<Outcome> {
    let start = Instant::now();
    let sim = sim();
    let mut rng = stream(SEED, Purpose::Misc, 5);
    let state = MarketState { t: 0.0, n: 0, z: 100.0, h: 0, x: 0.0 };
    let n = 1_000_000usize;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let delta = rng.random_range(0.0..3.0);
        let a = rng.random_range(105.0..175.0);
        let k = rng.random_range(1.125..1.875);
        let params = MarketParams::symmetric(0.0, 2.0, a, k);
        let quote = Quote::symmetric(delta);
        let p = fill_probability(delta, a, k, sim.dt)?;
        let (mut bids, mut asks) = (0usize, 0usize);
        for _ in 0..n {
            let f = sample_fills(&quote, &params, &state, &sim, &mut rng)?;
            bids += f.bid_filled as usize;
            asks += f.ask_filled as usize;
        }
        let se = (p * (1.0 - p) / n as f64).sqrt();
        for c in [bids, asks] {
            worst = worst.max((c as f64 / n as f64 - p).abs() / se);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        worst <= 3.0 && secs < 60.0,
        format!("largest deviation {worst:.2} binomial s.e. (<= 3) over 10 triples x 2 sides x 10^6 draws; {secs:.1} s"),
    ))
}

// 6. Risk-neutral wealth level and the running penalty's effect.
fn table_1a(s: &mut Shared) -> robust_mm::Result<Outcome> {
    let start = Instant::now();
    let fixed = AdversaryRegime::fixed();
    let rn = s.rn_fixed()?;
    let ra = train(fixed.clone(), RiskParams::running(0.01))?;
    let r_rn = evaluate(&rn, &fixed, &sim(), &RiskParams::NEUTRAL, EVAL_EPISODES, eval_seed(), None)?;
    let r_ra = evaluate(&ra, &fixed, &sim(), &RiskParams::running(0.01), EVAL_EPISODES, eval_seed(), None)?;
    let a = (57.0..=77.0).contains(&r_rn.mean_wealth);
    let b_inv = r_ra.std_inv < 0.5 * r_rn.std_inv;
    let b_sharpe = r_ra.sharpe > r_rn.sharpe;
    let secs = start.elapsed().as_secs_f64();
    Ok(outcome(
        a && b_inv && b_sharpe && secs < 1800.0,
        format!(
            "(a) {} RN wealth {:.2} +- {:.2} in [57, 77]; (b) {} RA inventory std {:.2} < 0.5 x {:.2}, {} RA Sharpe {:.2} > RN {:.2}; {secs:.0} s",
            mark(a),
            r_rn.mean_wealth,
            r_rn.std_wealth,
            mark(b_inv),
            r_ra.std_inv,
            r_rn.std_inv,
            mark(b_sharpe),
            r_ra.sharpe,
            r_rn.sharpe
        ),
    ))
}

// 7. The trained adversary pushes the drift against the inventory.
fn sign_rule(s: &mut Shared) -> robust_mm::Result<Outcome> {
    let (desk, _) = s.strategic()?;
    let regime = desk.regime()?;
    let h: Vec<f64> = (-50..=50).filter(|h: &i32| h.abs() >= 10).map(f64::from).collect();
    let t = grid(0.0, 1.0, 21);
    let share = opposing_drift_share(regime.policy().unwrap(), &t, &h)?;
    Ok(outcome(
        share >= 0.9,
        format!("drift opposes sign(H) at {:.1}% of {} grid points with |H| >= 10 (>= 90%)", 100.0 * share, t.len() * h.len()),
    ))
}

// 8. Robustness ordering across training regimes.
fn robustness(s: &mut Shared) -> robust_mm::Result<Outcome> {
    let fixed_trained = s.rn_fixed()?;
    let random_trained = train(AdversaryRegime::random(), RiskParams::NEUTRAL)?;
    let (desk, _) = s.strategic()?;
    let agents = [
        ("fixed".to_string(), fixed_trained),
        ("random".to_string(), random_trained),
        ("strategic-b".to_string(), desk.market_maker()?),
    ];
    let tests = [AdversaryRegime::fixed(), AdversaryRegime::random()];
    let m = cross_test(&agents, &tests, &sim(), &RiskParams::NEUTRAL, EVAL_EPISODES, eval_seed(), None)?;
    let inflation = |agent: &str| m.cell(agent, "random").unwrap().variance_increase().unwrap();
    let sharpe = |agent: &str| m.cell(agent, "fixed").unwrap().report.sharpe;
    let (inf_f, inf_r) = (inflation("fixed"), inflation("random"));
    let (sh_s, sh_f) = (sharpe("strategic-b"), sharpe("fixed"));
    let a = inf_r < inf_f;
    let b = sh_s > sh_f;
    Ok(outcome(
        a && b,
        format!(
            "(a) {} variance inflation fixed->random: random-trained {:.1}% < fixed-trained {:.1}%; (b) {} fixed-test Sharpe strategic-b {:.2} > fixed-trained {:.2}",
            mark(a),
            100.0 * inf_r,
            100.0 * inf_f,
            mark(b),
            sh_s,
            sh_f
        ),
    ))
}

fn audit_line(r: &AuditReport) -> String {
    let d = |i: usize| {
        let x = &r.directions[i];
        format!("{:.3} (eps {:.3} + 2 se {:.3})", x.delta, x.epsilon, 2.0 * x.std_error)
    };
    format!("mm gain {}, adversary gain {} -> {}", d(0), d(1), r.verdict_text())
}

// 9. Best-response audit of a converged pair and of a perturbed one.
fn audit(s: &mut Shared) -> robust_mm::Result<Outcome> {
    let (_, pair) = s.strategic()?;
    let cfg = AuditConfig { budget: 10_000, eval_episodes: EVAL_EPISODES, seed: SEED, ..Default::default() };
    let converged = best_response_audit(&pair, &cfg)?;
    let mut skewed = pair.market_maker()?;
    skewed.mean_p_tilde_weights_mut()[0] += 1.0;
    let perturbed_ckpt = Checkpoint { market_maker: PolicySnapshot::from(&skewed), ..pair.clone() };
    let perturbed = best_response_audit(&perturbed_ckpt, &cfg)?;
    let ok = converged.verdict == Verdict::ApproximateNe
        && !converged.vacuous
        && perturbed.verdict == Verdict::Exploitable;
    Ok(outcome(
        ok,
        format!(
            "pair after {} episodes: {}; skew +1: {}",
            pair.episode,
            audit_line(&converged),
            audit_line(&perturbed)
        ),
    ))
}

fn files_equal(a: &Path, b: &Path, rel: &str) -> robust_mm::Result<bool> {
    Ok(fs::read(a.join(rel))? == fs::read(b.join(rel))?)
}

// 10. Two CLI runs from one config produce identical bytes.
fn determinism(_: &mut Shared) -> robust_mm::Result<Outcome> {
    let root = tempfile::tempdir()?;
    let config = root.path().join("run.toml");
    fs::write(
        &config,
        "version = 1\nname = \"determinism\"\nseed = 11\n\n[adversary]\nkind = \"strategic\"\n\n[train]\ntrain_episodes = 2000\ncheckpoint_every = 1000\n\n[eval]\nepisodes = 500\nregimes = [\"fixed\", \"random\", \"strategic\"]\n",
    )?;
    let mut dirs = Vec::new();
    for run in ["a", "b"] {
        let out = root.path().join(run);
        let args = ["robust-mm", "train", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
        cli::run(Cli::try_parse_from(args).map_err(|e| robust_mm::Error::Config(e.to_string()))?, &mut std::io::sink())?;
        dirs.push(out);
    }
    let files = [
        "final/checkpoint.json",
        "final/market_maker.json",
        "final/adversary.json",
        "checkpoints/episode_0001000.json",
        "training_log.csv",
        "evaluation.csv",
    ];
    let mut differing = Vec::new();
    for f in files {
        if !files_equal(&dirs[0], &dirs[1], f)? {
            differing.push(f);
        }
    }
    Ok(outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} snapshot, log and evaluation files byte-identical across two runs", files.len())
        } else {
            format!("differing files: {}", differing.join(", "))
        },
    ))
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

fn main() -> std::process::ExitCode {
    let checks: [(&str, Check); 10] = [
        ("analytic NE exactness", analytic_ne),
        ("adversary intensity response", intensity_response),
        ("gradient suites", gradients),
        ("accounting and telescoping", accounting),
        ("fill-model calibration", fill_calibration),
        ("desk-scale fixed-adversary results", table_1a),
        ("adversary sign structure", sign_rule),
        ("robustness ordering", robustness),
        ("approximate-NE audit", audit),
        ("determinism", determinism),
    ];
    let mut shared = Shared::default();
    let (mut passed, mut errors) = (0, 0);
    for (i, (name, check)) in checks.iter().enumerate() {
        match check(&mut shared) {
            Ok(o) => {
                passed += usize::from(o.pass);
                println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
            }
            Err(e) => {
                errors += 1;
                println!("FAIL {:>2} {name}: could not be evaluated: {e}", i + 1);
            }
        }
    }
    println!("{passed}/{} criteria pass", checks.len());
    // Failing criteria are reported, not fatal; broken machinery is.
    if errors > 0 {
        std::process::ExitCode::FAILURE
    } else {
        std::process::ExitCode::SUCCESS
    }
}

