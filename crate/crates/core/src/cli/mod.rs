//! Command-line front end: `train`, `evaluate`, `solve-stage`, `audit` and
//! `export-surface`.
//!
//! Exit codes: 0 success, 2 bad configuration, arguments or snapshot,
//! 3 training divergence, 4 infeasible stage-game equilibrium, 1 anything
//! else.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{
    output_root, AdversaryConfig, EvalConfig, PolicyConfig, RegimeKind, RunConfig, CONFIG_VERSION,
    DESK_EVAL_EPISODES, OUTPUT_ENV, PAPER_EVAL_EPISODES,
};

use crate::adversary::{AdversaryRegime, RegimeSpec};
use crate::error::{Error, Result};
use crate::harness::{
    adversary_surface, best_response_audit, cross_test, format_table, grid, mm_surface, write_csv, write_reports_csv,
    AuditConfig, AuditReport, Player, ReportLine,
};
use crate::learner::{Checkpoint, TrainConfig, Trainer};
use crate::market_sim::MarketParams;
use crate::policy::PolicySnapshot;
use crate::rng::{child_seed, Purpose};
use crate::stage_game::{nash_equilibrium, verify_equilibrium_grid, DecayMode, ParamBounds};

const SPREAD_NOTE: &str = "std_spread is the standard deviation of per-episode average spreads";

#[derive(Debug, Parser)]
#[command(name = "robust-mm", version, about = "Adversarial market making: training, evaluation and equilibrium checks")]
pub struct Cli {
    /// Upper bound on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a market maker (and a strategic adversary) from a TOML run config.
    Train(TrainArgs),
    /// Evaluate trained market makers under one or more test regimes.
    Evaluate(EvaluateArgs),
    /// Closed-form single-stage equilibrium with a grid exploitability check.
    SolveStage(SolveStageArgs),
    /// Best-response audit of a market maker / strategic adversary pair.
    Audit(AuditArgs),
    /// Write the most probable actions over a (t, h) grid as CSV.
    ExportSurface(SurfaceArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub config: PathBuf,
    /// Full budgets: 10^6 training and 10^5 evaluation episodes.
    #[arg(long)]
    pub paper_scale: bool,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Checkpoint files; each is one row of the result table.
    #[arg(required = true)]
    pub checkpoints: Vec<PathBuf>,
    /// Test regime; repeat for several (default: fixed).
    #[arg(long = "regime", value_enum)]
    pub regimes: Vec<RegimeKind>,
    /// Checkpoint whose strategic adversary is the `strategic` test regime.
    #[arg(long)]
    pub adversary: Option<PathBuf>,
    #[arg(long, default_value_t = DESK_EVAL_EPISODES)]
    pub episodes: usize,
    /// Evaluation seed (default: derived from the first checkpoint's seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the results as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveStageArgs {
    /// Drift interval.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true, default_values_t = [-0.5, 0.5])]
    pub b_range: Vec<f64>,
    /// Order-book decay, pinned unless `--full`.
    #[arg(long, default_value_t = MarketParams::DEFAULT_DECAY)]
    pub k: f64,
    /// Arrival rate, pinned unless `--full`.
    #[arg(long, default_value_t = MarketParams::DEFAULT_ARRIVAL)]
    pub arrival: f64,
    /// Market maker's inventory.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    pub h: f64,
    /// Let the adversary also choose A and k within `--a-range` / `--k-range`.
    #[arg(long)]
    pub full: bool,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [105.0, 175.0])]
    pub a_range: Vec<f64>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [1.125, 1.875])]
    pub k_range: Vec<f64>,
    /// Points per axis of the deviation grid.
    #[arg(long, default_value_t = 401)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Checkpoint of the pair (or of the market maker with `--adversary`).
    pub checkpoint: PathBuf,
    /// Checkpoint supplying the strategic adversary and its critic.
    #[arg(long)]
    pub adversary: Option<PathBuf>,
    /// Retraining episodes per player.
    #[arg(long, default_value_t = 10_000)]
    pub budget: usize,
    /// Tolerance relative to the pair's mean episodic reward.
    #[arg(long, default_value_t = 0.02)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DESK_EVAL_EPISODES)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run config whose `[train]` section drives the retraining.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    pub checkpoint: PathBuf,
    /// Output directory for `mm_surface.csv` and `adversary_surface.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 21)]
    pub t_points: usize,
    #[arg(long, default_value_t = 101)]
    pub h_points: usize,
}

/// Process exit code for a failed command.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Snapshot(_) | Error::Json(_) | Error::Dimension { .. } => 2,
        Error::Divergence { .. } => 3,
        Error::InfeasibleEquilibrium(_) => 4,
        _ => 1,
    }
}

/// Entry point of the `robust-mm` binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Divergence { last_checkpoint, .. } = &e {
                match last_checkpoint {
                    Some(p) => eprintln!("last good checkpoint: {}", p.display()),
                    None => eprintln!("no checkpoint was written before the divergence"),
                }
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Runs one parsed command, writing its report to `out`.
pub fn run(cli: Cli, out: &mut impl std::io::Write) -> Result<()> {
    if cli.workers == Some(0) {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    match cli.command {
        Command::Train(a) => train(&a, cli.workers, out),
        Command::Evaluate(a) => evaluate(&a, cli.workers, out),
        Command::SolveStage(a) => solve_stage(&a, out),
        Command::Audit(a) => audit(&a, cli.workers, out),
        Command::ExportSurface(a) => export_surface(&a, out),
    }
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).map_err(|e| match e {
        Error::Io(io) => Error::Snapshot(format!("{}: {io}", path.display())),
        other => other,
    })
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn train(a: &TrainArgs, workers: Option<usize>, out: &mut impl std::io::Write) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if a.paper_scale {
        cfg.apply_paper_scale();
    }
    if let Some(dir) = &a.out {
        cfg.output_dir = Some(dir.clone());
    }
    let dir = cfg.output_path();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.resolved.toml"), cfg.to_toml()?)?;

    let regime = cfg.training_regime()?;
    let mm = cfg.initial_market_maker()?;
    writeln!(
        out,
        "training '{}' against the {} adversary: {} + {} episodes, seed {}",
        cfg.name,
        regime.name(),
        cfg.train.pretrain_episodes,
        cfg.train.train_episodes,
        cfg.seed
    )?;
    let trainer = Trainer::new(cfg.sim.clone(), regime, mm, cfg.reward, cfg.train.clone(), cfg.seed)?.with_workers(workers);
    let outcome = trainer.run(Some(&dir))?;

    let final_dir = dir.join("final");
    fs::create_dir_all(&final_dir)?;
    outcome.checkpoint.save(&final_dir.join("checkpoint.json"))?;
    write_json(&PolicySnapshot::from(&outcome.market_maker), &final_dir.join("market_maker.json"))?;
    if let Some(p) = outcome.regime.policy() {
        write_json(&PolicySnapshot::from(p), &final_dir.join("adversary.json"))?;
    }

    let seed = eval_seed(cfg.seed);
    let regimes = cfg
        .eval
        .regimes
        .iter()
        .map(|&k| test_regime(k, &outcome.checkpoint, None))
        .collect::<Result<Vec<_>>>()?;
    let lines = cross_lines(&[(cfg.name.clone(), &outcome.checkpoint)], &regimes, cfg.eval.episodes, seed, workers)?;
    write_reports_csv(&lines, fs::File::create(dir.join("evaluation.csv"))?)?;
    writeln!(out, "{}", format_table(&lines))?;
    writeln!(out, "{} episodes per cell, seed {seed}; {SPREAD_NOTE}", cfg.eval.episodes)?;
    writeln!(out, "outputs written to {}", dir.display())?;
    Ok(())
}

/// Evaluation seed used by `train` and, by default, by `evaluate`.
fn eval_seed(run_seed: u64) -> u64 {
    child_seed(run_seed, Purpose::Evaluate, 0)
}

/// A test regime built from the market the checkpoint was trained in.
/// Strategic tests take the adversary of `adversary` (or of the checkpoint
/// itself when it has one).
fn test_regime(kind: RegimeKind, ckpt: &Checkpoint, adversary: Option<&Checkpoint>) -> Result<AdversaryRegime> {
    let (base, bounds) = match &ckpt.adversary {
        RegimeSpec::Fixed { params } => (*params, ParamBounds::default()),
        RegimeSpec::Random { base, bounds } => (*base, *bounds),
        RegimeSpec::Strategic { base, .. } => (*base, ParamBounds::default()),
    };
    Ok(match kind {
        RegimeKind::Fixed => AdversaryRegime::Fixed { params: base },
        RegimeKind::Random => AdversaryRegime::Random { base, bounds },
        RegimeKind::Strategic => {
            let src = adversary.unwrap_or(ckpt);
            match &src.adversary {
                RegimeSpec::Strategic { .. } => src.regime()?,
                _ => {
                    return Err(Error::Config(
                        "the strategic test regime needs --adversary <checkpoint> with a strategic adversary".into(),
                    ))
                }
            }
        }
    })
}

fn cross_lines(
    agents: &[(String, &Checkpoint)],
    regimes: &[AdversaryRegime],
    episodes: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<Vec<ReportLine>> {
    let (sim, risk) = (&agents[0].1.sim, agents[0].1.risk);
    let mut lines = Vec::new();
    // Agents trained in different environments cannot share one matrix.
    for (name, ckpt) in agents {
        if &ckpt.sim != sim || ckpt.risk != risk {
            return Err(Error::Config(format!(
                "checkpoint '{name}' was trained with a different simulator or reward configuration"
            )));
        }
    }
    let policies = agents
        .iter()
        .map(|(n, c)| Ok((n.clone(), c.market_maker()?)))
        .collect::<Result<Vec<_>>>()?;
    let m = cross_test(&policies, regimes, sim, &risk, episodes, seed, workers)?;
    for (agent, test, cell) in m.entries() {
        lines.push(ReportLine {
            agent: agent.to_string(),
            test_regime: test.to_string(),
            report: cell.report,
            variance_ratio: cell.variance_ratio,
        });
    }
    Ok(lines)
}

fn evaluate(a: &EvaluateArgs, workers: Option<usize>, out: &mut impl std::io::Write) -> Result<()> {
    if a.episodes == 0 {
        return Err(Error::Config("--episodes must be at least 1".into()));
    }
    let ckpts = a.checkpoints.iter().map(|p| load_checkpoint(p)).collect::<Result<Vec<_>>>()?;
    let adversary = a.adversary.as_deref().map(load_checkpoint).transpose()?;
    let kinds = if a.regimes.is_empty() { vec![RegimeKind::Fixed] } else { a.regimes.clone() };
    let regimes = kinds
        .iter()
        .map(|&k| test_regime(k, &ckpts[0], adversary.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let names = unique_names(&a.checkpoints);
    let agents: Vec<(String, &Checkpoint)> = names.into_iter().zip(&ckpts).collect();
    let seed = a.seed.unwrap_or_else(|| eval_seed(ckpts[0].seed));
    let lines = cross_lines(&agents, &regimes, a.episodes, seed, workers)?;
    if let Some(p) = &a.csv {
        write_reports_csv(&lines, fs::File::create(p)?)?;
    }
    writeln!(out, "{}", format_table(&lines))?;
    writeln!(out, "{} episodes per cell, seed {seed}; {SPREAD_NOTE}", a.episodes)?;
    Ok(())
}

/// Row labels from file paths: the file stem, or the parent directory for
/// generic names such as `checkpoint.json`, made unique by position.
fn unique_names(paths: &[PathBuf]) -> Vec<String> {
    let label = |p: &PathBuf| {
        let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let parent = p
            .parent()
            .and_then(|d| if d.ends_with("final") { d.parent() } else { Some(d) })
            .and_then(Path::file_name)
            .map(|s| s.to_string_lossy().into_owned());
        match parent {
            Some(dir) if stem == "checkpoint" => dir,
            _ => stem,
        }
    };
    let raw: Vec<String> = paths.iter().map(label).collect();
    raw.iter()
        .enumerate()
        .map(|(i, n)| if raw.iter().filter(|m| *m == n).count() > 1 { format!("{n}#{}", i + 1) } else { n.clone() })
        .collect()
}

fn solve_stage(a: &SolveStageArgs, out: &mut impl std::io::Write) -> Result<()> {
    let (b_lo, b_hi) = (a.b_range[0], a.b_range[1]);
    let (bounds, mode) = if a.full {
        let b = ParamBounds {
            b_lo,
            b_hi,
            a_lo: a.a_range[0],
            a_hi: a.a_range[1],
            k_lo: a.k_range[0],
            k_hi: a.k_range[1],
        };
        (b, DecayMode::Free)
    } else {
        if !(a.k > 0.0 && a.arrival > 0.0) {
            return Err(Error::Config(format!("--k and --arrival must be positive, got {} and {}", a.k, a.arrival)));
        }
        (ParamBounds::drift_only(b_lo, b_hi, a.arrival, a.k), DecayMode::Fixed { arrival: a.arrival, decay: a.k })
    };
    let eq = nash_equilibrium(&bounds, a.h, mode)?;
    let x = verify_equilibrium_grid(&eq.profile, &bounds, a.grid)?;
    let p = &eq.profile;
    writeln!(out, "inventory h        {}", p.inventory)?;
    writeln!(out, "drift b            {:.6}", p.drift)?;
    writeln!(out, "delta_bid (d+)     {:.6}", p.delta_bid)?;
    writeln!(out, "delta_ask (d-)     {:.6}", p.delta_ask)?;
    writeln!(out, "A bid / ask        {} / {}", p.a_bid, p.a_ask)?;
    writeln!(out, "k bid / ask        {} / {}", p.k_bid, p.k_ask)?;
    writeln!(out, "payoff             {:.6}", eq.payoff)?;
    writeln!(out, "exploitability     {:.6e}  (mm {:.6e}, adversary {:.6e}, grid {})", x.value(), x.mm_gain, x.adversary_gain, a.grid)?;
    writeln!(out, "drift continuum    {}", eq.continuum)?;
    writeln!(out, "concave region     {}", eq.in_concave_region)?;
    if let Some(ok) = eq.intensity_bounds_confirmed {
        writeln!(out, "A_lo, k_hi chosen  {ok}")?;
    }
    Ok(())
}

fn audit(a: &AuditArgs, workers: Option<usize>, out: &mut impl std::io::Write) -> Result<()> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let pair = match &a.adversary {
        Some(p) => ckpt.pair_with(&load_checkpoint(p)?)?,
        None => ckpt,
    };
    let train = match &a.config {
        Some(p) => RunConfig::load(p)?.train,
        None => TrainConfig::default(),
    };
    let cfg = AuditConfig {
        budget: a.budget,
        epsilon_rel: a.epsilon,
        eval_episodes: a.episodes,
        seed: a.seed,
        train,
        workers,
    };
    let report = best_response_audit(&pair, &cfg)?;
    write!(out, "{}", format_audit(&report))?;
    if let Some(p) = &a.json {
        write_json(&report, p)?;
    }
    Ok(())
}

pub fn format_audit(r: &AuditReport) -> String {
    let mut s = format!(
        "{:<13} {:>12} {:>12} {:>10} {:>10} {:>10}  {}\n",
        "retrained", "pre reward", "post reward", "gain", "std err", "epsilon", "within"
    );
    for d in &r.directions {
        let who = match d.retrained {
            Player::MarketMaker => "market maker",
            Player::Adversary => "adversary",
        };
        s += &format!(
            "{who:<13} {:>12.4} {:>12.4} {:>10.4} {:>10.4} {:>10.4}  {}\n",
            d.pre_mean_reward, d.post_mean_reward, d.delta, d.std_error, d.epsilon, d.within_tolerance
        );
    }
    s += &format!("budget {} episodes, {} evaluation episodes\n", r.budget, r.eval_episodes);
    s += &format!("verdict: {}\n", r.verdict_text());
    s
}

fn export_surface(a: &SurfaceArgs, out: &mut impl std::io::Write) -> Result<()> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let mm = ckpt.market_maker()?;
    let scale = mm.basis.inventory_scale;
    let t = grid(0.0, 1.0, a.t_points);
    let h = grid(-scale, scale, a.h_points);
    fs::create_dir_all(&a.out)?;
    let path = a.out.join("mm_surface.csv");
    write_csv(&mm_surface(&mm, &t, &h)?, fs::File::create(&path)?)?;
    writeln!(out, "wrote {}", path.display())?;
    if let Some(p) = ckpt.regime()?.policy() {
        let path = a.out.join("adversary_surface.csv");
        write_csv(&adversary_surface(p, &t, &h)?, fs::File::create(&path)?)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}
