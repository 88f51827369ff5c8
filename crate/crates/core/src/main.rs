//! Command-line entry points: simulate | train | sweep | refine | plotdata.
//!
//! Every command reads one configuration file (all keys optional), takes
//! global `--seed` / `--out` overrides, and echoes the effective
//! configuration into the output directory so any result can be re-run
//! from its artifacts alone.

use clap::{Parser, Subcommand};
use efvlab::config::{echo_config, parse_config, RunConfig};
use efvlab::engagement::{run_episode_resolved, ZeroPolicy};
use efvlab::error::{Error, Result};
use efvlab::es::refine;
use efvlab::net::PolicyParameters;
use efvlab::ppo::{history_to_csv, sweep, sweep_to_csv, train_with, NetPolicy};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "efvlab",
    version,
    about = "Pursuit-evasion guidance laboratory: simulate engagements, train the evasion policy with PPO, refine it with an evolution strategy"
)]
struct Cli {
    /// Configuration file; omitted = documented defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for parallel sweep cells and evaluation episodes.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and write the trajectory CSV and outcome summary.
    /// Exits 0 on evasion, 2 on capture.
    Simulate {
        /// Actor checkpoint to fly (deterministic mean actions);
        /// omitted = the zero-maneuver policy.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train the evasion policy; writes history.csv and checkpoints.
    Train,
    /// Train every architecture x (k, l_B) grid cell; writes sweep.csv.
    Sweep,
    /// Evolution-strategy refinement of a trained checkpoint; writes the
    /// evolution record CSV and the refined checkpoint.
    Refine {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Emit plot-ready CSV files from a finished run directory.
    Plotdata { run_dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Error::config("workers", e.to_string()))?;
    }

    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    cfg.validate()?;

    match cli.command {
        Command::Simulate { checkpoint } => cmd_simulate(&cfg, checkpoint.as_deref()),
        Command::Train => cmd_train(&cfg),
        Command::Sweep => cmd_sweep(&cfg),
        Command::Refine { checkpoint } => cmd_refine(&cfg, &checkpoint),
        Command::Plotdata { run_dir } => cmd_plotdata(&run_dir),
    }
}

fn prepare_out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    std::fs::write(cfg.output_dir.join("config_echo.txt"), echo_config(cfg))?;
    Ok(cfg.output_dir.clone())
}

fn outcome_summary(outcome: &efvlab::Outcome) -> String {
    format!(
        "evasion_distance_m={} residual_velocity_mps={} termination_index={} capture={} truncated={}\n",
        outcome.evasion_distance,
        outcome.residual_velocity,
        outcome.termination_index,
        outcome.capture,
        outcome.truncated
    )
}

fn cmd_simulate(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<ExitCode> {
    let out = prepare_out_dir(cfg)?;
    let resolved = cfg.resolved_scenario()?;
    let limits = (cfg.scenario.alpha_step_limit, cfg.scenario.gamma_step_limit);

    let (trajectory, outcome) = match checkpoint {
        Some(path) => {
            let actor = PolicyParameters::load(path)?;
            let mut policy = NetPolicy::deterministic(&actor, limits);
            run_episode_resolved(&mut policy, &resolved, cfg.seed)?
        }
        None => run_episode_resolved(&mut ZeroPolicy, &resolved, cfg.seed)?,
    };

    std::fs::write(out.join("trajectory.csv"), trajectory.to_csv())?;
    let summary = outcome_summary(&outcome);
    std::fs::write(out.join("outcome.txt"), &summary)?;
    print!("{summary}");

    if outcome.truncated {
        eprintln!("episode hit the step horizon before the separation reached a minimum");
        return Ok(ExitCode::from(1));
    }
    Ok(if outcome.capture {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_train(cfg: &RunConfig) -> Result<ExitCode> {
    let out = prepare_out_dir(cfg)?;
    let every = cfg.checkpoint_every;
    let out_ref = out.clone();
    let result = train_with(
        &cfg.scenario,
        &cfg.architecture,
        &cfg.ppo,
        &cfg.reward,
        cfg.seed,
        |record, actor| {
            if every > 0 && record.episode % every == 0 {
                actor.save(&out_ref.join(format!("policy_ep{}.ckpt", record.episode)))?;
            }
            Ok(())
        },
    )?;

    std::fs::write(out.join("history.csv"), history_to_csv(&result.history))?;
    result.actor.save(&out.join("policy_final.ckpt"))?;
    let summary = format!(
        "steps={} episodes={} deterministic_evasion_distance_m={} deterministic_residual_velocity_mps={}\n",
        result.steps_done,
        result.history.len(),
        result.deterministic_eval.0,
        result.deterministic_eval.1
    );
    std::fs::write(out.join("train_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(cfg: &RunConfig) -> Result<ExitCode> {
    let out = prepare_out_dir(cfg)?;
    let result = sweep(&cfg.sweep, &cfg.scenario, &cfg.ppo, &cfg.reward, cfg.seed)?;
    std::fs::write(out.join("sweep.csv"), sweep_to_csv(&result))?;

    for (row, train_result) in result.rows.iter().zip(result.results.iter()) {
        let cell_dir = out.join(format!("cell_{:02}", row.index));
        std::fs::create_dir_all(&cell_dir)?;
        match train_result {
            Some(tr) => {
                std::fs::write(cell_dir.join("history.csv"), history_to_csv(&tr.history))?;
                tr.actor.save(&cell_dir.join("policy_final.ckpt"))?;
            }
            None => {
                if let Some(err) = &row.error {
                    std::fs::write(cell_dir.join("error.txt"), format!("{err}\n"))?;
                    eprintln!("cell {} failed: {err}", row.index);
                }
            }
        }
    }

    match result.best {
        Some(i) => {
            let r = &result.rows[i];
            println!(
                "best cell: index={} architecture={} k={} l_B={} evasion_distance_m={} residual_velocity_mps={}",
                r.index, r.architecture, r.k, r.base_lr, r.evasion_distance, r.residual_velocity
            );
        }
        None => println!("no cell satisfied the safe-distance constraint"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_refine(cfg: &RunConfig, checkpoint: &Path) -> Result<ExitCode> {
    let out = prepare_out_dir(cfg)?;
    let initial = PolicyParameters::load(checkpoint)?;
    let result = refine(&initial, &cfg.es, &cfg.scenario)?;

    if !result.initial_feasible {
        eprintln!(
            "warning: the initial checkpoint violates the safe-distance constraint; refining anyway"
        );
    }
    std::fs::write(out.join("evolution_record.csv"), result.record.to_csv())?;
    result.best.save(&out.join("policy_refined.ckpt"))?;
    let last = result.record.rows.last().expect("record has row 0");
    let first = &result.record.rows[0];
    let summary = format!(
        "attempts={} accepted={} initial_residual_velocity_mps={} final_residual_velocity_mps={} final_evasion_distance_m={}\n",
        result.candidate_evaluations,
        result.record.rows.len() - 1,
        first.residual_velocity,
        last.residual_velocity,
        last.evasion_distance
    );
    std::fs::write(out.join("refine_summary.txt"), &summary)?;
    print!("{summary}");
    Ok(ExitCode::SUCCESS)
}

/// Split one CSV line into raw fields (values never contain commas).
fn csv_fields(line: &str) -> Vec<&str> {
    line.split(',').collect()
}

fn read_csv(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text.lines().skip(1).map(|l| l.to_string()).collect())
}

fn cmd_plotdata(run_dir: &Path) -> Result<ExitCode> {
    if !run_dir.is_dir() {
        return Err(Error::Config {
            key: run_dir.display().to_string(),
            line: None,
            message: "run directory does not exist".into(),
        });
    }
    let mut wrote_any = false;

    // Per-episode evasion distance and residual velocity curves.
    let history = run_dir.join("history.csv");
    if history.is_file() {
        let mut s = String::from("episode,evasion_distance_m,residual_velocity_mps\n");
        for line in read_csv(&history)? {
            let f = csv_fields(&line);
            if f.len() >= 4 {
                s.push_str(&format!("{},{},{}\n", f[0], f[2], f[3]));
            }
        }
        std::fs::write(run_dir.join("plot_training_curves.csv"), s)?;
        wrote_any = true;
    }

    // Accepted-attempt residual-velocity steps.
    let record = run_dir.join("evolution_record.csv");
    if record.is_file() {
        let mut s = String::from("attempt,residual_velocity_mps\n");
        for line in read_csv(&record)? {
            let f = csv_fields(&line);
            if f.len() >= 3 {
                s.push_str(&format!("{},{}\n", f[0], f[2]));
            }
        }
        std::fs::write(run_dir.join("plot_evolution_steps.csv"), s)?;
        wrote_any = true;
    }

    // Guidance-command time series.
    let trajectory = run_dir.join("trajectory.csv");
    if trajectory.is_file() {
        let mut s = String::from("t_s,alpha_deg,gamma_deg\n");
        for line in read_csv(&trajectory)? {
            let f = csv_fields(&line);
            if f.len() >= 16 {
                s.push_str(&format!("{},{},{}\n", f[1], f[14], f[15]));
            }
        }
        std::fs::write(run_dir.join("plot_commands.csv"), s)?;
        wrote_any = true;
    }

    if !wrote_any {
        return Err(Error::Config {
            key: run_dir.display().to_string(),
            line: None,
            message: "no history.csv, evolution_record.csv or trajectory.csv found".into(),
        });
    }
    Ok(ExitCode::SUCCESS)
}
