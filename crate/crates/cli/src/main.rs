use std::path::PathBuf;
use std::process::ExitCode;

use acemappo::config::TrainConfig;
use acemappo::harness::{self, load_policy, match_env, PolicySpec, Trainer};
use acemappo::{Error, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "acemappo", version, about = "Air-combat simulator and evolutionary MAPPO trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ablate {
    #[value(name = "g_update")]
    GUpdate,
    Ptr,
    Curriculum,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Disable one component (repeatable).
        #[arg(long, value_enum)]
        ablate: Vec<Ablate>,
        /// Output directory (default: runs/seed-<seed>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured number of episodes.
        #[arg(long)]
        episodes: Option<usize>,
        /// Also write the full trainer state (replay buffer included) at the end.
        #[arg(long)]
        save_state: bool,
        /// Continue from a saved trainer state.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Win/loss/draw counts of one matchup.
    Eval {
        /// Checkpoint path, or one of: rule, random, straight.
        #[arg(long)]
        blue: PolicySpec,
        #[arg(long)]
        red: PolicySpec,
        #[arg(long)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Win-rate matrix over a set of policies, written as CSV.
    RoundRobin {
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        ckpts: Vec<PolicySpec>,
        #[arg(long)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the matrix here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step CSV traces of seeded episodes.
    Export {
        #[arg(long)]
        blue: PolicySpec,
        #[arg(long)]
        red: PolicySpec,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, seed, ablate, out, episodes, save_state, resume } => {
            let mut cfg = TrainConfig::load(&config)?;
            cfg.seed = seed;
            if let Some(n) = episodes {
                cfg.total_episodes = n;
            }
            for a in ablate {
                match a {
                    Ablate::GUpdate => cfg.ablation.disable_g_update = true,
                    Ablate::Ptr => cfg.ablation.disable_ptr = true,
                    Ablate::Curriculum => cfg.ablation.disable_curriculum = true,
                }
            }
            cfg.validate()?;
            let out = out.unwrap_or_else(|| PathBuf::from(format!("runs/seed-{seed}")));
            let mut trainer = match resume {
                Some(state) => Trainer::resume(cfg, &state, Some(&out))?,
                None => Trainer::new(cfg, Some(&out))?,
            };
            trainer.save_state = save_state;
            let summary = trainer.run()?;
            let last = summary.metrics.last();
            println!(
                "{}",
                json!({
                    "out": out,
                    "episodes": summary.metrics.len(),
                    "evolution_phases": summary.evolution_phases,
                    "injections": summary.injections,
                    "rolling_win_rate": last.map(|m| m.rolling_win_rate),
                    "rolling_reward": last.map(|m| m.rolling_reward),
                    "final_checkpoint": summary.final_checkpoint,
                })
            );
        }
        Command::Eval { blue, red, episodes, seed } => {
            let b = load_policy(&blue)?;
            let r = load_policy(&red)?;
            let env = match_env(&[&b, &r])?;
            let counts = harness::evaluate_winrate(&env, b.policy.as_ref(), r.policy.as_ref(), episodes, seed)?;
            println!(
                "{}",
                json!({
                    "blue": b.label,
                    "red": r.label,
                    "episodes": episodes,
                    "blue_wins": counts.blue,
                    "red_wins": counts.red,
                    "draws": counts.draws,
                    "blue_win_rate": counts.blue as f64 / episodes as f64,
                })
            );
        }
        Command::RoundRobin { ckpts, episodes, seed, out } => {
            let rr = harness::round_robin(&ckpts, episodes, seed)?;
            for (path, reason) in &rr.skipped {
                eprintln!("{}", json!({"warning": "skipped", "path": path, "message": reason}));
            }
            match out {
                Some(path) => rr.write_csv(std::fs::File::create(&path)?)?,
                None => rr.write_csv(std::io::stdout())?,
            }
        }
        Command::Export { blue, red, out, episodes, seed } => {
            let files = harness::export_trajectories(&blue, &red, episodes, &out, seed)?;
            println!("{}", json!({"files": files}));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({"error": "usage", "message": e.kind().to_string(), "detail": e.render().to_string()}));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::FAILURE
        }
    }
}

fn report(e: &Error) {
    eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
}
