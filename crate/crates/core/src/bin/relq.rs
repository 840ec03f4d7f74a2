use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relq::harness::{self, write_comparison};
use relq::learner::{greedy_path, run_training, Algorithm};
use relq::oracle::{self, sup_norm_distance};
use relq::{seeded_rng, Result};

#[derive(Parser)]
#[command(
    name = "relq",
    version,
    about = "Conventional vs relative-reward Q-learning on gridworlds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write its learning curve and Q-table.
    Train(TrainArgs),
    /// Solve the grid exactly and write Q* as CSV.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train both algorithms over every seed and write curves plus a summary.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "conventional", value_parser = parse_algorithm)]
    algo: Algorithm,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Defaults to the first seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write Q* and report the learned table's distance to it.
    #[arg(long)]
    oracle: bool,
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: relq::Error| e.to_string())
}

fn train(args: TrainArgs) -> Result<()> {
    let mut config = harness::load_config(&args.config)?;
    if let Some(n) = args.episodes {
        config.episodes = n;
    }
    let first_seed = config.seeds.first().copied().unwrap_or_default();
    let params = config.params_mut(args.algo);
    if let Some(v) = args.alpha {
        params.alpha = v;
    }
    if let Some(v) = args.gamma {
        params.gamma = v;
    }
    if let Some(v) = args.epsilon {
        params.epsilon = v;
    }
    params.seed = args.seed.unwrap_or(first_seed);
    let params = *params;
    config.validate()?;
    let out = args.out.unwrap_or(config.output_path.clone());

    let run = run_training(
        &config.grid,
        &params,
        config.episodes,
        seeded_rng(params.seed),
    )?;
    harness::write_file(&out.join("curve.csv"), &run.curve.to_csv())?;
    harness::write_file(&out.join("qtable.csv"), &run.table.to_csv())?;

    let converged = harness::curve_convergence(
        &run.curve,
        config.convergence_tol,
        config.convergence_window,
    );
    let path = greedy_path(&run.table, params.max_steps_per_episode);
    println!(
        "{} seed={} episodes={} convergence_episode={} greedy_path_len={}",
        params.algorithm,
        params.seed,
        config.episodes,
        converged.map_or("none".into(), |e| e.to_string()),
        path.map_or("none".into(), |p| p.len().to_string()),
    );
    if args.oracle {
        let q_star =
            oracle::value_iteration(&config.grid, params.gamma, oracle::DEFAULT_TOLERANCE)?;
        harness::write_file(&out.join("oracle.csv"), &q_star.to_csv())?;
        println!(
            "supnorm_to_oracle={}",
            sup_norm_distance(&run.table, &q_star)?
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => train(args),
        Command::Oracle { config, out } => {
            let config = harness::load_config(config)?;
            let gamma = config.conventional.gamma;
            let q_star = oracle::value_iteration(&config.grid, gamma, oracle::DEFAULT_TOLERANCE)?;
            harness::write_file(&out, &q_star.to_csv())
        }
        Command::Compare { config, out } => {
            let config = harness::load_config(config)?;
            let out = out.unwrap_or(config.output_path.clone());
            let comparison = harness::run_comparison(&config)?;
            write_comparison(&comparison, &out)?;
            print!("{}", comparison.summary_csv());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprint!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprint!(": {s}");
                source = s.source();
            }
            eprintln!();
            ExitCode::FAILURE
        }
    }
}
