//! Thin CLI over the library: `estimate`, `simulate`, `study`, `validate`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hetcate::cli::{
    cmd_estimate, cmd_simulate, cmd_study, cmd_validate, CliError, EstimateArgs, RunOverrides,
};

#[derive(Parser)]
#[command(
    name = "hetcate",
    about = "Semi-supervised estimation of total and explained treatment heterogeneity",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate TTH or ETH from labeled (and optional unlabeled) CSV files
    Estimate(EstimateCli),
    /// Draw a benchmark dataset and write labeled.csv / unlabeled.csv
    Simulate {
        /// Benchmark model id (1, 2, or 3)
        #[arg(long)]
        model: u8,
        /// Labeled sample size
        #[arg(long)]
        n: usize,
        /// Unlabeled sample size
        #[arg(long, default_value_t = 0)]
        m: usize,
        /// RNG seed (falls back to HETCATE_SEED, then 0)
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a replication study from a TOML config
    Study {
        /// Study configuration file
        #[arg(long)]
        config: PathBuf,
        /// Override the worker count from the config
        #[arg(long)]
        workers: Option<usize>,
        /// Write the results table here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a CSV pair against the dataset invariants
    Validate {
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long)]
        unlabeled: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EstimateCli {
    /// Labeled CSV (columns x0..x{d-1},a,y)
    #[arg(long)]
    labeled: PathBuf,
    /// Unlabeled CSV (columns x0..x{d-1}[,a]); omit for supervised runs
    #[arg(long)]
    unlabeled: Option<PathBuf>,
    /// TOML config file; flags given here override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target parameter: tth, eth-direct, eth-ow, eth-spow
    #[arg(long)]
    estimand: Option<String>,
    #[arg(long = "k-folds")]
    k_folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// full-unlabeled or covariates-only
    #[arg(long)]
    mode: Option<String>,
    /// Propensity clipping epsilon
    #[arg(long = "clip-eps")]
    clip_eps: Option<f64>,
    #[arg(long = "ci-level")]
    ci_level: Option<f64>,
    /// Comma-separated W column indices (must include 0)
    #[arg(long = "w-cols", value_delimiter = ',')]
    w_cols: Option<Vec<usize>>,
    /// Outcome learner spec, e.g. lasso, stumps:rounds=200,rate=0.1
    #[arg(long = "mu-learner")]
    mu_learner: Option<String>,
    /// Propensity learner spec, e.g. logistic, knn:k=25
    #[arg(long = "pi-learner")]
    pi_learner: Option<String>,
    /// CATE learner for the TTH path
    #[arg(long = "cate-learner")]
    cate_learner: Option<String>,
    /// Fixed penalty for the lasso outcome models
    #[arg(long = "lambda-mu")]
    lambda_mu: Option<f64>,
    /// Fixed penalty for the logistic-lasso propensity model
    #[arg(long = "lambda-pi")]
    lambda_pi: Option<f64>,
    /// Fixed penalty for the linear CATE slope
    #[arg(long = "lambda-beta")]
    lambda_beta: Option<f64>,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Estimate(args) => {
            let flags = RunOverrides {
                estimand: args.estimand,
                k_folds: args.k_folds,
                seed: args.seed,
                clip_epsilon: args.clip_eps,
                ci_level: args.ci_level,
                mode: args.mode,
                mu_learner: args.mu_learner,
                pi_learner: args.pi_learner,
                cate_learner: args.cate_learner,
                lambda_mu: args.lambda_mu,
                lambda_pi: args.lambda_pi,
                lambda_beta: args.lambda_beta,
                w_columns: args.w_cols,
            };
            let text = cmd_estimate(&EstimateArgs {
                labeled: args.labeled,
                unlabeled: args.unlabeled,
                config: args.config,
                flags,
                out: args.out.clone(),
            })?;
            if args.out.is_none() {
                print!("{text}");
            }
            Ok(())
        }
        Command::Simulate {
            model,
            n,
            m,
            seed,
            out,
        } => {
            let seed = match seed {
                Some(s) => s,
                None => std::env::var("HETCATE_SEED")
                    .ok()
                    .and_then(|raw| raw.parse::<u64>().ok())
                    .unwrap_or(0),
            };
            let (labeled, unlabeled) = cmd_simulate(model, n, m, seed, &out)?;
            eprintln!("wrote {} and {}", labeled.display(), unlabeled.display());
            Ok(())
        }
        Command::Study {
            config,
            workers,
            out,
        } => {
            let table = cmd_study(&config, workers, out.as_deref())?;
            if out.is_none() {
                print!("{table}");
            }
            Ok(())
        }
        Command::Validate { labeled, unlabeled } => {
            let summary = cmd_validate(&labeled, unlabeled.as_deref())?;
            print!("{summary}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
