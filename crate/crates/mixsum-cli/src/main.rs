//! Batch CLI wiring data simulation, the blocked Gibbs sampler, posterior
//! summarization and evaluation into reproducible experiment runs.
//!
//! Exit codes: 0 on success, 2 on validation errors (bad inputs, bad
//! configuration), 1 on runtime failures.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "mixsum",
    version,
    about = "Posterior summarization of Gaussian mixing measures via sliced optimal transport"
)]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap the worker-thread count; results are identical for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw data from the four-component reference mixture.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        /// Sample size.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run the blocked Gibbs sampler on a data CSV.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        /// Keep every thin-th post-burn-in sweep.
        #[arg(long)]
        thin: Option<usize>,
        #[arg(long)]
        truncation: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        nu: Option<f64>,
        /// Prior mean, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        mu0: Option<Vec<f64>>,
        /// Prior scale-matrix diagonal, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        psi_diag: Option<Vec<f64>>,
    },
    /// Summarize a draws file under one or more methods.
    Summarize {
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Methods: sw|mix_sw|smix_w|binder|vi|omari, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        kinds: Option<Vec<String>>,
        #[arg(long)]
        projections: Option<usize>,
        #[arg(long)]
        order: Option<f64>,
        #[arg(long)]
        prune_floor: Option<f64>,
        /// shared | fresh Monte Carlo directions.
        #[arg(long)]
        directions: Option<String>,
        /// Subsample the draws file (primary runtime control: the distance
        /// matrix is O(M²)).
        #[arg(long, default_value_t = 1)]
        thin: usize,
    },
    /// Build the clustering / density / mixing-measure tables.
    Evaluate {
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Directory holding summary_<method>.json and labels_<method>.csv.
        #[arg(long)]
        summaries: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth_measure: Option<PathBuf>,
        #[arg(long)]
        truth_labels: Option<PathBuf>,
        #[arg(long)]
        grid_resolution: Option<usize>,
        #[arg(long)]
        eval_projections: Option<usize>,
        #[arg(long)]
        refresh_iters: Option<usize>,
        #[arg(long)]
        eval_prune_floor: Option<f64>,
        #[arg(long)]
        emit_grids: Option<bool>,
    },
    /// Pairwise distances between two measure JSON files.
    Distances {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// sw|mix_sw|smix_w|mw, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        kinds: Option<Vec<String>>,
        #[arg(long)]
        projections: Option<usize>,
        #[arg(long)]
        order: Option<f64>,
    },
}

fn run(cli: Cli) -> mixsum::Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = Some(threads);
    }
    if let Some(threads) = cfg.threads {
        // a pool may already exist when driven from tests; that's fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match cli.command {
        Command::Simulate { out, n } => {
            if let Some(n) = n {
                cfg.n = n;
            }
            commands::simulate(&cfg, &out)
        }
        Command::Fit {
            data,
            out,
            iterations,
            burn_in,
            thin,
            truncation,
            alpha,
            lambda,
            nu,
            mu0,
            psi_diag,
        } => {
            if let Some(v) = iterations {
                cfg.chain.iterations = v;
            }
            if let Some(v) = burn_in {
                cfg.chain.burn_in = v;
            }
            if let Some(v) = thin {
                cfg.chain.thin = v;
            }
            if let Some(v) = truncation {
                cfg.hyper.truncation = v;
            }
            if let Some(v) = alpha {
                cfg.hyper.alpha = v;
            }
            if let Some(v) = lambda {
                cfg.hyper.lambda = v;
            }
            if let Some(v) = nu {
                cfg.hyper.nu = v;
            }
            if let Some(v) = mu0 {
                cfg.hyper.mu0 = v;
            }
            if let Some(v) = psi_diag {
                cfg.hyper.psi_diag = v;
            }
            commands::fit(&cfg, &data, &out)
        }
        Command::Summarize {
            draws,
            data,
            out,
            kinds,
            projections,
            order,
            prune_floor,
            directions,
            thin,
        } => {
            if let Some(v) = kinds {
                cfg.metric.kinds = v;
            }
            if let Some(v) = projections {
                cfg.metric.projections = v;
            }
            if let Some(v) = order {
                cfg.metric.order = v;
            }
            if let Some(v) = prune_floor {
                cfg.metric.prune_floor = v;
            }
            if let Some(v) = directions {
                cfg.metric.directions = v;
            }
            commands::summarize(&cfg, &draws, &data, &out, thin)
        }
        Command::Evaluate {
            draws,
            data,
            summaries,
            out,
            truth_measure,
            truth_labels,
            grid_resolution,
            eval_projections,
            refresh_iters,
            eval_prune_floor,
            emit_grids,
        } => {
            if let Some(v) = grid_resolution {
                cfg.evaluation.grid_resolution = v;
            }
            if let Some(v) = eval_projections {
                cfg.evaluation.projections = v;
            }
            if let Some(v) = refresh_iters {
                cfg.evaluation.refresh_iters = v;
            }
            if let Some(v) = eval_prune_floor {
                cfg.evaluation.prune_floor = v;
            }
            if let Some(v) = emit_grids {
                cfg.evaluation.emit_grids = v;
            }
            let inputs = commands::EvaluateInputs {
                draws,
                data,
                summaries,
                truth_measure,
                truth_labels,
                out,
            };
            commands::evaluate(&cfg, &inputs)
        }
        Command::Distances { left, right, kinds, projections, order } => {
            if let Some(v) = projections {
                cfg.metric.projections = v;
            }
            if let Some(v) = order {
                cfg.metric.order = v;
            }
            let kinds = kinds.unwrap_or_else(|| {
                vec!["sw".to_string(), "mix_sw".to_string(), "smix_w".to_string()]
            });
            let doc = commands::distances(&cfg, &left, &right, &kinds)?;
            println!("{doc}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
