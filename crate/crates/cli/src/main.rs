mod commands;
mod error;
mod formats;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use maxent_core::Method;

use crate::commands::SolverKind;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "maxent",
    version,
    about = "Maximum-entropy fitting, entropy-based model selection and the inverse-Ising benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Newton,
    Ipf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the maximum-entropy distribution of a constraint system.
    Fit {
        /// Constraints file (JSON).
        constraints: PathBuf,
        /// Counts file (CSV `microstate,count`); supplies the moments.
        #[arg(long)]
        counts: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "newton")]
        solver: SolverArg,
        /// Convergence tolerance on the moment residual.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score candidate models on data and pick one per selection method.
    Select {
        /// Directory of constraints files, a JSON list of constraints objects,
        /// or `enumerate:L` for every interaction model on L spins.
        candidates: String,
        /// Counts file (CSV `microstate,count`).
        #[arg(long)]
        counts: PathBuf,
        /// bic, aic, hyper_maxent, hyper_maxent_lrt, a comma-separated list, or all.
        #[arg(long, default_value = "all", value_parser = parse_methods)]
        method: MethodList,
        /// Multiplies both p-value thresholds.
        #[arg(long, default_value_t = 1.0)]
        alpha_prefactor: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List every interaction model on L spins in canonical order.
    Enumerate {
        #[arg(long)]
        spins: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw counts from the Boltzmann distribution of a random Ising realization.
    Sample {
        #[arg(long, default_value_t = 5)]
        spins: usize,
        /// Generating hyperedges, e.g. `1,2,3;3,5`.
        #[arg(long, default_value = "1,2,3;1,2,4;3,5;4,5")]
        model: String,
        /// Seed of the random couplings.
        #[arg(long, default_value_t = 0)]
        params_seed: u64,
        /// Sample size.
        #[arg(long)]
        n: u64,
        /// Seed of the multinomial draw.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the model-selection benchmark. Completed tasks in OUT_DIR are reused.
    Bench {
        /// Benchmark configuration (JSON); defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads; overrides the config and MAXENT_THREADS.
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Debug, Clone)]
struct MethodList(Vec<Method>);

fn parse_methods(s: &str) -> Result<MethodList, String> {
    if s == "all" {
        return Ok(MethodList(Method::ALL.to_vec()));
    }
    s.split(',')
        .map(|m| m.trim().parse::<Method>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()
        .map(MethodList)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit {
            constraints,
            counts,
            solver,
            tol,
            max_iter,
            out,
        } => commands::fit(&commands::FitRequest {
            constraints,
            counts,
            solver: match solver {
                SolverArg::Newton => SolverKind::Newton,
                SolverArg::Ipf => SolverKind::Ipf,
            },
            tolerance: tol,
            max_iterations: max_iter,
            out,
        }),
        Command::Select {
            candidates,
            counts,
            method,
            alpha_prefactor,
            out,
        } => commands::select(&commands::SelectRequest {
            candidates,
            counts,
            methods: method.0,
            alpha_prefactor,
            out,
        }),
        Command::Enumerate { spins, out } => commands::enumerate(spins, out.as_deref()),
        Command::Sample {
            spins,
            model,
            params_seed,
            n,
            seed,
            out,
        } => commands::sample(&commands::SampleRequest {
            spins,
            model,
            params_seed,
            n,
            seed,
            out,
        }),
        Command::Bench {
            config,
            out_dir,
            threads,
        } => commands::bench(&commands::BenchRequest {
            config,
            out_dir,
            threads,
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
