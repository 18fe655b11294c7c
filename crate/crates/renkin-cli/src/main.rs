//! Command-line front end: simulate synthetic measurements, fit measured
//! data, run fit ensembles, and self-validate the solvers.
//!
//! Exit codes: 0 on success, 1 when a validation or runtime step fails,
//! 2 on usage or parse errors.

mod config;

use clap::{Args, Parser, Subcommand};
use config::{CliError, RunConfig};
use renkin::aco::{ensemble, run_aco};
use renkin::io::{emit_results, load_measurements, save_measurements};
use renkin::kinetics::COEFFICIENT_NAMES;
use renkin::synth::simulate_measurements;
use renkin::validate::{run_suite, ValidateOptions};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "renkin",
    about = "Renal tracer kinetics: direct solver, synthetic data, and ant-colony fits",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// TOML configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base random seed (run i of an ensemble uses seed + i).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct AcoOpts {
    /// Population size P.
    #[arg(long)]
    pop_size: Option<usize>,
    /// New states per iteration Q (default: floor(P/2) + 1).
    #[arg(long)]
    n_new: Option<usize>,
    /// Rank-weight spread q.
    #[arg(long)]
    q: Option<f64>,
    /// Kernel deviation scale xi.
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    conv_tol: Option<f64>,
    /// Lower edge of the search box (all coordinates).
    #[arg(long)]
    bounds_low: Option<f64>,
    /// Upper edge of the search box (all coordinates).
    #[arg(long)]
    bounds_high: Option<f64>,
    /// Output threshold: reported coefficients below it become exactly 0.
    #[arg(long)]
    threshold: Option<f64>,
    /// Blood fraction of the kidney ROI signal.
    #[arg(long)]
    v_b: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic measurement CSV from configured ground truth.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        /// Poisson noise scale in counts per (kBq/mL); 0 disables noise.
        #[arg(long)]
        noise_scale: Option<f64>,
    },
    /// Fit one measurement file with a single optimizer run.
    Fit {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        aco: AcoOpts,
        /// Measurement CSV (t_min,blood,kidney,bladder[,kidney_err,bladder_err]).
        #[arg(long)]
        data: PathBuf,
    },
    /// Fit a measurement file repeatedly and emit ensemble statistics,
    /// confidence strips, and per-run results.
    Ensemble {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        aco: AcoOpts,
        #[arg(long)]
        data: PathBuf,
        /// Number of runs.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Run the solver self-checks (closed forms vs numeric integrator,
    /// structural identities) and exit nonzero on any failure.
    Validate {
        /// Random coefficient draws per matrix case.
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Degenerate control: run the checks on an all-zero input curve.
        #[arg(long)]
        zero_tac: bool,
        /// Negative control: flip one solver output sign; checks must fail.
        #[arg(long)]
        inject_sign_error: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Simulate { common, noise_scale } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            cfg.apply_common(&common);
            if let Some(ns) = noise_scale {
                cfg.noise_scale = ns;
            }
            let truth = cfg.truth()?;
            let set = simulate_measurements(
                &truth,
                &cfg.gamma,
                &cfg.schedule()?,
                cfg.noise_scale,
                cfg.seed,
            )
            .map_err(|e| CliError::Failure(e.to_string()))?;
            let out = cfg.out_dir();
            std::fs::create_dir_all(&out)
                .map_err(|e| CliError::Failure(format!("{}: {e}", out.display())))?;
            let path = out.join("measurements.csv");
            save_measurements(&set, &path).map_err(|e| CliError::Failure(e.to_string()))?;
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit { common, aco, data } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            cfg.apply_common(&common);
            cfg.apply_aco(&aco);
            let set = load_measurements(&data).map_err(config::io_error_to_cli)?;
            let fit = run_aco(&set, &cfg.aco, cfg.seed)
                .map_err(|e| CliError::Failure(e.to_string()))?;
            println!(
                "cost {:.6e}  iterations {}  converged {}  case {}",
                fit.cost, fit.iterations, fit.converged, fit.case
            );
            for (name, value) in COEFFICIENT_NAMES.iter().zip(fit.rates.to_vector()) {
                println!("{name:>6} = {value}");
            }
            if let Some(out) = &common.out {
                std::fs::create_dir_all(out)
                    .map_err(|e| CliError::Failure(format!("{}: {e}", out.display())))?;
                let path = out.join("fit.json");
                let text = serde_json::to_string_pretty(&fit)
                    .map_err(|e| CliError::Failure(e.to_string()))?;
                std::fs::write(&path, text)
                    .map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))?;
                println!("wrote {}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Ensemble { common, aco, data, runs } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            cfg.apply_common(&common);
            cfg.apply_aco(&aco);
            if let Some(r) = runs {
                cfg.n_runs = r;
            }
            let set = load_measurements(&data).map_err(config::io_error_to_cli)?;
            let seeds = cfg.seeds();
            let result = ensemble(&set, &cfg.aco, seeds.len(), &seeds)
                .map_err(|e| CliError::Failure(e.to_string()))?;
            for (label, row) in [("mean", &result.mean), ("std", &result.std)] {
                print!("{label:>5}:");
                for (name, value) in COEFFICIENT_NAMES.iter().zip(row) {
                    print!("  {name} {value:.4}");
                }
                println!();
            }
            let out = cfg.out_dir();
            emit_results(&result, &out).map_err(|e| CliError::Failure(e.to_string()))?;
            println!(
                "wrote {}, {}, {}",
                out.join("coefficients.csv").display(),
                out.join("strips.csv").display(),
                out.join("runs.json").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { cases, seed, zero_tac, inject_sign_error } => {
            let opts = ValidateOptions {
                cases_per_family: cases,
                seed: seed.unwrap_or(ValidateOptions::default().seed),
                zero_tac,
                inject_sign_error,
            };
            let report = run_suite(&opts);
            println!("{report}");
            if report.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
    }
}
