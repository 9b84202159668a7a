//! Command-line driver: offline training, online evaluation, reproduction
//! studies and artifact verification.
//!
//! Exit codes: 0 success, 1 input/configuration error, 2 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rbeig::config::RunConfig;
use rbeig::driver::{run_offline, run_online, run_study, run_verify, DriverError};

#[derive(Parser)]
#[command(
    name = "rbeig",
    about = "Certified reduced-basis solver for parametrized non-symmetric generalized eigenproblems"
)]
struct Cli {
    /// Worker threads for parameter sweeps (0 = hardware default).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a reduced basis offline and persist artifacts, trace and curves.
    Offline {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the configured one).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also export every affine component matrix in Matrix Market form.
        #[arg(long)]
        export_family: bool,
    },
    /// Evaluate persisted artifacts at parameters from a CSV file.
    Online {
        #[arg(long)]
        artifacts: PathBuf,
        /// Parameter CSV (raw coefficients or minicore macro format).
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value = "online_out")]
        out: PathBuf,
        /// Re-solve each parameter and require bitwise identical k_N.
        #[arg(long)]
        verify: bool,
        /// Lift and save the direct/adjoint flux vectors per parameter.
        #[arg(long)]
        lift_flux: bool,
    },
    /// Run a self-contained reproduction study.
    Study {
        /// perturbation4x4 | toycore_convergence | estimator_efficiency
        #[arg(long)]
        name: String,
        #[arg(long, default_value = "study_out")]
        out: PathBuf,
        /// Optional configuration override for offline-backed studies.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check persisted artifacts against fresh full-dimension computations.
    Verify {
        #[arg(long)]
        artifacts: PathBuf,
        /// Number of parameters to check.
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
}

fn load_config(path: &PathBuf) -> Result<RunConfig, DriverError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        DriverError::Config(format!("cannot read {}: {e}", path.display()))
    })?;
    RunConfig::from_toml(&text)
        .map_err(|e| DriverError::Config(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), DriverError> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .map_err(|e| DriverError::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Offline {
            config,
            out,
            export_family,
        } => {
            let cfg = load_config(&config)?;
            let summary = run_offline(&cfg, out.as_deref())?;
            if export_family {
                let setup = rbeig::driver::build_problem(&cfg)?;
                let dir = out
                    .clone()
                    .unwrap_or_else(|| PathBuf::from(&cfg.output.dir))
                    .join("family");
                rbeig::persist::save_family(&dir, &setup.family)?;
                println!("family components exported to {}", dir.display());
            }
            println!(
                "offline done: basis dimension {} after {} iterations ({}), {} HF solves, {:.1} s",
                summary.basis_dim,
                summary.iterations,
                summary.stop,
                summary.hf_solves,
                summary.offline_wall_s
            );
            if let Some(sp) = &summary.speedup {
                println!(
                    "speedup t_HF/t_RB = {:.1} (median {:.3e} s / {:.3e} s), break-even at {:.0} parameter runs",
                    sp.speedup, sp.t_hf_median_s, sp.t_rb_median_s, sp.break_even_runs
                );
            }
            if let Some(cov) = &summary.coverage {
                println!(
                    "calibrated coverage: {}/{} test parameters ({:.1}%)",
                    cov.covered,
                    cov.total,
                    100.0 * cov.coverage_fraction
                );
            }
            Ok(())
        }
        Command::Online {
            artifacts,
            params,
            out,
            verify,
            lift_flux,
        } => {
            let summary = run_online(&artifacts, &params, &out, verify, lift_flux)?;
            println!(
                "online done: {} parameters at N = {}, median solve {:.3e} s, median estimator {:.3e} s, {} HF factorizations",
                summary.solved,
                summary.basis_dim,
                summary.t_solve_median_s,
                summary.t_estimator_median_s,
                summary.hf_factorizations
            );
            Ok(())
        }
        Command::Study { name, out, config } => {
            let cfg = config.map(|p| load_config(&p)).transpose()?;
            let summary = run_study(&name, &out, cfg.as_ref())?;
            if let Some(slope) = summary.slope {
                println!("study {name}: log-log slope {slope:.3}");
            }
            if let (Some(a), Some(b)) = (summary.mean_e_k_rel_low_n, summary.mean_e_k_rel_final)
            {
                println!(
                    "study {name}: mean relative k-error {a:.3e} (low N) -> {b:.3e} (final N)"
                );
            }
            if let Some(c) = summary.coverage_fraction {
                println!("study {name}: calibrated coverage {:.1}%", 100.0 * c);
            }
            Ok(())
        }
        Command::Verify { artifacts, count } => {
            let summary = run_verify(&artifacts, count)?;
            println!(
                "verify ok: {} parameters, projection defect {:.2e}, residual mismatch {:.2e}, orthonormality defect {:.2e}",
                summary.parameters_checked,
                summary.max_projection_defect,
                summary.max_residual_mismatch,
                summary.basis_orthonormality_defect
            );
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
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
