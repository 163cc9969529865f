//! Command-line front end: single runs, sweeps, reports, and stored-run
//! verification.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use proxpep::io::{write_metrics, write_summary, write_thresholds, write_trajectory};
use proxpep::metrics::thresholds;
use proxpep::model::derived_constants;
use proxpep_harness::experiment::{
    check_experiment, execute_run, run_experiment, ExperimentConfig, RunId,
};
use proxpep_harness::generate::generate_from_config;
use proxpep_harness::report::build_report;

#[derive(Parser)]
#[command(name = "proxpep", about = "Prox-PEP solver experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a single (T, seed) run from a config and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Horizon override (defaults to the first configured value).
        #[arg(long)]
        t: Option<usize>,
        /// Seed override (defaults to the first configured value).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Execute the full T x seed grid with resume support.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit decay rates and quantiles over a finished sweep.
    Report {
        #[arg(long)]
        config: PathBuf,
    },
    /// Replay stored runs, verifying digests and the invariant suite.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> proxpep::Result<ExitCode> {
    match cli.command {
        Command::Run { config, t, seed } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let id = RunId {
                t: t.unwrap_or(cfg.t_values[0]),
                seed: seed.unwrap_or(cfg.seeds[0]),
            };
            let program = generate_from_config(&cfg.problem)?;
            let out = execute_run(&program, &cfg, id)?;
            let dir = PathBuf::from(&cfg.output_dir).join("runs").join(id.dir_name());
            std::fs::create_dir_all(&dir)?;
            write_trajectory(&dir.join("trajectory.txt"), &out.trajectory)?;
            write_metrics(&dir.join("metrics.txt"), &out.metrics)?;
            write_summary(
                &dir.join("summary.txt"),
                &out.trajectory,
                &out.params,
                Some(&out.metrics),
            )?;
            let consts = derived_constants(
                &program,
                out.params.sigma_g,
                out.params.sigma_h,
                program.constants.d0,
            )?;
            write_thresholds(
                &dir.join("thresholds.txt"),
                &thresholds(&out.params, &consts, &program, None),
            )?;
            println!(
                "run T={} seed={} digest={} hard_violations={}",
                id.t,
                id.seed,
                out.trajectory.digest(),
                out.trajectory.checks.hard_violations()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let artifacts = run_experiment(&cfg)?;
            println!(
                "sweep complete: {} run(s), {} skipped, {} failed; manifest at {}",
                artifacts.completed.len(),
                artifacts.skipped.len(),
                artifacts.failed.len(),
                artifacts.manifest_path.display()
            );
            for (id, err) in &artifacts.failed {
                eprintln!("failed T={} seed={}: {err}", id.t, id.seed);
            }
            Ok(if artifacts.failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Report { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let report = build_report(&cfg)?;
            for rate in &report.rates {
                println!(
                    "rate {}: exponent {:.4}, r^2 {:.4}, pass {}",
                    rate.metric, rate.fit.exponent, rate.fit.r_squared, rate.pass
                );
            }
            println!(
                "dual bound: {}/{} seeds under psi = {:.3e}",
                report.dual_bound_passes, report.dual_bound_total, report.dual_bound_psi
            );
            if let Some(q) = &report.quantiles {
                println!(
                    "quantiles ({}): median {:.3e}, q90 {:.3e}, 3x-median {}, threshold {}",
                    q.metric,
                    q.median,
                    q.q90,
                    q.within_median_multiple,
                    q.within_threshold
                        .map(|b| b.to_string())
                        .unwrap_or_else(|| "n/a".into())
                );
            }
            println!(
                "hard violations across runs: {}; report in {}",
                report.hard_violations_total,
                report.report_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let outcomes = check_experiment(&cfg)?;
            let mut ok = true;
            for outcome in &outcomes {
                let pass = outcome.digests_match && outcome.hard_violations == 0;
                ok &= pass;
                println!(
                    "check T={} seed={}: digests_match={} hard_violations={}{}",
                    outcome.id.t,
                    outcome.id.seed,
                    outcome.digests_match,
                    outcome.hard_violations,
                    if outcome.detail.is_empty() {
                        String::new()
                    } else {
                        format!(" [{}]", outcome.detail)
                    }
                );
            }
            println!("checked {} run(s): {}", outcomes.len(), if ok { "PASS" } else { "FAIL" });
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
