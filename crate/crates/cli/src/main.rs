//! `zonemda`: closed-form sweeps, simulated acquisitions and Monte Carlo
//! runs for multi-order deviation averaging.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use zonemda_core::harness::{
    emit_chain, predict, run_delta_sweep, run_full_chain, run_monte_carlo, write_montecarlo_json,
    write_sweep_csv, ExperimentConfig, HarnessError, MethodKind, OutputFormat,
};

#[derive(Parser)]
#[command(
    name = "zonemda",
    version,
    about = "Multi-order deviation averaging simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Analytic,
    Oversampled,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form single-order and averaged deviation over δ in [0, 1].
    Sweep {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        orders: usize,
        #[arg(long, default_value_t = 1001)]
        steps: usize,
        /// CSV destination.
        #[arg(long)]
        out: PathBuf,
        /// Also write an SVG chart here.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Runs the full signal chain once.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        no_noise: bool,
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// Repeats the chain with derived per-trial seeds.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        /// JSON summary destination.
        #[arg(long)]
        out: PathBuf,
        /// Run trials on one thread.
        #[arg(long)]
        serial: bool,
    },
    /// Prints the closed-form per-order and averaged deviations.
    Predict {
        #[arg(long)]
        freq_hz: f64,
        #[arg(long)]
        config: PathBuf,
    },
}

fn ensure_parent(path: &Path) -> Result<(), HarnessError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            std::fs::create_dir_all(p).map_err(|e| HarnessError::Io {
                path: p.to_path_buf(),
                source: e,
            })
        }
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Sweep {
            epsilon,
            orders,
            steps,
            out,
            plot,
        } => {
            let sweep = run_delta_sweep(epsilon, orders, steps)?;
            ensure_parent(&out)?;
            write_sweep_csv(&out, &sweep)?;
            if let Some(plot) = plot {
                ensure_parent(&plot)?;
                std::fs::write(&plot, zonemda_core::harness::sweep_chart(&sweep)).map_err(|e| {
                    HarnessError::Io {
                        path: plot,
                        source: e,
                    }
                })?;
            }
            println!(
                "max |dev1| = {} bins, max |devavg| = {} bins over {} rows",
                sweep.max_abs_dev1(),
                sweep.max_abs_devavg(),
                sweep.rows.len()
            );
            Ok(())
        }
        Command::Simulate {
            config,
            out_dir,
            no_noise,
            method,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if no_noise {
                cfg.noise.spectral_snr_db = None;
            }
            match method {
                Some(Method::Analytic) => cfg.method = MethodKind::Analytic,
                Some(Method::Oversampled) => cfg.method = MethodKind::Oversampled,
                None => {}
            }
            let exp = cfg.resolve()?;
            let chain = run_full_chain(&exp)?;
            let formats: BTreeSet<OutputFormat> =
                [OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg].into();
            emit_chain(&chain, &out_dir, &formats)?;
            for t in &chain.tones {
                match (&t.estimate, &t.failure) {
                    (Some(e), _) => println!(
                        "tone {} Hz: estimate {} Hz, deviation {} Hz over {} orders",
                        t.truth_hz,
                        e.estimate_hz,
                        e.avg_deviation_hz.unwrap_or(f64::NAN),
                        e.order_count
                    ),
                    (None, Some(f)) => println!("tone {} Hz: failed: {f}", t.truth_hz),
                    (None, None) => {}
                }
            }
            let failures = chain.failures();
            if failures.is_empty() {
                Ok(())
            } else {
                Err(HarnessError::Estimation(failures.join("; ")))
            }
        }
        Command::Montecarlo {
            config,
            trials,
            seed,
            out,
            serial,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run_monte_carlo(&cfg, trials, seed, !serial)?;
            ensure_parent(&out)?;
            write_montecarlo_json(&out, &summary)?;
            for t in &summary.tones {
                println!(
                    "tone {} Hz: rms {} Hz, mean {} Hz, max |dev| {} Hz, {} failures of {}",
                    t.truth_hz,
                    t.rms_hz.unwrap_or(f64::NAN),
                    t.mean_hz.unwrap_or(f64::NAN),
                    t.max_abs_hz.unwrap_or(f64::NAN),
                    t.failures,
                    t.trials
                );
            }
            Ok(())
        }
        Command::Predict { freq_hz, config } => {
            let exp = ExperimentConfig::load(&config)?.resolve()?;
            let pred = predict(&exp, freq_hz)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&pred).expect("prediction serializes")
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
