//! `robctl` — the command-line laboratory for two robust investment models
//! under drift ambiguity.
//!
//! Subcommands: `closed-form`, `simulate`, `saddle`, `fixed-point`,
//! `contraction`, `moments`, `report`, `plot-data`. Every output embeds the
//! config SHA-256, the seed, and the crate version; all writes are atomic
//! (temp file + rename); seeds are always explicit (flag, then the
//! `RCTL_SEED` environment variable, then the fixed default 42 — never the
//! wall clock).
//!
//! Exit codes: 0 success, 2 validation/config failure, 3 acceptance-check
//! failure, 4 numeric failure.

mod commands;
mod output;

use clap::{Parser, Subcommand};

use robctl_core::Error as CoreError;

#[derive(Parser)]
#[command(name = "robctl", version, about)]
struct Cli {
    /// Worker threads for path and node parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate closed-form values, strategies and HJBI residuals on a grid.
    ClosedForm(commands::ClosedFormArgs),
    /// Monte Carlo estimate of the coupled payoff under the optimal controls.
    Simulate(commands::SimulateArgs),
    /// Saddle-point perturbation probes under common random numbers.
    Saddle(commands::SaddleArgs),
    /// Slab fixed-point solve of the reduced HJBI equation.
    FixedPoint(commands::FixedPointArgs),
    /// Empirical contraction factor of the slab operator on a surface pair.
    Contraction(commands::ContractionArgs),
    /// Simulation-based moment-bound verification.
    Moments(commands::MomentsArgs),
    /// Run the aggregated verification suite.
    Report(commands::ReportArgs),
    /// Convert stored results into tidy plot CSVs.
    PlotData(commands::PlotDataArgs),
}

/// Exit codes per the interface contract.
fn exit_code(err: &CoreError) -> i32 {
    match err {
        CoreError::Config(_) | CoreError::InvalidParam { .. } | CoreError::OutOfDomain(_) => 2,
        CoreError::Numeric(_) | CoreError::NonFinite(_) => 4,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // a failed build means a pool already exists; that is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let outcome = match cli.command {
        Command::ClosedForm(a) => commands::closed_form(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Saddle(a) => commands::saddle(a),
        Command::FixedPoint(a) => commands::fixed_point(a),
        Command::Contraction(a) => commands::contraction(a),
        Command::Moments(a) => commands::moments(a),
        Command::Report(a) => commands::report(a),
        Command::PlotData(a) => commands::plot_data(a),
    };
    match outcome {
        Ok(checks_passed) => {
            if !checks_passed {
                std::process::exit(3);
            }
        }
        Err(err) => {
            let body = serde_json::json!({
                "error": {
                    "message": err.to_string(),
                    "kind": match &err {
                        CoreError::Config(_) => "config",
                        CoreError::InvalidParam { .. } => "invalid_param",
                        CoreError::OutOfDomain(_) => "out_of_domain",
                        CoreError::Numeric(_) => "numeric",
                        CoreError::NonFinite(_) => "non_finite",
                    },
                }
            });
            eprintln!("{}", serde_json::to_string_pretty(&body).unwrap());
            std::process::exit(exit_code(&err));
        }
    }
}
