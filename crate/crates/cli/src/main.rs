use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use bvylab_cli::{
    catalogue, emit_plot, run_with_workers, workers_from_env, CliError, ExperimentConfig,
};
use clap::{Parser, Subcommand};

/// Monte Carlo laboratory for BBM/BVY-type functionals.
#[derive(Parser)]
#[command(name = "bvylab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario; exit 0 on pass, 1 on a failed assertion, 2 on a config error.
    Run { config: PathBuf },
    /// Render a curve CSV as an SVG.
    Plot {
        curve_csv: PathBuf,
        out_svg: PathBuf,
    },
    /// List scenarios, spaces and test functions as JSON.
    Catalogue,
}

fn run(config: &Path) -> Result<bool, CliError> {
    let cfg = ExperimentConfig::load(config)?;
    let report = run_with_workers(&cfg, workers_from_env()?)?;
    for a in &report.assertions {
        println!(
            "[{}] {}: {} {} {} (margin {:e})",
            if a.holds { "pass" } else { "FAIL" },
            a.name,
            a.lhs,
            serde_json::to_value(a.relation)
                .expect("relation serializes")
                .as_str()
                .unwrap_or("?"),
            a.rhs,
            a.margin
        );
    }
    println!(
        "verdict: {:?}; outputs in {}",
        report.verdict,
        cfg.output_dir.display()
    );
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => match run(&config) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Plot { curve_csv, out_svg } => match emit_plot(&curve_csv, &out_svg) {
            Ok(d) => {
                println!(
                    "plotted {} points to {}",
                    d.rescaled.len(),
                    out_svg.display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Catalogue => {
            let text =
                serde_json::to_string_pretty(&catalogue()).context("serializing the catalogue");
            match text {
                Ok(t) => {
                    println!("{t}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
