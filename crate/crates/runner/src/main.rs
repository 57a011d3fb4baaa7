use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use wqed_runner::{execute, parse_config, sweep, OutputFormat, RunError, RunReport, ScenarioConfig};

#[derive(Parser)]
#[command(name = "wqed", version, about = "Single-photon emission and absorption near a waveguide cut-off")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's [output] format.
        #[arg(long)]
        format: Option<OutputFormat>,
        /// Recompute the headline scalars at half resolution.
        #[arg(long)]
        half_res_check: bool,
    },
    /// Run a scenario once per value of a numeric key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated; may be empty.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
        #[arg(long)]
        format: Option<OutputFormat>,
        #[arg(long)]
        half_res_check: bool,
    },
}

fn load(path: &Path, format: Option<OutputFormat>, half_res_check: bool) -> Result<ScenarioConfig, RunError> {
    let text = fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    if let Some(f) = format {
        cfg.output.format = f;
    }
    cfg.output.half_res_check |= half_res_check;
    Ok(cfg)
}

fn print_report(report: &RunReport) {
    println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
}

/// Exit code for a finished run: 3 when its half-resolution check failed.
fn report_code(report: &RunReport) -> u8 {
    if report.converged() {
        0
    } else {
        3
    }
}

fn run(cli: Cli) -> Result<u8, RunError> {
    match cli.command {
        Command::Run { config, out, format, half_res_check } => {
            let cfg = load(&config, format, half_res_check)?;
            let report = execute(&cfg, &out)?;
            info!("{} finished in {:.1} s", report.scenario, report.wall_clock_s);
            if let Some(c) = report.convergence.as_ref().filter(|c| !c.converged) {
                eprintln!(
                    "{}: half-resolution change {:.3e} exceeds tolerance {:.1e}",
                    report.scenario, c.change, c.tolerance
                );
            }
            print_report(&report);
            Ok(report_code(&report))
        }
        Command::Sweep { config, param, values, jobs, out, format, half_res_check } => {
            let cfg = load(&config, format, half_res_check)?;
            let values: Vec<String> = values.into_iter().map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            let cells = sweep(&cfg, &param, &values, jobs, &out)?;
            let mut code = 0;
            let mut rows = Vec::with_capacity(cells.len());
            for cell in &cells {
                match &cell.result {
                    Ok(report) => {
                        code = code.max(report_code(report));
                        rows.push(serde_json::json!({ "value": cell.value, "dir": cell.dir, "report": report }));
                    }
                    Err(e) => {
                        eprintln!("{param} = {}: {e}", cell.value);
                        code = code.max(e.exit_code() as u8);
                        rows.push(serde_json::json!({ "value": cell.value, "dir": cell.dir, "error": e.to_string() }));
                    }
                }
            }
            println!("{}", serde_json::to_string_pretty(&rows).expect("reports serialize"));
            Ok(code)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
