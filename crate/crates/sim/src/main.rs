use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pyom_sim::{corpus, run_scenario, Report, Scenario, Transport};

/// Runs simulation scenarios and prints a JSON report.
#[derive(Debug, Parser)]
#[command(name = "pyom-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        file: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's transport.
        #[arg(long, value_enum)]
        transport: Option<Transport>,
        /// Include the full trace in the output.
        #[arg(long)]
        trace: bool,
    },
    /// Run every shipped scenario.
    Corpus,
    /// Run a generated schedule.
    Random {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    let print = |v: &serde_json::Value| println!("{}", serde_json::to_string_pretty(v).expect("json"));
    match cli.command {
        Command::Run { file, seed, transport, trace } => {
            let text = std::fs::read_to_string(&file).map_err(|e| format!("{}: {e}", file.display()))?;
            let mut scenario = Scenario::from_json(&text)?;
            scenario.seed = seed.unwrap_or(scenario.seed);
            scenario.transport = transport.unwrap_or(scenario.transport);
            let run = run_scenario(&scenario)?;
            let mut out = serde_json::to_value(&run.report)?;
            if trace {
                out["trace"] = serde_json::to_value(&run.trace)?;
            }
            print(&out);
            Ok(run.report.passed)
        }
        Command::Corpus => {
            let reports = corpus::load()?.iter().map(run_scenario).map(|r| r.map(|r| r.report)).collect::<Result<Vec<Report>, _>>()?;
            let passed = reports.iter().all(|r| r.passed);
            print(&serde_json::json!({ "passed": passed, "scenarios": reports }));
            Ok(passed)
        }
        Command::Random { seed, steps } => {
            let run = run_scenario(&pyom_sim::generate::random_scenario(seed, steps))?;
            print(&serde_json::to_value(&run.report)?);
            Ok(run.report.passed)
        }
    }
}
