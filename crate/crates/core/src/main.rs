use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stateful_rrm::cli::{self, CliError, ScenarioConfig};

#[derive(Parser)]
#[command(name = "stateful-rrm", version, about = "Repeated risk minimization against stateful environments")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Play every epsilon of the scenario and write trajectories and a summary.
    Run(Common),
    /// Check the contraction, rate, stability and sensitivity properties.
    Verify(Common),
    /// Print the resolved configuration.
    Inspect(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated epsilon values replacing the configured sweep.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
}

fn load(c: &Common) -> Result<ScenarioConfig, CliError> {
    ScenarioConfig::from_file(&c.config)?.resolve(c.epsilon.clone(), c.out.clone())
}

fn execute(verb: Verb) -> Result<(), CliError> {
    match verb {
        Verb::Run(c) => {
            let summary = cli::run_scenario(load(&c)?)?;
            if let Some(d) = &summary.dataset {
                eprintln!("{}", d.row_report());
            }
            for r in &summary.runs {
                println!(
                    "eps={} status={} iterations={} final_theta_delta={}",
                    r.epsilon,
                    r.status.as_str(),
                    r.iterations,
                    r.final_theta_delta.map_or("-".to_string(), |v| format!("{v:e}"))
                );
            }
        }
        Verb::Verify(c) => {
            let report = cli::verify_theory(load(&c)?)?;
            for run in &report.runs {
                for p in &run.properties {
                    let verdict = match p.pass {
                        Some(true) => "pass",
                        Some(false) => "FAIL",
                        None => "info",
                    };
                    println!("eps={} {:<24} {verdict}  {}", run.epsilon, p.name, p.note);
                }
            }
        }
        Verb::Inspect(c) => {
            let cfg = load(&c)?;
            let text = cli::inspect(&cfg);
            println!("{text}");
            if let Some(dir) = &c.out {
                std::fs::create_dir_all(dir)
                    .and_then(|_| std::fs::write(dir.join("resolved_config.json"), format!("{text}\n")))
                    .map_err(|source| CliError::Output {
                        path: dir.clone(),
                        source,
                    })?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match execute(args.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
