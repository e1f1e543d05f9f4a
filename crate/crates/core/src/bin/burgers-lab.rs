use burgers_lab::runner::{self, catalog, ExperimentSpec, EXIT_CONFIG, EXIT_OK};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "burgers-lab", version, about = "Shock dissipation and stochastic Lagrangian experiments for 1D Burgers")]
struct Cli {
    /// Override the spec seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec and write CSV/JSON artifacts.
    Run { spec: PathBuf },
    /// List scenarios with an example spec for each.
    List,
    /// Parse and check a spec without running it.
    Validate { spec: PathBuf },
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentSpec, i32> {
    match ExperimentSpec::from_file(path) {
        Ok(mut s) => {
            if let Some(seed) = seed {
                s.seed = seed;
            }
            Ok(s)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(runner::error_code(&e))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match cli.command {
        Command::List => {
            for e in catalog() {
                println!("{}: {}", e.kind, e.topic);
                let spec = ExperimentSpec {
                    name: e.kind.into(),
                    seed: 1,
                    output_dir: format!("out/{}", e.kind).into(),
                    scenario: e.example,
                };
                match spec.to_toml() {
                    Ok(t) => {
                        for line in t.lines() {
                            println!("    {line}");
                        }
                    }
                    Err(err) => eprintln!("error: {err}"),
                }
                println!();
            }
            EXIT_OK
        }
        Command::Validate { spec } => match load(&spec, cli.seed) {
            Ok(s) => {
                println!("ok: {} ({})", s.name, s.scenario.kind());
                EXIT_OK
            }
            Err(c) => c,
        },
        Command::Run { spec } => match load(&spec, cli.seed) {
            Ok(s) => match runner::run(&s, cli.jobs) {
                Ok(c) => {
                    let dir = runner::resolve_output_dir(&s);
                    println!("{}: exit {c}, artifacts in {}", s.name, dir.display());
                    c
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    runner::error_code(&e)
                }
            },
            Err(c) => c,
        },
    };
    ExitCode::from(code as u8)
}
