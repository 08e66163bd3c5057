use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use collapsar::cli::{self, regress, RunOptions};

#[derive(Parser)]
#[command(name = "collapsar", version, about = "Self-similar collapse profiles: integrate, check, sweep, probe")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON configuration and write artifacts.
    Run {
        config: PathBuf,
        /// Worker threads for sweeps and PDE node loops.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory, overriding the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// End of the integration interval, overriding the config.
        #[arg(long)]
        y_end: Option<f64>,
        #[arg(long)]
        no_plots: bool,
    },
    /// Re-run a corpus of golden cases and report differences.
    Regress { corpus: PathBuf },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match args.command {
        Command::Run { config, jobs, output, y_end, no_plots } => {
            let out = cli::run(&config, &RunOptions { jobs, output, y_end, no_plots });
            for c in &out.checks {
                let status = if c.skipped {
                    "SKIP"
                } else if c.passed {
                    "PASS"
                } else {
                    "FAIL"
                };
                println!("{status} {}{}", c.name, c.note.as_ref().map(|n| format!(" ({n})")).unwrap_or_default());
            }
            if let Some(m) = &out.message {
                eprintln!("error: {m}");
            }
            if let Some(d) = &out.output_dir {
                println!("artifacts in {}", d.display());
            }
            out.exit.code()
        }
        Command::Regress { corpus } => {
            let rep = regress::run_corpus(&corpus);
            println!("{}", serde_json::to_string_pretty(&rep).expect("report serializes"));
            rep.exit_code
        }
    };
    ExitCode::from(code as u8)
}
