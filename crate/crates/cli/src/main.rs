use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use framebound_cli::{run_config, run_file, scenario};

#[derive(Parser)]
#[command(name = "framebound", version, about = "Frame-bound estimates for generalized translation-invariant systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON configuration and write report.txt and CSV files
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// worker threads (falls back to FRAMEBOUND_THREADS)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a built-in scenario, or print its configuration
    Scenario {
        name: String,
        #[arg(long)]
        emit_config: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn init_threads(n: Option<usize>) {
    let n = n.or_else(|| std::env::var("FRAMEBOUND_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = n.filter(|n| *n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn finish(code: i32, msg: String) -> ExitCode {
    if code == 0 {
        println!("{msg}");
    } else {
        eprintln!("{msg}");
    }
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, threads } => {
            init_threads(threads);
            let (code, msg) = run_file(&config, out.as_deref());
            finish(code, msg)
        }
        Command::Scenario { name, emit_config, out, threads } => {
            let cfg = match scenario(&name) {
                Ok(c) => c,
                Err(e) => return finish(2, e.to_string()),
            };
            if emit_config {
                println!("{}", cfg.to_json());
                return ExitCode::SUCCESS;
            }
            init_threads(threads);
            let (code, msg) = run_config(&cfg, out.as_deref());
            finish(code, msg)
        }
    }
}
