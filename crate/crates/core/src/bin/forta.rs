use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use forta::cli::{self, FuzzSpec};
use forta::error::Result;

#[derive(Parser)]
#[command(name = "forta", version, about = "Byzantine-resilient secure aggregation simulator")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train once per configured rule and write CSVs and the accuracy chart.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inject random errors into codewords and report decode success.
    CodecFuzz {
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Error counts, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "10")]
        errors: Vec<usize>,
        #[arg(long, default_value_t = 0.1)]
        mag_min: f64,
        #[arg(long, default_value_t = 10.0)]
        mag_max: f64,
        #[arg(long, default_value_t = 1)]
        mag_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the resilience bounds for a configuration.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output.dir for bounds.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, out } => {
            let config = cli::parse_config(&config)?;
            let outcome = cli::cmd_run(&config, out.as_deref())?;
            for log in &outcome.logs {
                let acc = log.final_accuracy().unwrap_or(f64::NAN);
                println!("{}: final accuracy {acc:.4}", log.rule);
            }
            println!("wrote {}", outcome.dir.display());
        }
        Command::CodecFuzz { n, k, trials, errors, mag_min, mag_max, mag_steps, seed, out } => {
            let spec = FuzzSpec { n, k, trials, error_counts: errors, mag_min, mag_max, mag_steps, seed };
            let rows = cli::cmd_codec_fuzz(&spec)?;
            match out {
                Some(path) => {
                    let tmp = cli::staging_dir(&path);
                    cli::write_fuzz_csv(fs::File::create(&tmp)?, &rows)?;
                    fs::rename(&tmp, &path)?;
                }
                None => cli::write_fuzz_csv(io::stdout().lock(), &rows)?,
            }
        }
        Command::Bounds { config, out } => {
            let config = cli::parse_config(&config)?;
            print!("{}", cli::cmd_bounds(&config, out.as_deref())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
