use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use revsmc_experiments::{presets, read_rows, run_experiment, summarize, write_rows, ExperimentConfig, RunError};

/// Reverse-time multilevel SMC experiments.
#[derive(Parser)]
#[command(name = "revsmc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config file or a preset name.
    Run {
        config: String,
        /// Override the config's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Replicates run concurrently (default: available cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Output CSV path (default: the config's `output`, else stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-condition mean, SD and quantiles of one or more result files.
    Summarize {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Bundled preset configurations.
    Presets {
        #[command(subcommand)]
        command: PresetCommand,
    },
}

#[derive(Subcommand)]
enum PresetCommand {
    List,
    /// Print a preset's TOML.
    Show { name: String },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;

fn load_config(arg: &str) -> Result<ExperimentConfig, RunError> {
    let path = PathBuf::from(arg);
    let text = if path.exists() {
        std::fs::read_to_string(&path)?
    } else if let Some(p) = presets::find(arg) {
        p.text.to_string()
    } else {
        return Err(revsmc_experiments::ConfigError(format!("{arg}: no such file or preset")).into());
    };
    Ok(ExperimentConfig::from_toml(&text)?)
}

fn output(path: Option<&PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(config: &str, seed: Option<u64>, jobs: Option<usize>, out: Option<PathBuf>) -> Result<ExitCode, RunError> {
    let mut config = load_config(config)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let rows = run_experiment(&config, jobs)?;
    let target = out.or_else(|| config.output.clone());
    write_rows(output(target.as_ref())?, &config, &rows)?;
    if rows.iter().all(|r| !r.flag.is_empty()) {
        eprintln!("revsmc: every row is flagged; no usable estimate was produced");
        return Ok(ExitCode::from(EXIT_DEGENERATE));
    }
    Ok(ExitCode::SUCCESS)
}

fn summarize_files(files: &[PathBuf]) -> Result<ExitCode, RunError> {
    let mut rows = Vec::new();
    for f in files {
        rows.extend(read_rows(File::open(f)?)?);
    }
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    for s in summarize(&rows) {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("REVSMC_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, jobs, out } => run(&config, seed, jobs, out),
        Command::Summarize { files } => summarize_files(&files),
        Command::Presets { command } => {
            match command {
                PresetCommand::List => {
                    for p in presets::PRESETS {
                        println!("{:<30} {}", p.name, p.description);
                    }
                }
                PresetCommand::Show { name } => match presets::find(&name) {
                    Some(p) => print!("{}", p.text),
                    None => {
                        eprintln!("revsmc: unknown preset {name}");
                        return ExitCode::from(EXIT_CONFIG);
                    }
                },
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("revsmc: {e}");
            match e {
                RunError::Config(_) => ExitCode::from(EXIT_CONFIG),
                RunError::Model(revsmc::Error::Degenerate { .. }) => ExitCode::from(EXIT_DEGENERATE),
                RunError::Model(revsmc::Error::InvalidConfig(_) | revsmc::Error::InvalidParams(_)) => {
                    ExitCode::from(EXIT_CONFIG)
                }
                _ => ExitCode::FAILURE,
            }
        }
    }
}
