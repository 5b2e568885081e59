use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use shiftres::harness::{self, Settings};
use shiftres::Error;

#[derive(Parser)]
#[command(name = "shiftres", version, about = "Reservoir computing with time-shifted readouts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write its result file.
    Run {
        /// `key = value` configuration file.
        config: Option<PathBuf>,
        /// lorenz96, lorenz or hr.
        #[arg(long)]
        task: Option<String>,
        /// gamma, epsilon, alpha or compare.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv or json.
        #[arg(long)]
        format: Option<String>,
        /// Extra `key=value` overrides, applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn run(command: Command) -> Result<bool, Error> {
    let Command::Run {
        config,
        task,
        sweep,
        seed,
        jobs,
        out,
        format,
        overrides,
    } = command;
    let mut settings = match &config {
        Some(path) => Settings::parse(&std::fs::read_to_string(path)?)?,
        None => Settings::default(),
    };
    let flags = [
        ("task", task),
        ("sweep", sweep),
        ("seed", seed.map(|s| s.to_string())),
        ("jobs", jobs.map(|j| j.to_string())),
        ("output", out.map(|p| p.display().to_string())),
        ("format", format),
    ];
    for (key, value) in flags {
        if let Some(value) = value {
            settings.set(key, &value)?;
        }
    }
    for entry in &overrides {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got '{entry}'")))?;
        settings.set(key.trim(), value.trim())?;
    }
    let config = settings.resolve()?;
    let result = harness::run(&config)?;
    for row in result.rows.iter().filter(|r| r.is_missing()) {
        eprintln!(
            "{} = {} ({}): {}",
            result.sweep_param,
            row.value,
            row.shift_mode,
            row.note.as_deref().unwrap_or("no result")
        );
    }
    let path = harness::emit(&result, config.format, &config.output)?;
    println!("{}", path.display());
    if let Some(best) = result.best {
        println!("best {} = {best}", result.sweep_param);
    }
    Ok(!result.all_missing())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: every grid point diverged");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
