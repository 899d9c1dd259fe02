mod analyze;
mod args;
mod evaluate;
mod manifest;
mod plot;
mod prob;
mod svg;
mod train;

use std::path::Path;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use manifest::RunManifest;

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(negbound::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(negbound::Error::Diverged { .. }) => 4,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<negbound::Error> for CliError {
    fn from(e: negbound::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(negbound::Error::Io(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Reads a JSON file into `T`; missing keys take their defaults.
pub fn read_json_config<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

pub fn print_json<T: serde::Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    println!("{text}");
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T, manifest: &mut RunManifest) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    std::fs::write(path, text + "\n")?;
    manifest.output(path);
    Ok(())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Coupon(_) => "coupon",
        Command::Tau(_) => "tau",
        Command::ExpectedDraws(_) => "expected-draws",
        Command::Train(_) => "train",
        Command::Evaluate(_) => "evaluate",
        Command::Analyze(_) => "analyze",
        Command::Plot(_) => "plot",
        Command::CheckScores(_) => "check-scores",
    }
}

fn run(cli: &Cli, manifest: &mut RunManifest) -> CliResult<()> {
    match &cli.command {
        Command::Coupon(a) => prob::coupon(a, manifest),
        Command::Tau(a) => prob::tau(a, manifest),
        Command::ExpectedDraws(a) => prob::expected_draws(a, manifest),
        Command::Train(a) => train::run(a, manifest),
        Command::Evaluate(a) => evaluate::run(a, manifest),
        Command::Analyze(a) => analyze::run(a, manifest),
        Command::Plot(a) => plot::run(a, manifest),
        Command::CheckScores(a) => prob::check_scores(a, manifest),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.verbose {
        "info"
    } else {
        "warn"
    }))
    .init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }

    let mut manifest = RunManifest::new(command_name(&cli.command));
    let outcome = run(&cli, &mut manifest);
    let code = match &outcome {
        Ok(()) => {
            manifest.status = "ok".into();
            0
        }
        Err(e) => {
            manifest.status = "failed".into();
            manifest.error = Some(e.to_string());
            e.exit_code()
        }
    };
    manifest.exit_code = code as i32;
    // Commands with an output directory keep their manifest there.
    let mut targets = Vec::new();
    if let Some(dir) = &manifest.output_dir {
        targets.push(dir.join("manifest.json"));
    }
    if let Some(p) = &cli.manifest {
        targets.push(p.clone());
    }
    for path in targets {
        if let Err(e) = manifest.write(&path) {
            eprintln!("error: cannot write manifest {}: {e}", path.display());
        }
    }
    if let Err(e) = outcome {
        eprintln!("error: {e}");
    }
    ExitCode::from(code)
}
