use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sqfnlab_cli::{catalog, configure_threads, validate, CliError, ConfigFile, ExperimentConfig};

#[derive(Parser)]
#[command(name = "sqfnlab", version, about = "Run α-number and square-function suites on measure pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// JSON config: a scenario name plus optional overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog scenario with its default settings.
    #[arg(long)]
    scenario: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its report.
    Run {
        #[command(flatten)]
        source: Source,
        /// Report path; overrides the config. Without one the report goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV path for the profile partial sums; overrides the config.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// List the scenario catalog.
    List,
    /// Check a config without running it.
    Validate {
        #[command(flatten)]
        source: Source,
    },
}

fn load(source: Source) -> Result<ExperimentConfig, CliError> {
    let file = match (source.config, source.scenario) {
        (Some(path), _) => ConfigFile::load(&path)?,
        (None, Some(name)) => ConfigFile::scenario(&name),
        (None, None) => unreachable!("clap requires one source"),
    };
    file.resolve()
}

fn execute(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::List => {
            println!("{}", serde_json::to_string_pretty(&catalog()).expect("catalog serializes"));
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { source } => {
            let cfg = load(source)?;
            let d = validate(&cfg);
            println!("{}", serde_json::to_string_pretty(&d).expect("diagnostics serialize"));
            Ok(if d.is_ok() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Run { source, out, profiles } => {
            let mut cfg = load(source)?;
            cfg.outputs.report = out.or(cfg.outputs.report);
            cfg.outputs.profiles = profiles.or(cfg.outputs.profiles);
            let report = sqfnlab_cli::run(&cfg)?;
            match &cfg.outputs.report {
                Some(path) => report.write_json(path)?,
                None => println!("{}", report.to_json()),
            }
            if let Some(path) = &cfg.outputs.profiles {
                report.write_profiles_csv(BufWriter::new(File::create(path)?))?;
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if report.passed {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("failed checks:");
                for name in &report.failed_checks {
                    eprintln!("  {name}");
                }
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("SQFNLAB_THREADS").ok();
    let result = configure_threads(threads.as_deref()).and_then(|()| execute(cli.command));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("sqfnlab: {e}");
            let _ = io::Write::flush(&mut io::stderr());
            ExitCode::from(e.exit_code())
        }
    }
}
