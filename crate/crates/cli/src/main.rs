//! `forestplay` command-line entry point.

mod hotseat;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use forestplay_core::game::{replay, DecisionLog, GameConfig, GameState};
use forestplay_core::outcomes::{score_imported, score_state, CoefficientTable, Directions, ScoreReport};
use forestplay_core::strategy::Experiment;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "forestplay", version, about = "Deterministic forest-management board game")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Start a hotseat game, driven by prompts or a scripted action file.
    New {
        #[arg(long, value_parser = clap::value_parser!(u8).range(2..=4))]
        players: Option<u8>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Action events to apply, in the decision-log event format.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Game config document overriding the built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated player names.
        #[arg(long, value_delimiter = ',')]
        names: Vec<String>,
    },
    /// Run the session service.
    Serve {
        /// Overrides the port of the bind address from FORESTPLAY_BIND.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run a strategy experiment; `.csv` output gets the ranked table, anything else the JSON results.
    Bots {
        #[arg(long)]
        experiment: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a decision log and print its final digest.
    Replay { file: PathBuf },
    /// Score a decision log.
    Score {
        file: PathBuf,
        #[arg(long, conflicts_with = "import")]
        coeffs: Option<PathBuf>,
        /// Externally simulated indicators to use instead of the surrogate.
        #[arg(long)]
        import: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a decision log's score report.
    Export {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: ExportFormat,
        #[arg(long)]
        coeffs: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExportFormat {
    ReportJson,
    Csv,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Rule(String),
    #[error("{0}")]
    Strategy(String),
    #[error("{0}")]
    Service(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Invalid(_) => "invalid_input",
            CliError::Rule(_) => "illegal_action",
            CliError::Strategy(_) => "strategy",
            CliError::Service(_) => "service",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Invalid(_) => 4,
            CliError::Rule(_) => 5,
            CliError::Strategy(_) => 6,
            CliError::Service(_) => 7,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_log(path: &Path) -> Result<GameState, CliError> {
    let log = DecisionLog::from_document(&read(path)?).map_err(invalid)?;
    replay(&log).map_err(invalid)
}

fn load_coeffs(path: Option<&Path>, state: &GameState) -> Result<CoefficientTable, CliError> {
    let coeffs = match path {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
        None => state.config.coefficients,
    };
    if !CoefficientTable::is_valid(&coeffs) {
        return Err(invalid("coefficients must be finite and non-negative"));
    }
    Ok(coeffs)
}

fn report(file: &Path, coeffs: Option<&Path>, import: Option<&Path>) -> Result<ScoreReport, CliError> {
    let state = load_log(file)?;
    let table = load_coeffs(coeffs, &state)?;
    match import {
        Some(doc) => score_imported(&state.export_log(), &read(doc)?, &table, &Directions::default()).map_err(invalid),
        None => Ok(score_state(&state, &table, &Directions::default())),
    }
}

fn load_config(path: Option<&Path>) -> Result<GameConfig, CliError> {
    match path {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| invalid(format!("{}: {e}", p.display()))),
        None => Ok(GameConfig::default()),
    }
}

fn bind_addr(port: Option<u16>) -> Result<std::net::SocketAddr, CliError> {
    let base = forestplay_service::bind_addr_from_env();
    let mut addr: std::net::SocketAddr = base
        .parse()
        .map_err(|e| CliError::Usage(format!("{}={base}: {e}", forestplay_service::BIND_ENV)))?;
    if let Some(port) = port {
        addr.set_port(port);
    }
    Ok(addr)
}

fn serve(port: Option<u16>, data: PathBuf) -> Result<(), CliError> {
    let addr = bind_addr(port)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Service(e.to_string()))?;
    runtime.block_on(async move {
        let app = forestplay_service::App::open(data)
            .await
            .map_err(|e| CliError::Service(e.to_string()))?;
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Service(format!("bind {addr}: {e}")))?;
        eprintln!(
            "listening on {}",
            listener.local_addr().map_err(|e| CliError::Service(e.to_string()))?
        );
        forestplay_service::serve(listener, app)
            .await
            .map_err(|e| CliError::Service(e.to_string()))
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::New {
            players,
            seed,
            out,
            script,
            config,
            names,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(n) = players {
                cfg.player_count = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let roster = if names.is_empty() {
                (1..=cfg.player_count).map(|i| format!("Player {i}")).collect()
            } else {
                names
            };
            let state = GameState::with_roster(cfg, roster).map_err(|e| CliError::Usage(e.to_string()))?;
            let end = match script {
                Some(path) => hotseat::run_script(state, &read(&path)?)?,
                None => hotseat::run_prompts(state, std::io::stdin().lock(), std::io::stdout().lock())?,
            };
            write(&out, &end.export_log().to_document())?;
            println!("{}", end.digest());
            if !end.is_finished() {
                eprintln!("game saved unfinished in {:?}", end.phase);
            }
            Ok(())
        }
        Command::Serve { port, data } => serve(port, data),
        Command::Bots { experiment, out } => {
            let e = Experiment::from_document(&read(&experiment)?).map_err(invalid)?;
            let results = e.run().map_err(|e| CliError::Strategy(e.to_string()))?;
            let text = if out.extension().is_some_and(|x| x == "csv") {
                results.to_csv()
            } else {
                results.to_document()
            };
            write(&out, &text)
        }
        Command::Replay { file } => {
            let state = load_log(&file)?;
            println!("{}", state.digest());
            Ok(())
        }
        Command::Score {
            file,
            coeffs,
            import,
            out,
        } => {
            let r = report(&file, coeffs.as_deref(), import.as_deref())?;
            emit(out.as_deref(), &r.to_document())
        }
        Command::Export {
            file,
            format,
            coeffs,
            out,
        } => {
            let r = report(&file, coeffs.as_deref(), None)?;
            let text = match format {
                ExportFormat::ReportJson => r.to_document(),
                ExportFormat::Csv => r.to_csv(),
            };
            emit(out.as_deref(), &text)
        }
    }
}

fn fail(e: &CliError) -> ExitCode {
    let line = json!({"error": e.kind(), "exit": e.exit_code(), "message": e.to_string()});
    eprintln!("{line}");
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return fail(&CliError::Usage(e.kind().to_string()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
