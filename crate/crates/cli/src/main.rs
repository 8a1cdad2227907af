use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use macroviz_cli::{build_pipeline, io_error, load_config, read_request, record, server, CliError};
use macroviz_core::{Catalog, Mode};

#[derive(Parser)]
#[command(name = "macroviz", version, about = "Turn a CSV file and a question into chart specifications")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Feasible,
    Recommend,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Feasible => Mode::Feasible,
            ModeArg::Recommend => Mode::Recommend,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline once and print or write the response JSON.
    Ask {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        prompt: String,
        #[arg(long, value_enum, default_value = "recommend")]
        mode: ModeArg,
        /// Write the response here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Answer model calls from this replay store.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Print the chart catalog.
    Catalog {
        /// One line per template instead of JSON.
        #[arg(long)]
        list: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run against the live provider and save every exchange as a replay fixture.
    Record {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        prompt: String,
        #[arg(long, value_enum, default_value = "recommend")]
        mode: ModeArg,
        /// Replay store directory to merge into.
        #[arg(long, default_value = "replay")]
        store: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ask { data, prompt, mode, out, config, replay } => {
            let pipeline = build_pipeline(load_config(config.as_deref(), replay)?)?;
            let response = pipeline.run(&read_request(&data, &prompt, mode.into())?)?;
            let mut json = response.to_json();
            json.push('\n');
            match out {
                Some(path) => std::fs::write(&path, json).map_err(io_error(&path))?,
                None => emit(&json),
            }
        }
        Command::Serve { port, host, config, replay } => {
            let pipeline = build_pipeline(load_config(config.as_deref(), replay)?)?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Setup(e.to_string()))?;
            runtime
                .block_on(server::serve(pipeline, SocketAddr::new(host, port)))
                .map_err(|e| CliError::Setup(format!("cannot serve on {host}:{port}: {e}")))?;
        }
        Command::Catalog { list, config } => {
            let config = load_config(config.as_deref(), None)?;
            let catalog = match &config.catalog_path {
                Some(p) => Catalog::load(p).map_err(|e| CliError::Setup(e.to_string()))?,
                None => Catalog::shipped(),
            };
            if list {
                let lines: String = catalog
                    .templates
                    .iter()
                    .map(|t| format!("{:<24} {:<14} {}\n", t.id, t.category.as_str(), t.display_name))
                    .collect();
                emit(&lines);
            } else {
                emit(&(serde_json::to_string_pretty(&catalog).expect("catalog serializes") + "\n"));
            }
        }
        Command::Record { data, prompt, mode, store, config } => {
            let config = load_config(config.as_deref(), None)?;
            let (response, count) = record(config, &read_request(&data, &prompt, mode.into())?, &store)?;
            emit(&(response.to_json() + "\n"));
            eprintln!("recorded {count} exchanges into {}", store.display());
        }
    }
    Ok(())
}
