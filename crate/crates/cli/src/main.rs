use std::io::Write as _;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use tedm_cli::api::{self, AppState};
use tedm_cli::commands::{self, read_document, Outcome, RecommendRequest, SimulateRequest};
use tedm_core::governance::Property;
use tedm_core::metrics::{load_snapshot, read_snapshot};
use tedm_core::sim::{run_scenario, run_scenario_with, write_csv, Scenario};
use tedm_core::spec::{load_spec, parse_spec};

#[derive(Parser)]
#[command(
    name = "tedm",
    version,
    about = "Design, check and stress-test token economies"
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Check an economy document (TOML or JSON, a path or a bundled name).
    Validate { document: String },
    /// Gini and Nakamoto figures for an `entity,weight` snapshot CSV (`-` for stdin).
    Metrics {
        snapshot: String,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
    /// Run a scenario file or a bundled preset.
    #[command(group(ArgGroup::new("source").required(true).args(["scenario", "preset"])))]
    Simulate {
        scenario: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Economy document to run against, overriding the scenario's own.
        #[arg(long)]
        spec: Option<String>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        epochs: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write one CSV row per epoch.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Include full per-epoch records in JSON output.
        #[arg(long)]
        full: bool,
        /// Print one JSON line per epoch as it completes.
        #[arg(long)]
        stream: bool,
    },
    /// Side-by-side comparison of two economy documents.
    Compare { left: String, right: String },
    /// Rank voting-mechanism families against minimum property levels.
    Recommend {
        /// Minimum levels as property=level (0 weak, 1 moderate, 2 strong).
        #[arg(long, num_args = 1.., value_name = "PROPERTY=LEVEL")]
        require: Vec<String>,
        /// Properties to rank by, most important first.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        prefer: Vec<String>,
    },
    /// List the bundled scenario presets.
    Presets,
    /// Print the mechanism property matrix.
    Matrix,
    /// Print the JSON schema for economy documents.
    Schema,
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        bind: IpAddr,
        #[arg(long, default_value_t = 8750)]
        port: u16,
        /// Number of finished runs kept in memory.
        #[arg(long, default_value_t = 64)]
        cache: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve { .. }) {
        "info"
    } else {
        "warn"
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_env("TEDM_LOG").unwrap_or_else(|_| EnvFilter::new(default_level)),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .init();

    let outcome = match cli.command {
        Command::Validate { document } => match read_document(&document) {
            Ok(doc) => commands::validate(&doc),
            Err(e) => {
                let mut out = Outcome::from(e);
                out.body["valid"] = false.into();
                out
            }
        },
        Command::Metrics { snapshot, top_k } => {
            let dist = if snapshot == "-" {
                read_snapshot(std::io::stdin().lock())
            } else {
                load_snapshot(&snapshot)
            };
            match dist {
                Ok(d) => commands::metrics(&d, top_k),
                Err(e) => e.into(),
            }
        }
        Command::Simulate {
            scenario,
            preset,
            spec,
            epochs,
            seed,
            out,
            csv,
            full,
            stream,
        } => simulate(
            scenario, preset, spec, epochs, seed, out, csv, full, stream, cli.format,
        ),
        Command::Compare { left, right } => match (read_document(&left), read_document(&right)) {
            (Ok(a), Ok(b)) => commands::compare(&a, &b),
            (Err(e), _) | (_, Err(e)) => e.into(),
        },
        Command::Recommend { require, prefer } => recommend(&require, &prefer),
        Command::Presets => commands::presets(),
        Command::Matrix => commands::matrix(),
        Command::Schema => {
            let schema = tedm_core::spec::json_schema();
            let text = serde_json::to_string_pretty(&schema).unwrap_or_default() + "\n";
            Outcome::ok(schema, text)
        }
        Command::Serve { bind, port, cache } => serve(SocketAddr::new(bind, port), cache),
    };
    emit(&outcome, cli.format);
    ExitCode::from(outcome.status.exit_code())
}

fn emit(outcome: &Outcome, format: Format) {
    let mut stdout = std::io::stdout().lock();
    let result = match format {
        Format::Json if outcome.body.is_null() => Ok(()),
        Format::Json => writeln!(
            stdout,
            "{}",
            serde_json::to_string_pretty(&outcome.body).unwrap_or_default()
        ),
        Format::Text if outcome.is_ok() => write!(stdout, "{}", outcome.text),
        Format::Text => {
            let _ = stdout.flush();
            write!(std::io::stderr(), "{}", outcome.text)
        }
    };
    // a closed pipe is not worth a panic
    let _ = result.and_then(|_| stdout.flush());
}

fn recommend(require: &[String], prefer: &[String]) -> Outcome {
    let require = match commands::parse_requirements(require) {
        Ok(r) => r,
        Err(e) => return e,
    };
    let prefer: Result<Vec<Property>, _> = prefer.iter().map(|p| p.parse::<Property>()).collect();
    match prefer {
        Ok(prefer) => commands::recommend(&RecommendRequest { require, prefer }),
        Err(e) => Outcome::usage(e.to_string()),
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    scenario: Option<PathBuf>,
    preset: Option<String>,
    spec: Option<String>,
    epochs: Option<u64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
    full: bool,
    stream: bool,
    format: Format,
) -> Outcome {
    let base = scenario
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let scenario = match scenario.as_deref().map(Scenario::load).transpose() {
        Ok(s) => s,
        Err(e) => return e.into(),
    };
    let spec = match spec.as_deref().map(load_spec_arg).transpose() {
        Ok(s) => s,
        Err(e) => return e.into(),
    };
    let req = SimulateRequest {
        scenario,
        preset,
        spec,
        epochs,
        seed,
        full,
        stream,
    };
    let run = match commands::prepare_run(req, Some(&base)) {
        Ok(r) => r,
        Err(e) => return e,
    };
    let report = if stream {
        let mut stdout = std::io::stdout().lock();
        let r = run_scenario_with(&run.spec, &run.scenario, |e| {
            let _ = writeln!(stdout, "{}", commands::epoch_line(e, full));
        });
        r.inspect(|report| {
            let _ = writeln!(
                stdout,
                "{}",
                commands::summary_line(report, &run.content_hash)
            );
        })
    } else {
        run_scenario(&run.spec, &run.scenario)
    };
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            let outcome: Outcome = e.into();
            if stream && format == Format::Json {
                println!("{}", commands::error_line(&outcome));
                return Outcome {
                    body: serde_json::Value::Null,
                    ..outcome
                };
            }
            return outcome;
        }
    };
    if let Some(path) = &out {
        let written = serde_json::to_vec_pretty(&report)
            .map_err(|e| e.to_string())
            .and_then(|bytes| std::fs::write(path, bytes).map_err(|e| e.to_string()));
        if let Err(e) = written {
            return Outcome::internal(format!("{}: {e}", path.display()));
        }
    }
    if let Some(path) = &csv {
        let written = std::fs::File::create(path)
            .map_err(|e| e.to_string())
            .and_then(|f| write_csv(&report, f).map_err(|e| e.to_string()));
        if let Err(e) = written {
            return Outcome::internal(format!("{}: {e}", path.display()));
        }
    }
    let outcome = commands::simulation(&report, &run.content_hash, full);
    if stream {
        // the lines already went out
        return Outcome {
            body: serde_json::Value::Null,
            text: String::new(),
            ..outcome
        };
    }
    outcome
}

fn load_spec_arg(arg: &str) -> Result<tedm_core::spec::EconomySpec, tedm_core::spec::SpecError> {
    if Path::new(arg).exists() {
        load_spec(arg)
    } else {
        parse_spec(&read_document(arg)?)
    }
}

fn serve(addr: SocketAddr, cache: usize) -> Outcome {
    let runtime = match tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
    {
        Ok(r) => r,
        Err(e) => return Outcome::internal(format!("could not start runtime: {e}")),
    };
    let state = AppState {
        cache: std::sync::Arc::new(api::RunCache::new(cache)),
    };
    let result = runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!("listening on http://{}/api/v1", listener.local_addr()?);
        axum::serve(listener, api::router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
                tracing::info!("shutting down");
            })
            .await
    });
    match result {
        Ok(()) => Outcome {
            body: serde_json::Value::Null,
            ..Outcome::ok(serde_json::Value::Null, String::new())
        },
        Err(e) => Outcome::internal(format!("server on {addr}: {e}")),
    }
}
