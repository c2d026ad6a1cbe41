//! Command-line front end: synthesis, verification, code generation, play,
//! experiments, explanations and the HTTP server.

pub mod commands;
pub mod error;
pub mod play;
pub mod serve;
pub mod setup;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use tslagent_core::synthesis::DEFAULT_MAX_STATES;
use tslagent_runtime::session::start_session;

pub use error::CliError;
use setup::{BackendArgs, FaultArgs};

#[derive(Debug, Parser)]
#[command(name = "tslagent", version, about = "Synthesize, run and check automaton-guided story agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a verified automaton from a specification.
    Synth {
        spec: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
        max_states: usize,
    },
    /// Check an automaton against a specification.
    Verify { artifact: PathBuf, spec: PathBuf },
    /// Print an automaton as nested conditionals.
    Codegen {
        artifact: PathBuf,
        #[arg(long)]
        js: bool,
    },
    /// Play a session in the terminal.
    Play {
        artifact: PathBuf,
        bindings: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        faults: FaultArgs,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Run an adherence experiment.
    Eval {
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Defaults to the report path with a `.traces.jsonl` extension.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Find the strongest input cause of an effect on a recorded trace.
    Explain {
        artifact: PathBuf,
        trace: PathBuf,
        #[arg(long)]
        effect: String,
        /// Input propositions a deviation may change (default: all).
        #[arg(long, value_delimiter = ',')]
        scope: Vec<String>,
        #[arg(long)]
        game: Option<usize>,
        /// Trailing turns treated as repeating forever.
        #[arg(long = "loop", default_value_t = 1)]
        cycle: usize,
        #[arg(long, default_value_t = 64)]
        max_stem: usize,
        #[arg(long, default_value_t = 8)]
        max_loop: usize,
    },
    /// Serve sessions over HTTP.
    Serve {
        artifact: PathBuf,
        bindings: PathBuf,
        /// Enables monitor verdicts in session views.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Appends each session's turns to `<dir>/<session>.jsonl`.
        #[arg(long)]
        persist: Option<PathBuf>,
        #[command(flatten)]
        faults: FaultArgs,
        #[command(flatten)]
        backend: BackendArgs,
    },
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with(args: impl IntoIterator<Item = OsString>, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = if e.use_stderr() { write!(err, "{}", e.render()) } else { write!(out, "{}", e.render()) };
            return e.exit_code();
        }
    };
    match run(cli.command, input, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    match command {
        Command::Synth { spec, out: path, max_states } => {
            let mut log = String::new();
            let result = commands::synth(&spec, max_states, &mut log);
            err.write_all(log.as_bytes()).map_err(io)?;
            commands::write(&path, &result?.artifact.to_json())?;
            writeln!(err, "wrote {}", path.display()).map_err(io)?;
        }
        Command::Verify { artifact, spec } => out.write_all(commands::verify(&artifact, &spec)?.as_bytes()).map_err(io)?,
        Command::Codegen { artifact, js } => out.write_all(commands::codegen(&artifact, js)?.as_bytes()).map_err(io)?,
        Command::Play { artifact, bindings, seed, faults, backend } => {
            let (artifact, machine) = commands::load_artifact(&artifact)?;
            let registry = setup::load_registry(&bindings, &machine)?;
            let oracles = setup::Backend::new(&registry, &backend, faults.faults()?)?.oracles("play")?;
            let mut session = start_session(&artifact, Arc::new(registry), seed, BTreeMap::new(), oracles).map_err(|e| CliError::Parse(e.to_string()))?;
            play::play(&mut session, input, out)?;
        }
        Command::Eval { config, out: path, traces } => {
            let result = commands::eval(&config)?;
            commands::write(&path, &result.report_json)?;
            let traces = traces.unwrap_or_else(|| path.with_extension("traces.jsonl"));
            commands::write(&traces, &result.traces)?;
            out.write_all(result.tables.as_bytes()).map_err(io)?;
            writeln!(err, "wrote {} and {}", path.display(), traces.display()).map_err(io)?;
        }
        Command::Explain { artifact, trace, effect, scope, game, cycle, max_stem, max_loop } => {
            let args = commands::ExplainArgs { effect: &effect, scope: &scope, game, cycle, max_stem, max_cycle: max_loop };
            let result = commands::explain(&artifact, &trace, &args)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&result).expect("json")).map_err(io)?;
        }
        Command::Serve { artifact, bindings, spec, port, host, persist, faults, backend } => {
            let state = serve_state(&artifact, &bindings, spec.as_deref(), persist, faults, &backend)?;
            let addr = format!("{host}:{port}");
            let runtime = tokio::runtime::Runtime::new().map_err(io)?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| CliError::Io(format!("{addr}: {e}")))?;
                writeln!(err, "serving on http://{}", listener.local_addr().map_err(io)?).map_err(io)?;
                axum::serve(listener, serve::router(Arc::new(state))).await.map_err(io)
            })?;
        }
    }
    Ok(())
}

/// The artifact id is its file name up to the first dot.
pub fn serve_state(artifact: &Path, bindings: &Path, spec: Option<&Path>, persist: Option<PathBuf>, faults: FaultArgs, backend: &BackendArgs) -> Result<serve::AppState, CliError> {
    let (art, machine) = commands::load_artifact(artifact)?;
    let registry = setup::load_registry(bindings, &machine)?;
    let spec = match spec {
        Some(path) => {
            let spec = commands::load_spec(path)?;
            if spec.dict.props().iter().map(|p| &p.name).ne(machine.dict.props().iter().map(|p| &p.name)) {
                return Err(CliError::Parse("the specification's propositions differ from the artifact's".into()));
            }
            Some(spec)
        }
        None => None,
    };
    if let Some(dir) = &persist {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    let backend = setup::Backend::new(&registry, backend, faults.faults()?)?;
    let name = artifact.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default();
    let id = name.split('.').next().filter(|s| !s.is_empty()).unwrap_or("artifact").to_string();
    let served = serve::Served { artifact: art, registry: Arc::new(registry), spec };
    Ok(serve::AppState::new(BTreeMap::from([(id, served)]), backend, persist))
}
