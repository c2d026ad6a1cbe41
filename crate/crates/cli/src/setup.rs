use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use tslagent_core::mealy::MealyMachine;
use tslagent_runtime::bundled;
use tslagent_runtime::llm::{connect, BackendConfig, Journal, JournalMode};
use tslagent_runtime::session::Oracles;
use tslagent_runtime::world::Faults;
use tslagent_runtime::{bind_terms, BindingConfig, TermRegistry};

use crate::commands::read;
use crate::error::CliError;

/// Overrides for the backend block of a binding file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct BackendArgs {
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Seed sent with every completion request.
    #[arg(long)]
    pub llm_seed: Option<u64>,
    #[arg(long, value_enum)]
    pub journal_mode: Option<Mode>,
    #[arg(long)]
    pub journal: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Live,
    Record,
    Replay,
}

#[derive(Debug, Clone, Copy, Default, clap::Args)]
pub struct FaultArgs {
    /// Per-turn probability that the scripted generator writes the wrong place.
    #[arg(long, default_value_t = 0.0)]
    pub p_halluc: f64,
    /// Per-turn probability that a scripted `add` is off by one.
    #[arg(long, default_value_t = 0.0)]
    pub p_arith: f64,
}

impl FaultArgs {
    pub fn faults(&self) -> Result<Faults, CliError> {
        let f = Faults { p_halluc: self.p_halluc, p_arith: self.p_arith };
        if f.is_valid() {
            Ok(f)
        } else {
            Err(CliError::Parse("fault probabilities must lie in [0, 1]".into()))
        }
    }
}

/// A binding file, or the name of a bundled one (`task1.scripted`, ...).
pub fn load_registry(path: &Path, machine: &MealyMachine) -> Result<TermRegistry, CliError> {
    let text = match bundled::bindings(&path.to_string_lossy()) {
        Some(text) if !path.exists() => text.to_string(),
        _ => read(path)?,
    };
    let parse = |e: tslagent_runtime::BindError| CliError::Parse(format!("{}: {e}", path.display()));
    let config = BindingConfig::from_json(&text).map_err(parse)?;
    bind_terms(&machine.signals, config).map_err(parse)
}

/// Hands out oracles to sessions; every session shares one journal.
pub struct Backend {
    config: Option<BackendConfig>,
    journal: Option<Arc<Mutex<Journal>>>,
    faults: Faults,
}

impl Backend {
    pub fn new(registry: &TermRegistry, args: &BackendArgs, faults: Faults) -> Result<Backend, CliError> {
        if !registry.uses_llm() {
            return Ok(Backend { config: None, journal: None, faults });
        }
        let mut config = registry.backend.clone().unwrap_or_default();
        if let Some(url) = &args.base_url {
            config.base_url = url.clone();
        }
        if let Some(model) = &args.model {
            config.model = model.clone();
        }
        if let Some(seed) = args.llm_seed {
            config.seed = seed;
        }
        if let Some(mode) = args.journal_mode {
            config.mode = match mode {
                Mode::Live => JournalMode::Live,
                Mode::Record => JournalMode::Record,
                Mode::Replay => JournalMode::Replay,
            };
        }
        if let Some(path) = &args.journal {
            config.journal = Some(path.clone());
        }
        let journal = match (&config.journal, config.mode) {
            (_, JournalMode::Live) => None,
            (Some(path), _) => Some(Arc::new(Mutex::new(Journal::open(path)?))),
            (None, _) => return Err(CliError::Parse("record and replay modes need a journal path".into())),
        };
        Ok(Backend { config: Some(config), journal, faults })
    }

    pub fn oracles(&self, session: &str) -> Result<Oracles, CliError> {
        let chat = match &self.config {
            Some(c) => Some(connect(c, self.journal.clone(), session)?),
            None => None,
        };
        Ok(Oracles { chat, faults: self.faults })
    }
}
