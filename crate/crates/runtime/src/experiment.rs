//! Adherence experiments: many seeded games, each monitored conjunct by
//! conjunct; a game violates as soon as any conjunct is violated.
//!
//! Two agents are compared. The automaton agent runs the synthesized
//! machine over scripted oracles whose generator may hallucinate. The
//! pure-LLM mock stands in for a prompt-engineered model: it keeps to the
//! constraints except on faulty turns, where it picks a step that breaks
//! them, either a wrong choice of update or a passage set in the wrong
//! place. Its per-turn violation rate is therefore exactly its fault rate.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;
use tslagent_core::abstraction::{abstract_to_ltl, LtlSpec, Valuation};
use tslagent_core::codegen::Artifact;
use tslagent_core::corpus;
use tslagent_core::frontend::{compile, TslAtom};
use tslagent_core::mealy::MealyMachine;
use tslagent_core::monitor::{Monitor, Role, Verdict, ViolationClass};
use tslagent_core::synthesis::{synthesize, SynthesisResult, DEFAULT_MAX_STATES};

use crate::bindings::{bind_terms, BindingConfig, Binding, Script, TermRegistry};
use crate::bundled;
use crate::llm::{connect, ChatBackend, Journal, JournalMode, OracleError};
use crate::session::{start_session, Oracles, Session, TurnResult};
use crate::world::{Faults, ScriptedWorld};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    Automaton,
    PureLlmMock,
}

impl AgentKind {
    pub fn label(self) -> &'static str {
        match self {
            AgentKind::Automaton => "automaton",
            AgentKind::PureLlmMock => "pure-llm-mock",
        }
    }
}

fn default_games() -> usize {
    75
}

fn default_turns() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Row label in the report; defaults to `spec`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    /// Bundled specification name (`task1`) or a path.
    pub spec: String,
    /// Bundled binding name (`task1.scripted`) or a path.
    pub bindings: String,
    /// Automaton artifact path; synthesized from `spec` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<String>,
    pub agent: AgentKind,
    #[serde(default = "default_games")]
    pub games: usize,
    #[serde(default = "default_turns")]
    pub turns: usize,
    #[serde(default)]
    pub seed: u64,
    /// Generator fault rate per turn.
    #[serde(default)]
    pub p_halluc: f64,
    /// Counter fault rate per turn.
    #[serde(default)]
    pub p_arith: f64,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("specification: {0}")]
    Spec(String),
    #[error("bindings: {0}")]
    Bind(#[from] crate::bindings::BindError),
    #[error("synthesis: {0}")]
    Synthesis(String),
    #[error("session: {0}")]
    Session(#[from] crate::session::SessionError),
    #[error("game {game}, turn {turn}: {error}")]
    Turn { game: usize, turn: usize, error: crate::session::TurnError },
    #[error("io: {0}")]
    Io(String),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
}

fn load(name: &str, base: &Path, bundled: impl Fn(&str) -> Option<String>) -> Result<String, ExperimentError> {
    let path = base.join(name);
    if path.is_file() {
        return std::fs::read_to_string(&path).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())));
    }
    bundled(name).ok_or_else(|| ExperimentError::Io(format!("`{name}` is neither a file nor a bundled name")))
}

/// A configuration with its specification, machine and registry loaded.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub spec: LtlSpec,
    pub machine: MealyMachine,
    pub registry: Arc<TermRegistry>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.games == 0 || self.turns == 0 {
            return bad("games and turns must be positive");
        }
        if !(Faults { p_halluc: self.p_halluc, p_arith: self.p_arith }).is_valid() {
            return bad("fault rates must lie in [0, 1]");
        }
        Ok(())
    }

    /// Resolves names relative to `base`, then to the bundled corpus.
    pub fn prepare(&self, base: &Path) -> Result<Prepared, ExperimentError> {
        self.validate()?;
        let src = load(&self.spec, base, corpus::named)?;
        let bindings = load(&self.bindings, base, |n| bundled::bindings(n).map(str::to_string))?;
        let artifact = match &self.artifact {
            Some(a) => Some(load(a, base, |_| None)?),
            None => None,
        };
        self.prepare_from(&src, &bindings, artifact.as_deref())
    }

    pub fn prepare_from(&self, spec_src: &str, bindings: &str, artifact: Option<&str>) -> Result<Prepared, ExperimentError> {
        self.validate()?;
        let core = compile(spec_src).map_err(|e| ExperimentError::Spec(e.to_string()))?;
        let spec = abstract_to_ltl(&core).map_err(|e| ExperimentError::Spec(e.to_string()))?;
        let registry = Arc::new(bind_terms(&spec.signals, BindingConfig::from_json(bindings)?)?);
        let machine = match artifact {
            Some(text) => Artifact::from_json(text).and_then(|a| a.to_machine()).map_err(|e| ExperimentError::Config(e.to_string()))?,
            None => match synthesize(&spec, DEFAULT_MAX_STATES).map_err(|e| ExperimentError::Synthesis(e.to_string()))? {
                SynthesisResult::Realizable { machine, .. } => machine,
                other => return Err(ExperimentError::Synthesis(format!("{other:?}"))),
            },
        };
        if machine.dict.props().iter().map(|p| &p.name).ne(spec.dict.props().iter().map(|p| &p.name)) {
            return Err(ExperimentError::Config("artifact propositions differ from the specification's".into()));
        }
        if self.agent == AgentKind::PureLlmMock && (registry.uses_llm() || registry.places().is_empty()) {
            return Err(ExperimentError::Config("the mock agent needs scripted location bindings".into()));
        }
        Ok(Prepared { config: self.clone(), spec, machine, registry })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub conjunct: String,
    pub role: Role,
    pub class: ViolationClass,
    pub turn: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub game: usize,
    pub seed: u64,
    pub first_violation: Option<usize>,
    pub violations: Vec<Violation>,
    /// Faults injected during the game.
    pub faults: usize,
}

impl GameOutcome {
    pub fn violates(&self) -> bool {
        !self.violations.is_empty()
    }

    pub fn has(&self, class: ViolationClass) -> bool {
        self.violations.iter().any(|v| v.class == class)
    }
}

/// Counts only; percentages are derived on output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdherenceReport {
    pub task: String,
    pub method: String,
    pub states: Option<usize>,
    pub games: usize,
    pub turns: usize,
    pub adhering: usize,
    pub violating: usize,
    pub hallucination_games: usize,
    pub arithmetic_games: usize,
    pub procedural_games: usize,
    pub outcomes: Vec<GameOutcome>,
}

fn percent(n: usize, of: usize) -> f64 {
    if of == 0 {
        0.0
    } else {
        100.0 * n as f64 / of as f64
    }
}

impl AdherenceReport {
    pub fn from_outcomes(task: String, method: String, states: Option<usize>, turns: usize, outcomes: Vec<GameOutcome>) -> AdherenceReport {
        let count = |f: &dyn Fn(&GameOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count();
        let violating = count(&|o| o.violates());
        AdherenceReport {
            task,
            method,
            states,
            games: outcomes.len(),
            turns,
            adhering: outcomes.len() - violating,
            violating,
            hallucination_games: count(&|o| o.has(ViolationClass::Hallucination)),
            arithmetic_games: count(&|o| o.has(ViolationClass::Arithmetic)),
            procedural_games: count(&|o| o.has(ViolationClass::Procedural)),
            outcomes,
        }
    }

    pub fn adherence_percent(&self) -> f64 {
        percent(self.adhering, self.games)
    }

    /// The report with derived percentages, as pretty JSON.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        let derived = json!({
            "adherence_percent": self.adherence_percent(),
            "hallucination_percent": percent(self.hallucination_games, self.games),
            "arithmetic_percent": percent(self.arithmetic_games, self.games),
        });
        v.as_object_mut().expect("object").extend(derived.as_object().expect("object").clone());
        serde_json::to_string_pretty(&v).expect("report serializes") + "\n"
    }
}

/// Plain-text tables: adherence per task and method, then violation classes.
pub fn render_tables(reports: &[AdherenceReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:<16} {:>6} {:>10}", "Task", "Method", "States", "Adherence");
    for r in reports {
        let states = r.states.map_or("-".to_string(), |n| n.to_string());
        let _ = writeln!(out, "{:<10} {:<16} {:>6} {:>9.2}%", r.task, r.method, states, r.adherence_percent());
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<16} {:>16} {:>18} {:>12}", "Method", "Hallucinations", "Arithmetic Errors", "Total Games");
    let mut by_method: BTreeMap<&str, (usize, usize, usize)> = BTreeMap::new();
    for r in reports {
        let e = by_method.entry(&r.method).or_default();
        e.0 += r.hallucination_games;
        e.1 += r.arithmetic_games;
        e.2 += r.games;
    }
    for (method, (h, a, n)) in by_method {
        let cell = |k: usize| format!("{k} ({:.2}%)", percent(k, n));
        let _ = writeln!(out, "{:<16} {:>16} {:>18} {:>12}", method, cell(h), cell(a), n);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct TraceLine<'a> {
    game: usize,
    agent: &'static str,
    #[serde(flatten)]
    turn: &'a TurnResult,
}

pub struct ExperimentRun {
    pub report: AdherenceReport,
    /// One JSON object per turn.
    pub traces: String,
}

const PROMPTS: [&str; 6] = [
    "take the left path",
    "follow the stranger",
    "rest for a while",
    "look for shelter",
    "head toward the noise",
    "go into the cave",
];

/// Scripted player input; about half the choices are tagged safe.
fn user_prompt(rng: &mut ChaCha8Rng) -> String {
    let p = PROMPTS[rng.random_range(0..PROMPTS.len())];
    if rng.random_bool(0.5) {
        format!("[safe] {p}")
    } else {
        p.to_string()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

struct Game<'a> {
    prepared: &'a Prepared,
    monitor: Monitor,
    session: Session,
    user: ChaCha8Rng,
    faults: usize,
}

impl Game<'_> {
    fn violated(&self) -> usize {
        self.monitor.tracks.iter().filter(|t| t.verdict.is_violated()).count()
    }

    fn completions(&self, inputs: Valuation) -> Vec<Valuation> {
        let spec = &self.prepared.spec;
        (0..spec.output_choices()).map(|k| inputs | spec.output_choice(k)).collect()
    }

    /// Output choices the mock may pick on a faulty turn: every choice for
    /// groups that do not hold a counter, the planned one for the rest.
    fn fault_outputs(&self, plan: Valuation) -> Vec<Valuation> {
        let spec = &self.prepared.spec;
        let counter: Valuation = spec
            .groups
            .iter()
            .filter(|g| spec.signals.is_integer_cell(&g.signal))
            .flat_map(|g| g.props.iter().map(|&p| 1 << p))
            .sum();
        let mut out: Vec<Valuation> = (0..spec.output_choices()).map(|k| spec.output_choice(k)).filter(|o| o & counter == plan & counter).collect();
        out.sort();
        out.dedup();
        out
    }

    /// Letters the evaluator could report after a passage set at `place`.
    fn next_letters(&self, place: &str) -> Vec<Valuation> {
        let m = &self.prepared.machine;
        let mut known = 0;
        let mut fixed = 0;
        for i in m.dict.inputs() {
            let TslAtom::Predicate(p) = &m.dict.prop(i).term else { continue };
            if let Some(Binding::Scripted(Script::Location { place: at })) = self.prepared.registry.predicates.get(&p.name) {
                known |= 1 << i;
                fixed |= ((at == place) as Valuation) << i;
            }
        }
        let free: Vec<usize> = m.dict.inputs().filter(|i| known >> i & 1 == 0).collect();
        (0..1u64 << free.len())
            .flat_map(|bits| {
                let inputs = free.iter().enumerate().fold(fixed, |acc, (j, &i)| acc | ((bits >> j & 1) << i));
                self.completions(inputs)
            })
            .collect()
    }

    /// A faulty step for the mock: an output and landing place that the
    /// monitor rejects within this turn or the next evaluation.
    fn breaking_step(&self, inputs: Valuation, plan: Valuation, rng: &mut ChaCha8Rng) -> Option<(Valuation, String)> {
        let before = self.violated();
        let mut options = Vec::new();
        for o in self.fault_outputs(plan) {
            let mut now = self.monitor.clone();
            now.observe(inputs | o);
            for place in self.session_places() {
                let mut next = now.clone();
                next.observe_any(&self.next_letters(&place));
                if next.tracks.iter().filter(|t| t.verdict.is_violated()).count() > before {
                    options.push((o, place.clone()));
                }
            }
        }
        if options.is_empty() {
            None
        } else {
            Some(options.swap_remove(rng.random_range(0..options.len())))
        }
    }

    fn session_places(&self) -> Vec<String> {
        ScriptedWorld::new(self.prepared.registry.places(), Faults::NONE).places().to_vec()
    }

    /// Switches every counter group to its other alternative.
    fn miscount(&self, output: Valuation) -> Valuation {
        let spec = &self.prepared.spec;
        let mut out = output;
        for g in spec.groups.iter().filter(|g| spec.signals.is_integer_cell(&g.signal) && g.props.len() > 1) {
            let k = g.props.iter().position(|&p| output >> p & 1 == 1).unwrap_or(0);
            out &= !(1 << g.props[k]);
            out |= 1 << g.props[(k + 1) % g.props.len()];
        }
        out
    }
}

fn run_game(prepared: &Prepared, monitor: &Monitor, chat: Option<Box<dyn ChatBackend>>, game: usize, seed: u64, traces: &mut String) -> Result<GameOutcome, ExperimentError> {
    let cfg = &prepared.config;
    let artifact = Artifact::from_machine(&prepared.machine);
    let world_faults = match cfg.agent {
        AgentKind::Automaton => Faults { p_halluc: cfg.p_halluc, p_arith: cfg.p_arith },
        AgentKind::PureLlmMock => Faults::NONE,
    };
    let session = start_session(&artifact, prepared.registry.clone(), seed, BTreeMap::new(), Oracles { chat, faults: world_faults })?;
    let mut g = Game { prepared, monitor: monitor.clone(), session, user: stream(seed, 1), faults: 0 };
    let mut mock = stream(seed, 2);
    let fail = |turn: usize| move |error| ExperimentError::Turn { game, turn, error };
    for turn in 1..=cfg.turns {
        let prompt = user_prompt(&mut g.user);
        let result = match cfg.agent {
            AgentKind::Automaton => g.session.step_turn(&prompt).map_err(fail(turn))?,
            AgentKind::PureLlmMock => {
                let obs = g.session.evaluate(&prompt).map_err(fail(turn))?;
                let plan = prepared.machine.step(g.session.state(), obs.inputs).output;
                let (halluc, arith) = (mock.random::<f64>() < cfg.p_halluc, mock.random::<f64>() < cfg.p_arith);
                let (mut output, mut landing, mut notes) = (plan, None, Vec::new());
                if halluc {
                    if let Some((o, place)) = g.breaking_step(obs.inputs, plan, &mut mock) {
                        notes.push(format!("mock broke the constraints: {}, passage at {place}", prepared.spec.dict.describe(o).join(" ")));
                        output = o;
                        landing = Some(place);
                    }
                }
                if arith && output != g.miscount(output) {
                    output = g.miscount(output);
                    notes.push("mock miscounted".to_string());
                }
                let mut r = g.session.execute(&prompt, obs, output, landing).map_err(fail(turn))?;
                r.faults.extend(notes);
                r
            }
        };
        g.faults += result.faults.len();
        g.monitor.observe(result.letter);
        let line = TraceLine { game, agent: cfg.agent.label(), turn: &result };
        traces.push_str(&serde_json::to_string(&line).expect("trace serializes"));
        traces.push('\n');
    }
    // The last passage is still read back once, with the next choice unknown.
    let prompt = user_prompt(&mut g.user);
    let obs = g.session.evaluate(&prompt).map_err(fail(cfg.turns + 1))?;
    let letters = g.completions(obs.inputs);
    g.monitor.observe_any(&letters);
    let mut violations: Vec<Violation> = g
        .monitor
        .tracks
        .iter()
        .filter_map(|t| match t.verdict {
            Verdict::Violated { turn } => Some(Violation { conjunct: t.label.clone(), role: t.role, class: t.class, turn }),
            _ => None,
        })
        .collect();
    violations.sort_by_key(|v| v.turn);
    Ok(GameOutcome { game, seed, first_violation: violations.first().map(|v| v.turn), violations, faults: g.faults })
}

/// Plays every game of the configuration in order.
pub fn run_experiment(prepared: &Prepared) -> Result<ExperimentRun, ExperimentError> {
    let cfg = &prepared.config;
    let monitor = Monitor::new(&prepared.spec).map_err(|e| ExperimentError::Spec(e.to_string()))?;
    let mut seeds = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut traces = String::new();
    let mut outcomes = Vec::with_capacity(cfg.games);
    let backend = prepared.registry.uses_llm().then(|| prepared.registry.backend.clone().unwrap_or_default());
    // One journal for all games, so a recorded run replays as a whole.
    let journal = match &backend {
        Some(b) if b.mode != JournalMode::Live => b.journal.as_deref().map(Journal::open).transpose()?.map(|j| Arc::new(Mutex::new(j))),
        _ => None,
    };
    for game in 0..cfg.games {
        let seed = seeds.random::<u64>();
        let chat = backend.as_ref().map(|b| connect(b, journal.clone(), &format!("game-{game}"))).transpose()?;
        outcomes.push(run_game(prepared, &monitor, chat, game, seed, &mut traces)?);
    }
    let states = match cfg.agent {
        AgentKind::Automaton => Some(prepared.machine.num_states()),
        AgentKind::PureLlmMock => None,
    };
    let task = cfg.task.clone().unwrap_or_else(|| cfg.spec.clone());
    let report = AdherenceReport::from_outcomes(task, cfg.agent.label().to_string(), states, cfg.turns, outcomes);
    Ok(ExperimentRun { report, traces })
}
