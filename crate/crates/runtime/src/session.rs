//! Sessions: one running agent, advanced one turn at a time.
//!
//! A turn reads every predicate through its binding, looks up the machine's
//! transition, applies the chosen updates and refreshes the summary. Nothing
//! is committed until the whole turn succeeds.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tslagent_core::abstraction::Valuation;
use tslagent_core::codegen::{Artifact, ArtifactError};
use tslagent_core::frontend::{FunctionTerm, PredicateTerm, TslAtom};
use tslagent_core::mealy::MealyMachine;

use crate::bindings::{Binding, Builtin, Script, TermRegistry, PASSAGE, SUMMARY, USER_PROMPT};
use crate::llm::{ChatBackend, OracleError};
use crate::world::{Faults, ScriptedWorld};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Text(String),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            Value::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            Value::Int(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

/// One oracle call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub symbol: String,
    pub kind: String,
    pub prompt: String,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnResult {
    pub turn: usize,
    pub user_prompt: String,
    pub state: usize,
    pub next_state: usize,
    /// Predicate term to observed truth value.
    pub valuation: BTreeMap<String, bool>,
    /// Input and output propositions of the turn, as one letter.
    pub letter: Valuation,
    /// Signal to the function term chosen for it.
    pub updates: BTreeMap<String, String>,
    pub passage: String,
    pub summary: String,
    pub cells: BTreeMap<String, Value>,
    pub transcripts: Vec<Transcript>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<String>,
}

/// The evaluator's reading of the previous turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub inputs: Valuation,
    pub valuation: BTreeMap<String, bool>,
    pub transcripts: Vec<Transcript>,
}

#[derive(Debug, PartialEq, Error)]
pub enum SessionError {
    #[error("artifact: {0}")]
    Artifact(#[from] ArtifactError),
    #[error("registry does not bind {0:?}")]
    Unbound(Vec<String>),
    #[error("registry binds symbols the artifact does not use: {0:?}")]
    Extra(Vec<String>),
    #[error("initial cell: {0}")]
    Cell(String),
    #[error("registry has language-model bindings but no backend was supplied")]
    NoBackend,
}

/// A failed turn. The session is left as it was before the turn.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("{error}")]
pub struct TurnError {
    pub error: OracleError,
    pub transcripts: Vec<Transcript>,
}

/// The oracles a session talks to.
#[derive(Default)]
pub struct Oracles {
    pub chat: Option<Box<dyn ChatBackend>>,
    pub faults: Faults,
}

impl Oracles {
    pub fn scripted(faults: Faults) -> Oracles {
        Oracles { chat: None, faults }
    }
}

pub struct Session {
    machine: MealyMachine,
    registry: Arc<TermRegistry>,
    world: ScriptedWorld,
    chat: Option<Box<dyn ChatBackend>>,
    rng: ChaCha8Rng,
    seed: u64,
    state: usize,
    cells: BTreeMap<String, Value>,
    passage: String,
    trace: Vec<TurnResult>,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session").field("seed", &self.seed).field("state", &self.state).field("turn", &self.turn()).finish()
    }
}

pub fn start_session(
    artifact: &Artifact,
    registry: Arc<TermRegistry>,
    seed: u64,
    initial_cells: BTreeMap<String, Value>,
    oracles: Oracles,
) -> Result<Session, SessionError> {
    let machine = artifact.to_machine()?;
    let unbound = registry.unbound(&machine.signals);
    if !unbound.is_empty() {
        return Err(SessionError::Unbound(unbound));
    }
    let table = &machine.signals;
    let extra: Vec<String> = registry
        .predicates
        .keys()
        .filter(|s| !table.predicates.contains_key(*s))
        .chain(registry.functions.keys().filter(|s| !table.functions.contains_key(*s)))
        .cloned()
        .collect();
    if !extra.is_empty() {
        return Err(SessionError::Extra(extra));
    }
    if registry.uses_llm() && oracles.chat.is_none() {
        return Err(SessionError::NoBackend);
    }
    let mut cells: BTreeMap<String, Value> = table
        .cells
        .iter()
        .map(|c| (c.clone(), if table.is_integer_cell(c) { Value::Int(0) } else { Value::Text(String::new()) }))
        .collect();
    for (name, v) in initial_cells {
        match cells.get_mut(&name) {
            Some(slot) if std::mem::discriminant(slot) == std::mem::discriminant(&v) => *slot = v,
            Some(_) => return Err(SessionError::Cell(format!("`{name}` has the wrong type"))),
            None => return Err(SessionError::Cell(format!("`{name}` is not a cell"))),
        }
    }
    let world = ScriptedWorld::new(registry.places(), oracles.faults);
    Ok(Session {
        machine,
        registry,
        world,
        chat: oracles.chat,
        rng: ChaCha8Rng::seed_from_u64(seed),
        seed,
        state: 0,
        cells,
        passage: String::new(),
        trace: Vec::new(),
    })
}

fn fill(template: &str, summary: &str, passage: &str, user_prompt: &str) -> String {
    template.replace(SUMMARY, summary).replace(PASSAGE, passage).replace(USER_PROMPT, user_prompt)
}

fn parse_binary(reply: &str) -> Option<bool> {
    match reply.trim() {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

const CLARIFY: &str = "\n\nReply with the single character 0 or 1 and nothing else.";

/// Everything a turn touches before it is committed.
struct Work<'a> {
    registry: &'a TermRegistry,
    world: &'a ScriptedWorld,
    chat: &'a mut Option<Box<dyn ChatBackend>>,
    rng: ChaCha8Rng,
    cells: &'a BTreeMap<String, Value>,
    passage: &'a str,
    user_prompt: &'a str,
    turn: usize,
    landing: Option<String>,
    transcripts: Vec<Transcript>,
    faults: Vec<String>,
}

impl Work<'_> {
    fn summary(&self, cells: &BTreeMap<String, Value>) -> String {
        self.registry.summary_cell.as_ref().and_then(|c| cells.get(c)).and_then(Value::as_text).unwrap_or("").to_string()
    }

    fn ask(&mut self, symbol: &str, kind: &str, prompt: String) -> Result<String, OracleError> {
        let chat = self.chat.as_mut().ok_or_else(|| OracleError::NoBackend { symbol: symbol.to_string() })?;
        let reply = chat.complete(&prompt)?;
        self.transcripts.push(Transcript { symbol: symbol.to_string(), kind: kind.to_string(), prompt, reply: reply.clone() });
        Ok(reply)
    }

    fn predicate(&mut self, p: &PredicateTerm) -> Result<bool, OracleError> {
        let binding = self.registry.predicates.get(&p.name).ok_or_else(|| OracleError::Term { term: p.to_string(), message: "unbound".into() })?;
        match binding {
            Binding::Llm(t) => {
                let prompt = fill(&t.template, &self.summary(self.cells), self.passage, self.user_prompt);
                let reply = self.ask(&p.name, "evaluator", prompt.clone())?;
                if let Some(b) = parse_binary(&reply) {
                    return Ok(b);
                }
                let reply = self.ask(&p.name, "evaluator", prompt + CLARIFY)?;
                parse_binary(&reply).ok_or(OracleError::Unparseable { symbol: p.name.clone(), reply })
            }
            Binding::Builtin(Builtin::AtLeast { cell, value }) => match self.cells.get(cell).and_then(Value::as_int) {
                Some(n) => Ok(n >= *value),
                None => Err(OracleError::Term { term: p.to_string(), message: format!("`{cell}` holds no integer") }),
            },
            Binding::Scripted(Script::Location { place }) => Ok(ScriptedWorld::place_of(self.passage) == Some(place.as_str())),
            Binding::Scripted(Script::Choice { tag }) => Ok(ScriptedWorld::has_tag(self.user_prompt, tag)),
            other => Err(OracleError::Term { term: p.to_string(), message: format!("{} binding cannot answer", other.kind()) }),
        }
    }

    fn int(&mut self, t: &FunctionTerm) -> Result<i64, OracleError> {
        match self.term(t)? {
            Value::Int(n) => Ok(n),
            Value::Text(_) => Err(OracleError::Term { term: t.to_string(), message: "expected an integer".into() }),
        }
    }

    fn term(&mut self, t: &FunctionTerm) -> Result<Value, OracleError> {
        let (name, args) = match t {
            FunctionTerm::Signal(s) => {
                return self.cells.get(s).cloned().ok_or_else(|| OracleError::Term { term: s.clone(), message: "not a cell".into() });
            }
            FunctionTerm::Apply { name, args } => (name, args),
        };
        if args.is_empty() {
            if let Ok(n) = name.parse::<i64>() {
                return Ok(Value::Int(n));
            }
        }
        let binding = self.registry.functions.get(name).ok_or_else(|| OracleError::Term { term: t.to_string(), message: "unbound".into() })?;
        match binding {
            Binding::Builtin(Builtin::Add) => {
                let (a, b) = (self.int(&args[0])?, self.int(&args[1])?);
                Ok(Value::Int(a + b))
            }
            Binding::Scripted(Script::Add) => {
                let (a, b) = (self.int(&args[0])?, self.int(&args[1])?);
                let (n, faulty) = self.world.add(a, b, &mut self.rng);
                if faulty {
                    self.faults.push(format!("arithmetic: {t} gave {n}"));
                }
                Ok(Value::Int(n))
            }
            Binding::Scripted(Script::Location { place }) => {
                let passage = match self.landing.take() {
                    Some(forced) => ScriptedWorld::write(&forced, self.turn),
                    None => {
                        let (passage, faulty) = self.world.generate(place, self.turn, &mut self.rng);
                        if faulty {
                            self.faults.push(format!("hallucination: asked for {place}, wrote {}", ScriptedWorld::place_of(&passage).unwrap_or("?")));
                        }
                        passage
                    }
                };
                Ok(Value::Text(passage))
            }
            Binding::Llm(tpl) => {
                let prompt = fill(&tpl.template, &self.summary(self.cells), self.passage, self.user_prompt);
                Ok(Value::Text(self.ask(name, "generator", prompt)?.trim().to_string()))
            }
            other => Err(OracleError::Term { term: t.to_string(), message: format!("{} binding cannot generate", other.kind()) }),
        }
    }

    fn summarize(&mut self, summary: &str, passage: &str) -> Result<String, OracleError> {
        match &self.registry.summarizer {
            Some(Binding::Scripted(Script::Summary)) => Ok(ScriptedWorld::summarize(summary, passage)),
            Some(Binding::Llm(t)) => Ok(self.ask("summarizer", "summarizer", fill(&t.template, summary, passage, self.user_prompt))?.trim().to_string()),
            _ => Ok(summary.to_string()),
        }
    }
}

impl Session {
    pub fn machine(&self) -> &MealyMachine {
        &self.machine
    }

    pub fn registry(&self) -> &TermRegistry {
        &self.registry
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn turn(&self) -> usize {
        self.trace.len()
    }

    pub fn cells(&self) -> &BTreeMap<String, Value> {
        &self.cells
    }

    pub fn passage(&self) -> &str {
        &self.passage
    }

    pub fn summary(&self) -> &str {
        self.registry.summary_cell.as_ref().and_then(|c| self.cells.get(c)).and_then(Value::as_text).unwrap_or("")
    }

    pub fn trace(&self) -> &[TurnResult] {
        &self.trace
    }

    fn work<'a>(&'a mut self, user_prompt: &'a str, landing: Option<String>) -> Work<'a> {
        Work {
            registry: &self.registry,
            world: &self.world,
            chat: &mut self.chat,
            rng: self.rng.clone(),
            cells: &self.cells,
            passage: &self.passage,
            user_prompt,
            turn: self.trace.len() + 1,
            landing,
            transcripts: Vec::new(),
            faults: Vec::new(),
        }
    }

    /// Reads every input proposition. Does not change the session.
    pub fn evaluate(&mut self, user_prompt: &str) -> Result<Observation, TurnError> {
        let inputs: Vec<(usize, PredicateTerm)> = self
            .machine
            .dict
            .inputs()
            .map(|i| match &self.machine.dict.prop(i).term {
                TslAtom::Predicate(p) => (i, p.clone()),
                TslAtom::Update(_) => unreachable!("inputs are predicates"),
            })
            .collect();
        let mut w = self.work(user_prompt, None);
        let mut letter = 0;
        let mut valuation = BTreeMap::new();
        for (i, p) in inputs {
            match w.predicate(&p) {
                Ok(b) => {
                    letter |= (b as Valuation) << i;
                    valuation.insert(p.to_string(), b);
                }
                Err(error) => return Err(TurnError { error, transcripts: w.transcripts }),
            }
        }
        Ok(Observation { inputs: letter, valuation, transcripts: w.transcripts })
    }

    /// The four-step turn: evaluate, transition, generate, summarize.
    pub fn step_turn(&mut self, user_prompt: &str) -> Result<TurnResult, TurnError> {
        let obs = self.evaluate(user_prompt)?;
        let t = self.machine.step(self.state, obs.inputs);
        self.execute(user_prompt, obs, t.output, None)
    }

    /// Applies `output` (output propositions only) after `obs`. The machine
    /// still advances along its own transition for `obs.inputs`. A `landing`
    /// forces where a scripted generator sets its passage.
    pub fn execute(&mut self, user_prompt: &str, obs: Observation, output: Valuation, landing: Option<String>) -> Result<TurnResult, TurnError> {
        let next = self.machine.step(self.state, obs.inputs).next;
        let chosen: Vec<_> = self
            .machine
            .chosen(output)
            .into_iter()
            .map(|p| match &self.machine.dict.prop(p).term {
                TslAtom::Update(u) => u.clone(),
                TslAtom::Predicate(_) => unreachable!("outputs are updates"),
            })
            .collect();
        let is_cell = |s: &str| self.machine.signals.cells.contains(s);
        let is_cell: Vec<bool> = chosen.iter().map(|u| is_cell(&u.target)).collect();
        let state = self.state;
        let mut w = self.work(user_prompt, landing);
        w.transcripts = obs.transcripts;
        let mut cells = w.cells.clone();
        let mut generated = Vec::new();
        let mut updates = BTreeMap::new();
        let mut run = || -> Result<(), OracleError> {
            for (u, cell) in chosen.iter().zip(&is_cell) {
                updates.insert(u.target.clone(), u.value.to_string());
                if u.is_idle() {
                    continue;
                }
                let v = w.term(&u.value)?;
                if *cell {
                    cells.insert(u.target.clone(), v);
                } else {
                    generated.push(v.to_string());
                }
            }
            Ok(())
        };
        if let Err(error) = run() {
            return Err(TurnError { error, transcripts: w.transcripts });
        }
        let passage = generated.join("\n\n");
        let mut summary = w.summary(&cells);
        if !passage.is_empty() {
            summary = match w.summarize(&summary, &passage) {
                Ok(s) => s,
                Err(error) => return Err(TurnError { error, transcripts: w.transcripts }),
            };
            if let Some(c) = &w.registry.summary_cell {
                cells.insert(c.clone(), Value::Text(summary.clone()));
            }
        }
        let (rng, transcripts, faults) = (w.rng, w.transcripts, w.faults);
        let result = TurnResult {
            turn: self.trace.len() + 1,
            user_prompt: user_prompt.to_string(),
            state,
            next_state: next,
            valuation: obs.valuation,
            letter: obs.inputs | output,
            updates,
            passage: passage.clone(),
            summary,
            cells: cells.clone(),
            transcripts,
            faults,
        };
        self.rng = rng;
        self.cells = cells;
        if !passage.is_empty() {
            self.passage = passage;
        }
        self.state = next;
        self.trace.push(result.clone());
        Ok(result)
    }
}
