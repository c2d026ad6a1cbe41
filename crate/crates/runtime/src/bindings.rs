//! Binding configuration: how each predicate and function symbol of a
//! specification is realized when the agent runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tslagent_core::frontend::SignalTable;

use crate::llm::BackendConfig;

pub const SUMMARY: &str = "{summary}";
pub const PASSAGE: &str = "{passage}";
pub const USER_PROMPT: &str = "{user_prompt}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplyParser {
    /// The trimmed reply must be exactly `0` or `1`.
    #[default]
    Binary,
    /// The trimmed reply is used verbatim.
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub template: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parser: Option<ReplyParser>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "snake_case")]
pub enum Builtin {
    /// Integer addition.
    Add,
    /// `cell >= value` over an integer cell.
    AtLeast { cell: String, value: i64 },
}

/// Deterministic stand-ins for the language model, driven by the scripted world.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "script", rename_all = "snake_case")]
pub enum Script {
    /// As a predicate: the latest passage is set at `place`.
    /// As a function: write a passage set at `place`.
    Location { place: String },
    /// Predicate: the user prompt carries the tag `[tag]`.
    Choice { tag: String },
    /// Function: addition that may miscount under fault injection.
    Add,
    /// Summarizer: appends the passage's place to the summary.
    Summary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Binding {
    Llm(Template),
    Builtin(Builtin),
    Scripted(Script),
}

impl Binding {
    pub fn kind(&self) -> &'static str {
        match self {
            Binding::Llm(_) => "llm",
            Binding::Builtin(_) => "builtin",
            Binding::Scripted(_) => "scripted",
        }
    }
}

/// The binding file as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendConfig>,
    /// Text cell refreshed by the summarizer. Defaults to the only text cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary_cell: Option<String>,
    pub symbols: BTreeMap<String, Binding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summarizer: Option<Binding>,
}

impl BindingConfig {
    pub fn from_json(text: &str) -> Result<BindingConfig, BindError> {
        serde_json::from_str(text).map_err(|e| BindError::Json(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BindError {
    #[error("binding config is not valid JSON: {0}")]
    Json(String),
    #[error("no binding for symbol `{0}`")]
    Missing(String),
    #[error("binding for unknown symbol `{0}`")]
    Unknown(String),
    #[error("template for `{symbol}` lacks placeholder {placeholder}")]
    Placeholder { symbol: String, placeholder: &'static str },
    #[error("binding for `{symbol}` is unusable: {reason}")]
    Kind { symbol: String, reason: String },
    #[error("summary cell: {0}")]
    SummaryCell(String),
}

/// A validated binding set. Immutable once built, so sessions can share it.
#[derive(Debug, Clone, PartialEq)]
pub struct TermRegistry {
    pub predicates: BTreeMap<String, Binding>,
    pub functions: BTreeMap<String, Binding>,
    pub summarizer: Option<Binding>,
    pub summary_cell: Option<String>,
    pub backend: Option<BackendConfig>,
}

impl TermRegistry {
    pub fn uses_llm(&self) -> bool {
        self.predicates.values().chain(self.functions.values()).chain(&self.summarizer).any(|b| matches!(b, Binding::Llm(_)))
    }

    pub fn count(&self, kind: &str) -> (usize, usize) {
        let n = |m: &BTreeMap<String, Binding>| m.values().filter(|b| b.kind() == kind).count();
        (n(&self.predicates), n(&self.functions))
    }

    /// Every place mentioned by a scripted location binding.
    pub fn places(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .predicates
            .values()
            .chain(self.functions.values())
            .filter_map(|b| match b {
                Binding::Scripted(Script::Location { place }) => Some(place.clone()),
                _ => None,
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Symbols of `table` that this registry does not bind.
    pub fn unbound(&self, table: &SignalTable) -> Vec<String> {
        let p = table.predicates.keys().filter(|s| !self.predicates.contains_key(*s));
        let f = table.functions.keys().filter(|s| !self.functions.contains_key(*s));
        p.chain(f).cloned().collect()
    }
}

fn require(symbol: &str, t: &Template, placeholders: &[&'static str]) -> Result<(), BindError> {
    match placeholders.iter().find(|p| !t.template.contains(**p)) {
        Some(p) => Err(BindError::Placeholder { symbol: symbol.to_string(), placeholder: p }),
        None => Ok(()),
    }
}

fn kind_error(symbol: &str, reason: impl Into<String>) -> BindError {
    BindError::Kind { symbol: symbol.to_string(), reason: reason.into() }
}

fn check_predicate(symbol: &str, b: &Binding, table: &SignalTable) -> Result<(), BindError> {
    match b {
        Binding::Llm(t) => {
            if t.parser.unwrap_or(ReplyParser::Binary) != ReplyParser::Binary {
                return Err(kind_error(symbol, "predicate replies must use the binary parser"));
            }
            if !t.template.contains(PASSAGE) && !t.template.contains(SUMMARY) {
                return Err(BindError::Placeholder { symbol: symbol.to_string(), placeholder: PASSAGE });
            }
            Ok(())
        }
        Binding::Builtin(Builtin::AtLeast { cell, .. }) if table.is_integer_cell(cell) => Ok(()),
        Binding::Builtin(Builtin::AtLeast { cell, .. }) => Err(kind_error(symbol, format!("`{cell}` is not an integer cell"))),
        Binding::Builtin(Builtin::Add) => Err(kind_error(symbol, "`add` is a function")),
        Binding::Scripted(Script::Location { .. } | Script::Choice { .. }) => Ok(()),
        Binding::Scripted(_) => Err(kind_error(symbol, "script does not answer predicates")),
    }
}

fn check_function(symbol: &str, arity: usize, b: &Binding) -> Result<(), BindError> {
    match b {
        Binding::Llm(t) => {
            if t.parser.unwrap_or(ReplyParser::Text) != ReplyParser::Text {
                return Err(kind_error(symbol, "generator replies must use the text parser"));
            }
            require(symbol, t, &[SUMMARY, USER_PROMPT])
        }
        Binding::Builtin(Builtin::Add) | Binding::Scripted(Script::Add) if arity == 2 => Ok(()),
        Binding::Builtin(Builtin::Add) | Binding::Scripted(Script::Add) => Err(kind_error(symbol, "addition needs two arguments")),
        Binding::Builtin(_) => Err(kind_error(symbol, "builtin is a predicate")),
        Binding::Scripted(Script::Location { .. }) => Ok(()),
        Binding::Scripted(_) => Err(kind_error(symbol, "script does not generate values")),
    }
}

/// Validates `config` against the symbols of a specification.
pub fn bind_terms(table: &SignalTable, config: BindingConfig) -> Result<TermRegistry, BindError> {
    let mut predicates = BTreeMap::new();
    let mut functions = BTreeMap::new();
    for symbol in table.predicates.keys().chain(table.functions.keys()) {
        if !config.symbols.contains_key(symbol) {
            return Err(BindError::Missing(symbol.clone()));
        }
    }
    for (symbol, b) in config.symbols {
        if table.predicates.contains_key(&symbol) {
            check_predicate(&symbol, &b, table)?;
            predicates.insert(symbol, b);
        } else if let Some(&arity) = table.functions.get(&symbol) {
            check_function(&symbol, arity, &b)?;
            functions.insert(symbol, b);
        } else {
            return Err(BindError::Unknown(symbol));
        }
    }
    let text_cells: Vec<&String> = table.cells.iter().filter(|c| !table.is_integer_cell(c)).collect();
    let summary_cell = match config.summary_cell {
        Some(c) if text_cells.contains(&&c) => Some(c),
        Some(c) => return Err(BindError::SummaryCell(format!("`{c}` is not a text cell"))),
        None if text_cells.len() <= 1 => text_cells.first().map(|c| c.to_string()),
        None => return Err(BindError::SummaryCell("several text cells; name one".into())),
    };
    match (&config.summarizer, &summary_cell) {
        (Some(Binding::Llm(t)), Some(_)) => require("summarizer", t, &[SUMMARY, PASSAGE])?,
        (Some(Binding::Scripted(Script::Summary)), Some(_)) => {}
        (Some(_), Some(_)) => return Err(kind_error("summarizer", "must be an llm or scripted summary binding")),
        (Some(_), None) => return Err(BindError::SummaryCell("summarizer given but no text cell".into())),
        (None, Some(c)) => return Err(BindError::Missing(format!("summarizer for `{c}`"))),
        (None, None) => {}
    }
    Ok(TermRegistry { predicates, functions, summarizer: config.summarizer, summary_cell, backend: config.backend })
}
