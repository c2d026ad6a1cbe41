//! Running synthesized agents: term bindings, oracles, sessions and the
//! adherence experiment harness.

pub mod bindings;
pub mod bundled;
pub mod experiment;
pub mod llm;
pub mod session;
pub mod world;

pub use bindings::{bind_terms, BindError, BindingConfig, TermRegistry};
pub use session::{start_session, Oracles, Session, SessionError, TurnError, TurnResult, Value};
