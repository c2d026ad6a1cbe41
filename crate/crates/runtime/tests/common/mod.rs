#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use tslagent_core::abstraction::{abstract_to_ltl, LtlSpec};
use tslagent_core::codegen::Artifact;
use tslagent_core::corpus;
use tslagent_core::frontend::compile;
use tslagent_core::synthesis::{synthesize, DEFAULT_MAX_STATES};
use tslagent_runtime::{bind_terms, bundled, BindingConfig, TermRegistry};

pub fn spec(name: &str) -> LtlSpec {
    abstract_to_ltl(&compile(&corpus::named(name).unwrap()).unwrap()).unwrap()
}

/// Synthesized once per test binary.
pub fn artifact(name: &str) -> Artifact {
    static CACHE: OnceLock<Mutex<HashMap<String, Artifact>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(a) = cache.lock().unwrap().get(name) {
        return a.clone();
    }
    let m = synthesize(&spec(name), DEFAULT_MAX_STATES).unwrap().machine().unwrap().clone();
    let a = Artifact::from_machine(&m);
    cache.lock().unwrap().insert(name.to_string(), a.clone());
    a
}

pub fn config(bindings: &str) -> BindingConfig {
    BindingConfig::from_json(bundled::bindings(bindings).unwrap()).unwrap()
}

pub fn registry(spec_name: &str, bindings: &str) -> Arc<TermRegistry> {
    Arc::new(bind_terms(&spec(spec_name).signals, config(bindings)).unwrap())
}
