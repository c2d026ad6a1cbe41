//! Non-interactive subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde_json::json;
use tslagent_core::abstraction::{abstract_to_ltl, LtlFormula, LtlSpec, Named, PropDictionary, Valuation};
use tslagent_core::causality::{synthesize_cause, templates, Deviations};
use tslagent_core::codegen::{render, Artifact, Dialect};
use tslagent_core::corpus;
use tslagent_core::formula::{Formula, Lasso};
use tslagent_core::frontend::{compile, desugar_expr, parse_formula, TslAtom};
use tslagent_core::mealy::MealyMachine;
use tslagent_core::synthesis::{synthesize, verify_machine, SynthesisResult, VerificationReport};
use tslagent_runtime::experiment::{render_tables, run_experiment, ExperimentConfig};

use crate::error::CliError;

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(CliError::io(path))
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(CliError::io(path))
}

/// A specification file, or the name of a bundled one (`task1`, `fig2`, ...).
pub fn load_spec(path: &Path) -> Result<LtlSpec, CliError> {
    let src = match corpus::named(&path.to_string_lossy()) {
        Some(src) if !path.exists() => src,
        _ => read(path)?,
    };
    let core = compile(&src).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    abstract_to_ltl(&core).map_err(|e| CliError::Parse(e.to_string()))
}

pub fn load_artifact(path: &Path) -> Result<(Artifact, MealyMachine), CliError> {
    let parse = |e: tslagent_core::codegen::ArtifactError| CliError::Parse(format!("{}: {e}", path.display()));
    let artifact = Artifact::from_json(&read(path)?).map_err(parse)?;
    let machine = artifact.to_machine().map_err(parse)?;
    Ok((artifact, machine))
}

pub struct Synthesized {
    pub artifact: Artifact,
    pub states: usize,
    pub report: VerificationReport,
}

/// Synthesizes and independently verifies; the log lines go to `log`.
pub fn synth(spec_path: &Path, max_states: usize, log: &mut String) -> Result<Synthesized, CliError> {
    let spec = load_spec(spec_path)?;
    let _ = writeln!(log, "{} inputs, {} outputs, {} assumptions, {} guarantees", spec.dict.num_inputs(), spec.dict.num_outputs(), spec.assumptions.len(), spec.guarantees.len());
    let start = Instant::now();
    let result = synthesize(&spec, max_states).map_err(|e| CliError::Analysis(e.to_string()))?;
    let (machine, states) = match result {
        SynthesisResult::Realizable { machine, states } => (machine, states),
        SynthesisResult::Unrealizable { definitive: true, .. } => {
            return Err(CliError::Unrealizable("unrealizable: the specification has no model, so no machine of any size implements it".into()))
        }
        SynthesisResult::Unrealizable { bound, definitive: false } => {
            return Err(CliError::Unrealizable(format!("unrealizable within the bound: no machine with at most {bound} states (raise --max-states to search further)")))
        }
    };
    let _ = writeln!(log, "realizable with {states} states ({} ms)", start.elapsed().as_millis());
    let report = check(&machine, &spec)?;
    let _ = writeln!(log, "verified: product of {} states has no accepting cycle", report.product_states);
    Ok(Synthesized { artifact: Artifact::from_machine(&machine), states, report })
}

fn check(machine: &MealyMachine, spec: &LtlSpec) -> Result<VerificationReport, CliError> {
    let names = |d: &PropDictionary| d.props().iter().map(|p| p.name.clone()).collect::<Vec<_>>();
    if names(&machine.dict) != names(&spec.dict) {
        return Err(CliError::Verification("the artifact's propositions differ from the specification's".into()));
    }
    let report = verify_machine(machine, spec).map_err(|e| CliError::Verification(e.to_string()))?;
    match &report.counterexample {
        None => Ok(report),
        Some(cex) => {
            let word = |l: &Lasso<Valuation>| {
                let show = |v: &Valuation| format!("{{{}}}", machine.dict.describe(*v).join(", "));
                format!("{} ({})^w", l.stem.iter().map(show).collect::<Vec<_>>().join(" "), l.cycle.iter().map(show).collect::<Vec<_>>().join(" "))
            };
            Err(CliError::Verification(format!("verification failed; counterexample run: {}", word(&cex.run))))
        }
    }
}

pub fn verify(artifact: &Path, spec: &Path) -> Result<String, CliError> {
    let (_, machine) = load_artifact(artifact)?;
    let report = check(&machine, &load_spec(spec)?)?;
    Ok(format!(
        "verified: {}-state machine; product with the {}-state automaton of the negated specification ({} states) has no accepting cycle\n",
        machine.num_states(),
        report.automaton_states,
        report.product_states
    ))
}

pub fn codegen(artifact: &Path, js: bool) -> Result<String, CliError> {
    let (artifact, _) = load_artifact(artifact)?;
    Ok(render(&artifact, if js { Dialect::JavaScript } else { Dialect::Neutral }))
}

pub struct EvalOutput {
    pub report_json: String,
    pub tables: String,
    pub traces: String,
}

pub fn eval(config_path: &Path) -> Result<EvalOutput, CliError> {
    let config = ExperimentConfig::from_json(&read(config_path)?)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let run = run_experiment(&config.prepare(base)?)?;
    Ok(EvalOutput { report_json: run.report.to_json(), tables: render_tables(std::slice::from_ref(&run.report)), traces: run.traces })
}

pub struct ExplainArgs<'a> {
    pub effect: &'a str,
    /// Input propositions a deviation may change, by name or predicate term.
    pub scope: &'a [String],
    /// Only lines of this game, for experiment traces.
    pub game: Option<usize>,
    /// Trailing turns repeated forever.
    pub cycle: usize,
    pub max_stem: usize,
    pub max_cycle: usize,
}

/// Explains an effect on a recorded trace by its strongest certified input cause.
pub fn explain(artifact_path: &Path, trace_path: &Path, args: &ExplainArgs) -> Result<serde_json::Value, CliError> {
    let (_, machine) = load_artifact(artifact_path)?;
    let dict = &machine.dict;
    let mut letters = Vec::new();
    for (i, line) in read(trace_path)?.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |e: serde_json::Error| CliError::Parse(format!("{}:{}: {e}", trace_path.display(), i + 1));
        let value: serde_json::Value = serde_json::from_str(line).map_err(bad)?;
        if args.game.is_some_and(|g| value.get("game").and_then(|v| v.as_u64()) != Some(g as u64)) {
            continue;
        }
        let letter = value.get("letter").and_then(|v| v.as_u64());
        let letter = letter.ok_or_else(|| CliError::Parse(format!("{}:{}: missing `letter`", trace_path.display(), i + 1)))?;
        letters.push(letter & dict.input_mask());
    }
    if letters.is_empty() {
        return Err(CliError::Parse(format!("{}: no turns to explain", trace_path.display())));
    }
    let cycle = args.cycle.clamp(1, letters.len());
    let trace = Lasso::new(letters[..letters.len() - cycle].to_vec(), letters[letters.len() - cycle..].to_vec());

    let expr = parse_formula(args.effect).map_err(|e| CliError::Parse(format!("effect: {e}")))?;
    let mut unknown = None;
    let effect: LtlFormula = desugar_expr(&expr).map_atoms(&mut |a: &TslAtom| {
        dict.index_of_term(a).unwrap_or_else(|| {
            unknown.get_or_insert_with(|| a.to_string());
            0
        })
    });
    if let Some(a) = unknown {
        return Err(CliError::Parse(format!("effect mentions `{a}`, which the artifact does not use")));
    }
    let scope: Vec<usize> = if args.scope.is_empty() {
        dict.inputs().collect()
    } else {
        args.scope
            .iter()
            .map(|s| {
                dict.inputs()
                    .find(|&i| dict.name(i) == s || dict.prop(i).term.to_string() == *s)
                    .ok_or_else(|| CliError::Parse(format!("`{s}` is not an input proposition of the artifact")))
            })
            .collect::<Result<_, _>>()?
    };
    let bounds = Deviations { stem: args.max_stem, cycle: args.max_cycle, scope: Some(scope.iter().fold(0, |a, &p| a | 1 << p)) };
    let found = synthesize_cause(&machine, &trace, &effect, &templates(&scope), bounds).map_err(|e| CliError::Analysis(e.to_string()))?;

    let term = |f: &LtlFormula| f.map_atoms(&mut |&i| dict.prop(i).term.clone()).to_string();
    let word = |l: &Lasso<Valuation>| {
        json!({
            "stem": l.stem.iter().map(|&v| dict.describe(v)).collect::<Vec<_>>(),
            "loop": l.cycle.iter().map(|&v| dict.describe(v)).collect::<Vec<_>>(),
        })
    };
    Ok(json!({
        "effect": term(&effect),
        "trace": word(&trace),
        "scope": scope.iter().map(|&i| dict.prop(i).term.to_string()).collect::<Vec<_>>(),
        "cause": term(&found.cause),
        "cause_props": Named(&found.cause, dict).to_string(),
        "holds_on_trace": found.verdict.holds_on_trace,
        "counterfactual_valid": found.verdict.counterfactual_valid,
        "certified": found.certified.iter().map(term).collect::<Vec<_>>(),
        "note": found.note,
        "input_independent": found.cause == Formula::True,
    }))
}
