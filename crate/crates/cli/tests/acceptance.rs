//! Acceptance suite: one PASS/FAIL line per primary criterion.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tslagent_core::abstraction::{abstract_to_ltl, LtlFormula, LtlSpec, Valuation};
use tslagent_core::causality::{check_cause, synthesize_cause, templates, Deviations};
use tslagent_core::codegen::Artifact;
use tslagent_core::corpus;
use tslagent_core::formula::{Formula, Lasso};
use tslagent_core::frontend::{compile, parse_spec, pretty_spec, SectionKind};
use tslagent_core::mealy::MealyMachine;
use tslagent_core::monitor::{Role, Track, Verdict, ViolationClass};
use tslagent_core::nba::ltl_to_nba;
use tslagent_core::synthesis::{synthesize, verify_machine, SynthesisResult};
use tslagent_runtime::experiment::{run_experiment, AdherenceReport, AgentKind, ExperimentConfig};

const PARSE_BUDGET: Duration = Duration::from_secs(1);
const MAX_STATES: usize = 32;
const SYNTH_BUDGET: Duration = Duration::from_secs(300);
/// Machine sizes reported for Tasks 1 to 4 in the original evaluation.
const REFERENCE_STATES: [usize; 4] = [8, 9, 16, 17];
const ORACLE_FORMULAS: usize = 300;
const ORACLE_LASSOS: usize = 100;
const ORACLE_MAX_NODES: usize = 8;
const ORACLE_PROPS: usize = 3;
const GAMES: usize = 75;
const TURNS: usize = 20;
const FAULT_RATES: [f64; 3] = [0.0, 0.1, 0.5];
const MOCK_RATE: f64 = 0.05;
const MOCK_BAND_POINTS: f64 = 5.0;
const EXPERIMENT_SEED: u64 = 1;
const MOCK_ARITH_RATE: f64 = 0.1;
const CAUSALITY_BUDGET: Duration = Duration::from_secs(30);
const CODEGEN_STREAMS: usize = 1000;
const CODEGEN_STREAM_LEN: usize = 30;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ltl(src: &str) -> LtlSpec {
    abstract_to_ltl(&compile(src).expect("compiles")).expect("abstracts")
}

fn machine(spec: &LtlSpec) -> MealyMachine {
    synthesize(spec, MAX_STATES).expect("synthesis runs").machine().expect("realizable").clone()
}

fn holds(f: &LtlFormula, w: &Lasso<Valuation>) -> bool {
    f.eval_lasso(w, &|&p, &v| v >> p & 1 == 1)
}

fn parser_corpus() -> Check {
    use SectionKind::*;
    let start = Instant::now();
    let expected: [(&str, &str, Vec<(SectionKind, usize)>); 4] = [
        ("adventure", corpus::ADVENTURE, vec![(InitiallyAssume, 3), (AlwaysAssume, 3), (Guarantee, 2), (AlwaysGuarantee, 3)]),
        ("forest", corpus::FOREST, vec![(InitiallyGuarantee, 1)]),
        ("choices", corpus::CHOICES, vec![(InitiallyAssume, 4), (AlwaysAssume, 4), (Guarantee, 3), (AlwaysGuarantee, 4)]),
        ("fig2", corpus::FIG2, vec![(InitiallyAssume, 2), (AlwaysAssume, 2), (Guarantee, 1), (AlwaysGuarantee, 1)]),
    ];
    for (name, src, sizes) in &expected {
        let ast = parse_spec(src).map_err(|e| format!("{name}: {e}"))?;
        ensure(ast.section_sizes() == *sizes, || format!("{name}: sections {:?}", ast.section_sizes()))?;
        let again = parse_spec(&pretty_spec(&ast)).map_err(|e| format!("{name} reprint: {e}"))?;
        ensure(again == ast, || format!("{name}: pretty-print round trip differs"))?;
    }
    for n in 1..=4 {
        compile(&corpus::task(n).unwrap()).map_err(|e| format!("task{n}: {e}"))?;
    }
    compile(corpus::FIG2).map_err(|e| format!("fig2: {e}"))?;
    let task1 = compile(corpus::ADVENTURE).unwrap();
    ensure(task1.guarantees.len() == 5, || format!("task1 guarantee conjuncts {}", task1.guarantees.len()))?;
    let sig = &task1.signals;
    let unary = |names: &[&str]| names.iter().map(|n| (n.to_string(), 1)).collect::<BTreeMap<_, _>>();
    ensure(sig.outputs.contains("storyPassage") && sig.cells.contains("s") && sig.inputs.is_empty(), || format!("task1 signals {sig:?}"))?;
    ensure(sig.predicates == unary(&["inCave", "inMarket", "inTown"]) && sig.functions == unary(&["toCave", "toMarket", "toTown"]), || format!("task1 symbols {sig:?}"))?;
    let task3 = compile(corpus::CHOICES).unwrap();
    ensure(task3.signals.cells.contains("safeCount"), || "task3: safeCount is not a cell".into())?;
    let elapsed = start.elapsed();
    ensure(elapsed < PARSE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("4 corpus files, section counts and round trips match, {:.0} ms", elapsed.as_secs_f64() * 1e3))
}

fn synthesis_soundness() -> Check {
    let mut parts = Vec::new();
    for n in 1..=4 {
        let spec = ltl(&corpus::task(n).unwrap());
        let start = Instant::now();
        let SynthesisResult::Realizable { machine, states } = synthesize(&spec, MAX_STATES).map_err(|e| format!("task{n}: {e}"))? else {
            return Err(format!("task{n}: unrealizable within {MAX_STATES} states"));
        };
        let elapsed = start.elapsed();
        let report = verify_machine(&machine, &spec).map_err(|e| format!("task{n}: {e}"))?;
        ensure(report.passed && report.counterexample.is_none(), || format!("task{n}: verifier found a counterexample"))?;
        ensure(states <= MAX_STATES, || format!("task{n}: {states} states"))?;
        ensure(elapsed < SYNTH_BUDGET, || format!("task{n}: took {elapsed:?}"))?;
        parts.push(format!("task{n} {states} states (reference {}) in {:.1} s, product {}", REFERENCE_STATES[n - 1], elapsed.as_secs_f64(), report.product_states));
    }
    Ok(parts.join("; "))
}

fn random_formula(rng: &mut ChaCha8Rng, depth: u32) -> LtlFormula {
    if depth == 0 || rng.random_bool(0.3) {
        return match rng.random_range(0..5) {
            0 => Formula::True,
            1 => Formula::False,
            _ => Formula::Atom(rng.random_range(0..ORACLE_PROPS)),
        };
    }
    let op = rng.random_range(0..8);
    let mut sub = || random_formula(rng, depth - 1);
    match op {
        0 => Formula::not(sub()),
        1 => Formula::next(sub()),
        2 => Formula::globally(sub()),
        3 => Formula::finally(sub()),
        4 => Formula::and(sub(), sub()),
        5 => Formula::or(sub(), sub()),
        6 => Formula::until(sub(), sub()),
        _ => Formula::release(sub(), sub()),
    }
}

fn random_lasso(rng: &mut ChaCha8Rng) -> Lasso<Valuation> {
    let letters = 1u64 << ORACLE_PROPS;
    let stem = (0..rng.random_range(0..4)).map(|_| rng.random_range(0..letters)).collect();
    let cycle = (0..rng.random_range(1..4)).map(|_| rng.random_range(0..letters)).collect();
    Lasso::new(stem, cycle)
}

/// No until once negations are pushed to the atoms.
fn syntactic_safety(f: &LtlFormula) -> bool {
    match f {
        Formula::Until(..) => false,
        Formula::Not(a) | Formula::Next(a) => syntactic_safety(a),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Release(a, b) => syntactic_safety(a) && syntactic_safety(b),
        _ => true,
    }
}

fn oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut formulas, mut safety, mut decided) = (0, 0, 0);
    while formulas < ORACLE_FORMULAS {
        let f = random_formula(&mut rng, 4);
        if f.size() > ORACLE_MAX_NODES {
            continue;
        }
        formulas += 1;
        let nba = ltl_to_nba(&f).map_err(|e| format!("{f}: {e}"))?;
        let track = Track::new("f", Role::Guarantee, ViolationClass::Procedural, f.clone()).map_err(|e| format!("{f}: {e}"))?;
        let is_safety = syntactic_safety(&f.nnf());
        safety += is_safety as usize;
        for _ in 0..ORACLE_LASSOS {
            let w = random_lasso(&mut rng);
            let direct = holds(&f, &w);
            ensure(nba.accepts(&w) == direct, || format!("automaton disagrees on {f} over {w:?}"))?;
            let verdict = track.verdict_on_lasso(&w);
            decided += (verdict != Verdict::Pending) as usize;
            let agrees = match verdict {
                Verdict::Violated { .. } => !direct,
                Verdict::Satisfied { .. } => direct,
                Verdict::Pending => !is_safety || direct,
            };
            ensure(agrees, || format!("monitor says {verdict:?} on {f} over {w:?}, direct evaluation {direct}"))?;
        }
    }
    Ok(format!("{formulas} formulas x {ORACLE_LASSOS} lassos ({safety} syntactically safe), {decided} decided verdicts, no disagreement"))
}

fn experiment(task: &str, agent: AgentKind, p_halluc: f64, p_arith: f64) -> Result<AdherenceReport, String> {
    let config = ExperimentConfig {
        task: None,
        spec: task.into(),
        bindings: format!("{task}.scripted"),
        artifact: None,
        agent,
        games: GAMES,
        turns: TURNS,
        seed: EXPERIMENT_SEED,
        p_halluc,
        p_arith,
    };
    let prepared = config.prepare(Path::new(".")).map_err(|e| e.to_string())?;
    Ok(run_experiment(&prepared).map_err(|e| e.to_string())?.report)
}

fn procedural_adherence() -> Check {
    let mut parts = Vec::new();
    for p in FAULT_RATES {
        let r = experiment("task1", AgentKind::Automaton, p, 0.0)?;
        let procedural = r.outcomes.iter().flat_map(|o| &o.violations).filter(|v| v.class == ViolationClass::Procedural).count();
        ensure(procedural == 0, || format!("task1 p_halluc {p}: {procedural} procedural violations"))?;
        if p == 0.0 {
            ensure(r.adhering == r.games, || format!("task1 p_halluc 0: {}/{} adhering", r.adhering, r.games))?;
        }
        parts.push(format!("p={p}: {:.2}% adherence, 0 procedural", r.adherence_percent()));
    }
    // Specs with update-only conjuncts, where the property is not vacuous.
    for task in ["task2", "fig2"] {
        let spec = ltl(&corpus::named(task).unwrap());
        let update_only = spec.assumptions.iter().chain(&spec.guarantees).filter(|c| tslagent_core::monitor::classify(&spec, &c.formula) == ViolationClass::Procedural).count();
        for p in FAULT_RATES {
            let r = experiment(task, AgentKind::Automaton, p, 0.0)?;
            ensure(r.procedural_games == 0, || format!("{task} p_halluc {p}: {} procedural games", r.procedural_games))?;
        }
        parts.push(format!("{task} ({update_only} update-only conjuncts): 0 procedural at every rate"));
    }
    Ok(format!("task1 {}", parts.join("; ")))
}

fn mock_directionality() -> Check {
    let mock = experiment("task1", AgentKind::PureLlmMock, MOCK_RATE, 0.0)?;
    let auto = experiment("task1", AgentKind::Automaton, MOCK_RATE, 0.0)?;
    let expected = 100.0 * (1.0 - MOCK_RATE).powi(TURNS as i32);
    let (m, a) = (mock.adherence_percent(), auto.adherence_percent());
    ensure(a > m, || format!("automaton {a:.2}% does not exceed mock {m:.2}%"))?;
    ensure((m - expected).abs() <= MOCK_BAND_POINTS, || format!("mock {m:.2}% vs analytic {expected:.2}% (band {MOCK_BAND_POINTS})"))?;
    Ok(format!("automaton {a:.2}% > mock {m:.2}%; analytic {expected:.2}% +/- {MOCK_BAND_POINTS} (seed {EXPERIMENT_SEED})"))
}

fn arithmetic_fidelity() -> Check {
    let mut parts = Vec::new();
    for p in FAULT_RATES {
        let r = experiment("task3", AgentKind::Automaton, p, MOCK_ARITH_RATE)?;
        ensure(r.arithmetic_games == 0, || format!("automaton p_halluc {p}: {} arithmetic games", r.arithmetic_games))?;
        parts.push(format!("automaton p={p}: 0"));
    }
    let mock = experiment("task3", AgentKind::PureLlmMock, 0.0, MOCK_ARITH_RATE)?;
    ensure(mock.arithmetic_games > 0, || "mock produced no arithmetic errors".into())?;
    parts.push(format!("mock p_arith={MOCK_ARITH_RATE}: {}/{} games", mock.arithmetic_games, mock.games));
    Ok(parts.join("; "))
}

fn determinism() -> Check {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut names = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(&dir).map_err(|e| format!("{}: {e}", dir.display()))?.filter_map(Result::ok).map(|e| e.path()).collect();
    entries.sort();
    for path in entries.iter().filter(|p| p.extension().is_some_and(|e| e == "json")) {
        let config = ExperimentConfig::from_json(&std::fs::read_to_string(path).unwrap()).map_err(|e| format!("{}: {e}", path.display()))?;
        let prepared = config.prepare(&dir).map_err(|e| e.to_string())?;
        let a = run_experiment(&prepared).map_err(|e| e.to_string())?;
        let b = run_experiment(&prepared).map_err(|e| e.to_string())?;
        let name = path.file_stem().unwrap().to_string_lossy().to_string();
        ensure(a.traces == b.traces, || format!("{name}: traces differ"))?;
        ensure(a.report.to_json() == b.report.to_json(), || format!("{name}: reports differ"))?;
        names.push(name);
    }
    ensure(!names.is_empty(), || "no configs found".into())?;
    Ok(format!("{} configs byte-identical across two runs: {}", names.len(), names.join(", ")))
}

/// Overlays a deviation on the trace: free props from `dev`, the rest from `trace`.
fn combine(trace: &Lasso<Valuation>, dev: &Lasso<Valuation>, free: Valuation) -> Lasso<Valuation> {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let stem = trace.stem.len().max(dev.stem.len());
    let cycle = trace.cycle.len() * dev.cycle.len() / gcd(trace.cycle.len(), dev.cycle.len());
    let at = |i: usize| (trace.at(i) & !free) | (dev.at(i) & free);
    Lasso::new((0..stem).map(at).collect(), (stem..stem + cycle).map(at).collect())
}

/// Certified by exhaustion over deviations with stem <= 4 and loop <= 3.
fn brute_force(m: &MealyMachine, trace: &Lasso<Valuation>, effect: &LtlFormula, cause: &LtlFormula, free: Valuation) -> bool {
    if !holds(cause, trace) {
        return false;
    }
    let bits: Vec<usize> = (0..64).filter(|&b| free >> b & 1 == 1).collect();
    let letters: Vec<Valuation> = (0..1u64 << bits.len()).map(|k| bits.iter().enumerate().fold(0, |a, (j, &b)| a | (k >> j & 1) << b)).collect();
    let words = |len: usize| (0..len).fold(vec![vec![]], |acc: Vec<Vec<Valuation>>, _| acc.into_iter().flat_map(|w| letters.iter().map(move |&l| [w.clone(), vec![l]].concat())).collect());
    let stems: Vec<Vec<Valuation>> = (0..=4).flat_map(words).collect();
    let loops: Vec<Vec<Valuation>> = (1..=3).flat_map(words).collect();
    for s in &stems {
        for c in &loops {
            let w = combine(trace, &Lasso::new(s.clone(), c.clone()), free);
            if !holds(cause, &w) && holds(effect, &m.run_lasso(&w)) {
                return false;
            }
        }
    }
    true
}

fn causality() -> Check {
    let start = Instant::now();
    let spec = ltl(corpus::ADVENTURE);
    let m = machine(&spec);
    let p = |name: &str| spec.dict.index_of_name(name).unwrap();
    let never = |i: usize| Formula::globally(Formula::not(Formula::Atom(i)));
    // The town has been seen; the market and the cave never are.
    let trace = Lasso::new(vec![], vec![1 << p("p_inTown_s")]);
    let scope = [p("p_inCave_s"), p("p_inMarket_s")];
    let bounds = Deviations::with_scope(scope);
    let effect = never(p("u_storyPassage_toCave_s"));
    let cause = never(p("p_inMarket_s"));
    let verdict = check_cause(&m, &trace, &effect, &cause, bounds).map_err(|e| e.to_string())?;
    ensure(verdict.certified(), || format!("G !inMarket not certified: {verdict:?}"))?;
    let candidates = templates(&scope);
    let found = synthesize_cause(&m, &trace, &effect, &candidates, bounds).map_err(|e| e.to_string())?;
    ensure(found.cause == cause, || format!("search returned {}", found.cause))?;
    let free = scope.iter().fold(0, |a, &i| a | 1 << i);
    for c in &candidates {
        let exact = check_cause(&m, &trace, &effect, c, bounds).map_err(|e| e.to_string())?.certified();
        ensure(exact == brute_force(&m, &trace, &effect, c, free), || format!("brute force disagrees on {c}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < CAUSALITY_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("G !inMarket certified and selected; brute force agrees on {} templates; {:.1} s", candidates.len(), elapsed.as_secs_f64()))
}

fn tslagent(args: &[&str]) -> (i32, String, String) {
    let argv = std::iter::once("tslagent").chain(args.iter().copied()).map(Into::into);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = tslagent_cli::main_with(argv, &mut &b""[..], &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn unrealizability() -> Check {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let out = dir.path().join("out.json").to_string_lossy().into_owned();
    let (code, _, err) = tslagent(&["synth", "contradiction", "-o", &out]);
    ensure(code == 3, || format!("contradiction exited {code}: {err}"))?;
    ensure(err.contains("no model"), || format!("no definitive wording: {err}"))?;
    let (code, _, bounded) = tslagent(&["synth", "task3", "-o", &out, "--max-states", "1"]);
    ensure(code == 3, || format!("bounded search exited {code}: {bounded}"))?;
    ensure(bounded.contains("within the bound") && !bounded.contains("no model"), || format!("no bound wording: {bounded}"))?;
    Ok(format!("exit 3 with `{}`; bound-exhausted run says `{}`", err.lines().last().unwrap_or("").trim_start_matches("error: "), bounded.lines().last().unwrap_or("").trim_start_matches("error: ")))
}

fn codegen() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    for n in 1..=4 {
        let m = machine(&ltl(&corpus::task(n).unwrap()));
        let text = Artifact::from_machine(&m).to_json();
        let back = Artifact::from_json(&text).map_err(|e| format!("task{n}: {e}"))?;
        ensure(back.to_json() == text, || format!("task{n}: JSON round trip differs"))?;
        let reloaded = back.to_machine().map_err(|e| format!("task{n}: {e}"))?;
        let inputs: Vec<usize> = m.dict.inputs().collect();
        for _ in 0..CODEGEN_STREAMS {
            let (mut a, mut b) = (0, 0);
            for _ in 0..CODEGEN_STREAM_LEN {
                let v = inputs.iter().fold(0, |acc, &i| acc | (rng.random_bool(0.5) as Valuation) << i);
                let ta = m.step(a, v);
                let term = |prop: &str| m.dict.index_of_name(prop).is_some_and(|i| v >> i & 1 == 1);
                let tb = back.step(b, &|prop| term(prop)).ok_or_else(|| format!("task{n}: artifact has no transition"))?;
                let chosen: BTreeMap<String, String> = m.chosen(ta.output).into_iter().map(|i| {
                    let o = back.outputs.iter().find(|o| o.name == m.dict.name(i)).expect("declared output");
                    (o.signal.clone(), o.term.clone())
                }).collect();
                ensure(chosen == tb.updates && ta.next == tb.next, || format!("task{n}: artifact and machine diverge"))?;
                ensure(reloaded.step(a, v) == ta, || format!("task{n}: reloaded machine diverges"))?;
                (a, b) = (ta.next, tb.next);
            }
        }
    }
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let path = dir.path().join("task1.json").to_string_lossy().into_owned();
    let (code, _, err) = tslagent(&["synth", "task1", "-o", &path]);
    ensure(code == 0, || err.clone())?;
    let (_, js, _) = tslagent(&["codegen", &path, "--js"]);
    let state0 = js.split("else if (currentState === 1)").next().unwrap_or("");
    ensure(js.starts_with("if (currentState === 0)") && state0.contains("storyPassage = toMarket(s)"), || format!("state-0 branch lacks the market update:\n{js}"))?;
    Ok(format!("tasks 1-4 round trip byte-identically; {CODEGEN_STREAMS} random streams x {CODEGEN_STREAM_LEN} steps agree; task1 --js state 0 assigns storyPassage = toMarket(s)"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("parser corpus", parser_corpus),
        ("synthesis soundness", synthesis_soundness),
        ("automaton/monitor oracle equivalence", oracle_equivalence),
        ("procedural adherence by construction", procedural_adherence),
        ("mock comparison directionality", mock_directionality),
        ("arithmetic fidelity", arithmetic_fidelity),
        ("determinism", determinism),
        ("causality", causality),
        ("unrealizability", unrealizability),
        ("codegen", codegen),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS  {name} [{secs:.1} s]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} [{secs:.1} s]: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
