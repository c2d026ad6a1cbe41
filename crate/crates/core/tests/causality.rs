use tslagent_core::abstraction::{abstract_to_ltl, LtlFormula, LtlSpec, Valuation};
use tslagent_core::causality::{check_cause, entails, synthesize_cause, templates, CausalityError, Deviations};
use tslagent_core::corpus;
use tslagent_core::formula::{Formula, Lasso};
use tslagent_core::frontend::compile;
use tslagent_core::mealy::{MealyMachine, Transition};
use tslagent_core::synthesis::{synthesize, DEFAULT_MAX_STATES};

fn task1() -> (LtlSpec, MealyMachine) {
    let spec = abstract_to_ltl(&compile(&corpus::task(1).unwrap()).unwrap()).unwrap();
    let m = synthesize(&spec, DEFAULT_MAX_STATES).unwrap().machine().unwrap().clone();
    (spec, m)
}

fn p(spec: &LtlSpec, name: &str) -> usize {
    spec.dict.index_of_name(name).unwrap()
}

fn never(prop: usize) -> LtlFormula {
    Formula::globally(Formula::not(Formula::Atom(prop)))
}

/// The player has seen the town but never the market or the cave.
fn fig3_trace(spec: &LtlSpec) -> Lasso<Valuation> {
    Lasso::new(vec![], vec![1 << p(spec, "p_inTown_s")])
}

/// The props the Fig. 3 trace talks about; the town stays as observed.
fn scope(spec: &LtlSpec) -> Deviations {
    Deviations::with_scope([p(spec, "p_inCave_s"), p(spec, "p_inMarket_s")])
}

fn scope_props(spec: &LtlSpec) -> Vec<usize> {
    vec![p(spec, "p_inCave_s"), p(spec, "p_inMarket_s")]
}

fn holds(f: &LtlFormula, w: &Lasso<Valuation>) -> bool {
    f.eval_lasso(w, &|&p, &v| v >> p & 1 == 1)
}

fn combine(trace: &Lasso<Valuation>, dev: &Lasso<Valuation>, free: Valuation) -> Lasso<Valuation> {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    let stem = trace.stem.len().max(dev.stem.len());
    let cycle = trace.cycle.len() * dev.cycle.len() / gcd(trace.cycle.len(), dev.cycle.len());
    let at = |i: usize| (trace.at(i) & !free) | (dev.at(i) & free);
    Lasso::new((0..stem).map(at).collect(), (stem..stem + cycle).map(at).collect())
}

/// Brute force over deviations with stem <= 4 and loop <= 3.
fn brute_force_valid(m: &MealyMachine, trace: &Lasso<Valuation>, effect: &LtlFormula, cause: &LtlFormula, free: Valuation) -> bool {
    let bits: Vec<usize> = (0..64).filter(|&b| free >> b & 1 == 1).collect();
    let letters: Vec<Valuation> = (0..1u64 << bits.len()).map(|k| bits.iter().enumerate().fold(0, |a, (j, &b)| a | (k >> j & 1) << b)).collect();
    let words = |len: usize| (0..len).fold(vec![vec![]], |acc: Vec<Vec<Valuation>>, _| acc.into_iter().flat_map(|w| letters.iter().map(move |&l| [w.clone(), vec![l]].concat())).collect::<Vec<_>>());
    for s in 0..=4 {
        for c in 1..=3 {
            for a in words(s) {
                for b in words(c) {
                    let w = combine(trace, &Lasso::new(a.clone(), b), free);
                    if !holds(cause, &w) && holds(effect, &m.run_lasso(&w)) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

#[test]
fn fig3_cause_is_certified() {
    let (spec, m) = task1();
    let trace = fig3_trace(&spec);
    let effect = never(p(&spec, "u_storyPassage_toCave_s"));
    let run = m.run_lasso(&trace);
    assert!(run.positions().all(|&v| v >> p(&spec, "u_storyPassage_toMarket_s") & 1 == 1), "the trace keeps heading to the market");
    let v = check_cause(&m, &trace, &effect, &never(p(&spec, "p_inMarket_s")), scope(&spec)).unwrap();
    assert!(v.holds_on_trace && v.counterfactual_valid && v.witness.is_none());
}

#[test]
fn never_in_cave_is_refuted_by_a_witness() {
    let (spec, m) = task1();
    let trace = fig3_trace(&spec);
    let effect = never(p(&spec, "u_storyPassage_toCave_s"));
    let v = check_cause(&m, &trace, &effect, &never(p(&spec, "p_inCave_s")), scope(&spec)).unwrap();
    assert!(v.holds_on_trace && !v.counterfactual_valid);
    let w = v.witness.unwrap();
    assert!(w.positions().any(|&x| x >> p(&spec, "p_inCave_s") & 1 == 1));
    assert!(w.positions().all(|&x| x >> p(&spec, "p_inMarket_s") & 1 == 0));
    assert!(holds(&effect, &m.run_lasso(&w)));
}

#[test]
fn true_is_vacuously_certified() {
    let (spec, m) = task1();
    let effect = never(p(&spec, "u_storyPassage_toCave_s"));
    let v = check_cause(&m, &fig3_trace(&spec), &effect, &Formula::True, scope(&spec)).unwrap();
    assert!(v.certified());
}

#[test]
fn search_returns_never_market() {
    let (spec, m) = task1();
    let effect = never(p(&spec, "u_storyPassage_toCave_s"));
    let inputs = scope_props(&spec);
    let found = synthesize_cause(&m, &fig3_trace(&spec), &effect, &templates(&inputs), scope(&spec)).unwrap();
    assert_eq!(found.cause, never(p(&spec, "p_inMarket_s")));
    assert!(found.note.is_none());
}

#[test]
fn checker_agrees_with_brute_force_and_is_monotone() {
    let (spec, m) = task1();
    let trace = fig3_trace(&spec);
    let effect = never(p(&spec, "u_storyPassage_toCave_s"));
    let inputs = scope_props(&spec);
    let cands = templates(&inputs);
    let mut verdicts = Vec::new();
    for c in &cands {
        let v = check_cause(&m, &trace, &effect, c, scope(&spec)).unwrap();
        assert_eq!(v.counterfactual_valid, brute_force_valid(&m, &trace, &effect, c, scope(&spec).scope.unwrap()), "disagreement on {c}");
        verdicts.push(v);
    }
    for (i, a) in cands.iter().enumerate() {
        for (j, b) in cands.iter().enumerate() {
            if verdicts[i].certified() && verdicts[j].holds_on_trace && entails(a, b).unwrap() {
                assert!(verdicts[j].certified(), "{a} certified and implies {b}, which is not");
            }
        }
    }
}

#[test]
fn constant_output_has_input_independent_effect() {
    let (spec, _) = task1();
    let market = p(&spec, "u_storyPassage_toMarket_s");
    let m = MealyMachine::new(&spec, vec![vec![Transition { output: 1 << market, next: 0 }; 1 << spec.dict.num_inputs()]]);
    let effect = Formula::globally(Formula::Atom(market));
    let inputs: Vec<usize> = spec.dict.inputs().collect();
    let found = synthesize_cause(&m, &fig3_trace(&spec), &effect, &templates(&inputs), Deviations::default()).unwrap();
    assert_eq!(found.cause, Formula::True);
    assert!(found.note.unwrap().contains("input-independent"));
    let trivial = synthesize_cause(&m, &fig3_trace(&spec), &Formula::True, &templates(&inputs), Deviations::default()).unwrap();
    assert_eq!(trivial.cause, Formula::True);
}

#[test]
fn preconditions_are_checked() {
    let (spec, m) = task1();
    let cave = p(&spec, "u_storyPassage_toCave_s");
    let trace = fig3_trace(&spec);
    let wrong = Formula::finally(Formula::Atom(cave));
    assert_eq!(check_cause(&m, &trace, &wrong, &Formula::True, scope(&spec)), Err(CausalityError::EffectNotOnTrace));
    let tight = Deviations { stem: 0, cycle: 0, scope: None };
    assert!(matches!(check_cause(&m, &trace, &never(cave), &Formula::True, tight), Err(CausalityError::BoundTooSmall { .. })));
    let over_inputs = never(p(&spec, "p_inCave_s"));
    assert_eq!(check_cause(&m, &trace, &over_inputs, &Formula::True, scope(&spec)), Err(CausalityError::EffectOverInputs));
}
