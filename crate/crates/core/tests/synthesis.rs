use proptest::prelude::*;
use tslagent_core::abstraction::{abstract_to_ltl, LtlFormula, LtlSpec, Valuation};
use tslagent_core::corpus;
use tslagent_core::formula::{Formula, Lasso};
use tslagent_core::frontend::compile;
use tslagent_core::mealy::{MealyMachine, Transition};
use tslagent_core::synthesis::verify::verify_formula;
use tslagent_core::synthesis::{synthesize, verify_machine, SynthesisResult, DEFAULT_MAX_STATES, DEFAULT_PRODUCT_CAP};

fn ltl(src: &str) -> LtlSpec {
    abstract_to_ltl(&compile(src).unwrap()).unwrap()
}

fn holds(f: &LtlFormula, run: &Lasso<Valuation>) -> bool {
    f.eval_lasso(run, &|&p, &v| v >> p & 1 == 1)
}

fn all_lassos(n_in: usize, stem: usize, cycle: usize) -> Vec<Lasso<Valuation>> {
    fn words(n_in: usize, len: usize) -> Vec<Vec<Valuation>> {
        (0..len).fold(vec![vec![]], |acc, _| {
            acc.into_iter().flat_map(|w| (0..1u64 << n_in).map(move |i| [w.clone(), vec![i]].concat())).collect()
        })
    }
    let mut out = Vec::new();
    for s in 0..=stem {
        for c in 1..=cycle {
            for a in words(n_in, s) {
                for b in words(n_in, c) {
                    out.push(Lasso::new(a.clone(), b));
                }
            }
        }
    }
    out
}

#[test]
fn single_update_needs_one_state() {
    let spec = ltl("always guarantee { [o <- f()]; }");
    let SynthesisResult::Realizable { machine, states } = synthesize(&spec, 4).unwrap() else { panic!("unrealizable") };
    assert_eq!(states, 1);
    assert!(verify_machine(&machine, &spec).unwrap().passed);
}

#[test]
fn contradiction_is_definitively_unrealizable() {
    let spec = ltl(corpus::CONTRADICTION);
    assert_eq!(synthesize(&spec, 3).unwrap(), SynthesisResult::Unrealizable { bound: 3, definitive: true });
}

#[test]
fn task1_is_small_and_verified() {
    let spec = ltl(&corpus::task(1).unwrap());
    let SynthesisResult::Realizable { machine, states } = synthesize(&spec, DEFAULT_MAX_STATES).unwrap() else { panic!("unrealizable") };
    assert!(states <= 10, "{states} states");
    assert_eq!(states, machine.num_states());
    assert!(machine.is_well_formed());
    let report = verify_machine(&machine, &spec).unwrap();
    assert!(report.passed);
    assert!(report.counterexample.is_none());
    // Independent oracle: every short input lasso yields a run satisfying the formula.
    let f = spec.formula();
    for w in all_lassos(spec.dict.num_inputs(), 1, 2) {
        assert!(holds(&f, &machine.run_lasso(&w)), "violated on {w:?}");
    }
}

#[test]
fn fig2_machine_is_verified() {
    let spec = ltl(corpus::FIG2);
    let r = synthesize(&spec, 8).unwrap();
    let m = r.machine().expect("realizable");
    assert!(verify_machine(m, &spec).unwrap().passed);
}

#[test]
fn always_cave_machine_is_refuted() {
    let spec = ltl(&corpus::task(1).unwrap());
    let cave = spec.dict.index_of_name("u_storyPassage_toCave_s").unwrap();
    let table = vec![vec![Transition { output: 1 << cave, next: 0 }; 1 << spec.dict.num_inputs()]];
    let m = MealyMachine::new(&spec, table);
    let report = verify_machine(&m, &spec).unwrap();
    assert!(!report.passed);
    let cex = report.counterexample.expect("counterexample");
    let f = spec.formula();
    assert!(!holds(&f, &cex.run));
    assert!(!holds(&f, &m.run_lasso(&cex.inputs)));
}

#[test]
fn malformed_machine_is_rejected() {
    let spec = ltl(&corpus::task(1).unwrap());
    let m = MealyMachine::new(&spec, vec![vec![Transition { output: 0, next: 0 }; 1 << spec.dict.num_inputs()]]);
    assert!(verify_machine(&m, &spec).is_err());
}

#[test]
fn synthesis_is_deterministic() {
    let spec = ltl(&corpus::task(2).unwrap());
    let a = synthesize(&spec, DEFAULT_MAX_STATES).unwrap();
    let b = synthesize(&spec, DEFAULT_MAX_STATES).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tight_bound_is_not_definitive() {
    // Alternation needs two states; one is not enough, but that proves nothing.
    let spec = ltl("always guarantee { [o <- f()] <-> X [o <- g()]; [o <- g()] <-> X [o <- f()]; }");
    assert_eq!(synthesize(&spec, 1).unwrap(), SynthesisResult::Unrealizable { bound: 1, definitive: false });
    assert_eq!(synthesize(&spec, 2).unwrap().machine().map(|m| m.num_states()), Some(2));
}

const SMALL: &str = "always assume { p(x) -> X q(x); } always guarantee { [o <- f(x)] -> F [o <- g(x)]; }";

fn formula(depth: u32) -> BoxedStrategy<LtlFormula> {
    let leaf = prop_oneof![Just(Formula::True), (0usize..4).prop_map(Formula::Atom)];
    leaf.prop_recursive(depth, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            inner.clone().prop_map(Formula::next),
            inner.clone().prop_map(Formula::globally),
            inner.clone().prop_map(Formula::finally),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::until(a, b)),
        ]
    })
    .boxed()
}

fn table() -> impl Strategy<Value = Vec<Vec<(bool, usize)>>> {
    (1usize..=3).prop_flat_map(|k| prop::collection::vec(prop::collection::vec((any::<bool>(), 0..k), 4), k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn verifier_agrees_with_lasso_evaluation(f in formula(3), raw in table()) {
        let spec = ltl(SMALL);
        let (f_prop, g_prop) = (spec.groups[0].props[0], spec.groups[0].props[1]);
        let t = raw.iter().map(|row| row.iter().map(|&(o, next)| Transition { output: 1 << if o { g_prop } else { f_prop }, next }).collect()).collect();
        let m = MealyMachine::new(&spec, t);
        let report = verify_formula(&m, &f, DEFAULT_PRODUCT_CAP).unwrap();
        if let Some(cex) = &report.counterexample {
            prop_assert!(!report.passed);
            prop_assert!(!holds(&f, &cex.run), "counterexample satisfies {}", f);
            prop_assert!(!holds(&f, &m.run_lasso(&cex.inputs)));
        } else {
            prop_assert!(report.passed);
            for w in all_lassos(2, 2, 2) {
                prop_assert!(holds(&f, &m.run_lasso(&w)), "{} fails on {:?}", f, w);
            }
        }
    }
}
