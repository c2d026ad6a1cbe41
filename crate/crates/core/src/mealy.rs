use crate::abstraction::{LtlSpec, OutputGroup, PropDictionary, Valuation};
use crate::formula::Lasso;
use crate::frontend::SignalTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transition {
    /// Output bits only.
    pub output: Valuation,
    pub next: usize,
}

/// Deterministic finite transducer with initial state 0.
///
/// `table[state][input]` is indexed by the input valuation restricted to the
/// input propositions, which occupy the low bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MealyMachine {
    pub dict: PropDictionary,
    pub groups: Vec<OutputGroup>,
    pub signals: SignalTable,
    pub table: Vec<Vec<Transition>>,
}

impl MealyMachine {
    pub fn new(spec: &LtlSpec, table: Vec<Vec<Transition>>) -> Self {
        MealyMachine { dict: spec.dict.clone(), groups: spec.groups.clone(), signals: spec.signals.clone(), table }
    }

    pub fn num_states(&self) -> usize {
        self.table.len()
    }

    pub fn num_inputs(&self) -> usize {
        self.dict.num_inputs()
    }

    pub fn num_input_valuations(&self) -> usize {
        1 << self.num_inputs()
    }

    pub fn step(&self, state: usize, input: Valuation) -> Transition {
        self.table[state][(input & self.dict.input_mask()) as usize]
    }

    /// Runs the machine from state 0 and returns the full valuations (inputs and outputs).
    pub fn run(&self, inputs: &[Valuation]) -> Vec<Valuation> {
        let mut state = 0;
        inputs
            .iter()
            .map(|&i| {
                let t = self.step(state, i);
                state = t.next;
                (i & self.dict.input_mask()) | t.output
            })
            .collect()
    }

    /// Runs the machine on an ultimately periodic input word. The loop of the
    /// result spans a whole number of input loops.
    pub fn run_lasso(&self, inputs: &Lasso<Valuation>) -> Lasso<Valuation> {
        let mask = self.dict.input_mask();
        let mut state = 0;
        let mut out = Vec::new();
        let feed = |state: &mut usize, out: &mut Vec<Valuation>, i: Valuation| {
            let t = self.step(*state, i);
            out.push((i & mask) | t.output);
            *state = t.next;
        };
        for &i in &inputs.stem {
            feed(&mut state, &mut out, i);
        }
        let mut starts = Vec::new();
        loop {
            if let Some(k) = starts.iter().position(|&s| s == state) {
                let cycle = out.split_off(inputs.stem.len() + k * inputs.cycle.len());
                return Lasso::new(out, cycle);
            }
            starts.push(state);
            for &i in &inputs.cycle {
                feed(&mut state, &mut out, i);
            }
        }
    }

    /// The chosen alternative of every group for an output valuation.
    pub fn chosen(&self, output: Valuation) -> Vec<usize> {
        self.groups.iter().filter_map(|g| g.props.iter().copied().find(|&p| output >> p & 1 == 1)).collect()
    }

    /// Structural sanity: totality and exclusive outputs.
    pub fn is_well_formed(&self) -> bool {
        let n = self.num_input_valuations();
        !self.table.is_empty()
            && self.table.iter().all(|row| {
                row.len() == n
                    && row.iter().all(|t| {
                        t.next < self.table.len()
                            && t.output & self.dict.input_mask() == 0
                            && self.groups.iter().all(|g| g.props.iter().filter(|&&p| t.output >> p & 1 == 1).count() == 1)
                    })
            })
    }
}
