//! Core temporal formulas over an arbitrary atom type.
//!
//! Only the core operators are represented; `G`, `F`, `W`, `->` and `<->` are
//! expressed through the constructors below.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula<A> {
    True,
    False,
    Atom(A),
    Not(Box<Formula<A>>),
    And(Box<Formula<A>>, Box<Formula<A>>),
    Or(Box<Formula<A>>, Box<Formula<A>>),
    Next(Box<Formula<A>>),
    Until(Box<Formula<A>>, Box<Formula<A>>),
    Release(Box<Formula<A>>, Box<Formula<A>>),
}

impl<A> Formula<A> {
    pub fn atom(a: A) -> Self {
        Formula::Atom(a)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Self) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Self, b: Self) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Self, b: Self) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn next(f: Self) -> Self {
        Formula::Next(Box::new(f))
    }

    pub fn until(a: Self, b: Self) -> Self {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn release(a: Self, b: Self) -> Self {
        Formula::Release(Box::new(a), Box::new(b))
    }

    /// `G f` as `false R f`.
    pub fn globally(f: Self) -> Self {
        Formula::release(Formula::False, f)
    }

    /// `F f` as `true U f`.
    pub fn finally(f: Self) -> Self {
        Formula::until(Formula::True, f)
    }

    pub fn implies(a: Self, b: Self) -> Self {
        Formula::or(Formula::not(a), b)
    }

    /// Left-nested conjunction; `true` when empty.
    pub fn conj(items: impl IntoIterator<Item = Self>) -> Self {
        items.into_iter().reduce(Formula::and).unwrap_or(Formula::True)
    }

    /// Left-nested disjunction; `false` when empty.
    pub fn disj(items: impl IntoIterator<Item = Self>) -> Self {
        items.into_iter().reduce(Formula::or).unwrap_or(Formula::False)
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 1,
            Formula::Not(a) | Formula::Next(a) => 1 + a.size(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, b) | Formula::Release(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn is_temporal(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => false,
            Formula::Next(_) | Formula::Until(..) | Formula::Release(..) => true,
            Formula::Not(a) => a.is_temporal(),
            Formula::And(a, b) | Formula::Or(a, b) => a.is_temporal() || b.is_temporal(),
        }
    }

    pub fn atoms<'a>(&'a self, out: &mut Vec<&'a A>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => out.push(a),
            Formula::Not(a) | Formula::Next(a) => a.atoms(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, b) | Formula::Release(a, b) => {
                a.atoms(out);
                b.atoms(out);
            }
        }
    }

    pub fn any_atom(&self, pred: &dyn Fn(&A) -> bool) -> bool {
        let mut v = Vec::new();
        self.atoms(&mut v);
        v.into_iter().any(pred)
    }

    pub fn map_atoms<B>(&self, f: &mut dyn FnMut(&A) -> B) -> Formula<B> {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(a) => Formula::Atom(f(a)),
            Formula::Not(a) => Formula::not(a.map_atoms(f)),
            Formula::Next(a) => Formula::next(a.map_atoms(f)),
            Formula::And(a, b) => {
                let a = a.map_atoms(f);
                Formula::and(a, b.map_atoms(f))
            }
            Formula::Or(a, b) => {
                let a = a.map_atoms(f);
                Formula::or(a, b.map_atoms(f))
            }
            Formula::Until(a, b) => {
                let a = a.map_atoms(f);
                Formula::until(a, b.map_atoms(f))
            }
            Formula::Release(a, b) => {
                let a = a.map_atoms(f);
                Formula::release(a, b.map_atoms(f))
            }
        }
    }

    /// True when negations occur only directly above atoms.
    pub fn is_nnf(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => true,
            Formula::Not(a) => matches!(**a, Formula::Atom(_)),
            Formula::Next(a) => a.is_nnf(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, b) | Formula::Release(a, b) => a.is_nnf() && b.is_nnf(),
        }
    }
}

impl<A: Clone> Formula<A> {
    pub fn nnf(&self) -> Self {
        self.push(false)
    }

    /// Negation normal form of `!self`.
    pub fn negated_nnf(&self) -> Self {
        self.push(true)
    }

    fn push(&self, neg: bool) -> Self {
        match (self, neg) {
            (Formula::True, false) | (Formula::False, true) => Formula::True,
            (Formula::True, true) | (Formula::False, false) => Formula::False,
            (Formula::Atom(a), false) => Formula::Atom(a.clone()),
            (Formula::Atom(a), true) => Formula::not(Formula::Atom(a.clone())),
            (Formula::Not(a), _) => a.push(!neg),
            (Formula::Next(a), _) => Formula::next(a.push(neg)),
            (Formula::And(a, b), false) | (Formula::Or(a, b), true) => Formula::and(a.push(neg), b.push(neg)),
            (Formula::Or(a, b), false) | (Formula::And(a, b), true) => Formula::or(a.push(neg), b.push(neg)),
            (Formula::Until(a, b), false) | (Formula::Release(a, b), true) => Formula::until(a.push(neg), b.push(neg)),
            (Formula::Release(a, b), false) | (Formula::Until(a, b), true) => Formula::release(a.push(neg), b.push(neg)),
        }
    }

    /// Splits nested conjunctions into their operands.
    pub fn conjuncts(&self) -> Vec<Self> {
        match self {
            Formula::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            other => vec![other.clone()],
        }
    }
}

/// An ultimately periodic word `stem · loop^ω`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Lasso<T> {
    pub stem: Vec<T>,
    #[serde(rename = "loop")]
    pub cycle: Vec<T>,
}

impl<T> Lasso<T> {
    /// Panics when the loop is empty.
    pub fn new(stem: Vec<T>, cycle: Vec<T>) -> Self {
        assert!(!cycle.is_empty(), "lasso loop must be non-empty");
        Lasso { stem, cycle }
    }

    /// Number of distinct positions.
    pub fn len(&self) -> usize {
        self.stem.len() + self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn succ(&self, i: usize) -> usize {
        if i + 1 == self.len() {
            self.stem.len()
        } else {
            i + 1
        }
    }

    /// Letter at position `i` of the unrolled infinite word.
    pub fn at(&self, i: usize) -> &T {
        if i < self.stem.len() {
            &self.stem[i]
        } else {
            &self.cycle[(i - self.stem.len()) % self.cycle.len()]
        }
    }

    pub fn positions(&self) -> impl Iterator<Item = &T> {
        self.stem.iter().chain(self.cycle.iter())
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Lasso<U> {
        Lasso { stem: self.stem.iter().map(&mut f).collect(), cycle: self.cycle.iter().map(&mut f).collect() }
    }
}

impl<A> Formula<A> {
    /// Evaluates the formula on a lasso; `atom(a, i)` gives the value of `a` at position `i`.
    pub fn eval_lasso<T>(&self, word: &Lasso<T>, atom: &dyn Fn(&A, &T) -> bool) -> bool {
        self.eval_all(word, atom)[0]
    }

    /// Truth value at every distinct position of the lasso.
    pub fn eval_all<T>(&self, word: &Lasso<T>, atom: &dyn Fn(&A, &T) -> bool) -> Vec<bool> {
        let n = word.len();
        match self {
            Formula::True => vec![true; n],
            Formula::False => vec![false; n],
            Formula::Atom(a) => word.positions().map(|t| atom(a, t)).collect(),
            Formula::Not(a) => a.eval_all(word, atom).into_iter().map(|v| !v).collect(),
            Formula::And(a, b) => {
                let (a, b) = (a.eval_all(word, atom), b.eval_all(word, atom));
                a.iter().zip(&b).map(|(x, y)| *x && *y).collect()
            }
            Formula::Or(a, b) => {
                let (a, b) = (a.eval_all(word, atom), b.eval_all(word, atom));
                a.iter().zip(&b).map(|(x, y)| *x || *y).collect()
            }
            Formula::Next(a) => {
                let a = a.eval_all(word, atom);
                (0..n).map(|i| a[word.succ(i)]).collect()
            }
            Formula::Until(a, b) => fixpoint(word, &a.eval_all(word, atom), &b.eval_all(word, atom), false),
            Formula::Release(a, b) => fixpoint(word, &a.eval_all(word, atom), &b.eval_all(word, atom), true),
        }
    }
}

// Until is the least fixpoint of v = b | (a & X v); release the greatest of v = b & (a | X v).
fn fixpoint<T>(word: &Lasso<T>, a: &[bool], b: &[bool], release: bool) -> Vec<bool> {
    let n = word.len();
    let mut v = vec![release; n];
    loop {
        let mut changed = false;
        for i in (0..n).rev() {
            let next = v[word.succ(i)];
            let new = if release { b[i] && (a[i] || next) } else { b[i] || (a[i] && next) };
            if new != v[i] {
                v[i] = new;
                changed = true;
            }
        }
        if !changed {
            return v;
        }
    }
}

impl<A: fmt::Display> fmt::Display for Formula<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child<A: fmt::Display>(f: &mut fmt::Formatter<'_>, c: &Formula<A>) -> fmt::Result {
            match c {
                Formula::True | Formula::False | Formula::Atom(_) | Formula::Not(_) | Formula::Next(_) => write!(f, "{c}"),
                Formula::Release(a, _) if matches!(**a, Formula::False) => write!(f, "{c}"),
                Formula::Until(a, _) if matches!(**a, Formula::True) => write!(f, "{c}"),
                _ => write!(f, "({c})"),
            }
        }
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(a) => {
                f.write_str("! ")?;
                child(f, a)
            }
            Formula::Next(a) => {
                f.write_str("X ")?;
                child(f, a)
            }
            Formula::Release(a, b) if matches!(**a, Formula::False) => {
                f.write_str("G ")?;
                child(f, b)
            }
            Formula::Until(a, b) if matches!(**a, Formula::True) => {
                f.write_str("F ")?;
                child(f, b)
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, b) | Formula::Release(a, b) => {
                let op = match self {
                    Formula::And(..) => "&&",
                    Formula::Or(..) => "||",
                    Formula::Until(..) => "U",
                    _ => "R",
                };
                child(f, a)?;
                write!(f, " {op} ")?;
                child(f, b)
            }
        }
    }
}
