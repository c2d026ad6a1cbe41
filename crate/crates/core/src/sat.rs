//! Small conflict-driven clause-learning SAT solver.
//!
//! Literals use the DIMACS convention: variable `v >= 1` is `v`, its negation `-v`.
//! The solver is deterministic: equal inputs produce equal models.

#[derive(Debug, Clone)]
struct Clause {
    lits: Vec<u32>,
    learnt: bool,
    activity: f64,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    cref: usize,
    blocker: u32,
}

/// A satisfying assignment indexed by DIMACS variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model(Vec<bool>);

impl Model {
    pub fn value(&self, lit: i32) -> bool {
        let v = self.0.get(lit.unsigned_abs() as usize - 1).copied().unwrap_or(false);
        if lit > 0 {
            v
        } else {
            !v
        }
    }
}

pub struct Solver {
    num_vars: usize,
    clauses: Vec<Clause>,
    pending: Vec<Vec<u32>>,
    trivially_unsat: bool,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<Option<usize>>,
    trail: Vec<u32>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f64,
    phase: Vec<bool>,
    seen: Vec<bool>,
    heap: Heap,
}

fn ilit(l: i32) -> u32 {
    assert!(l != 0, "literal 0 is not a valid DIMACS literal");
    (l.unsigned_abs() - 1) * 2 + u32::from(l < 0)
}

fn var(l: u32) -> usize {
    (l >> 1) as usize
}

impl Solver {
    pub fn new(num_vars: usize) -> Self {
        Solver {
            num_vars,
            clauses: Vec::new(),
            pending: Vec::new(),
            trivially_unsat: false,
            watches: vec![Vec::new(); 2 * num_vars],
            assigns: vec![0; num_vars],
            level: vec![0; num_vars],
            reason: vec![None; num_vars],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: vec![0.0; num_vars],
            var_inc: 1.0,
            cla_inc: 1.0,
            phase: vec![false; num_vars],
            seen: vec![false; num_vars],
            heap: Heap::new(num_vars),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Adds a clause. Literals must refer to variables `1..=num_vars`.
    pub fn add_clause(&mut self, lits: &[i32]) {
        let mut c: Vec<u32> = lits.iter().map(|&l| ilit(l)).collect();
        assert!(c.iter().all(|&l| var(l) < self.num_vars), "literal out of range");
        c.sort_unstable();
        c.dedup();
        if c.windows(2).any(|w| w[0] ^ 1 == w[1]) {
            return;
        }
        if c.is_empty() {
            self.trivially_unsat = true;
        }
        self.pending.push(c);
    }

    fn lit_value(&self, l: u32) -> i8 {
        let a = self.assigns[var(l)];
        if l & 1 == 1 {
            -a
        } else {
            a
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: u32, reason: Option<usize>) {
        let v = var(l);
        self.assigns[v] = if l & 1 == 1 { -1 } else { 1 };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
    }

    fn attach(&mut self, cref: usize) {
        let c = &self.clauses[cref].lits;
        let (a, b) = (c[0], c[1]);
        self.watches[(a ^ 1) as usize].push(Watcher { cref, blocker: b });
        self.watches[(b ^ 1) as usize].push(Watcher { cref, blocker: a });
    }

    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = p ^ 1;
            let mut ws = std::mem::take(&mut self.watches[p as usize]);
            let (mut i, mut j) = (0, 0);
            let mut conflict = None;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.lit_value(w.blocker) == 1 {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref;
                let assigns = &self.assigns;
                let value = |l: u32| if l & 1 == 1 { -assigns[var(l)] } else { assigns[var(l)] };
                let lits = &mut self.clauses[cref].lits;
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                let watcher = Watcher { cref, blocker: first };
                if first != w.blocker && value(first) == 1 {
                    ws[j] = watcher;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..lits.len() {
                    if value(lits[k]) != -1 {
                        lits.swap(1, k);
                        self.watches[(lits[1] ^ 1) as usize].push(watcher);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = watcher;
                j += 1;
                if value(first) == -1 {
                    conflict = Some(cref);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(cref));
                }
            }
            ws.truncate(j);
            self.watches[p as usize] = ws;
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.increase(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: usize) {
        let c = &mut self.clauses[cref];
        if !c.learnt {
            return;
        }
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for c in self.clauses.iter_mut().filter(|c| c.learnt) {
                c.activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting literal
    /// first) and the backjump level.
    fn analyze(&mut self, mut confl: usize) -> (Vec<u32>, u32) {
        let mut learnt = vec![0u32];
        let mut path = 0usize;
        let mut p: Option<u32> = None;
        let mut idx = self.trail.len();
        let current = self.decision_level();
        loop {
            self.bump_clause(confl);
            let skip = usize::from(p.is_some());
            for k in skip..self.clauses[confl].lits.len() {
                let q = self.clauses[confl].lits[k];
                let v = var(q);
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = true;
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[var(self.trail[idx])] {
                    break;
                }
            }
            let pl = self.trail[idx];
            p = Some(pl);
            self.seen[var(pl)] = false;
            path -= 1;
            if path == 0 {
                learnt[0] = pl ^ 1;
                break;
            }
            confl = self.reason[var(pl)].expect("implied literal without reason");
        }

        // Drop literals implied by other literals of the clause.
        let keep: Vec<bool> = learnt
            .iter()
            .enumerate()
            .map(|(k, &l)| {
                k == 0
                    || match self.reason[var(l)] {
                        None => true,
                        Some(r) => self.clauses[r].lits[1..].iter().any(|&q| !self.seen[var(q)] && self.level[var(q)] > 0),
                    }
            })
            .collect();
        for &l in &learnt[1..] {
            self.seen[var(l)] = false;
        }
        let mut learnt: Vec<u32> = learnt.into_iter().zip(keep).filter(|&(_, k)| k).map(|(l, _)| l).collect();

        let mut back = 0;
        if learnt.len() > 1 {
            let mut best = 1;
            for k in 2..learnt.len() {
                if self.level[var(learnt[k])] > self.level[var(learnt[best])] {
                    best = k;
                }
            }
            learnt.swap(1, best);
            back = self.level[var(learnt[1])];
        }
        (learnt, back)
    }

    fn cancel_until(&mut self, lvl: u32) {
        if self.decision_level() <= lvl {
            return;
        }
        let start = self.trail_lim[lvl as usize];
        for k in (start..self.trail.len()).rev() {
            let l = self.trail[k];
            let v = var(l);
            self.assigns[v] = 0;
            self.reason[v] = None;
            self.phase[v] = l & 1 == 0;
            self.heap.insert(v, &self.activity);
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(lvl as usize);
        self.qhead = start;
    }

    fn pick_branch(&mut self) -> Option<u32> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.assigns[v] == 0 {
                return Some(v as u32 * 2 + u32::from(!self.phase[v]));
            }
        }
        None
    }

    /// Deletes the less active half of the learnt clauses. Called at level 0,
    /// where no learnt clause is a reason that analysis could still need.
    fn reduce(&mut self) {
        let mut learnt: Vec<(f64, usize)> =
            self.clauses.iter().enumerate().filter(|(_, c)| c.learnt && c.lits.len() > 2).map(|(i, c)| (c.activity, i)).collect();
        learnt.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut drop = vec![false; self.clauses.len()];
        for &(_, i) in &learnt[..learnt.len() / 2] {
            drop[i] = true;
        }
        let old = std::mem::take(&mut self.clauses);
        self.clauses = old.into_iter().zip(drop).filter(|(_, d)| !d).map(|(c, _)| c).collect();
        for r in &mut self.reason {
            *r = None;
        }
        for w in &mut self.watches {
            w.clear();
        }
        for cref in 0..self.clauses.len() {
            self.attach(cref);
        }
    }

    fn num_learnts(&self) -> usize {
        self.clauses.iter().filter(|c| c.learnt).count()
    }

    /// Decides satisfiability, consuming the solver.
    pub fn solve(mut self) -> Option<Model> {
        if self.trivially_unsat {
            return None;
        }
        for v in 0..self.num_vars {
            self.heap.insert(v, &self.activity);
        }
        for c in std::mem::take(&mut self.pending) {
            if c.len() == 1 {
                match self.lit_value(c[0]) {
                    0 => self.enqueue(c[0], None),
                    -1 => return None,
                    _ => {}
                }
            } else {
                self.clauses.push(Clause { lits: c, learnt: false, activity: 0.0 });
                self.attach(self.clauses.len() - 1);
            }
        }
        let mut max_learnts = (self.clauses.len() / 3).max(2000) as f64;
        let mut restart = 0u32;
        loop {
            let budget = 100 * luby(restart);
            restart += 1;
            match self.search(budget) {
                Some(true) => {
                    let model = (0..self.num_vars).map(|v| self.assigns[v] == 1).collect();
                    return Some(Model(model));
                }
                Some(false) => return None,
                None => {
                    if self.num_learnts() as f64 > max_learnts {
                        self.reduce();
                        max_learnts *= 1.1;
                    }
                }
            }
        }
    }

    /// Runs until a result or until `budget` conflicts have occurred.
    fn search(&mut self, budget: u64) -> Option<bool> {
        let mut conflicts = 0;
        loop {
            if let Some(confl) = self.propagate() {
                conflicts += 1;
                if self.decision_level() == 0 {
                    return Some(false);
                }
                let (learnt, back) = self.analyze(confl);
                self.cancel_until(back);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], None);
                } else {
                    let first = learnt[0];
                    self.clauses.push(Clause { lits: learnt, learnt: true, activity: 0.0 });
                    let cref = self.clauses.len() - 1;
                    self.bump_clause(cref);
                    self.attach(cref);
                    self.enqueue(first, Some(cref));
                }
                self.var_inc /= 0.95;
                self.cla_inc /= 0.999;
            } else {
                if conflicts >= budget {
                    self.cancel_until(0);
                    return None;
                }
                match self.pick_branch() {
                    None => return Some(true),
                    Some(l) => {
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(l, None);
                    }
                }
            }
        }
    }
}

fn luby(mut x: u32) -> u64 {
    let (mut size, mut seq) = (1u64, 0u32);
    while size < u64::from(x) + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != u64::from(x) {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size as u32;
    }
    1 << seq
}

/// Indexed binary max-heap over variable activities.
struct Heap {
    data: Vec<usize>,
    pos: Vec<Option<usize>>,
}

impl Heap {
    fn new(n: usize) -> Self {
        Heap { data: Vec::with_capacity(n), pos: vec![None; n] }
    }

    fn above(a: usize, b: usize, act: &[f64]) -> bool {
        act[a] > act[b] || (act[a] == act[b] && a < b)
    }

    fn insert(&mut self, v: usize, act: &[f64]) {
        if self.pos[v].is_some() {
            return;
        }
        self.data.push(v);
        self.pos[v] = Some(self.data.len() - 1);
        self.sift_up(self.data.len() - 1, act);
    }

    fn increase(&mut self, v: usize, act: &[f64]) {
        if let Some(i) = self.pos[v] {
            self.sift_up(i, act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        let top = *self.data.first()?;
        let last = self.data.pop().expect("non-empty heap");
        self.pos[top] = None;
        if !self.data.is_empty() {
            self.data[0] = last;
            self.pos[last] = Some(0);
            self.sift_down(0, act);
        }
        Some(top)
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.data[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.data[parent];
            if !Self::above(v, p, act) {
                break;
            }
            self.data[i] = p;
            self.pos[p] = Some(i);
            i = parent;
        }
        self.data[i] = v;
        self.pos[v] = Some(i);
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.data[i];
        loop {
            let l = 2 * i + 1;
            if l >= self.data.len() {
                break;
            }
            let r = l + 1;
            let c = if r < self.data.len() && Self::above(self.data[r], self.data[l], act) { r } else { l };
            if !Self::above(self.data[c], v, act) {
                break;
            }
            self.data[i] = self.data[c];
            self.pos[self.data[i]] = Some(i);
            i = c;
        }
        self.data[i] = v;
        self.pos[v] = Some(i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(n: usize, clauses: &[Vec<i32>]) -> Option<Model> {
        let mut s = Solver::new(n);
        for c in clauses {
            s.add_clause(c);
        }
        s.solve()
    }

    #[test]
    fn luby_prefix() {
        let seq: Vec<u64> = (0..15).map(luby).collect();
        assert_eq!(seq, vec![1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]);
    }

    #[test]
    fn trivial_cases() {
        assert!(solve(1, &[vec![1], vec![-1]]).is_none());
        assert!(solve(2, &[vec![1, -1]]).is_some());
        assert!(solve(1, &[vec![]]).is_none());
        let m = solve(3, &[vec![1], vec![-1, 2], vec![-2, 3]]).unwrap();
        assert!(m.value(1) && m.value(2) && m.value(3));
    }

    #[test]
    fn pigeonhole_is_unsat() {
        let (pigeons, holes) = (7, 6);
        let x = |p: usize, h: usize| (p * holes + h + 1) as i32;
        let mut cs = Vec::new();
        for p in 0..pigeons {
            cs.push((0..holes).map(|h| x(p, h)).collect());
        }
        for h in 0..holes {
            for p in 0..pigeons {
                for q in p + 1..pigeons {
                    cs.push(vec![-x(p, h), -x(q, h)]);
                }
            }
        }
        assert!(solve(pigeons * holes, &cs).is_none());
        cs.retain(|c: &Vec<i32>| c.len() != holes || c[0] != x(pigeons - 1, 0));
        let n = pigeons * holes;
        let m = solve(n, &cs).expect("six pigeons fit");
        assert!(cs.iter().all(|c| c.iter().any(|&l| m.value(l))));
    }
}
