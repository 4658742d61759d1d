//! Shared helpers for integration tests: engine runners, a random program
//! generator, and a brute-force unification oracle.
#![allow(dead_code)]

pub mod golden;

use harrop_core::machine::MachineError;
use harrop_core::store::Cell;
use harrop_core::{
    compile, parse_program, parse_query, EngineError, Machine, MachineConfig, Solver, SolverConfig, Store, Sym, Tag,
    Term, VarNaming, View,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Result of running a query to exhaustion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Sorted answers, each rendered as its `Var = term` lines joined by `, `.
    Answers(Vec<String>),
    Limit,
    Error(String),
}

impl Outcome {
    pub fn succeeded(&self) -> bool {
        matches!(self, Outcome::Answers(a) if !a.is_empty())
    }

    pub fn failed(&self) -> bool {
        matches!(self, Outcome::Answers(a) if a.is_empty())
    }
}

pub fn run_interp(prog: &str, query: &str, max_depth: u32) -> Outcome {
    let (p, q) = match (parse_program(prog), parse_query(query)) {
        (Ok(p), Ok(q)) => (p, q),
        (Err(e), _) | (_, Err(e)) => return Outcome::Error(e.to_string()),
    };
    let cfg = SolverConfig { max_depth: Some(max_depth), ..Default::default() };
    let mut s = Solver::new(&p, &q, cfg);
    let mut out = Vec::new();
    loop {
        match s.next_solution() {
            Ok(Some(a)) => out.push(a.lines(false).join(", ")),
            Ok(None) => break,
            Err(e) if e.is_limit() => return Outcome::Limit,
            Err(EngineError::Fault(m)) => return Outcome::Error(m),
            Err(e) => return Outcome::Error(e.to_string()),
        }
        if out.len() > 10_000 {
            return Outcome::Limit;
        }
    }
    out.sort();
    Outcome::Answers(out)
}

pub fn run_machine(prog: &str, query: &str, max_steps: u64) -> Outcome {
    let (p, q) = match (parse_program(prog), parse_query(query)) {
        (Ok(p), Ok(q)) => (p, q),
        (Err(e), _) | (_, Err(e)) => return Outcome::Error(e.to_string()),
    };
    let img = match compile(&p, Some(&q)) {
        Ok(i) => Arc::new(i),
        Err(e) => return Outcome::Error(e.to_string()),
    };
    let mut m = Machine::new(img, MachineConfig { max_steps: Some(max_steps), ..Default::default() });
    let mut out = Vec::new();
    loop {
        match m.next_solution() {
            Ok(Some(a)) => out.push(a.lines(false).join(", ")),
            Ok(None) => break,
            Err(MachineError::StepLimit(_)) => return Outcome::Limit,
            Err(e) => return Outcome::Error(e.to_string()),
        }
        if out.len() > 10_000 {
            return Outcome::Limit;
        }
    }
    out.sort();
    Outcome::Answers(out)
}

/// Runs both engines; `None` when either hit a limit.
pub fn both(prog: &str, query: &str) -> Option<(Outcome, Outcome)> {
    let i = run_interp(prog, query, 50);
    let m = run_machine(prog, query, 2_000_000);
    if i == Outcome::Limit || m == Outcome::Limit {
        return None;
    }
    Some((i, m))
}

// ---------------------------------------------------------------------------
// Random programs

/// Predicates in stratification order: a clause or local definition for
/// `PREDS[i]` only calls predicates with a larger index, so search is finite.
const PREDS: [(&str, usize); 5] = [("p", 1), ("q", 2), ("r", 1), ("s", 0), ("t", 1)];
const VARS: [&str; 4] = ["X", "Y", "Z", "W"];
const CONSTS: [&str; 3] = ["a", "b", "c"];

pub struct ProgramGen {
    rng: ChaCha8Rng,
    fuel: u32,
}

impl ProgramGen {
    pub fn new(seed: u64) -> ProgramGen {
        ProgramGen { rng: ChaCha8Rng::seed_from_u64(seed), fuel: 0 }
    }

    fn term(&mut self, depth: u32) -> String {
        let roll = self.rng.gen_range(0..10);
        if depth == 0 || roll < 7 {
            if roll < 4 {
                VARS.choose(&mut self.rng).unwrap().to_string()
            } else {
                CONSTS.choose(&mut self.rng).unwrap().to_string()
            }
        } else if roll < 9 {
            format!("f({})", self.term(depth - 1))
        } else {
            format!("g({},{})", self.term(depth - 1), self.term(depth - 1))
        }
    }

    fn atom(&mut self, pred: usize) -> String {
        let (name, arity) = PREDS[pred];
        if arity == 0 {
            return name.to_string();
        }
        let args: Vec<String> = (0..arity).map(|_| self.term(2)).collect();
        format!("{name}({})", args.join(","))
    }

    /// A goal calling only predicates above `level`; `nest` counts enclosing
    /// implications and universal goals.
    fn goal(&mut self, level: usize, nest: u32) -> String {
        let callable = level + 1..PREDS.len();
        if callable.is_empty() {
            return "true".into();
        }
        self.fuel = self.fuel.saturating_sub(1);
        let roll = if self.fuel == 0 { 0 } else { self.rng.gen_range(0..12) };
        match roll {
            0..=3 => {
                let p = self.rng.gen_range(callable);
                self.atom(p)
            }
            4 | 5 => format!("({}, {})", self.goal(level, nest), self.goal(level, nest)),
            6 => format!("({} ; {})", self.goal(level, nest), self.goal(level, nest)),
            7 => {
                let v = VARS.choose(&mut self.rng).unwrap();
                format!("(exists {v} {})", self.goal(level, nest))
            }
            8 | 9 if nest < 2 => {
                let v = VARS.choose(&mut self.rng).unwrap();
                format!("(forall {v} {})", self.goal(level, nest + 1))
            }
            10 | 11 if nest < 2 => {
                let n = self.rng.gen_range(1..=2);
                let ds: Vec<String> = (0..n).map(|_| self.local_clause(level, nest + 1)).collect();
                format!("(({}) => {})", ds.join(", "), self.goal(level, nest + 1))
            }
            _ => {
                let p = self.rng.gen_range(level + 1..PREDS.len());
                self.atom(p)
            }
        }
    }

    fn local_clause(&mut self, level: usize, nest: u32) -> String {
        let pred = self.rng.gen_range(level + 1..PREDS.len());
        let head = self.atom(pred);
        let body = if self.rng.gen_bool(0.5) && pred + 1 < PREDS.len() {
            format!("{head} :- {}", self.goal(pred, nest))
        } else {
            head
        };
        if self.rng.gen_bool(0.4) {
            let v = VARS.choose(&mut self.rng).unwrap();
            format!("(forall {v} ({body}))")
        } else {
            format!("({body})")
        }
    }

    /// A closed program of 1 to 6 clauses and a query over it.
    pub fn program_and_query(&mut self) -> (String, String) {
        let n = self.rng.gen_range(1..=6);
        let mut prog = String::new();
        for _ in 0..n {
            let pred = self.rng.gen_range(0..PREDS.len());
            let head = self.atom(pred);
            self.fuel = 6;
            if self.rng.gen_bool(0.6) && pred + 1 < PREDS.len() {
                let body = self.goal(pred, 0);
                prog.push_str(&format!("{head} :- {body}.\n"));
            } else {
                prog.push_str(&format!("{head}.\n"));
            }
        }
        self.fuel = 6;
        let level = self.rng.gen_range(0..2);
        let query = if level == 0 {
            let p = self.rng.gen_range(0..PREDS.len());
            let a = self.atom(p);
            if self.rng.gen_bool(0.5) {
                a
            } else {
                format!("{a}, {}", self.goal(0, 0))
            }
        } else {
            self.goal(0, 0)
        };
        // A query that is just `true` would add nothing; make it call something.
        let query = if query == "true" { self.atom(0) } else { query };
        (prog, format!("{query}."))
    }
}

// ---------------------------------------------------------------------------
// Unification oracle over a small universe

/// Ground-or-variable term for the oracle: variables `X` (tag 1) and `Y`
/// (tag 2), constant `a` (tag 1), generated constant `k` (tag 2), `f/1`, `g/2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum T {
    X,
    Y,
    A,
    K,
    F(Box<T>),
    G(Box<T>, Box<T>),
}

pub const X_TAG: Tag = 1;
pub const Y_TAG: Tag = 2;
pub const K_TAG: Tag = 2;

pub fn atoms() -> Vec<T> {
    vec![T::X, T::Y, T::A, T::K]
}

/// Every term of depth at most one.
pub fn universe() -> Vec<T> {
    let mut out = atoms();
    for a in atoms() {
        out.push(T::F(Box::new(a)));
    }
    for a in atoms() {
        for b in atoms() {
            out.push(T::G(Box::new(a.clone()), Box::new(b)));
        }
    }
    out
}

impl T {
    pub fn subst(&self, x: &T, y: &T) -> T {
        match self {
            T::X => x.clone(),
            T::Y => y.clone(),
            T::A | T::K => self.clone(),
            T::F(a) => T::F(Box::new(a.subst(x, y))),
            T::G(a, b) => T::G(Box::new(a.subst(x, y)), Box::new(b.subst(x, y))),
        }
    }

    pub fn has_k(&self) -> bool {
        match self {
            T::K => true,
            T::X | T::Y | T::A => false,
            T::F(a) => a.has_k(),
            T::G(a, b) => a.has_k() || b.has_k(),
        }
    }

    fn mentions(&self, v: &T) -> bool {
        match self {
            T::F(a) => a.mentions(v),
            T::G(a, b) => a.mentions(v) || b.mentions(v),
            other => other == v,
        }
    }
}

/// Idempotent substitutions `{X -> sx, Y -> sy}` drawn from the universe
/// that respect the tags: `X` (tag 1) may not receive `k` (tag 2).
pub fn admissible_substitutions() -> Vec<(T, T)> {
    let u = universe();
    let mut out = Vec::new();
    for sx in &u {
        for sy in &u {
            let x_moves = *sx != T::X;
            let y_moves = *sy != T::Y;
            // Idempotence: a variable that is replaced may not appear in the range.
            if x_moves && (sx.mentions(&T::X) || sy.mentions(&T::X)) {
                continue;
            }
            if y_moves && (sx.mentions(&T::Y) || sy.mentions(&T::Y)) {
                continue;
            }
            if sx.has_k() {
                continue;
            }
            out.push((sx.clone(), sy.clone()));
        }
    }
    out
}

/// Store holding `X`, `Y` and the generated constant, ready for building terms.
pub struct OracleStore {
    pub store: Store,
    pub x: usize,
    pub y: usize,
    pub k: usize,
    pub a: Sym,
}

impl OracleStore {
    pub fn new() -> OracleStore {
        let mut store = Store::new();
        let a = store.symbols_mut().intern("a");
        store.symbols_mut().intern("f");
        store.symbols_mut().intern("g");
        let x = store.new_var(X_TAG);
        let y = store.new_var(Y_TAG);
        let k = store.new_gen(K_TAG);
        OracleStore { store, x, y, k, a }
    }

    pub fn build(&mut self, t: &T) -> usize {
        match t {
            T::X => self.x,
            T::Y => self.y,
            T::K => self.k,
            T::A => self.store.new_con(self.a),
            T::F(a) => {
                let a = self.build(a);
                let f = self.store.symbols_mut().intern("f");
                let h = self.store.new_fun(f, 1);
                self.store.push_arg(a);
                h
            }
            T::G(a, b) => {
                let a = self.build(a);
                let b = self.build(b);
                let g = self.store.symbols_mut().intern("g");
                let h = self.store.new_fun(g, 2);
                self.store.push_arg(a);
                self.store.push_arg(b);
                h
            }
        }
    }

    /// Reads a store term back; unbound variables must be `X` or `Y`.
    pub fn read(&self, addr: usize) -> Option<T> {
        Some(match self.store.view(addr) {
            View::Var(v, _) if v == self.x => T::X,
            View::Var(v, _) if v == self.y => T::Y,
            View::Var(..) => return None,
            View::Con(_) => T::A,
            View::Gen(..) => T::K,
            View::Struct(h, _, 1) => T::F(Box::new(self.read(h + 1)?)),
            View::Struct(h, _, _) => T::G(Box::new(self.read(h + 1)?), Box::new(self.read(h + 2)?)),
        })
    }

    pub fn tag_of(&self, addr: usize) -> Option<Tag> {
        match self.store.view(addr) {
            View::Var(_, t) => Some(t),
            _ => None,
        }
    }
}

impl Default for OracleStore {
    fn default() -> Self {
        OracleStore::new()
    }
}

/// Checks one pair against the oracle. Returns a description of any mismatch.
pub fn check_pair(s: &T, t: &T, subs: &[(T, T)]) -> Result<(), String> {
    let unifiers: Vec<&(T, T)> = subs.iter().filter(|(x, y)| s.subst(x, y) == t.subst(x, y)).collect();
    let mut os = OracleStore::new();
    let (ls, lt) = (os.build(s), os.build(t));
    let result = os.store.unify(ls, lt);
    match (result.is_ok(), unifiers.is_empty()) {
        (true, true) => return Err(format!("{s:?} = {t:?}: unify succeeded, no admissible unifier")),
        (false, false) => return Err(format!("{s:?} = {t:?}: unify failed, {} admissible unifiers", unifiers.len())),
        (false, true) => return Ok(()),
        (true, false) => {}
    }
    let mx = os.read(os.x).ok_or("X bound to a foreign variable")?;
    let my = os.read(os.y).ok_or("Y bound to a foreign variable")?;
    if mx.has_k() {
        return Err(format!("{s:?} = {t:?}: X received the tag-2 constant"));
    }
    // A variable left free inside X's binding must have been lowered to tag 1.
    if mx.mentions(&T::Y) && os.tag_of(os.y) != Some(X_TAG) {
        return Err(format!("{s:?} = {t:?}: Y not lowered"));
    }
    if !unifiers.contains(&&(mx.clone(), my.clone())) && !(s.subst(&mx, &my) == t.subst(&mx, &my)) {
        return Err(format!("{s:?} = {t:?}: computed binding is not a unifier"));
    }
    for (sx, sy) in unifiers {
        // sigma is an instance of the computed unifier mu iff mu;sigma = sigma.
        if mx.subst(sx, sy) != *sx || my.subst(sx, sy) != *sy {
            return Err(format!("{s:?} = {t:?}: ({sx:?}, {sy:?}) is not an instance of ({mx:?}, {my:?})"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Random store states for rollback checks

/// Fills a store with random variables (tags 1..=3), constants and structures.
pub fn random_store(rng: &mut ChaCha8Rng) -> (Store, Vec<usize>) {
    let mut s = Store::new();
    let names: Vec<Sym> = ["a", "b", "f", "g"].iter().map(|n| s.symbols_mut().intern(n)).collect();
    let mut terms = Vec::new();
    for _ in 0..rng.gen_range(4..12) {
        let r = rng.gen_range(0..10);
        let t = if r < 5 || terms.is_empty() {
            s.new_var(rng.gen_range(1..=3))
        } else if r < 6 {
            s.new_con(names[rng.gen_range(0..2)])
        } else if r < 7 {
            s.new_gen(rng.gen_range(1..=3))
        } else {
            let arity = rng.gen_range(1..=2);
            let args: Vec<usize> = (0..arity).map(|_| *terms.choose(rng).unwrap()).collect();
            let h = s.new_fun(names[1 + arity as usize], arity);
            for a in args {
                s.push_arg(a);
            }
            h
        };
        terms.push(t);
    }
    // Some bindings made before the snapshot, to exercise chains.
    for _ in 0..rng.gen_range(0..3) {
        let a = *terms.choose(rng).unwrap();
        let b = *terms.choose(rng).unwrap();
        let _ = s.unify(a, b);
    }
    (s, terms)
}

/// Structure whose final argument is guaranteed to clash with `clash_with`,
/// so unification binds earlier arguments before failing.
pub fn clashing_pair(s: &mut Store, rng: &mut ChaCha8Rng, terms: &[usize]) -> (usize, usize) {
    let n = rng.gen_range(1..=3);
    let left: Vec<usize> = (0..n).map(|_| *terms.choose(rng).unwrap()).collect();
    let right: Vec<usize> = (0..n).map(|_| *terms.choose(rng).unwrap()).collect();
    let a = s.symbols_mut().intern("a");
    let b = s.symbols_mut().intern("b");
    let h = s.symbols_mut().intern("h");
    let ca = s.new_con(a);
    let cb = s.new_con(b);
    let l = s.new_fun(h, n + 1);
    for x in left {
        s.push_arg(x);
    }
    s.push_arg(ca);
    let r = s.new_fun(h, n + 1);
    for x in right {
        s.push_arg(x);
    }
    s.push_arg(cb);
    (l, r)
}

pub fn is_unbound(s: &Store, a: usize) -> bool {
    matches!(s.cell(s.deref(a)), Cell::Var(_))
}

pub fn resolve(s: &Store, a: usize) -> Term {
    s.resolve(a, &mut VarNaming::by_address())
}
