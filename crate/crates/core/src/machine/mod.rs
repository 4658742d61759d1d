//! Abstract machine executing compiled code.
//!
//! Registers `A`/`X` and environment slots hold heap addresses; every
//! permanent variable is a heap cell created by `allocate`, so slots never
//! dangle and answers are read straight from the query frame. Implication
//! records live in a [`Context`] whose environments are frame indices.

mod instr;
pub mod listing;

pub use instr::{Instr, Label, Reg};

use crate::compiler::CodeImage;
use crate::context::{Context, ContextError, PredKey, RecordId, ROOT};
use crate::interpreter::{fail_line, Answer, Tracer};
use crate::store::{Addr, Cell, Store, Sym, Tag, VarNaming, View};
use std::sync::Arc;
use thiserror::Error;

/// Continuation address meaning "the query has succeeded".
const SUCCESS: Addr = Addr::MAX;

#[derive(Clone, Debug, Default)]
pub struct MachineConfig {
    pub max_steps: Option<u64>,
    pub max_solutions: Option<usize>,
    /// Print one line per instruction to stderr.
    pub trace: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Running,
    Backtracked,
    Succeeded,
    Failed,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MachineError {
    #[error("step limit of {0} exceeded")]
    StepLimit(u64),
    #[error("image has no query entry")]
    NoQuery,
    #[error("machine fault at {addr}: {message}")]
    Fault { addr: Addr, message: String },
}

impl MachineError {
    pub fn is_limit(&self) -> bool {
        matches!(self, MachineError::StepLimit(_))
    }
}

#[derive(Clone, Debug)]
struct Frame {
    ce: usize,
    cp: Addr,
    slots: Vec<Addr>,
}

#[derive(Clone, Debug)]
struct ChoicePoint {
    regs: Vec<Addr>,
    e: usize,
    cp: Addr,
    alt: Addr,
    trail: usize,
    heap: Addr,
    ui: Tag,
    i: RecordId,
    ci: RecordId,
    ce: usize,
    frames: usize,
    records: usize,
}

pub struct Machine {
    image: Arc<CodeImage>,
    store: Store,
    regs: Vec<Addr>,
    frames: Vec<Frame>,
    choices: Vec<ChoicePoint>,
    ctx: Context<Addr, usize>,
    p: Addr,
    cp: Addr,
    e: usize,
    ce: usize,
    ui: Tag,
    i: RecordId,
    ci: RecordId,
    s: Addr,
    steps: u64,
    solutions: usize,
    cfg: MachineConfig,
    state: Phase,
    tracer: Option<Tracer>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Fresh,
    Running,
    /// An answer was produced; resuming backtracks into the remaining choices.
    Answered,
    Done,
}

type Exec = Result<Status, MachineError>;

impl Machine {
    pub fn new(image: Arc<CodeImage>, cfg: MachineConfig) -> Machine {
        let mut store = Store::with_symbols(image.symbols.clone());
        // Constant pool: the cell for symbol `s` sits at address `s`.
        for s in 0..image.symbols.len() {
            store.new_con(Sym(s as u32));
        }
        store.set_boundary(0);
        let mut ctx = Context::new(0usize);
        for (k, a) in &image.globals {
            ctx.define_global(*k, *a);
        }
        let tracer: Option<Tracer> = cfg.trace.then(|| Box::new(|l: &str| eprintln!("{l}")) as Tracer);
        let p = image.query.as_ref().map_or(0, |q| q.entry);
        Machine {
            regs: vec![0; image.num_regs.max(1)],
            image,
            store,
            frames: Vec::new(),
            choices: Vec::new(),
            ctx,
            p,
            cp: SUCCESS,
            e: 0,
            ce: 0,
            ui: 1,
            i: ROOT,
            ci: ROOT,
            s: 0,
            steps: 0,
            solutions: 0,
            cfg,
            state: Phase::Fresh,
            tracer,
        }
    }

    pub fn set_tracer(&mut self, t: Option<Tracer>) {
        self.tracer = t;
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn image(&self) -> &CodeImage {
        &self.image
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn universe(&self) -> Tag {
        self.ui
    }

    pub fn current_record(&self) -> RecordId {
        self.i
    }

    pub fn choice_depth(&self) -> usize {
        self.choices.len()
    }

    /// Live implication records, root included.
    pub fn records(&self) -> usize {
        self.ctx.len()
    }

    pub fn max_records(&self) -> usize {
        self.ctx.max_records()
    }

    /// Whether `name/arity` has a visible definition from the current record.
    pub fn resolves(&self, name: &str, arity: u32) -> bool {
        match self.image.symbols.get(name) {
            Some(s) => self.ctx.resolves(PredKey::new(s, arity), self.i),
            None => false,
        }
    }

    fn trace(&mut self, line: impl FnOnce(&Machine) -> String) {
        if self.tracer.is_some() {
            let l = line(self);
            if let Some(t) = self.tracer.as_mut() {
                t(&l);
            }
        }
    }

    fn fault(&self, message: impl Into<String>) -> MachineError {
        MachineError::Fault { addr: self.p, message: message.into() }
    }

    /// Executes one instruction, or one backtrack when resuming after an answer.
    pub fn step(&mut self) -> Exec {
        match self.state {
            Phase::Done => return Ok(Status::Failed),
            Phase::Fresh => {
                if self.image.query.is_none() {
                    return Err(MachineError::NoQuery);
                }
                self.state = Phase::Running;
            }
            Phase::Answered => {
                self.state = Phase::Running;
                return Ok(self.backtrack());
            }
            Phase::Running => {}
        }
        if let Some(max) = self.cfg.max_steps {
            if self.steps >= max {
                return Err(MachineError::StepLimit(max));
            }
        }
        self.steps += 1;
        let Some(&ins) = self.image.code.get(self.p) else {
            return Err(self.fault("program counter out of range"));
        };
        self.trace(|m| {
            format!(
                "step={} P={} {}  UI={} I={} CI={} B={}",
                m.steps,
                m.p,
                ins.render(&m.image.symbols, &|l| m.image.label_name(l)),
                m.ui,
                m.i,
                m.ci,
                m.choices.len()
            )
        });
        let status = self.exec(ins)?;
        match status {
            Status::Succeeded => {
                self.solutions += 1;
                let exhausted = self.cfg.max_solutions.is_some_and(|m| self.solutions >= m);
                self.state = if exhausted { Phase::Done } else { Phase::Answered };
            }
            Status::Failed => self.state = Phase::Done,
            _ => {}
        }
        Ok(status)
    }

    /// Runs to the next answer.
    pub fn next_solution(&mut self) -> Result<Option<Answer>, MachineError> {
        loop {
            match self.step()? {
                Status::Succeeded => return Ok(Some(self.answer())),
                Status::Failed => return Ok(None),
                Status::Running | Status::Backtracked => {}
            }
        }
    }

    pub fn all(&mut self) -> Result<Vec<Answer>, MachineError> {
        let mut out = Vec::new();
        while let Some(a) = self.next_solution()? {
            out.push(a);
        }
        Ok(out)
    }

    fn answer(&self) -> Answer {
        let mut naming = VarNaming::new();
        let q = self.image.query.as_ref().expect("query entry");
        let frame = &self.frames[0];
        let bindings = q
            .answers
            .iter()
            .map(|(name, slot)| (name.clone(), self.store.resolve(frame.slots[*slot as usize - 1], &mut naming)))
            .collect();
        Answer { bindings }
    }

    fn reg(&self, r: Reg) -> Addr {
        match r {
            Reg::A(n) | Reg::X(n) => self.regs[n as usize],
            Reg::Y(n) => self.frames[self.e].slots[n as usize - 1],
        }
    }

    fn set_reg(&mut self, r: Reg, a: Addr) {
        match r {
            Reg::A(n) | Reg::X(n) => {
                let n = n as usize;
                if n >= self.regs.len() {
                    self.regs.resize(n + 1, 0);
                }
                self.regs[n] = a;
            }
            Reg::Y(n) => self.frames[self.e].slots[n as usize - 1] = a,
        }
    }

    fn next(&mut self) -> Exec {
        self.p += 1;
        Ok(Status::Running)
    }

    fn sync_boundary(&mut self) {
        let b = self.choices.last().map_or(0, |c| c.heap);
        self.store.set_boundary(b);
    }

    fn push_choice(&mut self, alt: Addr) {
        self.choices.push(ChoicePoint {
            regs: self.regs.clone(),
            e: self.e,
            cp: self.cp,
            alt,
            trail: self.store.trail_mark(),
            heap: self.store.heap_top(),
            ui: self.ui,
            i: self.i,
            ci: self.ci,
            ce: self.ce,
            frames: self.frames.len(),
            records: self.ctx.len(),
        });
        self.sync_boundary();
    }

    fn pop_choice(&mut self) {
        self.choices.pop();
        self.sync_boundary();
    }

    /// Restores the newest choice point and resumes at its alternative.
    fn backtrack(&mut self) -> Status {
        let Some(c) = self.choices.last() else {
            self.state = Phase::Done;
            return Status::Failed;
        };
        self.regs.clone_from(&c.regs);
        self.e = c.e;
        self.cp = c.cp;
        self.ui = c.ui;
        self.i = c.i;
        self.ci = c.ci;
        self.ce = c.ce;
        self.p = c.alt;
        let (trail, heap, frames, records) = (c.trail, c.heap, c.frames, c.records);
        self.store.undo_to(trail);
        self.store.truncate_heap(heap);
        self.frames.truncate(frames);
        self.ctx.restore(records);
        Status::Backtracked
    }

    fn unify(&mut self, a: Addr, b: Addr) -> Exec {
        match self.store.unify(a, b) {
            Ok(()) => self.next(),
            Err(f) => {
                self.trace(|m| fail_line(&m.store, m.ui, &f));
                Ok(self.backtrack())
            }
        }
    }

    fn call(&mut self, key: PredKey) -> Exec {
        match self.ctx.lookup_procedure(key, self.i) {
            Some((code, rec)) => {
                self.ci = rec;
                self.ce = self.ctx.record(rec).env;
                self.p = code;
                Ok(Status::Running)
            }
            None => {
                self.trace(|m| format!("FAIL undefined  I={}  {}/{}", m.ui, m.image.symbols.name(key.name), key.arity));
                Ok(self.backtrack())
            }
        }
    }

    /// Reads the structure at `r`, building it with fresh arguments when `r`
    /// holds an unbound variable.
    fn get_structure(&mut self, f: Sym, n: u32, r: Reg) -> Exec {
        let a = self.reg(r);
        match self.store.view(a) {
            View::Struct(h, g, m) if g == f && m == n => {
                self.s = h + 1;
                self.next()
            }
            View::Var(v, tag) => {
                let h = self.store.new_fun(f, n);
                for _ in 0..n {
                    self.store.new_var(tag);
                }
                self.s = h + 1;
                self.unify(v, h)
            }
            _ => {
                self.trace(|m| {
                    let mut naming = VarNaming::by_address();
                    let t = crate::syntax::print_term(&m.store.resolve(a, &mut naming), true);
                    format!("FAIL clash  I={}  {t} = {}/{n}", m.ui, m.image.symbols.name(f))
                });
                Ok(self.backtrack())
            }
        }
    }

    fn exec(&mut self, ins: Instr) -> Exec {
        use Instr::*;
        match ins {
            PutVariable(r, a) => {
                let v = self.store.new_var(self.ui);
                self.set_reg(r, v);
                self.set_reg(Reg::A(a), v);
                self.next()
            }
            PutValue(r, a) | PutUnsafeValue(r, a) => {
                let v = self.reg(r);
                self.set_reg(Reg::A(a), v);
                self.next()
            }
            PutConstant(c, a) => {
                self.set_reg(Reg::A(a), c.0 as Addr);
                self.next()
            }
            PutStructure(f, n, r) => {
                let h = self.store.new_fun(f, n);
                self.set_reg(r, h);
                self.next()
            }
            PutList(r) => {
                let h = self.store.new_fun(Sym::CONS, 2);
                self.set_reg(r, h);
                self.next()
            }
            SetVariable(r) => {
                let v = self.store.new_var(self.ui);
                self.set_reg(r, v);
                self.next()
            }
            SetValue(r) | SetLocalValue(r) => {
                let a = self.reg(r);
                self.store.push_arg(a);
                self.next()
            }
            SetConstant(c) => {
                self.store.new_con(c);
                self.next()
            }
            SetVoid(n) => {
                for _ in 0..n {
                    self.store.new_var(self.ui);
                }
                self.next()
            }
            GetVariable(r, a) => {
                let v = self.reg(Reg::A(a));
                self.set_reg(r, v);
                self.next()
            }
            GetValue(r, a) => {
                let (x, y) = (self.reg(r), self.reg(Reg::A(a)));
                self.unify(x, y)
            }
            GetConstant(c, a) => {
                let x = self.reg(Reg::A(a));
                self.unify(x, c.0 as Addr)
            }
            GetStructure(f, n, r) => self.get_structure(f, n, r),
            GetList(r) => self.get_structure(Sym::CONS, 2, r),
            UnifyVariable(r) => {
                self.set_reg(r, self.s);
                self.s += 1;
                self.next()
            }
            UnifyValue(r) | UnifyLocalValue(r) => {
                let (x, y) = (self.reg(r), self.s);
                self.s += 1;
                self.unify(x, y)
            }
            UnifyConstant(c) => {
                let y = self.s;
                self.s += 1;
                self.unify(y, c.0 as Addr)
            }
            UnifyVoid(n) => {
                self.s += n as Addr;
                self.next()
            }
            Allocate(n) => {
                let slots = (0..n).map(|_| self.store.new_var(self.ui)).collect();
                self.frames.push(Frame { ce: self.e, cp: self.cp, slots });
                self.e = self.frames.len() - 1;
                self.next()
            }
            Deallocate => {
                let Some(f) = self.frames.get(self.e) else {
                    return Err(self.fault("no frame to deallocate"));
                };
                let (ce, cp, old) = (f.ce, f.cp, self.e);
                self.cp = cp;
                self.e = ce;
                let protected = self.choices.last().map_or(1, |c| c.frames.max(1));
                if old >= protected {
                    self.frames.truncate(old);
                }
                self.next()
            }
            Call(k, _) => {
                self.cp = self.p + 1;
                self.call(k)
            }
            Execute(k) => self.call(k),
            Proceed => {
                if self.cp == SUCCESS {
                    return Ok(Status::Succeeded);
                }
                self.p = self.cp;
                Ok(Status::Running)
            }
            TryMeElse(l) => {
                self.push_choice(l);
                self.next()
            }
            RetryMeElse(l) => {
                match self.choices.last_mut() {
                    Some(c) => c.alt = l,
                    None => return Err(self.fault("retry without a choice point")),
                }
                self.next()
            }
            TrustMe => {
                self.pop_choice();
                self.next()
            }
            Try(l) => {
                self.push_choice(self.p + 1);
                self.p = l;
                Ok(Status::Running)
            }
            Retry(l) => {
                let next = self.p + 1;
                match self.choices.last_mut() {
                    Some(c) => c.alt = next,
                    None => return Err(self.fault("retry without a choice point")),
                }
                self.p = l;
                Ok(Status::Running)
            }
            Trust(l) => {
                self.pop_choice();
                self.p = l;
                Ok(Status::Running)
            }
            Jump(l) => {
                self.p = l;
                Ok(Status::Running)
            }
            IncrUniverse => {
                self.ui += 1;
                self.next()
            }
            DecrUniverse => {
                self.ui -= 1;
                self.next()
            }
            SetUnivTag(n) => {
                let View::Var(v, _) = self.store.view(self.reg(Reg::Y(n))) else {
                    return Err(self.fault("universal variable already bound"));
                };
                let g = self.store.new_gen(self.ui);
                self.store.bind_unchecked(v, g);
                self.next()
            }
            SetExistTag(n) => {
                if let View::Var(v, _) = self.store.view(self.reg(Reg::Y(n))) {
                    self.store.set_tag(v, self.ui);
                }
                self.next()
            }
            PushImplPoint(t, _) => {
                let Some(table) = self.image.tables.get(t).cloned() else {
                    return Err(self.fault(format!("no table t{}", t + 1)));
                };
                self.i = self.ctx.push_impl_point(table, self.e, self.i);
                self.next()
            }
            PopImplPoint => {
                let protected = self.choices.last().map_or(1, |c| c.records);
                self.i = self.ctx.pop_impl_point(self.i, protected).map_err(|e| self.fault(e.to_string()))?;
                self.next()
            }
            Initialize(r, m) => {
                let Some(a) = self.frames.get(self.ce).and_then(|f| f.slots.get(m as usize - 1)).copied() else {
                    return Err(self.fault(format!("closure slot {m} missing")));
                };
                self.set_reg(r, a);
                self.next()
            }
            TrustExt(k) => {
                let ci = self.ci;
                self.pop_choice();
                match self.ctx.next_clause_entry(ci, k as usize) {
                    Ok(Some((code, rec))) => {
                        self.ci = rec;
                        self.ce = self.ctx.record(rec).env;
                        self.p = code;
                        Ok(Status::Running)
                    }
                    Ok(None) => Ok(self.backtrack()),
                    Err(ContextError::OffsetOutOfRange { .. }) | Err(_) => {
                        Err(self.fault(format!("trust_ext {k} outside the table of record {ci}")))
                    }
                }
            }
            True => self.next(),
        }
    }

    /// Raw cell view for diagnostics.
    pub fn cell(&self, a: Addr) -> Cell {
        self.store.cell(a)
    }
}

impl Iterator for Machine {
    type Item = Result<Answer, MachineError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_solution().transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::compile;
    use crate::syntax::{parse_program, parse_query};

    fn run(prog: &str, query: &str) -> Vec<Vec<String>> {
        let p = parse_program(prog).unwrap();
        let q = parse_query(query).unwrap();
        let img = Arc::new(compile(&p, Some(&q)).unwrap());
        let cfg = MachineConfig { max_steps: Some(1_000_000), ..Default::default() };
        Machine::new(img, cfg).all().unwrap().iter().map(|a| a.lines(false)).collect()
    }

    #[test]
    fn facts_and_rules() {
        assert_eq!(run("p(a). p(b). q(X) :- p(X).", "q(X)."), [["X = a"], ["X = b"]]);
        assert_eq!(run("p(a).", "p(b)."), Vec::<Vec<String>>::new());
    }

    #[test]
    fn structures_both_directions() {
        let app = "app([],L,L). app([H|T],L,[H|R]) :- app(T,L,R).";
        assert_eq!(run(app, "app([1,2],[3],L)."), [["L = [1,2,3]"]]);
        assert_eq!(run(app, "app(X,Y,[1,2]).").len(), 3);
    }

    #[test]
    fn local_reverse() {
        let rev = "rev(L1,L2) :- (rev_aux([],L2), forall X forall L1 forall L3 \
                   (rev_aux([X|L1],L3) :- rev_aux(L1,[X|L3]))) => rev_aux(L1,[]).";
        assert_eq!(run(rev, "rev([1,2,3],L)."), [["L = [3,2,1]"]]);
    }

    #[test]
    fn universal_goal_and_tags() {
        assert_eq!(run("p(X).", "forall X p(X)."), [Vec::<String>::new()]);
        assert_eq!(run("p(a).", "forall X p(X)."), Vec::<Vec<String>>::new());
        // A variable from outside may not capture the generated constant.
        assert_eq!(run("p(X,X).", "exists Y forall X p(X,Y)."), Vec::<Vec<String>>::new());
        assert_eq!(run("p(X,X).", "forall X exists Y p(X,Y)."), [Vec::<String>::new()]);
    }

    #[test]
    fn disjunction_and_undefined() {
        assert_eq!(run("p(X) :- (eq(X,a) ; q(X)). q(b). eq(X,X).", "p(X)."), [["X = a"], ["X = b"]]);
        assert_eq!(run("p :- nothing.", "p."), Vec::<Vec<String>>::new());
    }

    #[test]
    fn step_limit() {
        let p = parse_program("loop :- loop.").unwrap();
        let q = parse_query("loop.").unwrap();
        let img = Arc::new(compile(&p, Some(&q)).unwrap());
        let mut m = Machine::new(img, MachineConfig { max_steps: Some(100), ..Default::default() });
        assert_eq!(m.next_solution(), Err(MachineError::StepLimit(100)));
    }
}
