//! Reference interpreter over decorated goals.
//!
//! A goal is solved together with the program context it may use and the
//! universe index it runs in. Goals are kept as a linked continuation of
//! frames, leftmost first; alternatives live on a choice stack that records
//! trail, heap and context marks.
//!
//! Transition numbers in the trace: 0 `true`, 1 conjunction, 2 disjunction,
//! 3 existential, 4 implication, 5 universal, 6 backchaining on a rule,
//! 7 backchaining on a fact.

use crate::context::{Context, ImplTable, PredKey, RecordId, ROOT};
use crate::store::{Addr, Store, Sym, Symbols, Tag, Term, UnifyFailure, VarNaming};
use crate::syntax::{print_goal, print_term, ClauseAst, GoalAst, ProgramAst, QueryAst, TermAst};
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Debug, Default)]
pub struct SolverConfig {
    /// Longest chain of atomic-goal expansions allowed on one path.
    pub max_depth: Option<u32>,
    pub max_solutions: Option<usize>,
    /// Write trace lines to standard error unless a tracer is installed.
    pub trace: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("depth limit of {0} exceeded")]
    DepthLimit(u32),
    #[error("step limit of {0} exceeded")]
    StepLimit(u64),
    #[error("internal fault: {0}")]
    Fault(String),
}

impl EngineError {
    pub fn is_limit(&self) -> bool {
        matches!(self, EngineError::DepthLimit(_) | EngineError::StepLimit(_))
    }
}

/// Bindings of the reported query variables, in first-occurrence order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Answer {
    pub bindings: Vec<(String, Term)>,
}

impl Answer {
    pub fn get(&self, name: &str) -> Option<&Term> {
        self.bindings.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// One `Var = term` line per binding.
    pub fn lines(&self, show_tags: bool) -> Vec<String> {
        self.bindings.iter().map(|(n, t)| format!("{n} = {}", print_term(t, show_tags))).collect()
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.lines(false).join(", "))
    }
}

pub type Tracer = Box<dyn FnMut(&str) + Send>;

/// Interned variable name.
type VarId = u32;

#[derive(Debug)]
enum RTerm {
    Var(VarId),
    Con(Sym),
    Struct(Sym, Vec<RTerm>),
}

#[derive(Debug)]
enum RGoal {
    True,
    Atom(PredKey, RTerm),
    And(Arc<RGoal>, Arc<RGoal>),
    Or(Arc<RGoal>, Arc<RGoal>, Arc<str>),
    Exists(VarId, Arc<RGoal>, Arc<str>),
    Forall(VarId, Arc<RGoal>, Arc<str>),
    Implies(Arc<ImplTable<Clauses>>, Arc<RGoal>, Arc<str>),
}

#[derive(Debug)]
struct RClause {
    /// Explicit and implicit clause-level quantified variables.
    quantified: Vec<VarId>,
    head: RTerm,
    body: Option<Arc<RGoal>>,
}

type Clauses = Arc<Vec<RClause>>;

/// Persistent map from variable names to heap addresses.
#[derive(Clone, Debug, Default)]
pub struct Env(Option<Arc<EnvNode>>);

#[derive(Debug)]
pub struct EnvNode {
    var: VarId,
    addr: Addr,
    next: Env,
}

impl Env {
    fn bind(&self, var: VarId, addr: Addr) -> Env {
        Env(Some(Arc::new(EnvNode { var, addr, next: self.clone() })))
    }

    fn lookup(&self, var: VarId) -> Option<Addr> {
        let mut cur = &self.0;
        while let Some(n) = cur {
            if n.var == var {
                return Some(n.addr);
            }
            cur = &n.next.0;
        }
        None
    }
}

/// Translation of source ASTs into runtime goals with interned names.
struct Lowering<'a> {
    symbols: &'a mut Symbols,
    vars: HashMap<String, VarId>,
    var_names: Vec<String>,
}

impl Lowering<'_> {
    fn var(&mut self, name: &str) -> VarId {
        if let Some(&v) = self.vars.get(name) {
            return v;
        }
        let v = self.var_names.len() as VarId;
        self.vars.insert(name.to_string(), v);
        self.var_names.push(name.to_string());
        v
    }

    fn term(&mut self, t: &TermAst) -> RTerm {
        match t {
            TermAst::Var(v) => RTerm::Var(self.var(v)),
            TermAst::Const(c) => RTerm::Con(self.symbols.intern(c)),
            TermAst::Struct(f, args) => {
                RTerm::Struct(self.symbols.intern(f), args.iter().map(|a| self.term(a)).collect())
            }
        }
    }

    fn key(&mut self, t: &TermAst) -> PredKey {
        let (name, arity) = t.functor().expect("atoms are rigid");
        PredKey::new(self.symbols.intern(name), arity as u32)
    }

    fn goal(&mut self, g: &GoalAst) -> Arc<RGoal> {
        Arc::new(match g {
            GoalAst::True => RGoal::True,
            GoalAst::Atom(t) => RGoal::Atom(self.key(t), self.term(t)),
            GoalAst::And(a, b) => RGoal::And(self.goal(a), self.goal(b)),
            GoalAst::Or(a, b) => RGoal::Or(self.goal(a), self.goal(b), print_goal(g).into()),
            GoalAst::Exists(v, b) => RGoal::Exists(self.var(v), self.goal(b), print_goal(g).into()),
            GoalAst::Forall(v, b) => RGoal::Forall(self.var(v), self.goal(b), print_goal(g).into()),
            GoalAst::Implies(ds, b) => {
                let table = Arc::new(ImplTable::new(self.group(ds)).expect("grouping yields distinct keys"));
                RGoal::Implies(table, self.goal(b), print_goal(g).into())
            }
        })
    }

    fn clause(&mut self, c: &ClauseAst) -> RClause {
        RClause {
            quantified: c.quantified().map(|v| self.var(v)).collect(),
            head: self.term(&c.head),
            body: c.body.as_ref().map(|b| self.goal(b)),
        }
    }

    /// Clauses grouped per predicate in order of first occurrence.
    fn group(&mut self, ds: &[ClauseAst]) -> Vec<(PredKey, Clauses)> {
        let mut groups: Vec<(PredKey, Vec<RClause>)> = Vec::new();
        for d in ds {
            let k = self.key(&d.head);
            let c = self.clause(d);
            match groups.iter_mut().find(|(g, _)| *g == k) {
                Some((_, cs)) => cs.push(c),
                None => groups.push((k, vec![c])),
            }
        }
        groups.into_iter().map(|(k, cs)| (k, Arc::new(cs))).collect()
    }
}

enum Work {
    Goal(Arc<RGoal>),
    /// Leave the implication point `RecordId` after its consequent succeeded.
    Pop(RecordId),
}

struct Frame {
    work: Work,
    env: Env,
    ctx: RecordId,
    universe: Tag,
    depth: u32,
    next: Option<Arc<Frame>>,
}

impl Drop for Frame {
    fn drop(&mut self) {
        let mut next = self.next.take();
        while let Some(f) = next {
            match Arc::try_unwrap(f) {
                Ok(mut f) => next = f.next.take(),
                Err(_) => break,
            }
        }
    }
}

/// Remaining candidates for one atomic goal.
#[derive(Clone)]
struct ClauseCursor {
    goal: Addr,
    key: PredKey,
    record: RecordId,
    clauses: Clauses,
    index: usize,
    ctx: RecordId,
    universe: Tag,
    depth: u32,
    rest: Option<Arc<Frame>>,
}

enum Alternative {
    Goals(Option<Arc<Frame>>),
    Clauses(ClauseCursor),
}

struct Choice {
    alt: Alternative,
    trail: usize,
    heap: Addr,
    records: usize,
}

/// Outcome of one [`Solver::step`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Continue,
    Backtracked,
    Answer(Answer),
    Exhausted,
}

pub struct Solver {
    store: Store,
    context: Context<Clauses, Env>,
    cont: Option<Arc<Frame>>,
    choices: Vec<Choice>,
    failing: bool,
    done: bool,
    answer_vars: Vec<(String, Addr)>,
    current_ctx: RecordId,
    solutions: usize,
    expansions: u64,
    cfg: SolverConfig,
    tracer: Option<Tracer>,
}

impl Solver {
    pub fn new(program: &ProgramAst, query: &QueryAst, cfg: SolverConfig) -> Solver {
        let mut symbols = Symbols::new();
        let mut low = Lowering { symbols: &mut symbols, vars: HashMap::new(), var_names: Vec::new() };
        let globals = low.group(&program.clauses);
        let goal = low.goal(&query.goal);
        let answer_ids: Vec<(String, VarId)> = query.answer_vars.iter().map(|v| (v.clone(), low.var(v))).collect();
        let mut store = Store::with_symbols(symbols);
        let mut context = Context::new(Env::default());
        for (k, cs) in globals {
            context.define_global(k, cs);
        }
        let mut env = Env::default();
        let mut answer_vars = Vec::new();
        for (name, id) in answer_ids {
            let a = store.new_var(1);
            env = env.bind(id, a);
            if !crate::syntax::is_anonymous(&name) {
                answer_vars.push((name, a));
            }
        }
        let tracer: Option<Tracer> = cfg.trace.then(|| Box::new(|l: &str| eprintln!("{l}")) as Tracer);
        Solver {
            store,
            context,
            cont: Some(Arc::new(Frame { work: Work::Goal(goal), env, ctx: ROOT, universe: 1, depth: 0, next: None })),
            choices: Vec::new(),
            failing: false,
            done: false,
            answer_vars,
            current_ctx: ROOT,
            solutions: 0,
            expansions: 0,
            cfg,
            tracer,
        }
    }

    pub fn set_tracer(&mut self, t: Option<Tracer>) {
        self.tracer = t;
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// Atomic-goal expansions performed so far.
    pub fn expansions(&self) -> u64 {
        self.expansions
    }

    /// Whether `name/arity` has a definition in the context the next goal runs in.
    pub fn resolves(&self, name: &str, arity: u32) -> bool {
        match self.store.symbols().get(name) {
            Some(s) => self.context.resolves(PredKey::new(s, arity), self.current_ctx),
            None => false,
        }
    }

    fn trace(&mut self, line: impl FnOnce(&Store) -> String) {
        if let Some(t) = self.tracer.as_mut() {
            t(&line(&self.store));
        }
    }

    pub fn next_solution(&mut self) -> Result<Option<Answer>, EngineError> {
        loop {
            match self.step()? {
                Step::Answer(a) => return Ok(Some(a)),
                Step::Exhausted => return Ok(None),
                Step::Continue | Step::Backtracked => {}
            }
        }
    }

    /// Every remaining answer, honouring `max_solutions`.
    pub fn all(&mut self) -> Result<Vec<Answer>, EngineError> {
        let mut out = Vec::new();
        while let Some(a) = self.next_solution()? {
            out.push(a);
        }
        Ok(out)
    }

    pub fn step(&mut self) -> Result<Step, EngineError> {
        if self.done {
            return Ok(Step::Exhausted);
        }
        if self.failing {
            self.failing = false;
            return Ok(if self.backtrack() { Step::Backtracked } else { Step::Exhausted });
        }
        let Some(frame) = self.cont.take() else {
            return Ok(self.answer());
        };
        self.current_ctx = frame.ctx;
        match &frame.work {
            Work::Pop(rec) => {
                let protected = self.choices.last().map_or(1, |c| c.records);
                self.context.pop_impl_point(*rec, protected).map_err(|e| EngineError::Fault(e.to_string()))?;
                self.cont = frame.next.clone();
            }
            Work::Goal(g) => {
                let g = g.clone();
                self.solve(&frame, &g)?;
            }
        }
        Ok(Step::Continue)
    }

    fn answer(&mut self) -> Step {
        let mut naming = VarNaming::new();
        let bindings = self.answer_vars.iter().map(|(n, a)| (n.clone(), self.store.resolve(*a, &mut naming))).collect();
        self.solutions += 1;
        if self.cfg.max_solutions.is_some_and(|m| self.solutions >= m) {
            self.done = true;
        } else {
            self.failing = true;
        }
        Step::Answer(Answer { bindings })
    }

    fn then(frame: &Frame, work: Work, env: Env, ctx: RecordId, universe: Tag, next: Option<Arc<Frame>>) -> Arc<Frame> {
        Arc::new(Frame { work, env, ctx, universe, depth: frame.depth, next })
    }

    fn solve(&mut self, f: &Frame, g: &Arc<RGoal>) -> Result<(), EngineError> {
        let (env, ctx, u) = (&f.env, f.ctx, f.universe);
        match &**g {
            RGoal::True => {
                self.trace(|_| format!("RULE 0  I={u}  goal=true"));
                self.cont = f.next.clone();
            }
            RGoal::And(a, b) => {
                self.trace(|_| format!("RULE 1  I={u}  goal=conjunction"));
                let second = Self::then(f, Work::Goal(b.clone()), env.clone(), ctx, u, f.next.clone());
                self.cont = Some(Self::then(f, Work::Goal(a.clone()), env.clone(), ctx, u, Some(second)));
            }
            RGoal::Or(a, b, text) => {
                self.trace(|_| format!("RULE 2  I={u}  goal={text}"));
                let right = Self::then(f, Work::Goal(b.clone()), env.clone(), ctx, u, f.next.clone());
                self.push_choice(Alternative::Goals(Some(right)));
                self.cont = Some(Self::then(f, Work::Goal(a.clone()), env.clone(), ctx, u, f.next.clone()));
            }
            RGoal::Exists(v, body, text) => {
                self.trace(|_| format!("RULE 3  I={u}  goal={text}"));
                let a = self.store.new_var(u);
                self.cont = Some(Self::then(f, Work::Goal(body.clone()), env.bind(*v, a), ctx, u, f.next.clone()));
            }
            RGoal::Forall(v, body, text) => {
                self.trace(|_| format!("RULE 5  I={u}  goal={text}"));
                let c = self.store.new_gen(u + 1);
                self.cont = Some(Self::then(f, Work::Goal(body.clone()), env.bind(*v, c), ctx, u + 1, f.next.clone()));
            }
            RGoal::Implies(table, body, text) => {
                self.trace(|_| format!("RULE 4  I={u}  goal={text}"));
                let rec = self.context.push_impl_point(table.clone(), env.clone(), ctx);
                let pop = Self::then(f, Work::Pop(rec), env.clone(), ctx, u, f.next.clone());
                self.cont = Some(Self::then(f, Work::Goal(body.clone()), env.clone(), rec, u, Some(pop)));
            }
            RGoal::Atom(key, t) => {
                if let Some(max) = self.cfg.max_depth {
                    if f.depth >= max {
                        self.done = true;
                        return Err(EngineError::DepthLimit(max));
                    }
                }
                let goal = self.build(t, env)?;
                match self.context.lookup_procedure(*key, ctx) {
                    None => {
                        self.trace(|s| format!("FAIL undefined  I={u}  goal={}", show(s, goal)));
                        self.failing = true;
                    }
                    Some((clauses, record)) => {
                        let cursor = ClauseCursor {
                            goal,
                            key: *key,
                            record,
                            clauses,
                            index: 0,
                            ctx,
                            universe: u,
                            depth: f.depth,
                            rest: f.next.clone(),
                        };
                        self.try_clauses(cursor)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn build(&mut self, t: &RTerm, env: &Env) -> Result<Addr, EngineError> {
        Ok(match t {
            RTerm::Var(v) => env.lookup(*v).ok_or_else(|| EngineError::Fault(format!("unbound variable #{v}")))?,
            RTerm::Con(s) => self.store.new_con(*s),
            RTerm::Struct(f, args) => {
                let mut addrs = Vec::with_capacity(args.len());
                for a in args {
                    addrs.push(self.build(a, env)?);
                }
                let h = self.store.new_fun(*f, args.len() as u32);
                for a in addrs {
                    self.store.push_arg(a);
                }
                h
            }
        })
    }

    /// Next (clauses, record) after exhausting `record`, following `nc`.
    fn continuation(&self, c: &ClauseCursor) -> Option<(Clauses, RecordId)> {
        if c.record == ROOT {
            return None;
        }
        let table = self.context.record(c.record).table.as_ref()?;
        let offset = table.offset(c.key)?;
        self.context.next_clause_entry(c.record, offset).ok().flatten()
    }

    fn try_clauses(&mut self, mut c: ClauseCursor) -> Result<(), EngineError> {
        // Skip exhausted records along the chain.
        while c.index >= c.clauses.len() {
            match self.continuation(&c) {
                Some((clauses, record)) => {
                    c.clauses = clauses;
                    c.record = record;
                    c.index = 0;
                }
                None => {
                    self.failing = true;
                    return Ok(());
                }
            }
        }
        let more = c.index + 1 < c.clauses.len() || self.continuation(&c).is_some();
        if more {
            let mut alt = c.clone();
            alt.index += 1;
            self.push_choice(Alternative::Clauses(alt));
        }
        let clauses = c.clauses.clone();
        let clause = &clauses[c.index];
        let mut env = self.context.record(c.record).env.clone();
        for v in &clause.quantified {
            let a = self.store.new_var(c.universe);
            env = env.bind(*v, a);
        }
        let head = self.build(&clause.head, &env)?;
        let u = c.universe;
        match self.store.unify(c.goal, head) {
            Err(fail) => {
                self.trace(|s| fail_line(s, u, &fail));
                self.failing = true;
            }
            Ok(()) => {
                self.expansions += 1;
                let rule = if clause.body.is_some() { 6 } else { 7 };
                let goal = c.goal;
                self.trace(|s| format!("RULE {rule}  I={u}  goal={}", show(s, goal)));
                self.cont = match &clause.body {
                    None => c.rest,
                    Some(b) => Some(Arc::new(Frame {
                        work: Work::Goal(b.clone()),
                        env,
                        ctx: c.ctx,
                        universe: u,
                        depth: c.depth + 1,
                        next: c.rest,
                    })),
                };
            }
        }
        Ok(())
    }

    fn push_choice(&mut self, alt: Alternative) {
        self.choices.push(Choice {
            alt,
            trail: self.store.trail_mark(),
            heap: self.store.heap_top(),
            records: self.context.len(),
        });
    }

    fn backtrack(&mut self) -> bool {
        let Some(ch) = self.choices.pop() else {
            self.done = true;
            return false;
        };
        self.store.undo_to(ch.trail);
        self.store.truncate_heap(ch.heap);
        self.context.restore(ch.records);
        match ch.alt {
            Alternative::Goals(frame) => {
                self.current_ctx = frame.as_ref().map_or(ROOT, |f| f.ctx);
                self.cont = frame;
            }
            Alternative::Clauses(cursor) => {
                self.current_ctx = cursor.ctx;
                // A fault cannot arise here: the goal and clauses were built before.
                if let Err(e) = self.try_clauses(cursor) {
                    self.trace(|_| format!("FAULT {e}"));
                    self.failing = true;
                }
            }
        }
        true
    }
}

impl Iterator for Solver {
    type Item = Result<Answer, EngineError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_solution().transpose()
    }
}

fn show(s: &Store, a: Addr) -> String {
    print_term(&s.resolve(a, &mut VarNaming::by_address()), false)
}

/// `FAIL <reason>  I=<n>  <left^tag> = <right^tag>`.
pub(crate) fn fail_line(s: &Store, universe: Tag, f: &UnifyFailure) -> String {
    let mut naming = VarNaming::by_address();
    let l = print_term(&s.resolve(f.left, &mut naming), true);
    let r = print_term(&s.resolve(f.right, &mut naming), true);
    format!("FAIL {}  I={universe}  {l} = {r}", f.reason)
}

/// Convenience: parse-free entry point collecting every answer.
pub fn solve_all(program: &ProgramAst, query: &QueryAst, cfg: SolverConfig) -> Result<Vec<Answer>, EngineError> {
    Solver::new(program, query, cfg).all()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_program, parse_query};
    use std::sync::Mutex;

    fn answers(prog: &str, query: &str) -> Vec<Vec<String>> {
        let p = parse_program(prog).unwrap();
        let q = parse_query(query).unwrap();
        let cfg = SolverConfig { max_depth: Some(200), ..Default::default() };
        solve_all(&p, &q, cfg).unwrap().iter().map(|a| a.lines(false)).collect()
    }

    const REV_LOCAL: &str = "rev(L1,L2) :- (rev_aux([],L2), \
        (forall X forall L1 forall L3 (rev_aux([X|L1],L3) :- rev_aux(L1,[X|L3])))) => rev_aux(L1,[]).";

    #[test]
    fn mixed_quantifiers() {
        assert!(answers("p(X,X).", "exists X forall Y p(X,Y).").is_empty());
        assert_eq!(answers("p(X,X).", "forall Y exists X p(X,Y).").len(), 1);
    }

    #[test]
    fn tied_variable() {
        let prog = "q(a). g(X) :- q(X), p(b).";
        assert!(answers(prog, "exists X (p(X) => g(X)).").is_empty());
    }

    #[test]
    fn hypothetical_scope() {
        assert!(answers("", "(q :- forall X p(X)) => exists X (p(X) => q).").is_empty());
    }

    #[test]
    fn local_rev() {
        assert_eq!(answers(REV_LOCAL, "rev([1,2,3], L)."), vec![vec!["L = [3,2,1]".to_string()]]);
    }

    #[test]
    fn member_enumeration() {
        let prog = "member(X, [X|T]). member(X, [Y|T]) :- member(X, T).";
        let got = answers(prog, "member(X, [a,b,c]).");
        assert_eq!(got, vec![vec!["X = a"], vec!["X = b"], vec!["X = c"]]);
    }

    #[test]
    fn exhausted_is_idempotent() {
        let p = parse_program("p(a).").unwrap();
        let q = parse_query("p(b).").unwrap();
        let mut s = Solver::new(&p, &q, SolverConfig::default());
        assert_eq!(s.next_solution().unwrap(), None);
        assert_eq!(s.next_solution().unwrap(), None);
    }

    #[test]
    fn depth_limit_is_distinct_from_failure() {
        let p = parse_program("loop :- loop.").unwrap();
        let q = parse_query("loop.").unwrap();
        let cfg = SolverConfig { max_depth: Some(10), ..Default::default() };
        assert_eq!(solve_all(&p, &q, cfg), Err(EngineError::DepthLimit(10)));
    }

    #[test]
    fn local_clauses_shadow_global_ones_first() {
        let prog = "r(global).";
        let got = answers(prog, "(r(local) => r(X)).");
        assert_eq!(got, vec![vec!["X = local"], vec!["X = global"]]);
    }

    #[test]
    fn trace_reports_tag_conflict() {
        let p = parse_program("p(d(Z)) :- q(Z).").unwrap();
        let q = parse_query("exists X forall Y (q(Y) => p(X)).").unwrap();
        let lines = Arc::new(Mutex::new(Vec::new()));
        let sink = lines.clone();
        let mut s = Solver::new(&p, &q, SolverConfig::default());
        s.set_tracer(Some(Box::new(move |l: &str| sink.lock().unwrap().push(l.to_string()))));
        assert_eq!(s.next_solution().unwrap(), None);
        let lines = lines.lock().unwrap();
        assert!(lines.iter().any(|l| l.starts_with("FAIL tag-conflict") && l.contains("^1 = c!2!")), "{lines:?}");
        assert!(lines.iter().any(|l| l.starts_with("RULE 5  I=1")));
    }

    #[test]
    fn anonymous_query_variables_not_reported() {
        assert_eq!(answers("p(a, b).", "p(_, X)."), vec![vec!["X = b"]]);
    }
}
