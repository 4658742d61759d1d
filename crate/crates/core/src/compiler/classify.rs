//! Scope resolution and variable classification.
//!
//! Each clause (or query) is lowered to a small IR in which every variable
//! occurrence points at a [`VarInfo`]. Classification then decides which
//! variables live in environment slots (permanent) and which live in
//! registers (temporary).

use super::CompileError;
use crate::context::PredKey;
use crate::store::{Sym, Symbols};
use crate::syntax::{ClauseAst, GoalAst, TermAst};

pub(crate) type VarId = usize;

/// Where a variable is bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    /// Bound outside the clause; read from the closure environment.
    Free,
    /// Quantified over the whole clause.
    Clause,
    Exists,
    Forall,
    /// Free variable of the query.
    Answer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum OccKind {
    Init,
    Binding,
    Head,
    Body,
    Antecedent,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Occ {
    pub kind: OccKind,
    /// Atom index; head occurrences count as goal 1.
    pub goal: u32,
    pub nested: bool,
    pub tail: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct VarInfo {
    pub name: String,
    pub origin: Origin,
    /// Closure-environment slot for free variables.
    pub import: Option<u32>,
    pub occs: Vec<Occ>,
    /// Sequence number of the first occurrence of any kind.
    pub first_seen: usize,
    forall_depth: u32,
    pub under_forall: bool,
    pub in_antecedent: bool,
    pub permanent: bool,
    pub slot: u32,
}

impl VarInfo {
    /// First occurrence that actually mentions the variable in code.
    pub fn first_use(&self) -> Option<&Occ> {
        self.occs.iter().find(|o| matches!(o.kind, OccKind::Init | OccKind::Head | OccKind::Body))
    }

    /// Occurrences counted for void detection.
    pub fn use_count(&self) -> usize {
        self.occs.iter().filter(|o| matches!(o.kind, OccKind::Init | OccKind::Head | OccKind::Body)).count()
    }
}

#[derive(Clone, Debug)]
pub(crate) enum CTerm {
    Var(VarId),
    Con(Sym),
    Struct(Sym, Vec<CTerm>),
}

impl CTerm {
    pub fn mentions(&self, v: VarId) -> bool {
        match self {
            CTerm::Var(w) => *w == v,
            CTerm::Con(_) => false,
            CTerm::Struct(_, args) => args.iter().any(|a| a.mentions(v)),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum CGoal {
    True,
    Atom { key: PredKey, args: Vec<CTerm> },
    And(Box<CGoal>, Box<CGoal>),
    Or(Box<CGoal>, Box<CGoal>),
    Exists(VarId, Box<CGoal>),
    Forall(VarId, Box<CGoal>),
    Implies { clauses: Vec<ClauseAst>, captured: Vec<(String, VarId)>, body: Box<CGoal> },
}

/// A resolved and classified clause or query.
#[derive(Debug)]
pub(crate) struct Unit {
    pub vars: Vec<VarInfo>,
    pub head: Option<(PredKey, Vec<CTerm>)>,
    /// Free variables in initialization order.
    pub inits: Vec<VarId>,
    pub body: Option<CGoal>,
    /// Register numbering for temporaries starts above this.
    pub max_arity: u32,
    pub has_nontail_call: bool,
    /// Arguments of the first body atom, for register choice in the head.
    pub first_goal: Vec<CTerm>,
}

impl Unit {
    pub fn env_size(&self) -> u32 {
        self.vars.iter().filter(|v| v.permanent).count() as u32
    }

    pub fn needs_env(&self) -> bool {
        self.env_size() > 0 || self.has_nontail_call
    }
}

struct Resolver<'a> {
    syms: &'a mut Symbols,
    vars: Vec<VarInfo>,
    scope: Vec<(String, VarId)>,
    seq: usize,
    forall_depth: u32,
    atoms: u32,
    max_arity: u32,
    has_nontail_call: bool,
    first_goal: Option<Vec<CTerm>>,
}

impl<'a> Resolver<'a> {
    fn new(syms: &'a mut Symbols) -> Self {
        Resolver {
            syms,
            vars: Vec::new(),
            scope: Vec::new(),
            seq: 0,
            forall_depth: 0,
            atoms: 0,
            max_arity: 0,
            has_nontail_call: false,
            first_goal: None,
        }
    }

    fn declare(&mut self, name: &str, origin: Origin, import: Option<u32>) -> VarId {
        let id = self.vars.len();
        self.vars.push(VarInfo {
            name: name.to_string(),
            origin,
            import,
            occs: Vec::new(),
            first_seen: usize::MAX,
            forall_depth: self.forall_depth,
            under_forall: false,
            in_antecedent: false,
            permanent: false,
            slot: 0,
        });
        self.scope.push((name.to_string(), id));
        id
    }

    fn lookup(&self, name: &str) -> Result<VarId, CompileError> {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, id)| *id)
            .ok_or_else(|| CompileError::Unbound(name.to_string()))
    }

    fn occur(&mut self, v: VarId, occ: Occ) {
        let info = &mut self.vars[v];
        if info.first_seen == usize::MAX {
            info.first_seen = self.seq;
        }
        self.seq += 1;
        if self.forall_depth > info.forall_depth {
            info.under_forall = true;
        }
        if occ.kind == OccKind::Antecedent {
            info.in_antecedent = true;
        }
        info.occs.push(occ);
    }

    fn term(&mut self, t: &TermAst, kind: OccKind, goal: u32, nested: bool, tail: bool) -> Result<CTerm, CompileError> {
        Ok(match t {
            TermAst::Var(name) => {
                let v = self.lookup(name)?;
                self.occur(v, Occ { kind, goal, nested, tail });
                CTerm::Var(v)
            }
            TermAst::Const(c) => CTerm::Con(self.syms.intern(c)),
            TermAst::Struct(f, args) => {
                let f = self.syms.intern(f);
                let args = args.iter().map(|a| self.term(a, kind, goal, true, tail)).collect::<Result<_, _>>()?;
                CTerm::Struct(f, args)
            }
        })
    }

    fn atom(
        &mut self,
        t: &TermAst,
        kind: OccKind,
        goal: u32,
        tail: bool,
    ) -> Result<(PredKey, Vec<CTerm>), CompileError> {
        let (name, arity) =
            t.functor().ok_or_else(|| CompileError::Invalid("variable in predicate position".into()))?;
        let key = PredKey::new(self.syms.intern(name), arity as u32);
        self.max_arity = self.max_arity.max(arity as u32);
        let args = t.args().iter().map(|a| self.term(a, kind, goal, false, tail)).collect::<Result<_, _>>()?;
        Ok((key, args))
    }

    fn goal(&mut self, g: &GoalAst, tail: bool) -> Result<CGoal, CompileError> {
        Ok(match g {
            GoalAst::True => CGoal::True,
            GoalAst::Atom(t) => {
                self.atoms += 1;
                let index = self.atoms;
                let (key, args) = self.atom(t, OccKind::Body, index, tail)?;
                if !tail {
                    self.has_nontail_call = true;
                }
                if index == 1 {
                    self.first_goal = Some(args.clone());
                }
                CGoal::Atom { key, args }
            }
            GoalAst::And(a, b) => {
                let a = self.goal(a, false)?;
                CGoal::And(Box::new(a), Box::new(self.goal(b, tail)?))
            }
            GoalAst::Or(a, b) => {
                let a = self.goal(a, tail)?;
                CGoal::Or(Box::new(a), Box::new(self.goal(b, tail)?))
            }
            GoalAst::Exists(name, body) => {
                let v = self.declare(name, Origin::Exists, None);
                self.occur(v, Occ { kind: OccKind::Binding, goal: 0, nested: false, tail });
                let body = self.goal(body, tail)?;
                self.scope.pop();
                CGoal::Exists(v, Box::new(body))
            }
            GoalAst::Forall(name, body) => {
                let v = self.declare(name, Origin::Forall, None);
                self.occur(v, Occ { kind: OccKind::Binding, goal: 0, nested: false, tail: false });
                self.forall_depth += 1;
                let body = self.goal(body, false)?;
                self.forall_depth -= 1;
                self.scope.pop();
                CGoal::Forall(v, Box::new(body))
            }
            GoalAst::Implies(clauses, body) => {
                let mut captured: Vec<(String, VarId)> = Vec::new();
                for c in clauses {
                    for name in &c.free_vars {
                        let v = self.lookup(name)?;
                        self.occur(v, Occ { kind: OccKind::Antecedent, goal: 0, nested: false, tail: false });
                        if !captured.iter().any(|(n, _)| n == name) {
                            captured.push((name.clone(), v));
                        }
                    }
                }
                let body = self.goal(body, false)?;
                CGoal::Implies { clauses: clauses.clone(), captured, body: Box::new(body) }
            }
        })
    }

    fn finish(self, head: Option<(PredKey, Vec<CTerm>)>, inits: Vec<VarId>, body: Option<CGoal>) -> Unit {
        let mut unit = Unit {
            vars: self.vars,
            head,
            inits,
            body,
            max_arity: self.max_arity,
            has_nontail_call: self.has_nontail_call,
            first_goal: self.first_goal.unwrap_or_default(),
        };
        classify_vars(&mut unit.vars);
        unit
    }
}

fn is_permanent(v: &VarInfo) -> bool {
    match v.origin {
        Origin::Forall | Origin::Answer => return true,
        _ if v.in_antecedent => return true,
        Origin::Free => {
            return v.occs.iter().any(|o| matches!(o.kind, OccKind::Head | OccKind::Body) && o.goal > 1);
        }
        Origin::Clause | Origin::Exists => {}
    }
    if v.under_forall {
        return true;
    }
    let mut goals: Vec<u32> =
        v.occs.iter().filter(|o| matches!(o.kind, OccKind::Head | OccKind::Body)).map(|o| o.goal.max(1)).collect();
    goals.sort_unstable();
    goals.dedup();
    if goals.len() > 1 {
        return true;
    }
    match v.first_use() {
        None => false,
        Some(o) => !(o.kind == OccKind::Head || o.nested || o.tail),
    }
}

fn classify_vars(vars: &mut [VarInfo]) {
    for v in vars.iter_mut() {
        v.permanent = is_permanent(v);
    }
    let mut perms: Vec<usize> = (0..vars.len()).filter(|&i| vars[i].permanent).collect();
    perms.sort_by_key(|&i| vars[i].first_seen);
    for (n, i) in perms.into_iter().enumerate() {
        vars[i].slot = n as u32 + 1;
    }
}

/// Resolves and classifies a program clause. `imports` maps the clause's
/// free variables to slots of the enclosing environment.
pub(crate) fn resolve_clause(
    c: &ClauseAst,
    imports: &[(String, u32)],
    syms: &mut Symbols,
) -> Result<Unit, CompileError> {
    let mut r = Resolver::new(syms);
    let mut inits = Vec::new();
    for name in &c.free_vars {
        let slot = imports.iter().find(|(n, _)| n == name).map(|(_, s)| *s);
        let v = r.declare(name, Origin::Free, slot);
        inits.push(v);
    }
    for v in &inits {
        r.occur(*v, Occ { kind: OccKind::Init, goal: 1, nested: false, tail: false });
    }
    for name in c.quantified() {
        r.declare(name, Origin::Clause, None);
    }
    let head = r.atom(&c.head, OccKind::Head, 1, false)?;
    let body = match &c.body {
        Some(b) => Some(r.goal(b, true)?),
        None => None,
    };
    Ok(r.finish(Some(head), inits, body))
}

pub(crate) fn resolve_query(goal: &GoalAst, answer_vars: &[String], syms: &mut Symbols) -> Result<Unit, CompileError> {
    let mut r = Resolver::new(syms);
    for name in answer_vars {
        r.declare(name, Origin::Answer, None);
    }
    let body = r.goal(goal, false)?;
    Ok(r.finish(None, Vec::new(), Some(body)))
}

/// Classification of one clause variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarClass {
    pub name: String,
    pub origin: Origin,
    pub permanent: bool,
    /// 1-based environment slot of a permanent variable.
    pub slot: Option<u32>,
}

/// Classifies the variables of a clause, in declaration order.
pub fn classify(clause: &ClauseAst) -> Result<Vec<VarClass>, CompileError> {
    let mut syms = Symbols::new();
    let unit = resolve_clause(clause, &[], &mut syms)?;
    Ok(unit
        .vars
        .iter()
        .map(|v| VarClass {
            name: v.name.clone(),
            origin: v.origin,
            permanent: v.permanent,
            slot: v.permanent.then_some(v.slot),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_program, GoalAst};

    fn perms(src: &str) -> Vec<(String, u32)> {
        let p = parse_program(src).unwrap();
        let mut out: Vec<(String, u32)> =
            classify(&p.clauses[0]).unwrap().into_iter().filter_map(|v| v.slot.map(|s| (v.name, s))).collect();
        out.sort_by_key(|p| p.1);
        out
    }

    fn names(v: &[(String, u32)]) -> Vec<&str> {
        v.iter().map(|(n, _)| n.as_str()).collect()
    }

    #[test]
    fn chain_rule_variables() {
        // Z spans two goals; X and Y stay in registers.
        assert_eq!(names(&perms("p(X,Y) :- q(X,Z), r(Z,Y).")), ["Y", "Z"]);
        assert_eq!(names(&perms("p(X) :- q(X).")), Vec::<&str>::new());
    }

    #[test]
    fn antecedent_and_quantified_variables() {
        let src = "p(Y) :- (forall U exists Z ((forall W (d1(Y,W,Z) :- r(Y,W))), \
                   (forall W (d2(Z,W) :- d1(Z,W,W)))) => exists V g(Z,U,Y,V)), h(Y).";
        assert_eq!(perms(src), [("Y".into(), 1), ("U".into(), 2), ("Z".into(), 3), ("V".into(), 4)]);
        let rev = "rev(L1,L2) :- (rev_aux([],L2), forall X forall L1 forall L3 \
                   (rev_aux([X|L1],L3) :- rev_aux(L1,[X|L3]))) => rev_aux(L1,[]).";
        assert_eq!(names(&perms(rev)), ["L2"]);
    }

    #[test]
    fn under_universal_goal() {
        // X is bound at clause level but used below a universal goal.
        assert_eq!(names(&perms("p :- forall U q(U,X).")), ["U", "X"]);
        // Existential inside the universal goal, first in a structure: temporary.
        assert_eq!(names(&perms("p :- forall U exists Z q(U,f(Z)).")), ["U"]);
    }

    #[test]
    fn free_variables_of_local_clauses() {
        let p = parse_program("p :- (forall A forall B (r(A) :- s(A,B), t(B))) => q.").unwrap();
        let GoalAst::Implies(ds, _) = p.clauses[0].body.as_ref().unwrap() else { panic!() };
        let cls = classify(&ds[0]).unwrap();
        assert!(cls.iter().all(|c| c.origin == Origin::Clause));
        assert_eq!(cls.iter().filter(|c| c.permanent).count(), 1);
        let p = parse_program("p(X) :- (r(A) :- s(A,X), t(X)) => q.").unwrap();
        let GoalAst::Implies(ds, _) = p.clauses[0].body.as_ref().unwrap() else { panic!() };
        let cls = classify(&ds[0]).unwrap();
        let x = cls.iter().find(|c| c.name == "X").unwrap();
        assert_eq!((x.origin, x.permanent), (Origin::Free, true));
    }
}
