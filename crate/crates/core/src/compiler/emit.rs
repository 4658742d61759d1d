//! Instruction selection for classified clauses and predicate sequencing.

use super::classify::{resolve_clause, resolve_query, CGoal, CTerm, OccKind, Unit, VarId};
use super::CompileError;
use crate::context::PredKey;
use crate::machine::{Instr, Label, Reg};
use crate::store::{Sym, Symbols};
use crate::syntax::{ClauseAst, QueryAst};

/// Reported answer variables and their query-frame slots.
pub(crate) type AnswerSlots = Vec<(String, u32)>;

#[derive(Clone, Copy, Debug)]
pub(crate) enum Item {
    Label(Label),
    Ins(Instr),
}

pub(crate) struct Compiler {
    pub syms: Symbols,
    pub label_names: Vec<String>,
    pub tables: Vec<Vec<(PredKey, Label)>>,
    pub unit_code: Vec<Item>,
}

/// Groups clauses by predicate, keeping first-occurrence order.
pub(crate) fn group<'a>(clauses: &'a [ClauseAst], syms: &mut Symbols) -> Vec<(PredKey, Vec<&'a ClauseAst>)> {
    let mut out: Vec<(PredKey, Vec<&ClauseAst>)> = Vec::new();
    for c in clauses {
        let (name, arity) = c.key();
        let key = PredKey::new(syms.intern(name), arity as u32);
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, cs)) => cs.push(c),
            None => out.push((key, vec![c])),
        }
    }
    out
}

impl Compiler {
    pub fn new() -> Compiler {
        Compiler { syms: Symbols::new(), label_names: Vec::new(), tables: Vec::new(), unit_code: Vec::new() }
    }

    pub fn new_label(&mut self, name: String) -> Label {
        self.label_names.push(name);
        self.label_names.len() - 1
    }

    fn internal_label(&mut self) -> Label {
        let n = self.label_names.len();
        self.new_label(format!("L{n}"))
    }

    pub fn pred_name(&self, key: PredKey) -> String {
        format!("{}/{}", self.syms.name(key.name), key.arity)
    }

    /// Global predicate: plain clause chain without a final extension.
    pub fn global_predicate(
        &mut self,
        key: PredKey,
        clauses: &[&ClauseAst],
    ) -> Result<(Label, Vec<Item>), CompileError> {
        let entry = self.new_label(self.pred_name(key));
        let mut out = vec![Item::Label(entry)];
        let n = clauses.len();
        let mut next = None;
        for (i, c) in clauses.iter().enumerate() {
            if let Some(l) = next {
                out.push(Item::Label(l));
            }
            if n > 1 {
                if i + 1 < n {
                    let l = self.internal_label();
                    out.push(Item::Ins(if i == 0 { Instr::TryMeElse(l) } else { Instr::RetryMeElse(l) }));
                    next = Some(l);
                } else {
                    out.push(Item::Ins(Instr::TrustMe));
                }
            }
            out.extend(self.clause(c, &[])?);
        }
        Ok((entry, out))
    }

    /// Predicate defined in an antecedent: the chain ends by continuing
    /// into the next definition visible from the defining record.
    fn unit_predicate(
        &mut self,
        entry: Label,
        offset: u32,
        clauses: &[&ClauseAst],
        imports: &[(String, u32)],
    ) -> Result<Vec<Item>, CompileError> {
        let mut out = vec![Item::Label(entry)];
        for (i, c) in clauses.iter().enumerate() {
            let l = self.internal_label();
            out.push(Item::Ins(if i == 0 { Instr::TryMeElse(l) } else { Instr::RetryMeElse(l) }));
            out.extend(self.clause(c, imports)?);
            out.push(Item::Label(l));
        }
        out.push(Item::Ins(Instr::TrustExt(offset)));
        Ok(out)
    }

    /// Compiles the antecedent of an implication goal into a new table.
    fn table(&mut self, clauses: &[ClauseAst], imports: &[(String, u32)]) -> Result<usize, CompileError> {
        let t = self.tables.len();
        self.tables.push(Vec::new());
        let groups = group(clauses, &mut self.syms);
        let mut entries = Vec::new();
        for (offset, (key, cs)) in groups.iter().enumerate() {
            let entry = self.new_label(format!("{}@t{}", self.pred_name(*key), t + 1));
            let items = self.unit_predicate(entry, offset as u32 + 1, cs, imports)?;
            self.unit_code.extend(items);
            entries.push((*key, entry));
        }
        self.tables[t] = entries;
        Ok(t)
    }

    pub fn clause(&mut self, c: &ClauseAst, imports: &[(String, u32)]) -> Result<Vec<Item>, CompileError> {
        let unit = resolve_clause(c, imports, &mut self.syms)?;
        let mut g = ClauseGen::new(self, &unit);
        g.clause()?;
        Ok(g.out)
    }

    /// Query code. Returns the items and the reported answer slots.
    pub fn query(&mut self, q: &QueryAst) -> Result<(Vec<Item>, AnswerSlots), CompileError> {
        let unit = resolve_query(&q.goal, &q.answer_vars, &mut self.syms)?;
        let answers = q
            .reported_vars()
            .map(|name| {
                let v = unit.vars.iter().find(|v| &v.name == name).expect("answer variable declared");
                (name.clone(), v.slot)
            })
            .collect();
        let mut g = ClauseGen::new(self, &unit);
        g.env = true;
        g.emit(Instr::Allocate(unit.env_size()));
        if let Some(b) = &unit.body {
            g.goal(b, false)?;
        }
        g.emit(Instr::Deallocate);
        g.emit(Instr::Proceed);
        Ok((g.out, answers))
    }
}

struct ClauseGen<'c, 'u> {
    comp: &'c mut Compiler,
    unit: &'u Unit,
    out: Vec<Item>,
    loc: Vec<Option<Reg>>,
    seen: Vec<bool>,
    next_x: u32,
    env: bool,
    claimed: Vec<u32>,
}

impl<'c, 'u> ClauseGen<'c, 'u> {
    fn new(comp: &'c mut Compiler, unit: &'u Unit) -> Self {
        let n = unit.vars.len();
        ClauseGen {
            comp,
            unit,
            out: Vec::new(),
            loc: vec![None; n],
            seen: vec![false; n],
            next_x: unit.max_arity + 1,
            env: unit.needs_env(),
            claimed: Vec::new(),
        }
    }

    fn emit(&mut self, i: Instr) {
        // Consecutive voids collapse into one instruction.
        if let Some(Item::Ins(last)) = self.out.last_mut() {
            match (last, i) {
                (Instr::SetVoid(n), Instr::SetVoid(m)) | (Instr::UnifyVoid(n), Instr::UnifyVoid(m)) => {
                    *n += m;
                    return;
                }
                _ => {}
            }
        }
        self.out.push(Item::Ins(i));
    }

    fn fresh_x(&mut self) -> Reg {
        let r = Reg::X(self.next_x);
        self.next_x += 1;
        r
    }

    fn perm(&self, v: VarId) -> Option<Reg> {
        let info = &self.unit.vars[v];
        info.permanent.then_some(Reg::Y(info.slot))
    }

    fn is_void(&self, v: VarId) -> bool {
        !self.unit.vars[v].permanent && self.unit.vars[v].use_count() == 1
    }

    fn first_nested(&self, v: VarId) -> bool {
        self.unit.vars[v].first_use().is_some_and(|o| o.nested)
    }

    /// Current location of a variable that has already been seen.
    fn location(&self, v: VarId) -> Reg {
        self.perm(v).or(self.loc[v]).expect("variable located before use")
    }

    fn finish(&mut self) {
        if self.env {
            self.emit(Instr::Deallocate);
        }
        self.emit(Instr::Proceed);
    }

    fn clause(&mut self) -> Result<(), CompileError> {
        if self.env {
            self.emit(Instr::Allocate(self.unit.env_size()));
        }
        for &v in &self.unit.inits {
            let info = &self.unit.vars[v];
            let m = info.import.ok_or_else(|| CompileError::Unbound(info.name.clone()))?;
            let r = match self.perm(v) {
                Some(r) => r,
                None => self.fresh_x(),
            };
            self.loc[v] = Some(r);
            self.seen[v] = true;
            self.emit(Instr::Initialize(r, m));
        }
        let (_, args) = self.unit.head.as_ref().expect("clause has a head");
        for (i0, a) in args.iter().enumerate() {
            self.head_arg(a, i0 as u32 + 1);
        }
        match &self.unit.body {
            Some(b) => self.goal(b, true)?,
            None => self.finish(),
        }
        Ok(())
    }

    /// Whether a head variable left in `Ai` would be overwritten while
    /// loading the first goal's arguments before its last use there.
    fn needs_move(&self, v: VarId, i: u32) -> bool {
        let goal = &self.unit.first_goal;
        let at = (i - 1) as usize;
        if matches!(goal.get(at), Some(CTerm::Var(w)) if *w == v) {
            return false;
        }
        goal.iter().skip(at).any(|t| t.mentions(v))
    }

    fn head_arg(&mut self, a: &CTerm, i: u32) {
        match a {
            CTerm::Var(v) => {
                let v = *v;
                if self.seen[v] {
                    let r = self.location(v);
                    self.emit(Instr::GetValue(r, i));
                    return;
                }
                self.seen[v] = true;
                if let Some(y) = self.perm(v) {
                    self.emit(Instr::GetVariable(y, i));
                } else if self.is_void(v) {
                } else if self.needs_move(v, i) {
                    let x = self.fresh_x();
                    self.loc[v] = Some(x);
                    self.emit(Instr::GetVariable(x, i));
                } else {
                    self.loc[v] = Some(Reg::A(i));
                }
            }
            CTerm::Con(c) => self.emit(Instr::GetConstant(*c, i)),
            CTerm::Struct(f, sub) => self.get_struct(*f, sub, Reg::A(i), i),
        }
    }

    /// Register for a temporary first met inside head argument `i`: the
    /// argument register it is passed in by the first goal, when that
    /// register is already consumed.
    fn nested_register(&mut self, v: VarId, i: u32) -> Reg {
        let head = &self.unit.head.as_ref().expect("clause has a head").1;
        let j = self.unit.first_goal.iter().position(|t| matches!(t, CTerm::Var(w) if *w == v));
        if let Some(j) = j {
            let j = j as u32 + 1;
            let head_nonvar = head.get((j - 1) as usize).is_some_and(|t| !matches!(t, CTerm::Var(_)));
            if head_nonvar && j <= i && !self.claimed.contains(&j) {
                self.claimed.push(j);
                return Reg::A(j);
            }
        }
        self.fresh_x()
    }

    fn get_struct(&mut self, f: Sym, sub: &[CTerm], reg: Reg, top: u32) {
        if f == Sym::CONS && sub.len() == 2 {
            self.emit(Instr::GetList(reg));
        } else {
            self.emit(Instr::GetStructure(f, sub.len() as u32, reg));
        }
        let mut queue = Vec::new();
        for s in sub {
            match s {
                CTerm::Var(v) => {
                    let v = *v;
                    if self.seen[v] {
                        let r = self.location(v);
                        self.emit(if self.first_nested(v) { Instr::UnifyValue(r) } else { Instr::UnifyLocalValue(r) });
                        continue;
                    }
                    self.seen[v] = true;
                    if let Some(y) = self.perm(v) {
                        self.emit(Instr::UnifyVariable(y));
                    } else if self.is_void(v) {
                        self.emit(Instr::UnifyVoid(1));
                    } else {
                        let r = self.nested_register(v, top);
                        self.loc[v] = Some(r);
                        self.emit(Instr::UnifyVariable(r));
                    }
                }
                CTerm::Con(c) => self.emit(Instr::UnifyConstant(*c)),
                CTerm::Struct(g, args) => {
                    let x = self.fresh_x();
                    self.emit(Instr::UnifyVariable(x));
                    queue.push((x, *g, args));
                }
            }
        }
        for (x, g, args) in queue {
            self.get_struct(g, args, x, top);
        }
    }

    fn goal(&mut self, g: &CGoal, tail: bool) -> Result<(), CompileError> {
        match g {
            CGoal::True => {
                if tail {
                    self.finish();
                }
            }
            CGoal::Atom { key, args } => {
                for (i0, a) in args.iter().enumerate() {
                    self.put_arg(a, i0 as u32 + 1, tail);
                }
                if tail {
                    if self.env {
                        self.emit(Instr::Deallocate);
                    }
                    self.emit(Instr::Execute(*key));
                } else {
                    self.emit(Instr::Call(*key, self.unit.env_size()));
                }
            }
            CGoal::And(a, b) => {
                self.goal(a, false)?;
                self.goal(b, tail)?;
            }
            CGoal::Or(a, b) => {
                let alt = self.comp.internal_label();
                self.emit(Instr::TryMeElse(alt));
                self.goal(a, tail)?;
                let end = (!tail).then(|| self.comp.internal_label());
                if let Some(end) = end {
                    self.emit(Instr::Jump(end));
                }
                self.out.push(Item::Label(alt));
                self.emit(Instr::TrustMe);
                self.goal(b, tail)?;
                if let Some(end) = end {
                    self.out.push(Item::Label(end));
                }
            }
            CGoal::Exists(v, body) => {
                if let Some(Reg::Y(n)) = self.perm(*v) {
                    self.emit(Instr::SetExistTag(n));
                }
                self.goal(body, tail)?;
            }
            CGoal::Forall(v, body) => {
                let Some(Reg::Y(n)) = self.perm(*v) else {
                    return Err(CompileError::Invalid("universal variable without a slot".into()));
                };
                self.emit(Instr::IncrUniverse);
                self.emit(Instr::SetUnivTag(n));
                self.goal(body, false)?;
                self.emit(Instr::DecrUniverse);
                if tail {
                    self.finish();
                }
            }
            CGoal::Implies { clauses, captured, body } => {
                let imports: Vec<(String, u32)> =
                    captured.iter().map(|(name, v)| (name.clone(), self.unit.vars[*v].slot)).collect();
                let t = self.comp.table(clauses, &imports)?;
                self.emit(Instr::PushImplPoint(t, self.unit.env_size()));
                self.goal(body, false)?;
                self.emit(Instr::PopImplPoint);
                if tail {
                    self.finish();
                }
            }
        }
        Ok(())
    }

    fn put_arg(&mut self, a: &CTerm, i: u32, tail: bool) {
        match a {
            CTerm::Var(v) => {
                let v = *v;
                if let Some(y) = self.perm(v) {
                    self.seen[v] = true;
                    let first = &self.unit.vars[v].occs[0];
                    let unsafe_first = first.kind == OccKind::Binding || (first.kind == OccKind::Body && !first.nested);
                    self.emit(if tail && unsafe_first { Instr::PutUnsafeValue(y, i) } else { Instr::PutValue(y, i) });
                } else if !self.seen[v] {
                    self.seen[v] = true;
                    let x = self.fresh_x();
                    self.loc[v] = Some(x);
                    self.emit(Instr::PutVariable(x, i));
                } else {
                    let r = self.location(v);
                    if r != Reg::A(i) {
                        self.emit(Instr::PutValue(r, i));
                    }
                }
            }
            CTerm::Con(c) => self.emit(Instr::PutConstant(*c, i)),
            CTerm::Struct(f, sub) => self.build(*f, sub, Reg::A(i)),
        }
    }

    /// Builds a structure bottom-up: nested structures first, into fresh registers.
    fn build(&mut self, f: Sym, sub: &[CTerm], target: Reg) {
        let inner: Vec<Option<Reg>> = sub
            .iter()
            .map(|s| match s {
                CTerm::Struct(g, args) => {
                    let x = self.fresh_x();
                    self.build(*g, args, x);
                    Some(x)
                }
                _ => None,
            })
            .collect();
        if f == Sym::CONS && sub.len() == 2 {
            self.emit(Instr::PutList(target));
        } else {
            self.emit(Instr::PutStructure(f, sub.len() as u32, target));
        }
        for (s, r) in sub.iter().zip(inner) {
            match s {
                CTerm::Var(v) => {
                    let v = *v;
                    if let Some(y) = self.perm(v) {
                        self.seen[v] = true;
                        self.emit(if self.first_nested(v) { Instr::SetValue(y) } else { Instr::SetLocalValue(y) });
                    } else if !self.seen[v] {
                        self.seen[v] = true;
                        if self.is_void(v) {
                            self.emit(Instr::SetVoid(1));
                        } else {
                            let x = self.fresh_x();
                            self.loc[v] = Some(x);
                            self.emit(Instr::SetVariable(x));
                        }
                    } else {
                        let r = self.location(v);
                        self.emit(if self.first_nested(v) { Instr::SetValue(r) } else { Instr::SetLocalValue(r) });
                    }
                }
                CTerm::Con(c) => self.emit(Instr::SetConstant(*c)),
                CTerm::Struct(..) => self.emit(Instr::SetValue(r.expect("nested structure built"))),
            }
        }
    }
}
