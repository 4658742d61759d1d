//! Heap of tagged cells with a trail, and tagged unification.
//!
//! Every unbound variable and every constant carries a universe tag. A
//! variable tagged `k` may only be bound to a term whose constants all have
//! tags `<= k`; binding lowers the tags of the term's variables to `k`. User
//! constants always have tag 1. Both tag lowering and bindings are trailed so
//! that [`Store::undo_to`] restores a bit-identical earlier state.
//!
//! Cells are addressed by index. A structure is a [`Cell::Fun`] header
//! followed by its argument cells; a structured argument is stored as a
//! [`Cell::Ref`] to its own header.

use std::collections::HashMap;
use std::fmt::{self, Write};

pub type Addr = usize;
pub type Tag = u32;

/// Interned constant or functor name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sym(pub u32);

impl Sym {
    pub const NIL: Sym = Sym(0);
    pub const CONS: Sym = Sym(1);
}

#[derive(Clone, Debug)]
pub struct Symbols {
    names: Vec<String>,
    index: HashMap<String, Sym>,
}

impl Default for Symbols {
    fn default() -> Self {
        let mut s = Symbols { names: Vec::new(), index: HashMap::new() };
        s.intern("[]");
        s.intern(".");
        s
    }
}

impl Symbols {
    pub fn new() -> Symbols {
        Symbols::default()
    }

    pub fn intern(&mut self, name: &str) -> Sym {
        if let Some(&s) = self.index.get(name) {
            return s;
        }
        let s = Sym(self.names.len() as u32);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), s);
        s
    }

    pub fn get(&self, name: &str) -> Option<Sym> {
        self.index.get(name).copied()
    }

    pub fn name(&self, s: Sym) -> &str {
        &self.names[s.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    /// Unbound variable; its identity is its address.
    Var(Tag),
    Ref(Addr),
    /// User constant (tag 1).
    Con(Sym),
    /// Constant generated for a universal goal.
    Gen {
        serial: u32,
        tag: Tag,
    },
    /// Structure header; `arity` argument cells follow.
    Fun {
        name: Sym,
        arity: u32,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrailEntry {
    /// Cell was `Var(tag)` before being bound.
    Bind(Addr, Tag),
    /// Variable tag was lowered from the stored value.
    Tag(Addr, Tag),
}

impl TrailEntry {
    fn addr(&self) -> Addr {
        match *self {
            TrailEntry::Bind(a, _) | TrailEntry::Tag(a, _) => a,
        }
    }
}

/// Dereferenced shape of a cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum View {
    Var(Addr, Tag),
    Con(Sym),
    Gen(u32, Tag),
    /// Header address, functor, arity. Arguments live at `addr + 1 ..= addr + arity`.
    Struct(Addr, Sym, u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailReason {
    OccursCheck,
    TagConflict,
    Clash,
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailReason::OccursCheck => "occurs-check",
            FailReason::TagConflict => "tag-conflict",
            FailReason::Clash => "clash",
        })
    }
}

/// Why a unification failed, and the pair of subterms where it did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnifyFailure {
    pub reason: FailReason,
    pub left: Addr,
    pub right: Addr,
}

/// Store-independent copy of a term with variables numbered by first occurrence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(u32, Tag),
    Con(String),
    Gen { serial: u32, tag: Tag },
    Struct(String, Vec<Term>),
}

/// Numbering of unbound variables shared across the terms of one answer.
#[derive(Clone, Debug, Default)]
pub struct VarNaming {
    map: HashMap<Addr, u32>,
    by_address: bool,
}

impl VarNaming {
    pub fn new() -> VarNaming {
        VarNaming::default()
    }

    /// Names each variable after its address, stable across calls.
    pub fn by_address() -> VarNaming {
        VarNaming { map: HashMap::new(), by_address: true }
    }

    fn number(&mut self, a: Addr) -> u32 {
        if self.by_address {
            return a as u32;
        }
        let next = self.map.len() as u32 + 1;
        *self.map.entry(a).or_insert(next)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Store {
    cells: Vec<Cell>,
    trail: Vec<TrailEntry>,
    /// Changes to cells at or above this address are not trailed by a
    /// successful unification.
    boundary: Addr,
    next_gen: u32,
    symbols: Symbols,
}

impl Store {
    pub fn new() -> Store {
        Store::with_symbols(Symbols::new())
    }

    pub fn with_symbols(symbols: Symbols) -> Store {
        Store { cells: Vec::new(), trail: Vec::new(), boundary: Addr::MAX, next_gen: 0, symbols }
    }

    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    pub fn symbols_mut(&mut self) -> &mut Symbols {
        &mut self.symbols
    }

    pub fn heap_top(&self) -> Addr {
        self.cells.len()
    }

    pub fn truncate_heap(&mut self, top: Addr) {
        self.cells.truncate(top);
    }

    pub fn trail_mark(&self) -> usize {
        self.trail.len()
    }

    pub fn trail(&self) -> &[TrailEntry] {
        &self.trail
    }

    pub fn boundary(&self) -> Addr {
        self.boundary
    }

    pub fn set_boundary(&mut self, b: Addr) {
        self.boundary = b;
    }

    pub fn cell(&self, a: Addr) -> Cell {
        self.cells[a]
    }

    pub fn push(&mut self, c: Cell) -> Addr {
        self.cells.push(c);
        self.cells.len() - 1
    }

    pub fn new_var(&mut self, tag: Tag) -> Addr {
        debug_assert!(tag >= 1);
        self.push(Cell::Var(tag))
    }

    pub fn new_con(&mut self, s: Sym) -> Addr {
        self.push(Cell::Con(s))
    }

    pub fn new_gen(&mut self, tag: Tag) -> Addr {
        self.next_gen += 1;
        self.push(Cell::Gen { serial: self.next_gen, tag })
    }

    /// Pushes a header; the caller pushes exactly `arity` argument cells next.
    pub fn new_fun(&mut self, name: Sym, arity: u32) -> Addr {
        self.push(Cell::Fun { name, arity })
    }

    /// Pushes the cell that refers to the term at `a` as an argument.
    pub fn push_arg(&mut self, a: Addr) -> Addr {
        let c = match self.cells[a] {
            Cell::Con(s) => Cell::Con(s),
            _ => Cell::Ref(a),
        };
        self.push(c)
    }

    pub fn deref(&self, mut a: Addr) -> Addr {
        while let Cell::Ref(next) = self.cells[a] {
            a = next;
        }
        a
    }

    pub fn view(&self, a: Addr) -> View {
        let a = self.deref(a);
        match self.cells[a] {
            Cell::Var(t) => View::Var(a, t),
            Cell::Con(s) => View::Con(s),
            Cell::Gen { serial, tag } => View::Gen(serial, tag),
            Cell::Fun { name, arity } => View::Struct(a, name, arity),
            Cell::Ref(_) => unreachable!("deref stops before refs"),
        }
    }

    fn trail_push(&mut self, e: TrailEntry) {
        self.trail.push(e);
    }

    /// Binds the unbound variable at `var` to `target` without any checks.
    pub fn bind_unchecked(&mut self, var: Addr, target: Addr) {
        let Cell::Var(tag) = self.cells[var] else { panic!("bind of a non-variable cell {var}") };
        if var < self.boundary {
            self.trail_push(TrailEntry::Bind(var, tag));
        }
        self.cells[var] = Cell::Ref(target);
    }

    /// Replaces the tag of the unbound variable at `var`.
    pub fn set_tag(&mut self, var: Addr, tag: Tag) {
        let Cell::Var(old) = self.cells[var] else { panic!("retag of a non-variable cell {var}") };
        if old == tag {
            return;
        }
        if var < self.boundary {
            self.trail_push(TrailEntry::Tag(var, old));
        }
        self.cells[var] = Cell::Var(tag);
    }

    pub fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            match self.trail.pop().unwrap() {
                TrailEntry::Bind(a, t) | TrailEntry::Tag(a, t) => {
                    if a < self.cells.len() {
                        self.cells[a] = Cell::Var(t);
                    }
                }
            }
        }
    }

    /// Walks `t` on behalf of binding the variable at `var` with tag `tag`.
    /// Returns the unbound variables whose tags exceed `tag`.
    pub fn check_tags(&self, var: Addr, tag: Tag, t: Addr) -> Result<Vec<Addr>, (FailReason, Addr)> {
        let mut lower = Vec::new();
        let mut stack = vec![t];
        while let Some(a) = stack.pop() {
            match self.view(a) {
                View::Var(v, _) if v == var => return Err((FailReason::OccursCheck, v)),
                View::Var(v, vt) => {
                    if vt > tag && !lower.contains(&v) {
                        lower.push(v);
                    }
                }
                View::Con(_) => {}
                View::Gen(_, gt) => {
                    if gt > tag {
                        return Err((FailReason::TagConflict, self.deref(a)));
                    }
                }
                View::Struct(h, _, n) => {
                    for i in (1..=n as usize).rev() {
                        stack.push(h + i);
                    }
                }
            }
        }
        Ok(lower)
    }

    fn bind_checked(&mut self, var: Addr, tag: Tag, t: Addr) -> Result<(), UnifyFailure> {
        match self.check_tags(var, tag, t) {
            Ok(lower) => {
                for v in lower {
                    self.set_tag(v, tag);
                }
                self.bind_unchecked(var, t);
                Ok(())
            }
            Err((reason, _)) => Err(UnifyFailure { reason, left: var, right: t }),
        }
    }

    /// Tagged unification with occurs-check. On failure the store is rolled
    /// back to its state before the call.
    pub fn unify(&mut self, a: Addr, b: Addr) -> Result<(), UnifyFailure> {
        let mark = self.trail.len();
        let saved_boundary = self.boundary;
        // Trail everything during the attempt so a failure can be undone.
        self.boundary = Addr::MAX;
        let result = self.unify_pairs(a, b);
        self.boundary = saved_boundary;
        match result {
            Ok(()) => {
                if saved_boundary != Addr::MAX {
                    let mut keep = mark;
                    for i in mark..self.trail.len() {
                        if self.trail[i].addr() < saved_boundary {
                            self.trail[keep] = self.trail[i];
                            keep += 1;
                        }
                    }
                    self.trail.truncate(keep);
                }
                Ok(())
            }
            Err(f) => {
                self.undo_to(mark);
                Err(f)
            }
        }
    }

    fn unify_pairs(&mut self, a: Addr, b: Addr) -> Result<(), UnifyFailure> {
        let mut stack = vec![(a, b)];
        while let Some((a, b)) = stack.pop() {
            let (a, b) = (self.deref(a), self.deref(b));
            if a == b {
                continue;
            }
            match (self.cells[a], self.cells[b]) {
                (Cell::Var(ta), Cell::Var(tb)) => {
                    // Bind the less constrained variable; on equal tags, the younger.
                    if ta > tb || (ta == tb && a > b) {
                        self.bind_unchecked(a, b);
                    } else {
                        self.bind_unchecked(b, a);
                    }
                }
                (Cell::Var(ta), _) => self.bind_checked(a, ta, b)?,
                (_, Cell::Var(tb)) => self.bind_checked(b, tb, a)?,
                (Cell::Con(x), Cell::Con(y)) if x == y => {}
                (Cell::Gen { serial: x, .. }, Cell::Gen { serial: y, .. }) if x == y => {}
                (Cell::Fun { name: f, arity: n }, Cell::Fun { name: g, arity: m }) if f == g && n == m => {
                    for i in (1..=n as usize).rev() {
                        stack.push((a + i, b + i));
                    }
                }
                _ => return Err(UnifyFailure { reason: FailReason::Clash, left: a, right: b }),
            }
        }
        Ok(())
    }

    pub fn resolve(&self, a: Addr, naming: &mut VarNaming) -> Term {
        match self.view(a) {
            View::Var(v, t) => Term::Var(naming.number(v), t),
            View::Con(s) => Term::Con(self.symbols.name(s).to_string()),
            View::Gen(serial, tag) => Term::Gen { serial, tag },
            View::Struct(h, f, n) => Term::Struct(
                self.symbols.name(f).to_string(),
                (1..=n as usize).map(|i| self.resolve(h + i, naming)).collect(),
            ),
        }
    }

    /// Deterministic text snapshot of cells, trail and counters.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let b = if self.boundary == Addr::MAX { "none".to_string() } else { self.boundary.to_string() };
        let _ = writeln!(out, "boundary={b} gens={}", self.next_gen);
        for (i, c) in self.cells.iter().enumerate() {
            let _ = match c {
                Cell::Var(t) => writeln!(out, "{i}: var^{t}"),
                Cell::Ref(a) => writeln!(out, "{i}: ref {a}"),
                Cell::Con(s) => writeln!(out, "{i}: con {}", self.symbols.name(*s)),
                Cell::Gen { serial, tag } => writeln!(out, "{i}: gen c!{tag}!{serial}"),
                Cell::Fun { name, arity } => {
                    writeln!(out, "{i}: fun {}/{arity}", self.symbols.name(*name))
                }
            };
        }
        out.push_str("trail:\n");
        for e in &self.trail {
            let _ = match e {
                TrailEntry::Bind(a, t) => writeln!(out, "bind {a} ^{t}"),
                TrailEntry::Tag(a, t) => writeln!(out, "tag {a} ^{t}"),
            };
        }
        out
    }
}
