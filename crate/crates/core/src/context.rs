//! The dynamic clause database.
//!
//! The global program is a hash map from predicate to code. Each implication
//! goal pushes an implication point record holding its statically built
//! table, the environment that closes its clauses, a parent link, and an
//! access vector `nc` naming, for every predicate it defines, where the next
//! definitions of that predicate live further up the chain. Records are kept
//! on a stack so that a backtrack can restore an earlier context by
//! truncation.
//!
//! The code type `C` and environment type `E` are chosen by the engine.

use crate::store::Sym;
use std::collections::HashMap;
use std::sync::Arc;

/// Name and arity of a predicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredKey {
    pub name: Sym,
    pub arity: u32,
}

impl PredKey {
    pub fn new(name: Sym, arity: u32) -> PredKey {
        PredKey { name, arity }
    }
}

/// Index into the record stack. Record 0 is the root.
pub type RecordId = usize;
pub const ROOT: RecordId = 0;

/// Tables with at most this many predicates are searched linearly.
pub const LINEAR_SCAN_LIMIT: usize = 8;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ContextError {
    #[error("predicate {0:?} defined twice in one table")]
    DuplicateKey(PredKey),
    #[error("attempt to pop the root implication point")]
    PopRoot,
    #[error("offset {offset} out of range for a table of size {size}")]
    OffsetOutOfRange { offset: usize, size: usize },
}

/// Predicates defined by one implication goal, numbered 1..=size in order of
/// first occurrence.
#[derive(Clone, Debug)]
pub struct ImplTable<C> {
    keys: Vec<PredKey>,
    code: Vec<C>,
    hashed: Option<HashMap<PredKey, usize>>,
}

impl<C> ImplTable<C> {
    pub fn new(entries: Vec<(PredKey, C)>) -> Result<ImplTable<C>, ContextError> {
        let mut keys = Vec::with_capacity(entries.len());
        let mut code = Vec::with_capacity(entries.len());
        for (k, c) in entries {
            if keys.contains(&k) {
                return Err(ContextError::DuplicateKey(k));
            }
            keys.push(k);
            code.push(c);
        }
        let hashed = (keys.len() > LINEAR_SCAN_LIMIT).then(|| keys.iter().enumerate().map(|(i, k)| (*k, i)).collect());
        Ok(ImplTable { keys, code, hashed })
    }

    pub fn size(&self) -> usize {
        self.keys.len()
    }

    pub fn keys(&self) -> &[PredKey] {
        &self.keys
    }

    pub fn is_hashed(&self) -> bool {
        self.hashed.is_some()
    }

    /// Offset number (1-based) of `key`.
    pub fn offset(&self, key: PredKey) -> Option<usize> {
        match &self.hashed {
            Some(h) => h.get(&key).map(|i| i + 1),
            None => self.keys.iter().position(|k| *k == key).map(|i| i + 1),
        }
    }

    pub fn entry(&self, offset: usize) -> Option<&C> {
        offset.checked_sub(1).and_then(|i| self.code.get(i))
    }

    pub fn lookup(&self, key: PredKey) -> Option<&C> {
        self.offset(key).and_then(|o| self.entry(o))
    }
}

#[derive(Clone, Debug)]
pub struct Record<C, E> {
    /// `None` only for the root.
    pub table: Option<Arc<ImplTable<C>>>,
    pub env: E,
    pub parent: Option<RecordId>,
    /// Per offset: next definition up the chain, or `None` for failure.
    pub nc: Vec<Option<(C, RecordId)>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ContextEvent {
    Push { record: RecordId, parent: RecordId, size: usize },
    Pop { record: RecordId, reclaimed: bool },
    Restore { records: usize },
    Lookup { key: PredKey, from: RecordId, found: Option<RecordId> },
}

pub type Listener = Box<dyn FnMut(&ContextEvent) + Send>;

pub struct Context<C, E> {
    global: HashMap<PredKey, C>,
    records: Vec<Record<C, E>>,
    listener: Option<Listener>,
    max_records: usize,
}

impl<C: Clone, E: Clone> Context<C, E> {
    pub fn new(root_env: E) -> Context<C, E> {
        Context {
            global: HashMap::new(),
            records: vec![Record { table: None, env: root_env, parent: None, nc: Vec::new() }],
            listener: None,
            max_records: 1,
        }
    }

    pub fn set_listener(&mut self, l: Option<Listener>) {
        self.listener = l;
    }

    fn emit(&mut self, e: ContextEvent) {
        if let Some(l) = self.listener.as_mut() {
            l(&e);
        }
    }

    pub fn define_global(&mut self, key: PredKey, code: C) {
        self.global.insert(key, code);
    }

    pub fn global(&self, key: PredKey) -> Option<&C> {
        self.global.get(&key)
    }

    pub fn record(&self, r: RecordId) -> &Record<C, E> {
        &self.records[r]
    }

    /// Number of live records, including the root.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Highest number of simultaneously live records seen.
    pub fn max_records(&self) -> usize {
        self.max_records
    }

    /// Records from `from` up to the root.
    pub fn chain(&self, from: RecordId) -> Vec<RecordId> {
        let mut out = vec![from];
        let mut r = from;
        while let Some(p) = self.records[r].parent {
            out.push(p);
            r = p;
        }
        out
    }

    fn search(&self, key: PredKey, from: RecordId) -> Option<(C, RecordId)> {
        let mut r = from;
        loop {
            let rec = &self.records[r];
            match (&rec.table, rec.parent) {
                (Some(t), Some(p)) => {
                    if let Some(c) = t.lookup(key) {
                        return Some((c.clone(), r));
                    }
                    r = p;
                }
                _ => return self.global.get(&key).map(|c| (c.clone(), ROOT)),
            }
        }
    }

    /// Nearest definition of `key` along the chain starting at `from`.
    pub fn lookup_procedure(&mut self, key: PredKey, from: RecordId) -> Option<(C, RecordId)> {
        let found = self.search(key, from);
        if self.listener.is_some() {
            self.emit(ContextEvent::Lookup { key, from, found: found.as_ref().map(|f| f.1) });
        }
        found
    }

    pub fn resolves(&self, key: PredKey, from: RecordId) -> bool {
        self.search(key, from).is_some()
    }

    pub fn push_impl_point(&mut self, table: Arc<ImplTable<C>>, env: E, parent: RecordId) -> RecordId {
        let nc = table.keys().iter().map(|k| self.search(*k, parent)).collect();
        let size = table.size();
        self.records.push(Record { table: Some(table), env, parent: Some(parent), nc });
        self.max_records = self.max_records.max(self.records.len());
        let record = self.records.len() - 1;
        self.emit(ContextEvent::Push { record, parent, size });
        record
    }

    /// Leaves `current` for its parent. The record is reclaimed unless it is
    /// below `protected`, the record count saved by the newest choice point.
    pub fn pop_impl_point(&mut self, current: RecordId, protected: usize) -> Result<RecordId, ContextError> {
        let parent = self.records[current].parent.ok_or(ContextError::PopRoot)?;
        let reclaimed = current >= protected && current < self.records.len();
        if reclaimed {
            self.records.truncate(current.max(protected).max(1));
        }
        self.emit(ContextEvent::Pop { record: current, reclaimed });
        Ok(parent)
    }

    pub fn next_clause_entry(&self, record: RecordId, offset: usize) -> Result<Option<(C, RecordId)>, ContextError> {
        let nc = &self.records[record].nc;
        match offset.checked_sub(1).and_then(|i| nc.get(i)) {
            Some(e) => Ok(e.clone()),
            None => Err(ContextError::OffsetOutOfRange { offset, size: nc.len() }),
        }
    }

    /// Drops every record pushed after the stack held `len` records.
    pub fn restore(&mut self, len: usize) {
        let len = len.max(1);
        if len < self.records.len() {
            self.records.truncate(len);
        }
        if self.listener.is_some() {
            self.emit(ContextEvent::Restore { records: len });
        }
    }
}
