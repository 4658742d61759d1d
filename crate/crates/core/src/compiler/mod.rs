//! Compiles programs and queries to machine code.
//!
//! Every top-level predicate becomes a global entry point. Every implication
//! goal gets its own table of local predicates; a local predicate's clause
//! chain ends in `trust_ext`, which continues with the next visible
//! definition of the same predicate.

mod classify;
mod emit;

pub use classify::{classify, Origin, VarClass};

use crate::context::{ContextError, ImplTable, PredKey};
use crate::machine::Instr;
use crate::store::{Addr, Symbols};
use crate::syntax::{ProgramAst, QueryAst, SyntaxError};
use emit::{group, Compiler, Item};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("variable {0} is not bound in any enclosing scope")]
    Unbound(String),
    #[error("invalid program: {0}")]
    Invalid(String),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error(transparent)]
    Table(#[from] ContextError),
}

/// Entry point of a compiled query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryEntry {
    pub entry: Addr,
    /// Reported answer variables and their slots in the query frame.
    pub answers: Vec<(String, u32)>,
}

/// Linked code with everything the machine needs to run it.
#[derive(Clone, Debug)]
pub struct CodeImage {
    pub code: Vec<Instr>,
    pub symbols: Symbols,
    pub tables: Vec<Arc<ImplTable<Addr>>>,
    pub globals: Vec<(PredKey, Addr)>,
    /// Label names by address, sorted; an address may carry several.
    pub labels: Vec<(Addr, String)>,
    pub query: Option<QueryEntry>,
    /// Size of the register bank.
    pub num_regs: usize,
}

impl CodeImage {
    pub fn labels_at(&self, addr: Addr) -> impl Iterator<Item = &str> {
        let start = self.labels.partition_point(|(a, _)| *a < addr);
        self.labels[start..].iter().take_while(move |(a, _)| *a == addr).map(|(_, n)| n.as_str())
    }

    /// First label at `addr`, or the address itself.
    pub fn label_name(&self, addr: Addr) -> String {
        self.labels_at(addr).next().map(str::to_string).unwrap_or_else(|| addr.to_string())
    }

    pub fn global(&self, key: PredKey) -> Option<Addr> {
        self.globals.iter().find(|(k, _)| *k == key).map(|(_, a)| *a)
    }

    /// Builds an image from parts, computing the register bank size.
    pub fn from_parts(
        code: Vec<Instr>,
        symbols: Symbols,
        tables: Vec<Arc<ImplTable<Addr>>>,
        globals: Vec<(PredKey, Addr)>,
        mut labels: Vec<(Addr, String)>,
        query: Option<QueryEntry>,
    ) -> CodeImage {
        labels.sort_by_key(|(a, _)| *a);
        let num_regs = code.iter().filter_map(max_bank_index).max().unwrap_or(0) + 1;
        CodeImage { code, symbols, tables, globals, labels, query, num_regs }
    }
}

fn max_bank_index(i: &Instr) -> Option<usize> {
    use crate::machine::Reg;
    use Instr::*;
    let arg = |a: u32| Some(a as usize);
    let reg = |r: Reg| r.bank_index();
    match *i {
        PutVariable(r, a) | PutValue(r, a) | PutUnsafeValue(r, a) | GetVariable(r, a) | GetValue(r, a) => {
            reg(r).max(arg(a))
        }
        PutConstant(_, a) | GetConstant(_, a) => arg(a),
        PutStructure(_, _, r)
        | GetStructure(_, _, r)
        | PutList(r)
        | GetList(r)
        | SetVariable(r)
        | SetValue(r)
        | SetLocalValue(r)
        | UnifyVariable(r)
        | UnifyValue(r)
        | UnifyLocalValue(r)
        | Initialize(r, _) => reg(r),
        Call(k, _) | Execute(k) => arg(k.arity),
        _ => None,
    }
}

/// Compiles a program and an optional query into a linked image.
pub fn compile(program: &ProgramAst, query: Option<&QueryAst>) -> Result<CodeImage, CompileError> {
    program.validate()?;
    let mut comp = Compiler::new();
    let mut items = Vec::new();
    let mut global_labels = Vec::new();
    for (key, clauses) in group(&program.clauses, &mut comp.syms) {
        let (entry, code) = comp.global_predicate(key, &clauses)?;
        items.extend(code);
        global_labels.push((key, entry));
    }
    let mut query_parts = None;
    if let Some(q) = query {
        let entry = comp.new_label("$query".into());
        items.push(Item::Label(entry));
        let (code, answers) = comp.query(q)?;
        items.extend(code);
        query_parts = Some((entry, answers));
    }
    let unit_code = std::mem::take(&mut comp.unit_code);
    items.extend(unit_code);
    link(comp, items, global_labels, query_parts)
}

fn link(
    comp: Compiler,
    items: Vec<Item>,
    global_labels: Vec<(PredKey, usize)>,
    query: Option<(usize, Vec<(String, u32)>)>,
) -> Result<CodeImage, CompileError> {
    let mut addr_of = vec![usize::MAX; comp.label_names.len()];
    let mut code = Vec::new();
    for it in &items {
        match it {
            Item::Label(l) => addr_of[*l] = code.len(),
            Item::Ins(i) => code.push(*i),
        }
    }
    if addr_of.contains(&usize::MAX) {
        return Err(CompileError::Invalid("label defined nowhere".into()));
    }
    let code: Vec<Instr> = code.into_iter().map(|i| i.map_label(|l| addr_of[l])).collect();
    let tables = comp
        .tables
        .iter()
        .map(|entries| {
            let resolved = entries.iter().map(|(k, l)| (*k, addr_of[*l])).collect();
            ImplTable::new(resolved).map(Arc::new)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let globals = global_labels.into_iter().map(|(k, l)| (k, addr_of[l])).collect();
    let labels = comp.label_names.into_iter().enumerate().map(|(l, name)| (addr_of[l], name)).collect();
    let query = query.map(|(l, answers)| QueryEntry { entry: addr_of[l], answers });
    Ok(CodeImage::from_parts(code, comp.syms, tables, globals, labels, query))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::listing::{disassemble, normalize};
    use crate::syntax::{parse_program, parse_query};

    fn listing(src: &str) -> String {
        let p = parse_program(src).unwrap();
        normalize(&disassemble(&compile(&p, None).unwrap()))
    }

    /// Instructions of the block starting at label `name`, up to the next predicate label.
    fn block(listing: &str, name: &str) -> String {
        let mut out = Vec::new();
        let mut on = false;
        for line in listing.lines() {
            if let Some((l, rest)) = line.split_once(": ") {
                if !l.starts_with('C') {
                    on = l == name;
                }
                if on {
                    out.push(line.to_string());
                }
                let _ = rest;
            } else if on {
                out.push(line.trim().to_string());
            }
        }
        out.join("; ")
    }

    const REV: &str = "rev(L1,L2) :- (rev_aux([],L2), forall X forall L1 forall L3 \
                       (rev_aux([X|L1],L3) :- rev_aux(L1,[X|L3]))) => rev_aux(L1,[]).";

    #[test]
    fn chain_rule_code() {
        let l = listing("p(X,Y) :- q(X,Z), r(Z,Y).");
        assert_eq!(
            block(&l, "p"),
            "p: allocate 2; get_variable Y1,A2; put_value Y2,A2; call q,2; \
             put_unsafe_value Y2,A1; put_value Y1,A2; deallocate; execute r"
        );
    }

    #[test]
    fn rev_listing() {
        let l = listing(REV);
        assert_eq!(
            block(&l, "rev"),
            "rev: allocate 1; get_variable Y1,A2; push_impl_point t1,1; put_constant [],A2; \
             call rev_aux,1; pop_impl_point; deallocate; proceed"
        );
    }

    #[test]
    fn disjunction_layout() {
        let l = listing("p(X) :- (q(X) ; r(X)), s.");
        assert!(l.contains("try_me_else"), "{l}");
        assert!(l.contains("trust_me"), "{l}");
        assert!(l.contains("jump"), "{l}");
    }

    #[test]
    fn query_frame_holds_answers() {
        let p = parse_program("p(a).").unwrap();
        let q = parse_query("p(X), exists Y p(f(Y)).").unwrap();
        let img = compile(&p, Some(&q)).unwrap();
        let qe = img.query.as_ref().unwrap();
        assert_eq!(qe.answers, vec![("X".to_string(), 1)]);
        assert_eq!(img.code[qe.entry], Instr::Allocate(1));
    }

    #[test]
    fn rejects_open_clauses() {
        let p = ProgramAst {
            clauses: vec![crate::syntax::ClauseAst::local(
                crate::syntax::TermAst::app("p", vec![crate::syntax::TermAst::Var("X".into())]),
                None,
                vec![],
            )],
        };
        assert!(compile(&p, None).is_err());
    }
}
