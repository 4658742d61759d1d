//! Surface syntax: abstract syntax for goals and clauses, a parser for the
//! Prolog-like concrete syntax, and printers for both ASTs and runtime terms.
//!
//! ```text
//! program  ::= { clause "." }
//! clause   ::= "forall" VAR clause | head [ ":-" goal ]
//! goal     ::= goal ";" goal | goal "=>" goal | goal "," goal
//!            | "forall" VAR goal | "exists" VAR goal | "(" goal ")" | "true" | atom
//! ```
//!
//! The left operand of `=>` is a comma-separated list of clauses. Operators
//! bind, loosest first: `:-`, `;`, `=>` (right associative), `,`. A quantifier
//! body extends as far right as the enclosing parentheses allow.

mod lexer;
mod parser;
mod print;

pub use parser::{parse_program, parse_query};
pub use print::{print_clause, print_goal, print_program, print_term, print_term_ast};

use std::fmt;

/// First-order term as written in source.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TermAst {
    Var(String),
    /// Constant: identifier, integer literal, or `[]`.
    Const(String),
    /// Application with at least one argument; lists use functor `.`.
    Struct(String, Vec<TermAst>),
}

pub const NIL_NAME: &str = "[]";
pub const CONS_NAME: &str = ".";

impl TermAst {
    pub fn atom(name: &str) -> TermAst {
        TermAst::Const(name.to_string())
    }

    pub fn app(name: &str, args: Vec<TermAst>) -> TermAst {
        if args.is_empty() {
            TermAst::Const(name.to_string())
        } else {
            TermAst::Struct(name.to_string(), args)
        }
    }

    pub fn list(items: Vec<TermAst>, tail: Option<TermAst>) -> TermAst {
        let mut acc = tail.unwrap_or_else(|| TermAst::atom(NIL_NAME));
        for item in items.into_iter().rev() {
            acc = TermAst::Struct(CONS_NAME.to_string(), vec![item, acc]);
        }
        acc
    }

    /// Principal symbol and arity, or `None` for a variable.
    pub fn functor(&self) -> Option<(&str, usize)> {
        match self {
            TermAst::Var(_) => None,
            TermAst::Const(c) => Some((c, 0)),
            TermAst::Struct(f, args) => Some((f, args.len())),
        }
    }

    pub fn args(&self) -> &[TermAst] {
        match self {
            TermAst::Struct(_, args) => args,
            _ => &[],
        }
    }

    pub fn is_integer(&self) -> bool {
        matches!(self, TermAst::Const(c) if c.bytes().all(|b| b.is_ascii_digit()))
    }

    /// Pushes variable names in left-to-right order, keeping repeats.
    pub fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            TermAst::Var(v) => out.push(v),
            TermAst::Const(_) => {}
            TermAst::Struct(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GoalAst {
    Atom(TermAst),
    And(Box<GoalAst>, Box<GoalAst>),
    Or(Box<GoalAst>, Box<GoalAst>),
    Exists(String, Box<GoalAst>),
    Forall(String, Box<GoalAst>),
    /// Antecedent clauses (never empty) and consequent.
    Implies(Vec<ClauseAst>, Box<GoalAst>),
    True,
}

impl GoalAst {
    pub fn and(a: GoalAst, b: GoalAst) -> GoalAst {
        GoalAst::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: GoalAst, b: GoalAst) -> GoalAst {
        GoalAst::Or(Box::new(a), Box::new(b))
    }

    pub fn exists(v: &str, g: GoalAst) -> GoalAst {
        GoalAst::Exists(v.to_string(), Box::new(g))
    }

    pub fn forall(v: &str, g: GoalAst) -> GoalAst {
        GoalAst::Forall(v.to_string(), Box::new(g))
    }

    pub fn implies(ds: Vec<ClauseAst>, g: GoalAst) -> GoalAst {
        GoalAst::Implies(ds, Box::new(g))
    }

    /// Variables free in the goal, in order of first occurrence.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        goal_free_vars(self, &mut Vec::new(), &mut out);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClauseAst {
    pub head: TermAst,
    pub body: Option<GoalAst>,
    /// Outermost `forall` prefix as written.
    pub explicit_quantified: Vec<String>,
    /// Variables quantified over the clause without being written: every
    /// otherwise free variable of a top-level clause, and anonymous variables.
    pub implicit_quantified: Vec<String>,
    /// Variables bound outside the clause (tied variables). Empty for
    /// top-level clauses.
    pub free_vars: Vec<String>,
}

impl ClauseAst {
    /// Clause appearing in an implication antecedent: unbound names stay free,
    /// except anonymous ones which are quantified over the clause.
    pub fn local(head: TermAst, body: Option<GoalAst>, explicit: Vec<String>) -> ClauseAst {
        let mut c =
            ClauseAst { head, body, explicit_quantified: explicit, implicit_quantified: vec![], free_vars: vec![] };
        let free = c.own_free_vars();
        let (anon, named): (Vec<_>, Vec<_>) = free.into_iter().partition(|v| is_anonymous(v));
        c.implicit_quantified = anon;
        c.free_vars = named;
        c
    }

    /// Top-level program clause: all unbound names become clause-quantified.
    pub fn top_level(head: TermAst, body: Option<GoalAst>, explicit: Vec<String>) -> ClauseAst {
        let mut c =
            ClauseAst { head, body, explicit_quantified: explicit, implicit_quantified: vec![], free_vars: vec![] };
        c.implicit_quantified = c.own_free_vars();
        c
    }

    pub fn fact(head: TermAst) -> ClauseAst {
        ClauseAst::top_level(head, None, vec![])
    }

    pub fn rule(head: TermAst, body: GoalAst) -> ClauseAst {
        ClauseAst::top_level(head, Some(body), vec![])
    }

    /// Explicit then implicit clause-level quantified variables.
    pub fn quantified(&self) -> impl Iterator<Item = &String> {
        self.explicit_quantified.iter().chain(self.implicit_quantified.iter())
    }

    pub fn key(&self) -> (&str, usize) {
        self.head.functor().expect("clause head is rigid")
    }

    fn own_free_vars(&self) -> Vec<String> {
        let mut bound: Vec<String> = self.explicit_quantified.clone();
        let mut out = Vec::new();
        clause_body_free_vars(&self.head, self.body.as_ref(), &mut bound, &mut out);
        out
    }
}

fn push_unique(out: &mut Vec<String>, v: &str) {
    if !out.iter().any(|x| x == v) {
        out.push(v.to_string());
    }
}

fn term_free_vars(t: &TermAst, bound: &[String], out: &mut Vec<String>) {
    let mut vs = Vec::new();
    t.collect_vars(&mut vs);
    for v in vs {
        if !bound.iter().any(|b| b == v) {
            push_unique(out, v);
        }
    }
}

fn clause_body_free_vars(head: &TermAst, body: Option<&GoalAst>, bound: &mut Vec<String>, out: &mut Vec<String>) {
    term_free_vars(head, bound, out);
    if let Some(b) = body {
        goal_free_vars(b, bound, out);
    }
}

fn goal_free_vars(g: &GoalAst, bound: &mut Vec<String>, out: &mut Vec<String>) {
    match g {
        GoalAst::True => {}
        GoalAst::Atom(t) => term_free_vars(t, bound, out),
        GoalAst::And(a, b) | GoalAst::Or(a, b) => {
            goal_free_vars(a, bound, out);
            goal_free_vars(b, bound, out);
        }
        GoalAst::Exists(v, body) | GoalAst::Forall(v, body) => {
            bound.push(v.clone());
            goal_free_vars(body, bound, out);
            bound.pop();
        }
        GoalAst::Implies(ds, body) => {
            for d in ds {
                for v in &d.free_vars {
                    if !bound.iter().any(|b| b == v) {
                        push_unique(out, v);
                    }
                }
            }
            goal_free_vars(body, bound, out);
        }
    }
}

pub(crate) fn is_anonymous(name: &str) -> bool {
    name.starts_with("_#")
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ProgramAst {
    pub clauses: Vec<ClauseAst>,
}

impl ProgramAst {
    /// Checks the closed-program invariant and rigid heads.
    pub fn validate(&self) -> Result<(), SyntaxError> {
        for c in &self.clauses {
            validate_clause(c, true)?;
        }
        Ok(())
    }
}

fn validate_clause(c: &ClauseAst, top: bool) -> Result<(), SyntaxError> {
    match &c.head {
        TermAst::Var(_) => return Err(SyntaxError::new(ErrorKind::NonRigidHead, 0, 0, "non-rigid clause head")),
        h if h.is_integer() => {
            return Err(SyntaxError::new(ErrorKind::NonRigidHead, 0, 0, "integer clause head"));
        }
        _ => {}
    }
    if top && !c.free_vars.is_empty() {
        return Err(SyntaxError::new(
            ErrorKind::OpenClause,
            0,
            0,
            format!("open top-level clause: free variable {}", c.free_vars[0]),
        ));
    }
    if let Some(b) = &c.body {
        validate_goal(b)?;
    }
    Ok(())
}

fn validate_goal(g: &GoalAst) -> Result<(), SyntaxError> {
    match g {
        GoalAst::True => Ok(()),
        GoalAst::Atom(TermAst::Var(_)) => Err(SyntaxError::new(ErrorKind::Parse, 0, 0, "a variable is not a goal")),
        GoalAst::Atom(_) => Ok(()),
        GoalAst::And(a, b) | GoalAst::Or(a, b) => validate_goal(a).and_then(|_| validate_goal(b)),
        GoalAst::Exists(_, b) | GoalAst::Forall(_, b) => validate_goal(b),
        GoalAst::Implies(ds, b) => {
            if ds.is_empty() {
                return Err(SyntaxError::new(ErrorKind::Parse, 0, 0, "empty antecedent"));
            }
            for d in ds {
                validate_clause(d, false)?;
            }
            validate_goal(b)
        }
    }
}

/// A parsed query with its answer variables in order of first occurrence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryAst {
    pub goal: GoalAst,
    pub answer_vars: Vec<String>,
}

impl QueryAst {
    pub fn new(goal: GoalAst) -> QueryAst {
        let answer_vars = goal.free_vars();
        QueryAst { goal, answer_vars }
    }

    /// Answer variables that are reported to the user (anonymous ones are not).
    pub fn reported_vars(&self) -> impl Iterator<Item = &String> {
        self.answer_vars.iter().filter(|v| !is_anonymous(v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Lexical,
    Parse,
    NonRigidHead,
    OpenClause,
    ClauseInGoal,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub struct SyntaxError {
    pub kind: ErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(kind: ErrorKind, line: usize, column: usize, message: impl Into<String>) -> SyntaxError {
        SyntaxError { kind, line, column, message: message.into() }
    }
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}
