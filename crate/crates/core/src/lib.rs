//! Execution engine for first-order hereditary Harrop formulas: Horn clauses
//! extended with implication and universal quantification in goals.
//!
//! Two engines share the tagged binding [`store`] and the clause-context
//! machinery in [`context`]: a goal-set [`interpreter`] that serves as the
//! reference, and an extended WAM ([`machine`]) fed by the [`compiler`].

pub mod compiler;
pub mod context;
pub mod interpreter;
pub mod machine;
pub mod store;
pub mod syntax;

pub use compiler::{compile, CodeImage, CompileError};
pub use context::{Context, ImplTable, PredKey, RecordId};
pub use interpreter::{Answer, EngineError, Solver, SolverConfig};
pub use machine::{Instr, Machine, MachineConfig};
pub use store::{Addr, Cell, FailReason, Store, Sym, Symbols, Tag, Term, UnifyFailure, VarNaming, View};
pub use syntax::{parse_program, parse_query, ClauseAst, GoalAst, ProgramAst, QueryAst, SyntaxError, TermAst};
