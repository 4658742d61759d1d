//! Program loading and a common face for the two engines.

use anyhow::{Context as _, Result};
use harrop_core::machine::MachineError;
use harrop_core::{
    compile, parse_program, parse_query, Answer, EngineError, Machine, MachineConfig, ProgramAst, QueryAst, Solver,
    SolverConfig,
};
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum EngineKind {
    Interp,
    Wam,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Interp => "interp",
            EngineKind::Wam => "wam",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub engine: EngineKind,
    pub all_solutions: bool,
    pub max_solutions: Option<usize>,
    pub max_depth: Option<u32>,
    pub max_steps: Option<u64>,
    pub trace: bool,
    pub show_tags: bool,
}

/// Process exit statuses.
pub mod exit {
    pub const ANSWERS: u8 = 0;
    pub const NO_ANSWERS: u8 = 1;
    pub const ERROR: u8 = 2;
    pub const LIMIT: u8 = 3;
    pub const DISAGREE: u8 = 4;
}

/// Why an engine stopped without exhausting its answers.
#[derive(Debug)]
pub enum Stop {
    Limit(String),
    /// Internal fault, with a dump of the store at the point of failure.
    Fault {
        message: String,
        dump: String,
    },
    Error(String),
}

impl Stop {
    pub fn exit_code(&self) -> u8 {
        match self {
            Stop::Limit(_) => exit::LIMIT,
            Stop::Fault { .. } | Stop::Error(_) => exit::ERROR,
        }
    }

    pub fn report(&self) {
        match self {
            Stop::Limit(m) => eprintln!("limit: {m}"),
            Stop::Fault { message, dump } => eprintln!("fault: {message}\n{dump}"),
            Stop::Error(m) => eprintln!("error: {m}"),
        }
    }
}

/// Reads and parses every file; syntax errors carry `path:line:column`.
pub fn load(paths: &[PathBuf]) -> Result<ProgramAst> {
    let mut program = ProgramAst::default();
    for path in paths {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let p = parse_program(&text).map_err(|e| anyhow::anyhow!("{}:{e}", path.display()))?;
        program.clauses.extend(p.clauses);
    }
    program.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(program)
}

pub fn query(text: &str) -> Result<QueryAst> {
    let text = text.trim();
    let owned;
    let text = if text.ends_with('.') {
        text
    } else {
        owned = format!("{text}.");
        &owned
    };
    parse_query(text).map_err(|e| anyhow::anyhow!("query:{e}"))
}

pub enum Runner {
    Interp(Box<Solver>),
    Wam(Box<Machine>),
}

impl Runner {
    pub fn new(
        engine: EngineKind,
        program: &ProgramAst,
        query: &QueryAst,
        cfg: &SessionConfig,
    ) -> Result<Runner, Stop> {
        let max_solutions = if cfg.all_solutions { cfg.max_solutions } else { cfg.max_solutions.or(Some(1)) };
        Ok(match engine {
            EngineKind::Interp => Runner::Interp(Box::new(Solver::new(
                program,
                query,
                SolverConfig { max_depth: cfg.max_depth, max_solutions, trace: cfg.trace },
            ))),
            EngineKind::Wam => {
                let image = compile(program, Some(query)).map_err(|e| Stop::Error(e.to_string()))?;
                Runner::Wam(Box::new(Machine::new(
                    Arc::new(image),
                    MachineConfig { max_steps: cfg.max_steps, max_solutions, trace: cfg.trace },
                )))
            }
        })
    }

    pub fn next(&mut self) -> Result<Option<Answer>, Stop> {
        match self {
            Runner::Interp(s) => s.next_solution().map_err(|e| match e {
                EngineError::Fault(message) => Stop::Fault { message, dump: s.store().dump() },
                other => Stop::Limit(other.to_string()),
            }),
            Runner::Wam(m) => m.next_solution().map_err(|e| match e {
                MachineError::StepLimit(_) => Stop::Limit(e.to_string()),
                MachineError::Fault { .. } => Stop::Fault { message: e.to_string(), dump: m.store().dump() },
                MachineError::NoQuery => Stop::Error(e.to_string()),
            }),
        }
    }
}
