//! `harrop`: run queries against hereditary Harrop programs.

mod check;
mod repl;
mod session;

use clap::{Args, Parser, Subcommand};
use harrop_core::machine::listing::disassemble;
use harrop_core::{compile, Answer};
use session::{exit, EngineKind, Runner, SessionConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "harrop", version, about = "Interpreter and abstract machine for hereditary Harrop programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one query and print its answers.
    Run {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, short)]
        query: String,
        #[command(flatten)]
        opts: Opts,
    },
    /// Read queries from standard input.
    Repl {
        files: Vec<PathBuf>,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run a query on both engines and compare the answers.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, short)]
        query: String,
        #[command(flatten)]
        opts: Opts,
    },
    /// Compile a program, optionally with a query.
    Compile {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, short)]
        query: Option<String>,
        /// Print the bytecode listing.
        #[arg(long)]
        emit_bytecode: bool,
    },
}

#[derive(Args, Clone)]
struct Opts {
    #[arg(long, value_enum, default_value = "wam")]
    engine: EngineKind,
    /// Enumerate every answer instead of stopping at the first.
    #[arg(long)]
    all: bool,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_solutions: Option<u64>,
    /// Longest expansion chain on one path (interpreter).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    max_depth: Option<u32>,
    /// Instruction budget (machine).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_steps: Option<u64>,
    /// Trace every transition to standard error.
    #[arg(long)]
    trace: bool,
    /// Print universe tags on variables and constants.
    #[arg(long)]
    show_tags: bool,
}

impl Opts {
    fn config(&self) -> SessionConfig {
        SessionConfig {
            engine: self.engine,
            all_solutions: self.all,
            max_solutions: self.max_solutions.map(|n| n as usize),
            max_depth: self.max_depth,
            max_steps: self.max_steps,
            trace: self.trace,
            show_tags: self.show_tags,
        }
    }
}

fn print_answer(a: &Answer, show_tags: bool) {
    for l in a.lines(show_tags) {
        println!("{l}");
    }
}

fn run(files: &[PathBuf], query: &str, cfg: &SessionConfig) -> anyhow::Result<u8> {
    let program = session::load(files)?;
    let query = session::query(query)?;
    let mut runner = match Runner::new(cfg.engine, &program, &query, cfg) {
        Ok(r) => r,
        Err(stop) => {
            stop.report();
            return Ok(stop.exit_code());
        }
    };
    let mut found = 0;
    loop {
        match runner.next() {
            Ok(Some(a)) => {
                if found > 0 {
                    println!(";");
                }
                print_answer(&a, cfg.show_tags);
                found += 1;
            }
            Ok(None) => break,
            Err(stop) => {
                stop.report();
                return Ok(stop.exit_code());
            }
        }
    }
    if found > 0 {
        println!("yes");
        Ok(exit::ANSWERS)
    } else {
        println!("no");
        Ok(exit::NO_ANSWERS)
    }
}

/// Defaults that keep `check` total when no limits are given.
const CHECK_DEPTH: u32 = 10_000;
const CHECK_STEPS: u64 = 10_000_000;

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Run { files, query, opts } => run(&files, &query, &opts.config()),
        Command::Repl { files, opts } => {
            let program = session::load(&files)?;
            Ok(repl::run(&program, opts.config(), std::io::stdin().lock()))
        }
        Command::Check { files, query, opts } => {
            let program = session::load(&files)?;
            let query = session::query(&query)?;
            let mut cfg = opts.config();
            cfg.max_depth = cfg.max_depth.or(Some(CHECK_DEPTH));
            cfg.max_steps = cfg.max_steps.or(Some(CHECK_STEPS));
            let report = check::cross_check(&program, &query, &cfg);
            check::print(&report);
            Ok(report.exit_code())
        }
        Command::Compile { files, query, emit_bytecode } => {
            let program = session::load(&files)?;
            let query = query.as_deref().map(session::query).transpose()?;
            let image = compile(&program, query.as_ref())?;
            if emit_bytecode {
                print!("{}", disassemble(&image));
            } else {
                println!("{} instructions, {} tables", image.code.len(), image.tables.len());
            }
            Ok(exit::ANSWERS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { exit::ERROR } else { exit::ANSWERS };
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::ERROR)
        }
    }
}
