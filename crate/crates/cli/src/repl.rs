//! Interactive query loop.

use crate::session::{self, EngineKind, Runner, SessionConfig};
use harrop_core::ProgramAst;
use std::io::{BufRead, IsTerminal, Write};

pub fn run(program: &ProgramAst, mut cfg: SessionConfig, input: impl BufRead) -> u8 {
    let interactive = std::io::stdin().is_terminal();
    let mut lines = input.lines();
    let prompt = |p: &str| {
        if interactive {
            print!("{p}");
            let _ = std::io::stdout().flush();
        }
    };
    loop {
        prompt("?- ");
        let Some(Ok(line)) = lines.next() else {
            return 0;
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(directive) = line.strip_prefix(':') {
            let mut words = directive.split_whitespace();
            match (words.next(), words.next()) {
                (Some("quit"), _) => return 0,
                (Some("engine"), Some("interp")) => cfg.engine = EngineKind::Interp,
                (Some("engine"), Some("wam")) => cfg.engine = EngineKind::Wam,
                (Some("engine"), None) => println!("engine {}", cfg.engine.name()),
                (Some("trace"), Some("on")) => cfg.trace = true,
                (Some("trace"), Some("off")) => cfg.trace = false,
                (Some("trace"), None) => cfg.trace = !cfg.trace,
                _ => eprintln!("unknown directive `{line}`; try :engine interp|wam, :trace [on|off], :quit"),
            }
            continue;
        }
        let query = match session::query(line) {
            Ok(q) => q,
            Err(e) => {
                eprintln!("{e}");
                continue;
            }
        };
        let all = SessionConfig { all_solutions: true, ..cfg.clone() };
        let mut runner = match Runner::new(cfg.engine, program, &query, &all) {
            Ok(r) => r,
            Err(stop) => {
                stop.report();
                continue;
            }
        };
        loop {
            match runner.next() {
                Ok(Some(answer)) => {
                    let shown = answer.lines(cfg.show_tags);
                    if shown.is_empty() {
                        println!("true");
                    }
                    for l in shown {
                        println!("{l}");
                    }
                    prompt("? ");
                    match lines.next() {
                        Some(Ok(reply)) if reply.trim() == ";" => continue,
                        Some(Ok(_)) => {
                            println!("yes");
                            break;
                        }
                        _ => {
                            println!("yes");
                            return 0;
                        }
                    }
                }
                Ok(None) => {
                    println!("no");
                    break;
                }
                Err(stop) => {
                    stop.report();
                    break;
                }
            }
        }
    }
}
