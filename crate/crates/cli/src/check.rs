//! Runs both engines on one query and compares their answer multisets.

use crate::session::{exit, EngineKind, Runner, SessionConfig, Stop};
use harrop_core::{ProgramAst, QueryAst};

pub enum Report {
    Agree(usize),
    Disagree { witness: String, only_in: EngineKind },
    Inconclusive(String),
}

impl Report {
    pub fn exit_code(&self) -> u8 {
        match self {
            Report::Agree(_) => exit::ANSWERS,
            Report::Disagree { .. } => exit::DISAGREE,
            Report::Inconclusive(_) => exit::LIMIT,
        }
    }
}

/// Every answer of one engine, each rendered on one line, sorted.
fn answers(
    engine: EngineKind,
    program: &ProgramAst,
    query: &QueryAst,
    cfg: &SessionConfig,
) -> Result<Vec<String>, Stop> {
    let cfg = SessionConfig { all_solutions: true, trace: false, ..cfg.clone() };
    let mut run = Runner::new(engine, program, query, &cfg)?;
    let mut out = Vec::new();
    while let Some(a) = run.next()? {
        out.push(a.lines(cfg.show_tags).join(", "));
    }
    out.sort();
    Ok(out)
}

/// Removes every element of `b` from `a` once, multiset style.
fn difference(a: &[String], b: &[String]) -> Vec<String> {
    let mut rest = b.to_vec();
    a.iter()
        .filter(|x| match rest.iter().position(|y| y == *x) {
            Some(i) => {
                rest.swap_remove(i);
                false
            }
            None => true,
        })
        .cloned()
        .collect()
}

pub fn cross_check(program: &ProgramAst, query: &QueryAst, cfg: &SessionConfig) -> Report {
    let (interp, wam) = std::thread::scope(|s| {
        let i = s.spawn(|| answers(EngineKind::Interp, program, query, cfg));
        let w = s.spawn(|| answers(EngineKind::Wam, program, query, cfg));
        (i.join(), w.join())
    });
    let (interp, wam) = match (interp, wam) {
        (Ok(Ok(i)), Ok(Ok(w))) => (i, w),
        (Ok(Err(e)), _) => return Report::Inconclusive(format!("interp: {}", describe(&e))),
        (_, Ok(Err(e))) => return Report::Inconclusive(format!("wam: {}", describe(&e))),
        _ => return Report::Inconclusive("engine thread panicked".into()),
    };
    // The shortest unmatched answer is the witness.
    let shortest = |v: Vec<String>| v.into_iter().min_by_key(|s| (s.len(), s.clone()));
    if let Some(w) = shortest(difference(&interp, &wam)) {
        return Report::Disagree { witness: w, only_in: EngineKind::Interp };
    }
    if let Some(w) = shortest(difference(&wam, &interp)) {
        return Report::Disagree { witness: w, only_in: EngineKind::Wam };
    }
    Report::Agree(interp.len())
}

fn describe(s: &Stop) -> String {
    match s {
        Stop::Limit(m) | Stop::Error(m) => m.clone(),
        Stop::Fault { message, .. } => message.clone(),
    }
}

pub fn print(report: &Report) {
    match report {
        Report::Agree(n) => println!("AGREE ({n} answers)"),
        Report::Disagree { witness, only_in } => {
            let w = if witness.is_empty() { "yes" } else { witness };
            println!("DISAGREE: `{w}` only from {}", only_in.name());
        }
        Report::Inconclusive(why) => println!("INCONCLUSIVE: {why}"),
    }
}

#[cfg(test)]
mod tests {
    use super::difference;

    #[test]
    fn multiset_difference_counts_duplicates() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        assert_eq!(difference(&s(&["a", "a", "b"]), &s(&["a"])), s(&["a", "b"]));
        assert!(difference(&s(&["a"]), &s(&["a", "a"])).is_empty());
    }
}
