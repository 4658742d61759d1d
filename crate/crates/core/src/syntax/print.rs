use super::{is_anonymous, ClauseAst, GoalAst, ProgramAst, TermAst, CONS_NAME, NIL_NAME};
use crate::store::Term;
use std::fmt::Write;

/// Prints a source term. Anonymous variables print as `_`.
pub fn print_term_ast(t: &TermAst) -> String {
    let mut out = String::new();
    write_term_ast(t, &mut out);
    out
}

fn write_term_ast(t: &TermAst, out: &mut String) {
    match t {
        TermAst::Var(v) if is_anonymous(v) => out.push('_'),
        TermAst::Var(v) | TermAst::Const(v) => out.push_str(v),
        TermAst::Struct(f, args) if f == CONS_NAME && args.len() == 2 => {
            out.push('[');
            write_term_ast(&args[0], out);
            let mut tail = &args[1];
            loop {
                match tail {
                    TermAst::Struct(f, a) if f == CONS_NAME && a.len() == 2 => {
                        out.push(',');
                        write_term_ast(&a[0], out);
                        tail = &a[1];
                    }
                    TermAst::Const(c) if c == NIL_NAME => break,
                    other => {
                        out.push('|');
                        write_term_ast(other, out);
                        break;
                    }
                }
            }
            out.push(']');
        }
        TermAst::Struct(f, args) => {
            out.push_str(f);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_term_ast(a, out);
            }
            out.push(')');
        }
    }
}

/// Prints a resolved runtime term. Unbound variables print as `_Gn`;
/// with `show_tags` every variable and constant carries a `^tag` suffix.
pub fn print_term(t: &Term, show_tags: bool) -> String {
    let mut out = String::new();
    write_term(t, show_tags, &mut out);
    out
}

fn write_term(t: &Term, tags: bool, out: &mut String) {
    match t {
        Term::Var(n, tag) => {
            let _ = write!(out, "_G{n}");
            if tags {
                let _ = write!(out, "^{tag}");
            }
        }
        Term::Con(c) => {
            out.push_str(c);
            if tags {
                out.push_str("^1");
            }
        }
        Term::Gen { serial, tag } => {
            let _ = write!(out, "c!{tag}!{serial}");
        }
        Term::Struct(f, args) if f == CONS_NAME && args.len() == 2 => {
            out.push('[');
            write_term(&args[0], tags, out);
            let mut tail = &args[1];
            loop {
                match tail {
                    Term::Struct(f, a) if f == CONS_NAME && a.len() == 2 => {
                        out.push(',');
                        write_term(&a[0], tags, out);
                        tail = &a[1];
                    }
                    Term::Con(c) if c == NIL_NAME => break,
                    other => {
                        out.push('|');
                        write_term(other, tags, out);
                        break;
                    }
                }
            }
            out.push(']');
        }
        Term::Struct(f, args) => {
            out.push_str(f);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_term(a, tags, out);
            }
            out.push(')');
        }
    }
}

pub fn print_goal(g: &GoalAst) -> String {
    let mut out = String::new();
    write_goal(g, TOP, &mut out);
    out
}

const TOP: u8 = 4;

fn level(g: &GoalAst) -> u8 {
    match g {
        GoalAst::Or(..) => 3,
        GoalAst::Implies(..) => 2,
        GoalAst::And(..) => 1,
        GoalAst::Atom(_) | GoalAst::True => 0,
        GoalAst::Exists(..) | GoalAst::Forall(..) => TOP,
    }
}

/// Writes `g` where at most operators of level `max` may appear unparenthesized.
/// Quantifiers only go bare in a top position, since their body extends right.
fn write_goal(g: &GoalAst, max: u8, out: &mut String) {
    if level(g) > max {
        out.push('(');
        write_goal(g, TOP, out);
        out.push(')');
        return;
    }
    match g {
        GoalAst::True => out.push_str("true"),
        GoalAst::Atom(t) => write_term_ast(t, out),
        GoalAst::And(a, b) => {
            write_goal(a, 0, out);
            out.push_str(", ");
            write_goal(b, 1, out);
        }
        GoalAst::Or(a, b) => {
            write_goal(a, 2, out);
            out.push_str(" ; ");
            write_goal(b, 3, out);
        }
        GoalAst::Implies(ds, body) => {
            out.push('(');
            for (i, d) in ds.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let bare = d.body.is_none() && d.explicit_quantified.is_empty();
                if !bare {
                    out.push('(');
                }
                write_clause(d, out);
                if !bare {
                    out.push(')');
                }
            }
            out.push_str(") => ");
            write_goal(body, 2, out);
        }
        GoalAst::Exists(v, body) | GoalAst::Forall(v, body) => {
            let q = if matches!(g, GoalAst::Exists(..)) { "exists" } else { "forall" };
            let _ = write!(out, "{q} {v} ");
            write_goal(body, TOP, out);
        }
    }
}

fn write_clause(c: &ClauseAst, out: &mut String) {
    for v in &c.explicit_quantified {
        let _ = write!(out, "forall {v} ");
    }
    write_term_ast(&c.head, out);
    if let Some(b) = &c.body {
        out.push_str(" :- ");
        write_goal(b, 3, out);
    }
}

/// Prints a clause without the terminating `.`.
pub fn print_clause(c: &ClauseAst) -> String {
    let mut out = String::new();
    write_clause(c, &mut out);
    out
}

pub fn print_program(p: &ProgramAst) -> String {
    p.clauses.iter().map(|c| format!("{}.\n", print_clause(c))).collect()
}
