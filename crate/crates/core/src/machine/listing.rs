//! Text form of a code image.
//!
//! ```text
//! .table t1 rev_aux/2=rev_aux/2@t1
//! .global rev/2=rev/2
//! rev/2: allocate 1
//!     get_variable Y1,A2
//! ```
//!
//! Directives describe tables, global entry points and the query entry.
//! Instruction lines carry an optional `label:` prefix; when several labels
//! share an address all but the last stand on lines of their own.

use super::instr::Instr;
use crate::compiler::{CodeImage, QueryEntry};
use crate::context::{ImplTable, PredKey};
use crate::store::{Addr, Symbols};
use std::collections::HashMap;
use std::fmt::Write;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ListingError {
    pub line: usize,
    pub message: String,
}

fn pred_text(syms: &Symbols, k: PredKey) -> String {
    format!("{}/{}", syms.name(k.name), k.arity)
}

pub fn disassemble(img: &CodeImage) -> String {
    let mut out = String::new();
    for (t, table) in img.tables.iter().enumerate() {
        let _ = write!(out, ".table t{}", t + 1);
        for (off, k) in table.keys().iter().enumerate() {
            let entry = *table.entry(off + 1).expect("offset within table");
            let _ = write!(out, " {}={}", pred_text(&img.symbols, *k), img.label_name(entry));
        }
        out.push('\n');
    }
    for (k, a) in &img.globals {
        let _ = writeln!(out, ".global {}={}", pred_text(&img.symbols, *k), img.label_name(*a));
    }
    if let Some(q) = &img.query {
        let _ = write!(out, ".query {}", img.label_name(q.entry));
        for (name, slot) in &q.answers {
            let _ = write!(out, " {name}={slot}");
        }
        out.push('\n');
    }
    let name = |l: usize| img.label_name(l);
    for (addr, ins) in img.code.iter().enumerate() {
        let labels: Vec<&str> = img.labels_at(addr).collect();
        if let Some((last, rest)) = labels.split_last() {
            for l in rest {
                let _ = writeln!(out, "{l}:");
            }
            let _ = write!(out, "{last}: ");
        } else {
            out.push_str("    ");
        }
        out.push_str(&ins.render(&img.symbols, &name));
        out.push('\n');
    }
    out
}

/// Parses a listing produced by [`disassemble`].
pub fn assemble(text: &str) -> Result<CodeImage, ListingError> {
    let mut syms = Symbols::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut defined: Vec<Option<Addr>> = Vec::new();
    let mut code: Vec<Instr> = Vec::new();
    let mut tables: Vec<Vec<(PredKey, usize)>> = Vec::new();
    let mut globals: Vec<(PredKey, usize)> = Vec::new();
    let mut query: Option<(usize, Vec<(String, u32)>)> = None;

    let mut label = |name: &str, label_names: &mut Vec<String>, defined: &mut Vec<Option<Addr>>| -> usize {
        *label_ids.entry(name.to_string()).or_insert_with(|| {
            label_names.push(name.to_string());
            defined.push(None);
            label_names.len() - 1
        })
    };
    let err = |line: usize, message: String| ListingError { line, message };
    let parse_pred = |s: &str, syms: &mut Symbols| -> Option<PredKey> {
        let (n, a) = s.rsplit_once('/')?;
        Some(PredKey::new(syms.intern(n), a.parse().ok()?))
    };

    for (ln, raw) in text.lines().enumerate() {
        let ln = ln + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('.') {
            let mut words = rest.split_whitespace();
            let kind = words.next().unwrap_or("");
            match kind {
                "table" => {
                    let t = words.next().and_then(|w| w.strip_prefix('t')).and_then(|n| n.parse::<usize>().ok());
                    if t != Some(tables.len() + 1) {
                        return Err(err(ln, "tables must be numbered consecutively from t1".into()));
                    }
                    let mut entries = Vec::new();
                    for w in words {
                        let (k, l) = w.split_once('=').ok_or_else(|| err(ln, format!("bad table entry `{w}`")))?;
                        let key = parse_pred(k, &mut syms).ok_or_else(|| err(ln, format!("bad predicate `{k}`")))?;
                        entries.push((key, label(l, &mut label_names, &mut defined)));
                    }
                    tables.push(entries);
                }
                "global" => {
                    let w = words.next().ok_or_else(|| err(ln, "missing global entry".into()))?;
                    let (k, l) = w.split_once('=').ok_or_else(|| err(ln, format!("bad global entry `{w}`")))?;
                    let key = parse_pred(k, &mut syms).ok_or_else(|| err(ln, format!("bad predicate `{k}`")))?;
                    globals.push((key, label(l, &mut label_names, &mut defined)));
                }
                "query" => {
                    let l = words.next().ok_or_else(|| err(ln, "missing query label".into()))?;
                    let l = label(l, &mut label_names, &mut defined);
                    let mut answers = Vec::new();
                    for w in words {
                        let (n, s) = w.split_once('=').ok_or_else(|| err(ln, format!("bad answer `{w}`")))?;
                        let s = s.parse().map_err(|_| err(ln, format!("bad slot in `{w}`")))?;
                        answers.push((n.to_string(), s));
                    }
                    query = Some((l, answers));
                }
                other => return Err(err(ln, format!("unknown directive `.{other}`"))),
            }
            continue;
        }
        let body = match line.split_once(':') {
            Some((l, rest)) if !l.contains(' ') => {
                let id = label(l, &mut label_names, &mut defined);
                if defined[id].is_some() {
                    return Err(err(ln, format!("label `{l}` defined twice")));
                }
                defined[id] = Some(code.len());
                rest.trim()
            }
            _ => line,
        };
        if body.is_empty() {
            continue;
        }
        let mut refer = |name: &str| label(name, &mut label_names, &mut defined);
        code.push(Instr::parse(body, &mut syms, &mut refer).map_err(|m| err(ln, m))?);
    }

    let addr = |l: usize| -> Result<Addr, ListingError> {
        defined[l].ok_or_else(|| err(0, format!("label `{}` is never defined", label_names[l])))
    };
    let mut resolved = Vec::with_capacity(code.len());
    for i in code {
        let mut missing = None;
        let i = i.map_label(|l| match defined[l] {
            Some(a) => a,
            None => {
                missing = Some(l);
                0
            }
        });
        if let Some(l) = missing {
            addr(l)?;
        }
        resolved.push(i);
    }
    let tables = tables
        .into_iter()
        .map(|entries| {
            let entries = entries.into_iter().map(|(k, l)| Ok((k, addr(l)?))).collect::<Result<Vec<_>, _>>()?;
            ImplTable::new(entries).map(Arc::new).map_err(|e| err(0, e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let globals = globals.into_iter().map(|(k, l)| Ok((k, addr(l)?))).collect::<Result<Vec<_>, _>>()?;
    let query = match query {
        Some((l, answers)) => Some(QueryEntry { entry: addr(l)?, answers }),
        None => None,
    };
    let labels = label_names.iter().enumerate().filter_map(|(l, n)| defined[l].map(|a| (a, n.clone()))).collect();
    Ok(CodeImage::from_parts(resolved, syms, tables, globals, labels, query))
}

/// Canonical form for comparing listings: directives dropped, predicate
/// labels reduced to bare names, other labels renamed `C1, C2, ...` and
/// tables `t1, t2, ...` in order of first appearance, and arities removed
/// from `call` and `execute`.
pub fn normalize(listing: &str) -> String {
    let mut labels: HashMap<String, String> = HashMap::new();
    let mut tables: HashMap<String, String> = HashMap::new();
    let mut rename = |l: &str| -> String {
        if let Some((name, _)) = l.split_once('/') {
            return name.to_string();
        }
        if l.starts_with('$') {
            return l.to_string();
        }
        let n = labels.len() + 1;
        labels.entry(l.to_string()).or_insert_with(|| format!("C{n}")).clone()
    };
    let mut out = String::new();
    for raw in listing.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('.') {
            continue;
        }
        let (label, body) = match line.split_once(':') {
            Some((l, rest)) if !l.contains(' ') => (Some(rename(l)), rest.trim()),
            _ => (None, line),
        };
        let (op, operands) = body.split_once(' ').unwrap_or((body, ""));
        let ops: Vec<String> = if operands.is_empty() {
            Vec::new()
        } else {
            operands
                .split(',')
                .enumerate()
                .map(|(i, o)| match op {
                    "try_me_else" | "retry_me_else" | "try" | "retry" | "trust" | "jump" => rename(o),
                    "call" | "execute" if i == 0 => o.rsplit_once('/').map_or(o, |(n, _)| n).to_string(),
                    "push_impl_point" if i == 0 => {
                        let n = tables.len() + 1;
                        tables.entry(o.to_string()).or_insert_with(|| format!("t{n}")).clone()
                    }
                    _ => o.to_string(),
                })
                .collect()
        };
        let mut text = op.to_string();
        if !ops.is_empty() {
            text.push(' ');
            text.push_str(&ops.join(","));
        }
        match (label, body.is_empty()) {
            (Some(l), true) => {
                let _ = writeln!(out, "{l}:");
            }
            (Some(l), false) => {
                let _ = writeln!(out, "{l}: {text}");
            }
            (None, _) => {
                let _ = writeln!(out, "    {text}");
            }
        }
    }
    out
}
