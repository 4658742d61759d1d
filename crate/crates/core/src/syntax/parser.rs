use super::lexer::{tokenize, Tok, Token};
use super::{ClauseAst, ErrorKind, GoalAst, ProgramAst, QueryAst, SyntaxError, TermAst};

/// Operator-level expression before it is read as a goal or a clause.
#[derive(Debug)]
enum Expr {
    Term(TermAst, Pos),
    Neck(Box<Expr>, Box<Expr>, Pos),
    Or(Box<Expr>, Box<Expr>),
    Imp(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Forall(String, Box<Expr>, Pos),
    Exists(String, Box<Expr>, Pos),
}

#[derive(Clone, Copy, Debug)]
struct Pos {
    line: usize,
    col: usize,
}

impl Expr {
    fn pos(&self) -> Pos {
        match self {
            Expr::Term(_, p) | Expr::Neck(_, _, p) | Expr::Forall(_, _, p) | Expr::Exists(_, _, p) => *p,
            Expr::Or(a, _) | Expr::Imp(a, _) | Expr::And(a, _) => a.pos(),
        }
    }
}

fn err(kind: ErrorKind, p: Pos, msg: impl Into<String>) -> SyntaxError {
    SyntaxError::new(kind, p.line, p.col, msg)
}

const NECK: u8 = 4;
const OR: u8 = 3;
const IMP: u8 = 2;
const AND: u8 = 1;

struct Parser {
    toks: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        let t = &self.toks[self.at];
        Pos { line: t.line, col: t.col }
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), SyntaxError> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected {}", want.describe())))
        }
    }

    fn unexpected(&self, what: &str) -> SyntaxError {
        err(ErrorKind::Parse, self.pos(), format!("{what}, found {}", self.peek().describe()))
    }

    fn expr(&mut self, level: u8) -> Result<Expr, SyntaxError> {
        if level == 0 {
            return self.primary();
        }
        let lhs = self.expr(level - 1)?;
        let op =
            matches!((level, self.peek()), (NECK, Tok::Neck) | (OR, Tok::Semi) | (IMP, Tok::Arrow) | (AND, Tok::Comma));
        if !op {
            return Ok(lhs);
        }
        let p = self.pos();
        self.next();
        Ok(match level {
            NECK => Expr::Neck(Box::new(lhs), Box::new(self.expr(OR)?), p),
            OR => Expr::Or(Box::new(lhs), Box::new(self.expr(OR)?)),
            IMP => Expr::Imp(Box::new(lhs), Box::new(self.expr(IMP)?)),
            _ => Expr::And(Box::new(lhs), Box::new(self.expr(AND)?)),
        })
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        let p = self.pos();
        match (self.peek().clone(), self.peek2().clone()) {
            (Tok::Ident(q), Tok::Var(v)) if q == "forall" || q == "exists" => {
                self.next();
                self.next();
                let body = Box::new(self.expr(NECK)?);
                Ok(if q == "forall" { Expr::Forall(v, body, p) } else { Expr::Exists(v, body, p) })
            }
            (Tok::LParen, _) => {
                self.next();
                let e = self.expr(NECK)?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            _ => Ok(Expr::Term(self.term()?, p)),
        }
    }

    fn term(&mut self) -> Result<TermAst, SyntaxError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.next();
                Ok(TermAst::Var(v))
            }
            Tok::Int(n) => {
                self.next();
                Ok(TermAst::Const(n))
            }
            Tok::Ident(f) => {
                self.next();
                if *self.peek() == Tok::LParen {
                    self.next();
                    let mut args = vec![self.term()?];
                    while *self.peek() == Tok::Comma {
                        self.next();
                        args.push(self.term()?);
                    }
                    self.expect(Tok::RParen)?;
                    Ok(TermAst::Struct(f, args))
                } else {
                    Ok(TermAst::Const(f))
                }
            }
            Tok::LBrack => {
                self.next();
                if *self.peek() == Tok::RBrack {
                    self.next();
                    return Ok(TermAst::atom(super::NIL_NAME));
                }
                let mut items = vec![self.term()?];
                while *self.peek() == Tok::Comma {
                    self.next();
                    items.push(self.term()?);
                }
                let tail = if *self.peek() == Tok::Bar {
                    self.next();
                    Some(self.term()?)
                } else {
                    None
                };
                self.expect(Tok::RBrack)?;
                Ok(TermAst::list(items, tail))
            }
            _ => Err(self.unexpected("expected a term")),
        }
    }
}

fn to_goal(e: Expr) -> Result<GoalAst, SyntaxError> {
    Ok(match e {
        Expr::Term(TermAst::Var(_), p) => {
            return Err(err(ErrorKind::Parse, p, "a bare variable is not a goal"));
        }
        Expr::Term(t, p) if t.is_integer() => {
            return Err(err(ErrorKind::Parse, p, "an integer is not a goal"));
        }
        Expr::Term(TermAst::Const(c), _) if c == "true" => GoalAst::True,
        Expr::Term(t, _) => GoalAst::Atom(t),
        Expr::And(a, b) => GoalAst::and(to_goal(*a)?, to_goal(*b)?),
        Expr::Or(a, b) => GoalAst::or(to_goal(*a)?, to_goal(*b)?),
        Expr::Forall(v, b, _) => GoalAst::Forall(v, Box::new(to_goal(*b)?)),
        Expr::Exists(v, b, _) => GoalAst::Exists(v, Box::new(to_goal(*b)?)),
        Expr::Imp(ds, g) => {
            let mut clauses = Vec::new();
            to_clauses(*ds, &mut clauses)?;
            GoalAst::Implies(clauses, Box::new(to_goal(*g)?))
        }
        Expr::Neck(_, _, p) => {
            return Err(err(
                ErrorKind::ClauseInGoal,
                p,
                "clause syntax in goal position: `:-` may only appear in a clause; use `=>` for implication goals",
            ));
        }
    })
}

fn to_clauses(e: Expr, out: &mut Vec<ClauseAst>) -> Result<(), SyntaxError> {
    match e {
        Expr::And(a, b) => {
            to_clauses(*a, out)?;
            to_clauses(*b, out)
        }
        other => {
            let (head, body, explicit) = clause_parts(other)?;
            out.push(ClauseAst::local(head, body, explicit));
            Ok(())
        }
    }
}

fn clause_parts(e: Expr) -> Result<(TermAst, Option<GoalAst>, Vec<String>), SyntaxError> {
    let mut explicit = Vec::new();
    let mut cur = e;
    while let Expr::Forall(v, body, _) = cur {
        explicit.push(v);
        cur = *body;
    }
    let (head, body) = match cur {
        Expr::Neck(h, b, _) => (to_head(*h)?, Some(to_goal(*b)?)),
        Expr::And(a, _) if !explicit.is_empty() => {
            return Err(err(ErrorKind::Parse, a.pos(), "a quantifier may not range over a list of clauses"));
        }
        other => (to_head(other)?, None),
    };
    Ok((head, body, explicit))
}

fn to_head(e: Expr) -> Result<TermAst, SyntaxError> {
    match e {
        Expr::Term(TermAst::Var(v), p) => Err(err(ErrorKind::NonRigidHead, p, format!("non-rigid clause head `{v}`"))),
        Expr::Term(t, p) if t.is_integer() => {
            Err(err(ErrorKind::NonRigidHead, p, "an integer cannot be a clause head"))
        }
        Expr::Term(TermAst::Const(c), p) if c == "true" => Err(err(ErrorKind::Parse, p, "`true` cannot be defined")),
        Expr::Term(t, _) => Ok(t),
        other => Err(err(ErrorKind::Parse, other.pos(), "clause head must be an atomic formula")),
    }
}

fn parser_for(text: &str) -> Result<Parser, SyntaxError> {
    Ok(Parser { toks: tokenize(text)?, at: 0 })
}

/// Parses a sequence of `.`-terminated clauses.
pub fn parse_program(text: &str) -> Result<ProgramAst, SyntaxError> {
    let mut p = parser_for(text)?;
    let mut clauses = Vec::new();
    while *p.peek() != Tok::Eof {
        let e = p.expr(NECK)?;
        p.expect(Tok::End)?;
        let (head, body, explicit) = clause_parts(e)?;
        clauses.push(ClauseAst::top_level(head, body, explicit));
    }
    let prog = ProgramAst { clauses };
    prog.validate()?;
    Ok(prog)
}

/// Parses a single `.`-terminated goal.
pub fn parse_query(text: &str) -> Result<QueryAst, SyntaxError> {
    let mut p = parser_for(text)?;
    let e = p.expr(NECK)?;
    p.expect(Tok::End)?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("expected end of input after the query"));
    }
    Ok(QueryAst::new(to_goal(e)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(s: &str) -> GoalAst {
        GoalAst::Atom(parse_term(s))
    }

    fn parse_term(s: &str) -> TermAst {
        let mut p = parser_for(s).unwrap();
        p.term().unwrap()
    }

    #[test]
    fn fact() {
        let p = parse_program("p(a).").unwrap();
        assert_eq!(p.clauses.len(), 1);
        assert_eq!(p.clauses[0].head, TermAst::Struct("p".into(), vec![TermAst::atom("a")]));
        assert!(p.clauses[0].body.is_none());
    }

    #[test]
    fn shared_variable_rev_clause() {
        let src = "rev(L1,L2) :- (rev_aux([],L2), (forall X forall L1 forall L3 \
                   (rev_aux([X|L1],L3) :- rev_aux(L1,[X|L3])))) => rev_aux(L1,[]).";
        let p = parse_program(src).unwrap();
        let c = &p.clauses[0];
        assert_eq!(c.implicit_quantified, vec!["L1", "L2"]);
        let Some(GoalAst::Implies(ds, g)) = &c.body else { panic!("expected implication body") };
        assert_eq!(ds.len(), 2);
        assert_eq!(ds[0].free_vars, vec!["L2"]);
        assert_eq!(ds[1].explicit_quantified, vec!["X", "L1", "L3"]);
        assert!(ds[1].free_vars.is_empty());
        assert_eq!(**g, atom("rev_aux(L1,[])"));
    }

    #[test]
    fn variable_goal_rejected() {
        let e = parse_program("p(X) :- X.").unwrap_err();
        assert!(e.message.contains("variable"), "{e}");
    }

    #[test]
    fn non_rigid_head_rejected() {
        let e = parse_program("X :- p.").unwrap_err();
        assert_eq!(e.kind, ErrorKind::NonRigidHead);
    }

    #[test]
    fn query_answer_vars() {
        let q = parse_query("rev([1,2,3], L).").unwrap();
        assert_eq!(q.answer_vars, vec!["L"]);
        assert_eq!(q.goal, atom("rev([1,2,3],L)"));
    }

    #[test]
    fn mixed_quantifiers() {
        let q = parse_query("exists X forall Y p(X,Y).").unwrap();
        assert_eq!(q.goal, GoalAst::exists("X", GoalAst::forall("Y", atom("p(X,Y)"))));
        assert!(q.answer_vars.is_empty());
    }

    #[test]
    fn neck_in_antecedent_head_rejected() {
        assert!(parse_query("(q(a), forall X ((q(X), p(b)) :- g(X))) => g(Z).").is_err());
    }

    #[test]
    fn neck_in_goal_rejected() {
        let e = parse_query("p :- q.").unwrap_err();
        assert_eq!(e.kind, ErrorKind::ClauseInGoal);
    }

    #[test]
    fn precedence() {
        // `,` binds tighter than `=>`, which binds tighter than `;`.
        let q = parse_query("a, b => c ; d.").unwrap();
        let expected = GoalAst::or(
            GoalAst::implies(
                vec![
                    ClauseAst::local(TermAst::atom("a"), None, vec![]),
                    ClauseAst::local(TermAst::atom("b"), None, vec![]),
                ],
                atom("c"),
            ),
            atom("d"),
        );
        assert_eq!(q.goal, expected);
    }

    #[test]
    fn implication_right_associative() {
        let q = parse_query("a => b => c.").unwrap();
        let GoalAst::Implies(_, inner) = q.goal else { panic!() };
        assert!(matches!(*inner, GoalAst::Implies(_, _)));
    }

    #[test]
    fn quantifier_scope_extends_right() {
        let q = parse_query("forall X p(X), q(X).").unwrap();
        assert_eq!(q.goal, GoalAst::forall("X", GoalAst::and(atom("p(X)"), atom("q(X)"))));
        assert_eq!(q.answer_vars, Vec::<String>::new());
    }

    #[test]
    fn quantifier_over_clause_list_rejected() {
        let e = parse_query("(forall X (p(X), q(X))) => r.").unwrap_err();
        assert!(e.message.contains("list of clauses"), "{e}");
    }

    #[test]
    fn lists_and_integers() {
        assert_eq!(
            parse_term("[1,2|T]"),
            TermAst::list(vec![TermAst::atom("1"), TermAst::atom("2")], Some(TermAst::Var("T".into())))
        );
        assert_eq!(parse_term("[]"), TermAst::atom("[]"));
    }

    #[test]
    fn comments_and_positions() {
        let e = parse_program("% leading comment\np(a).\nq(b) :- .").unwrap_err();
        assert_eq!((e.line, e.column), (3, 9));
    }

    #[test]
    fn anonymous_variables_are_distinct() {
        let p = parse_program("p(_, _).").unwrap();
        assert_eq!(p.clauses[0].implicit_quantified.len(), 2);
    }

    #[test]
    fn anonymous_in_antecedent_is_local() {
        let q = parse_query("(d(_) => p).").unwrap();
        let GoalAst::Implies(ds, _) = q.goal else { panic!() };
        assert!(ds[0].free_vars.is_empty());
        assert_eq!(ds[0].implicit_quantified.len(), 1);
    }

    #[test]
    fn true_goal() {
        assert_eq!(parse_query("true.").unwrap().goal, GoalAst::True);
    }
}
