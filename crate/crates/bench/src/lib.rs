//! Workloads shared by the engine benchmarks.

use harrop_core::{
    compile, parse_program, parse_query, CodeImage, Machine, MachineConfig, ProgramAst, QueryAst, Solver, SolverConfig,
};
use std::sync::Arc;

pub struct Fixture {
    pub name: &'static str,
    pub program: ProgramAst,
    pub query: QueryAst,
    pub image: Arc<CodeImage>,
}

impl Fixture {
    pub fn new(name: &'static str, program: &str, query: &str) -> Fixture {
        let program = parse_program(program).expect("fixture program parses");
        let query = parse_query(query).expect("fixture query parses");
        let image = Arc::new(compile(&program, Some(&query)).expect("fixture compiles"));
        Fixture { name, program, query, image }
    }

    /// Every answer from the interpreter, rendered.
    pub fn interp(&self) -> Vec<Vec<String>> {
        let mut s = Solver::new(&self.program, &self.query, SolverConfig::default());
        s.all().expect("fixture runs").iter().map(|a| a.lines(false)).collect()
    }

    /// Every answer from the machine, reusing the compiled image.
    pub fn wam(&self) -> Vec<Vec<String>> {
        let mut m = Machine::new(self.image.clone(), MachineConfig::default());
        m.all().expect("fixture runs").iter().map(|a| a.lines(false)).collect()
    }

    /// Compilation alone, from the parsed program.
    pub fn compile(&self) -> CodeImage {
        compile(&self.program, Some(&self.query)).expect("fixture compiles")
    }
}

fn list(n: usize) -> String {
    let items: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    format!("[{}]", items.join(","))
}

const NREV: &str = "app([],L,L).\n\
                    app([X|L1],L2,[X|L3]) :- app(L1,L2,L3).\n\
                    nrev([],[]).\n\
                    nrev([X|L],R) :- nrev(L,R1), app(R1,[X],R).";

const LOCAL_REV: &str = "rev(L1,L2) :- (rev_aux([],L2), forall X forall L1 forall L3 \
                         (rev_aux([X|L1],L3) :- rev_aux(L1,[X|L3]))) => rev_aux(L1,[]).";

/// Each level assumes a fact for a fresh constant and calls the next.
const NESTED: &str = "deep(0).\n\
                      deep(s(N)) :- forall C (mark(C) => (mark(C), deep(N))).";

const MEMBER: &str = "mem(X,[X|_]).\n\
                      mem(X,[_|L]) :- mem(X,L).\n\
                      pairs(L,X,Y) :- mem(X,L), mem(Y,L).";

fn peano(n: usize) -> String {
    (0..n).fold("0".to_string(), |acc, _| format!("s({acc})"))
}

pub fn fixtures() -> Vec<Fixture> {
    vec![
        Fixture::new("nrev30", NREV, &format!("nrev({},R).", list(30))),
        Fixture::new("local_rev200", LOCAL_REV, &format!("rev({},R).", list(200))),
        Fixture::new("nested_scopes40", NESTED, &format!("deep({}).", peano(40))),
        Fixture::new("pairs20", MEMBER, &format!("pairs({},X,Y).", list(20))),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engines_agree_on_fixtures() {
        for f in fixtures() {
            let i = f.interp();
            assert!(!i.is_empty(), "{}", f.name);
            assert_eq!(i, f.wam(), "{}", f.name);
        }
    }

    #[test]
    fn nrev_reverses() {
        let f = Fixture::new("nrev3", NREV, "nrev([1,2,3],R).");
        assert_eq!(f.wam(), [["R = [3,2,1]"]]);
    }
}
