//! Reference listings for the compiler, shared by the golden tests and the
//! acceptance harness.

use harrop_core::machine::listing::{assemble, disassemble, normalize};
use harrop_core::{compile, parse_program};

pub const REV: &str = "rev(L1,L2) :- (rev_aux([],L2), forall X forall L1 forall L3 \
                       (rev_aux([X|L1],L3) :- rev_aux(L1,[X|L3]))) => rev_aux(L1,[]).";

pub const NESTED: &str = "p(Y) :- (forall U exists Z ((forall W (d1(Y,W,Z) :- r(Y,W))), \
                          (forall W (d2(Z,W) :- d1(Z,W,W)))) => exists V g(Z,U,Y,V)), h(Y).";

pub const REV_BLOCK: &[&str] = &[
    "rev: allocate 1",
    "get_variable Y1,A2",
    "push_impl_point t1,1",
    "put_constant [],A2",
    "call rev_aux,1",
    "pop_impl_point",
    "deallocate",
    "proceed",
];

pub const REV_AUX_BLOCK: &[&str] = &[
    "rev_aux: try_me_else C1",
    "initialize X3,1",
    "get_constant [],A1",
    "get_value X3,A2",
    "proceed",
    "C1: retry_me_else C2",
    "get_list A1",
    "unify_variable X3",
    "unify_variable A1",
    "get_variable X4,A2",
    "put_list A2",
    "set_value X3",
    "set_local_value X4",
    "execute rev_aux",
    "C2: trust_ext 1",
];

pub const NESTED_BLOCK: &[&str] = &[
    "p: allocate 4",
    "get_variable Y1,A1",
    "incr_universe",
    "set_univ_tag Y2",
    "set_exist_tag Y3",
    "push_impl_point t2,4",
    "set_exist_tag Y4",
    "put_value Y3,A1",
    "put_value Y2,A2",
    "put_value Y1,A3",
    "put_value Y4,A4",
    "call g,4",
    "pop_impl_point",
    "decr_universe",
    "put_value Y1,A1",
    "deallocate",
    "execute h",
];

pub const D1_BLOCK: &[&str] = &[
    "d1: try_me_else C3",
    "initialize X4,1",
    "initialize X5,3",
    "get_value X4,A1",
    "get_value X5,A3",
    "put_value X4,A1",
    "execute r",
    "C3: trust_ext 1",
];

pub const D2_BLOCK: &[&str] = &[
    "d2: try_me_else C4",
    "initialize X4,3",
    "get_value X4,A1",
    "put_value X4,A1",
    "put_value A2,A3",
    "execute d1",
    "C4: trust_ext 2",
];

/// Lines of the block labelled `name`, through its internal labels.
pub fn block(listing: &str, name: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut on = false;
    for line in listing.lines() {
        match line.split_once(": ") {
            Some((l, _)) if !l.starts_with('C') => on = l == name,
            _ => {}
        }
        if on {
            out.push(line.trim().to_string());
        }
    }
    out
}

/// Normalized listing of `REV` and `NESTED` compiled together.
pub fn listing() -> String {
    let p = parse_program(&format!("{REV}\n{NESTED}")).unwrap();
    normalize(&disassemble(&compile(&p, None).unwrap()))
}

/// Compares every reference block; the error names the first mismatch.
pub fn check_all() -> Result<(), String> {
    let l = listing();
    for (name, want) in
        [("rev", REV_BLOCK), ("rev_aux", REV_AUX_BLOCK), ("p", NESTED_BLOCK), ("d1", D1_BLOCK), ("d2", D2_BLOCK)]
    {
        let got = block(&l, name);
        if got != want {
            return Err(format!("block {name} differs:\n{}", got.join("\n")));
        }
    }
    let p = parse_program(&format!("{REV}\n{NESTED}")).unwrap();
    let text = disassemble(&compile(&p, None).unwrap());
    let back = assemble(&text).map_err(|e| e.to_string())?;
    if disassemble(&back) != text {
        return Err("listing does not survive assemble/disassemble".into());
    }
    Ok(())
}
