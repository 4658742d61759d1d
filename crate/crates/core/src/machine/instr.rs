use crate::context::PredKey;
use crate::store::{Sym, Symbols};
use std::fmt::Write;

/// Code address, or a label id before linking.
pub type Label = usize;

/// Register operand. `A` and `X` name the same bank; `Y` is an environment slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reg {
    A(u32),
    X(u32),
    Y(u32),
}

impl Reg {
    /// Index into the register bank, or `None` for an environment slot.
    pub fn bank_index(self) -> Option<usize> {
        match self {
            Reg::A(n) | Reg::X(n) => Some(n as usize),
            Reg::Y(_) => None,
        }
    }

    fn render(self, out: &mut String) {
        let _ = match self {
            Reg::A(n) => write!(out, "A{n}"),
            Reg::X(n) => write!(out, "X{n}"),
            Reg::Y(n) => write!(out, "Y{n}"),
        };
    }

    fn parse(s: &str) -> Option<Reg> {
        let n: u32 = s.get(1..)?.parse().ok()?;
        match s.as_bytes().first()? {
            b'A' => Some(Reg::A(n)),
            b'X' => Some(Reg::X(n)),
            b'Y' => Some(Reg::Y(n)),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Instr {
    PutVariable(Reg, u32),
    PutValue(Reg, u32),
    PutUnsafeValue(Reg, u32),
    PutConstant(Sym, u32),
    PutStructure(Sym, u32, Reg),
    PutList(Reg),
    SetVariable(Reg),
    SetValue(Reg),
    SetLocalValue(Reg),
    SetConstant(Sym),
    SetVoid(u32),
    GetVariable(Reg, u32),
    GetValue(Reg, u32),
    GetConstant(Sym, u32),
    GetStructure(Sym, u32, Reg),
    GetList(Reg),
    UnifyVariable(Reg),
    UnifyValue(Reg),
    UnifyLocalValue(Reg),
    UnifyConstant(Sym),
    UnifyVoid(u32),
    Allocate(u32),
    Deallocate,
    /// Predicate and current environment size.
    Call(PredKey, u32),
    Execute(PredKey),
    Proceed,
    TryMeElse(Label),
    RetryMeElse(Label),
    TrustMe,
    Try(Label),
    Retry(Label),
    Trust(Label),
    Jump(Label),
    IncrUniverse,
    DecrUniverse,
    SetUnivTag(u32),
    SetExistTag(u32),
    /// Table index and current environment size.
    PushImplPoint(usize, u32),
    PopImplPoint,
    /// Load a register or slot from slot `m` of the closure environment.
    Initialize(Reg, u32),
    TrustExt(u32),
    True,
}

impl Instr {
    pub fn opcode(&self) -> &'static str {
        use Instr::*;
        match self {
            PutVariable(..) => "put_variable",
            PutValue(..) => "put_value",
            PutUnsafeValue(..) => "put_unsafe_value",
            PutConstant(..) => "put_constant",
            PutStructure(..) => "put_structure",
            PutList(..) => "put_list",
            SetVariable(..) => "set_variable",
            SetValue(..) => "set_value",
            SetLocalValue(..) => "set_local_value",
            SetConstant(..) => "set_constant",
            SetVoid(..) => "set_void",
            GetVariable(..) => "get_variable",
            GetValue(..) => "get_value",
            GetConstant(..) => "get_constant",
            GetStructure(..) => "get_structure",
            GetList(..) => "get_list",
            UnifyVariable(..) => "unify_variable",
            UnifyValue(..) => "unify_value",
            UnifyLocalValue(..) => "unify_local_value",
            UnifyConstant(..) => "unify_constant",
            UnifyVoid(..) => "unify_void",
            Allocate(..) => "allocate",
            Deallocate => "deallocate",
            Call(..) => "call",
            Execute(..) => "execute",
            Proceed => "proceed",
            TryMeElse(..) => "try_me_else",
            RetryMeElse(..) => "retry_me_else",
            TrustMe => "trust_me",
            Try(..) => "try",
            Retry(..) => "retry",
            Trust(..) => "trust",
            Jump(..) => "jump",
            IncrUniverse => "incr_universe",
            DecrUniverse => "decr_universe",
            SetUnivTag(..) => "set_univ_tag",
            SetExistTag(..) => "set_exist_tag",
            PushImplPoint(..) => "push_impl_point",
            PopImplPoint => "pop_impl_point",
            Initialize(..) => "initialize",
            TrustExt(..) => "trust_ext",
            True => "true",
        }
    }

    pub fn label(&self) -> Option<Label> {
        use Instr::*;
        match *self {
            TryMeElse(l) | RetryMeElse(l) | Try(l) | Retry(l) | Trust(l) | Jump(l) => Some(l),
            _ => None,
        }
    }

    pub fn map_label(self, f: impl FnOnce(Label) -> Label) -> Instr {
        use Instr::*;
        match self {
            TryMeElse(l) => TryMeElse(f(l)),
            RetryMeElse(l) => RetryMeElse(f(l)),
            Try(l) => Try(f(l)),
            Retry(l) => Retry(f(l)),
            Trust(l) => Trust(f(l)),
            Jump(l) => Jump(f(l)),
            other => other,
        }
    }

    /// `opcode operands`, operands comma-separated.
    pub fn render(&self, syms: &Symbols, label_name: &dyn Fn(Label) -> String) -> String {
        use Instr::*;
        let mut out = String::from(self.opcode());
        let mut ops: Vec<String> = Vec::new();
        let reg = |r: Reg| {
            let mut s = String::new();
            r.render(&mut s);
            s
        };
        let areg = |n: u32| format!("A{n}");
        let pred = |k: PredKey| format!("{}/{}", syms.name(k.name), k.arity);
        match *self {
            PutVariable(r, a) | PutValue(r, a) | PutUnsafeValue(r, a) | GetVariable(r, a) | GetValue(r, a) => {
                ops.push(reg(r));
                ops.push(areg(a));
            }
            PutConstant(c, a) | GetConstant(c, a) => {
                ops.push(syms.name(c).to_string());
                ops.push(areg(a));
            }
            PutStructure(f, n, r) | GetStructure(f, n, r) => {
                ops.push(format!("{}/{n}", syms.name(f)));
                ops.push(reg(r));
            }
            PutList(r) | GetList(r) | SetVariable(r) | SetValue(r) | SetLocalValue(r) | UnifyVariable(r)
            | UnifyValue(r) | UnifyLocalValue(r) => ops.push(reg(r)),
            SetConstant(c) | UnifyConstant(c) => ops.push(syms.name(c).to_string()),
            SetVoid(n) | UnifyVoid(n) | Allocate(n) | TrustExt(n) => ops.push(n.to_string()),
            SetUnivTag(n) | SetExistTag(n) => ops.push(format!("Y{n}")),
            Call(k, n) => {
                ops.push(pred(k));
                ops.push(n.to_string());
            }
            Execute(k) => ops.push(pred(k)),
            TryMeElse(l) | RetryMeElse(l) | Try(l) | Retry(l) | Trust(l) | Jump(l) => ops.push(label_name(l)),
            PushImplPoint(t, n) => {
                ops.push(format!("t{}", t + 1));
                ops.push(n.to_string());
            }
            Initialize(r, m) => {
                ops.push(reg(r));
                ops.push(m.to_string());
            }
            Deallocate | Proceed | TrustMe | IncrUniverse | DecrUniverse | PopImplPoint | True => {}
        }
        if !ops.is_empty() {
            out.push(' ');
            out.push_str(&ops.join(","));
        }
        out
    }

    /// Inverse of [`Instr::render`].
    pub fn parse(text: &str, syms: &mut Symbols, label: &mut dyn FnMut(&str) -> Label) -> Result<Instr, String> {
        use Instr::*;
        let text = text.trim();
        let (op, rest) = text.split_once(' ').unwrap_or((text, ""));
        let ops: Vec<&str> = if rest.trim().is_empty() { Vec::new() } else { rest.split(',').map(str::trim).collect() };
        let want = |n: usize| -> Result<(), String> {
            if ops.len() == n {
                Ok(())
            } else {
                Err(format!("`{op}` takes {n} operand(s), got {}", ops.len()))
            }
        };
        let reg = |s: &str| Reg::parse(s).ok_or_else(|| format!("bad register `{s}`"));
        let areg = |s: &str| match Reg::parse(s) {
            Some(Reg::A(n)) => Ok(n),
            _ => Err(format!("expected an argument register, got `{s}`")),
        };
        let num = |s: &str| s.parse::<u32>().map_err(|_| format!("bad number `{s}`"));
        let yslot = |s: &str| match Reg::parse(s) {
            Some(Reg::Y(n)) => Ok(n),
            _ => Err(format!("expected a permanent variable, got `{s}`")),
        };
        let pred = |s: &str, syms: &mut Symbols| -> Result<PredKey, String> {
            let (name, ar) = s.rsplit_once('/').ok_or_else(|| format!("expected name/arity, got `{s}`"))?;
            let ar = ar.parse::<u32>().map_err(|_| format!("bad arity in `{s}`"))?;
            Ok(PredKey::new(syms.intern(name), ar))
        };
        let constant = |s: &str, syms: &mut Symbols| -> Result<Sym, String> {
            if s.is_empty() {
                Err("empty constant".into())
            } else {
                Ok(syms.intern(s))
            }
        };
        let instr = match op {
            "put_variable" | "put_value" | "put_unsafe_value" | "get_variable" | "get_value" => {
                want(2)?;
                let (r, a) = (reg(ops[0])?, areg(ops[1])?);
                match op {
                    "put_variable" => PutVariable(r, a),
                    "put_value" => PutValue(r, a),
                    "put_unsafe_value" => PutUnsafeValue(r, a),
                    "get_variable" => GetVariable(r, a),
                    _ => GetValue(r, a),
                }
            }
            "put_constant" | "get_constant" => {
                want(2)?;
                let c = constant(ops[0], syms)?;
                let a = areg(ops[1])?;
                if op == "put_constant" {
                    PutConstant(c, a)
                } else {
                    GetConstant(c, a)
                }
            }
            "put_structure" | "get_structure" => {
                want(2)?;
                let k = pred(ops[0], syms)?;
                let r = reg(ops[1])?;
                if op == "put_structure" {
                    PutStructure(k.name, k.arity, r)
                } else {
                    GetStructure(k.name, k.arity, r)
                }
            }
            "put_list" | "get_list" | "set_variable" | "set_value" | "set_local_value" | "unify_variable"
            | "unify_value" | "unify_local_value" => {
                want(1)?;
                let r = reg(ops[0])?;
                match op {
                    "put_list" => PutList(r),
                    "get_list" => GetList(r),
                    "set_variable" => SetVariable(r),
                    "set_value" => SetValue(r),
                    "set_local_value" => SetLocalValue(r),
                    "unify_variable" => UnifyVariable(r),
                    "unify_value" => UnifyValue(r),
                    _ => UnifyLocalValue(r),
                }
            }
            "set_constant" | "unify_constant" => {
                want(1)?;
                let c = constant(ops[0], syms)?;
                if op == "set_constant" {
                    SetConstant(c)
                } else {
                    UnifyConstant(c)
                }
            }
            "set_void" | "unify_void" | "allocate" | "trust_ext" => {
                want(1)?;
                let n = num(ops[0])?;
                match op {
                    "set_void" => SetVoid(n),
                    "unify_void" => UnifyVoid(n),
                    "allocate" => Allocate(n),
                    _ => TrustExt(n),
                }
            }
            "set_univ_tag" | "set_exist_tag" => {
                want(1)?;
                let y = yslot(ops[0])?;
                if op == "set_univ_tag" {
                    SetUnivTag(y)
                } else {
                    SetExistTag(y)
                }
            }
            "call" => {
                want(2)?;
                Call(pred(ops[0], syms)?, num(ops[1])?)
            }
            "execute" => {
                want(1)?;
                Execute(pred(ops[0], syms)?)
            }
            "try_me_else" | "retry_me_else" | "try" | "retry" | "trust" | "jump" => {
                want(1)?;
                let l = label(ops[0]);
                match op {
                    "try_me_else" => TryMeElse(l),
                    "retry_me_else" => RetryMeElse(l),
                    "try" => Try(l),
                    "retry" => Retry(l),
                    "trust" => Trust(l),
                    _ => Jump(l),
                }
            }
            "push_impl_point" => {
                want(2)?;
                let t = ops[0]
                    .strip_prefix('t')
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|n| *n >= 1)
                    .ok_or_else(|| format!("bad table `{}`", ops[0]))?;
                PushImplPoint(t - 1, num(ops[1])?)
            }
            "initialize" => {
                want(2)?;
                Initialize(reg(ops[0])?, num(ops[1])?)
            }
            "deallocate" | "proceed" | "trust_me" | "incr_universe" | "decr_universe" | "pop_impl_point" | "true" => {
                want(0)?;
                match op {
                    "deallocate" => Deallocate,
                    "proceed" => Proceed,
                    "trust_me" => TrustMe,
                    "incr_universe" => IncrUniverse,
                    "decr_universe" => DecrUniverse,
                    "pop_impl_point" => PopImplPoint,
                    _ => True,
                }
            }
            _ => return Err(format!("unknown opcode `{op}`")),
        };
        Ok(instr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(text: &str) {
        let mut syms = Symbols::new();
        let mut labels: Vec<String> = Vec::new();
        let mut intern = |s: &str| match labels.iter().position(|l| l == s) {
            Some(i) => i,
            None => {
                labels.push(s.to_string());
                labels.len() - 1
            }
        };
        let i = Instr::parse(text, &mut syms, &mut intern).unwrap();
        let names = labels.clone();
        assert_eq!(i.render(&syms, &|l| names[l].clone()), text);
    }

    #[test]
    fn listing_forms() {
        for t in [
            "allocate 1",
            "get_variable Y1,A2",
            "push_impl_point t1,1",
            "put_constant [],A2",
            "call rev_aux/2,1",
            "pop_impl_point",
            "try_me_else C1",
            "initialize X3,1",
            "get_list A1",
            "unify_variable A1",
            "set_local_value X4",
            "execute rev_aux/2",
            "trust_ext 1",
            "set_univ_tag Y2",
            "put_structure f/2,X5",
            "unify_void 2",
            "true",
        ] {
            roundtrip(t);
        }
    }

    #[test]
    fn parse_errors() {
        let mut syms = Symbols::new();
        let mut l = |_: &str| 0;
        assert!(Instr::parse("allocate", &mut syms, &mut l).is_err());
        assert!(Instr::parse("frobnicate 1", &mut syms, &mut l).is_err());
        assert!(Instr::parse("get_value Y1,X2", &mut syms, &mut l).is_err());
    }
}
