//! Signatures, terms and formulas of the continuous-logic fragment
//! `{atomic, constant, half, truncated subtraction, sup, inf}`.

mod parser;
mod printer;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{in_unit_interval, Q};

pub use parser::parse_formula;

/// Names the parser treats as keywords.
pub const RESERVED: &[&str] = &["half", "sub", "sup", "inf"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("undeclared symbol `{0}`")]
    Undeclared(String),
    #[error("symbol `{name}` expects {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("constant {0} outside [0,1]")]
    ConstRange(Q),
    #[error("invalid signature: {0}")]
    Signature(String),
    #[error("scale {0} is not an inverse power of two")]
    Scale(Q),
    #[error("shift {0} leaves the fragment's constant range")]
    Shift(Q),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    pub arity: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    #[serde(default)]
    pub predicates: Vec<Symbol>,
    #[serde(default)]
    pub functions: Vec<Symbol>,
}

impl Signature {
    pub fn new(predicates: &[(&str, usize)], functions: &[(&str, usize)]) -> Result<Self, FormulaError> {
        let mk = |xs: &[(&str, usize)]| {
            xs.iter()
                .map(|(n, a)| Symbol {
                    name: n.to_string(),
                    arity: *a,
                })
                .collect()
        };
        let sig = Signature {
            predicates: mk(predicates),
            functions: mk(functions),
        };
        sig.validate()?;
        Ok(sig)
    }

    pub fn from_json(text: &str) -> Result<Self, FormulaError> {
        let sig: Signature =
            serde_json::from_str(text).map_err(|e| FormulaError::Signature(e.to_string()))?;
        sig.validate()?;
        Ok(sig)
    }

    pub fn validate(&self) -> Result<(), FormulaError> {
        let mut seen = HashSet::new();
        for s in self.predicates.iter().chain(&self.functions) {
            if !is_ident(&s.name) {
                return Err(FormulaError::Signature(format!("bad symbol name `{}`", s.name)));
            }
            if RESERVED.contains(&s.name.as_str()) {
                return Err(FormulaError::Signature(format!("`{}` is reserved", s.name)));
            }
            if !seen.insert(s.name.as_str()) {
                return Err(FormulaError::Signature(format!("duplicate symbol `{}`", s.name)));
            }
        }
        if let Some(f) = self.functions.iter().find(|f| f.arity == 0) {
            return Err(FormulaError::Signature(format!(
                "function `{}` must have arity at least 1",
                f.name
            )));
        }
        Ok(())
    }

    pub fn predicate_arity(&self, name: &str) -> Option<usize> {
        self.predicates.iter().find(|s| s.name == name).map(|s| s.arity)
    }

    pub fn function_arity(&self, name: &str) -> Option<usize> {
        self.functions.iter().find(|s| s.name == name).map(|s| s.arity)
    }
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    App(String, Vec<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Term::Var(v) => out.push(v),
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    fn rename(&self, from: &str, to: &str) -> Term {
        match self {
            Term::Var(v) if v == from => Term::Var(to.to_string()),
            Term::Var(_) => self.clone(),
            Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| a.rename(from, to)).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricFormula {
    Atomic(String, Vec<Term>),
    Const(Q),
    Half(Box<MetricFormula>),
    TruncSub(Box<MetricFormula>, Box<MetricFormula>),
    Sup(String, Box<MetricFormula>),
    Inf(String, Box<MetricFormula>),
}

use MetricFormula as F;

impl MetricFormula {
    pub fn atomic(pred: &str, vars: &[&str]) -> F {
        F::Atomic(pred.to_string(), vars.iter().map(|v| Term::var(v)).collect())
    }

    pub fn constant(q: Q) -> F {
        F::Const(q)
    }

    pub fn half(a: F) -> F {
        F::Half(Box::new(a))
    }

    pub fn sub(a: F, b: F) -> F {
        F::TruncSub(Box::new(a), Box::new(b))
    }

    pub fn sup(y: &str, a: F) -> F {
        F::Sup(y.to_string(), Box::new(a))
    }

    pub fn inf(y: &str, a: F) -> F {
        F::Inf(y.to_string(), Box::new(a))
    }

    /// `1 ∸ φ`.
    pub fn one_minus(a: F) -> F {
        F::sub(F::Const(Q::one()), a)
    }

    /// `min(a, b)` written as `a ∸ (a ∸ b)`.
    pub fn min(a: F, b: F) -> F {
        F::sub(a.clone(), F::sub(a, b))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_vars_into(&mut Vec::new(), &mut out);
        out
    }

    fn free_vars_into(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            F::Atomic(_, args) => {
                let mut vs = Vec::new();
                args.iter().for_each(|a| a.collect_vars(&mut vs));
                for v in vs {
                    if !bound.iter().any(|b| b == v) {
                        out.insert(v.to_string());
                    }
                }
            }
            F::Const(_) => {}
            F::Half(a) => a.free_vars_into(bound, out),
            F::TruncSub(a, b) => {
                a.free_vars_into(bound, out);
                b.free_vars_into(bound, out);
            }
            F::Sup(y, a) | F::Inf(y, a) => {
                bound.push(y.clone());
                a.free_vars_into(bound, out);
                bound.pop();
            }
        }
    }

    /// Nesting depth of connectives and quantifiers; atoms and constants have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            F::Atomic(..) | F::Const(_) => 0,
            F::Half(a) | F::Sup(_, a) | F::Inf(_, a) => 1 + a.depth(),
            F::TruncSub(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            F::Atomic(..) | F::Const(_) => 1,
            F::Half(a) | F::Sup(_, a) | F::Inf(_, a) => 1 + a.size(),
            F::TruncSub(a, b) => 1 + a.size() + b.size(),
        }
    }

    pub fn has_inf(&self) -> bool {
        match self {
            F::Inf(..) => true,
            F::Atomic(..) | F::Const(_) => false,
            F::Half(a) | F::Sup(_, a) => a.has_inf(),
            F::TruncSub(a, b) => a.has_inf() || b.has_inf(),
        }
    }

    /// Checks symbols, arities and constant ranges against `sig`.
    pub fn check(&self, sig: &Signature) -> Result<(), FormulaError> {
        match self {
            F::Atomic(p, args) => {
                let expected = sig
                    .predicate_arity(p)
                    .ok_or_else(|| FormulaError::Undeclared(p.clone()))?;
                if expected != args.len() {
                    return Err(FormulaError::Arity {
                        name: p.clone(),
                        expected,
                        got: args.len(),
                    });
                }
                args.iter().try_for_each(|t| check_term(t, sig))
            }
            F::Const(q) if !in_unit_interval(q) => Err(FormulaError::ConstRange(*q)),
            F::Const(_) => Ok(()),
            F::Half(a) | F::Sup(_, a) | F::Inf(_, a) => a.check(sig),
            F::TruncSub(a, b) => {
                a.check(sig)?;
                b.check(sig)
            }
        }
    }

    /// Renames bound variables to `y0, y1, …` in pre-order, skipping names
    /// that occur free.
    pub fn canonicalize(&self) -> F {
        let free = self.free_vars();
        let mut next = 0usize;
        let mut fresh = || loop {
            let name = format!("y{next}");
            next += 1;
            if !free.contains(&name) {
                return name;
            }
        };
        self.canon(&mut HashMap::new(), &mut fresh)
    }

    fn canon(&self, env: &mut HashMap<String, Vec<String>>, fresh: &mut impl FnMut() -> String) -> F {
        match self {
            F::Atomic(p, args) => F::Atomic(p.clone(), args.iter().map(|t| canon_term(t, env)).collect()),
            F::Const(q) => F::Const(*q),
            F::Half(a) => F::half(a.canon(env, fresh)),
            F::TruncSub(a, b) => {
                let a = a.canon(env, fresh);
                F::sub(a, b.canon(env, fresh))
            }
            F::Sup(y, a) | F::Inf(y, a) => {
                let name = fresh();
                env.entry(y.clone()).or_default().push(name.clone());
                let body = a.canon(env, fresh);
                env.get_mut(y).unwrap().pop();
                match self {
                    F::Sup(..) => F::Sup(name, Box::new(body)),
                    _ => F::Inf(name, Box::new(body)),
                }
            }
        }
    }

    /// Substitutes variable `to` for free occurrences of `from`. `to` must not
    /// be bound anywhere in `self`.
    pub fn rename_free(&self, from: &str, to: &str) -> F {
        match self {
            F::Atomic(p, args) => F::Atomic(p.clone(), args.iter().map(|t| t.rename(from, to)).collect()),
            F::Const(_) => self.clone(),
            F::Half(a) => F::half(a.rename_free(from, to)),
            F::TruncSub(a, b) => F::sub(a.rename_free(from, to), b.rename_free(from, to)),
            F::Sup(y, _) | F::Inf(y, _) if y == from => self.clone(),
            F::Sup(y, a) => F::Sup(y.clone(), Box::new(a.rename_free(from, to))),
            F::Inf(y, a) => F::Inf(y.clone(), Box::new(a.rename_free(from, to))),
        }
    }
}

fn check_term(t: &Term, sig: &Signature) -> Result<(), FormulaError> {
    match t {
        Term::Var(v) => {
            if sig.function_arity(v).is_some() || sig.predicate_arity(v).is_some() {
                return Err(FormulaError::Syntax {
                    pos: 0,
                    msg: format!("symbol `{v}` used as a variable"),
                });
            }
            Ok(())
        }
        Term::App(f, args) => {
            let expected = sig
                .function_arity(f)
                .ok_or_else(|| FormulaError::Undeclared(f.clone()))?;
            if expected != args.len() {
                return Err(FormulaError::Arity {
                    name: f.clone(),
                    expected,
                    got: args.len(),
                });
            }
            args.iter().try_for_each(|a| check_term(a, sig))
        }
    }
}

fn canon_term(t: &Term, env: &HashMap<String, Vec<String>>) -> Term {
    match t {
        Term::Var(v) => match env.get(v).and_then(|s| s.last()) {
            Some(n) => Term::Var(n.clone()),
            None => t.clone(),
        },
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| canon_term(a, env)).collect()),
    }
}

impl fmt::Display for MetricFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        printer::write_formula(f, self)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        printer::write_term(f, self)
    }
}

/// Replaces every `inf y. ψ` by `1 ∸ sup y. (1 ∸ ψ)`.
pub fn rewrite_inf(phi: &F) -> F {
    match phi {
        F::Atomic(..) | F::Const(_) => phi.clone(),
        F::Half(a) => F::half(rewrite_inf(a)),
        F::TruncSub(a, b) => F::sub(rewrite_inf(a), rewrite_inf(b)),
        F::Sup(y, a) => F::Sup(y.clone(), Box::new(rewrite_inf(a))),
        F::Inf(y, a) => F::one_minus(F::Sup(y.clone(), Box::new(F::one_minus(rewrite_inf(a))))),
    }
}

/// A fragment formula whose value is `r·(φ − t)` clamped to `[0,1]`, for
/// `r = 2^{-m}`.
pub fn normalize_range(phi: &F, r: Q, t: Q) -> Result<F, FormulaError> {
    let m = inverse_power_of_two(r).ok_or(FormulaError::Scale(r))?;
    let halve = |mut g: F| {
        for _ in 0..m {
            g = F::half(g);
        }
        g
    };
    if t.is_zero() {
        return Ok(halve(phi.clone()));
    }
    if t > Q::zero() {
        if t > Q::one() {
            return Err(FormulaError::Shift(t));
        }
        return Ok(halve(F::sub(phi.clone(), F::Const(t))));
    }
    // r·φ + r·|t| as 1 ∸ ((1 − r·|t|) ∸ r·φ)
    let c = Q::one() + r * t;
    if c < Q::zero() {
        return Err(FormulaError::Shift(t));
    }
    Ok(F::one_minus(F::sub(F::Const(c), halve(phi.clone()))))
}

fn inverse_power_of_two(r: Q) -> Option<u32> {
    if *r.numer() != 1 || *r.denom() <= 0 {
        return None;
    }
    let d = *r.denom();
    (d & (d - 1) == 0).then(|| d.trailing_zeros())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn sig() -> Signature {
        Signature::new(&[("P", 1), ("Q", 1), ("R", 2)], &[("f", 1)]).unwrap()
    }

    #[test]
    fn free_vars_examples() {
        let a = F::atomic("R", &["x", "y"]);
        assert_eq!(a.free_vars(), ["x", "y"].iter().map(|s| s.to_string()).collect());
        let s = F::sup("y", a);
        assert_eq!(s.free_vars(), ["x".to_string()].into_iter().collect());
        assert!(F::Const(q(1, 2)).free_vars().is_empty());
    }

    #[test]
    fn rewrite_inf_examples() {
        let p = F::atomic("P", &["y"]);
        let got = rewrite_inf(&F::inf("y", p.clone()));
        let want = F::one_minus(F::sup("y", F::one_minus(p.clone())));
        assert_eq!(got, want);
        assert_eq!(rewrite_inf(&F::atomic("P", &["x"])), F::atomic("P", &["x"]));
        let nested = F::inf("y", F::inf("z", p));
        assert!(!rewrite_inf(&nested).has_inf());
    }

    #[test]
    fn normalize_range_shapes() {
        let p = F::atomic("P", &["x"]);
        assert_eq!(normalize_range(&p, q(1, 1), q(0, 1)).unwrap(), p);
        assert_eq!(normalize_range(&p, q(1, 2), q(0, 1)).unwrap(), F::half(p.clone()));
        assert_eq!(
            normalize_range(&p, q(1, 2), q(1, 4)).unwrap(),
            F::half(F::sub(p.clone(), F::Const(q(1, 4))))
        );
        assert!(matches!(normalize_range(&p, q(1, 3), q(0, 1)), Err(FormulaError::Scale(_))));
        assert!(matches!(normalize_range(&p, q(2, 1), q(0, 1)), Err(FormulaError::Scale(_))));
    }

    #[test]
    fn signature_rejects_duplicates_and_keywords() {
        assert!(Signature::new(&[("P", 1), ("P", 2)], &[]).is_err());
        assert!(Signature::new(&[("sup", 1)], &[]).is_err());
        assert!(Signature::new(&[("P", 1)], &[("f", 0)]).is_err());
        assert!(Signature::new(&[("c", 0)], &[]).is_ok());
        let s = Signature::from_json(r#"{"predicates":[{"name":"P","arity":1}],"functions":[]}"#).unwrap();
        assert_eq!(s.predicate_arity("P"), Some(1));
    }

    #[test]
    fn check_reports_arity_and_undeclared() {
        let s = sig();
        assert!(F::atomic("P", &["x"]).check(&s).is_ok());
        assert!(matches!(F::atomic("P", &["x", "y"]).check(&s), Err(FormulaError::Arity { .. })));
        assert!(matches!(F::atomic("S", &["x"]).check(&s), Err(FormulaError::Undeclared(_))));
        assert!(matches!(F::Const(q(3, 2)).check(&s), Err(FormulaError::ConstRange(_))));
    }

    #[test]
    fn canonicalize_skips_free_names() {
        let f = F::sup("z", F::atomic("R", &["y0", "z"]));
        let c = f.canonicalize();
        assert_eq!(c, F::sup("y1", F::atomic("R", &["y0", "y1"])));
        assert_eq!(c.canonicalize(), c);
    }

    #[test]
    fn canonicalize_respects_shadowing() {
        let f = F::sup("x", F::sub(F::sup("x", F::atomic("P", &["x"])), F::atomic("P", &["x"])));
        let c = f.canonicalize();
        let want = F::sup("y0", F::sub(F::sup("y1", F::atomic("P", &["y1"])), F::atomic("P", &["y0"])));
        assert_eq!(c, want);
    }
}
