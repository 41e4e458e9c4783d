use std::collections::BTreeSet;
use std::fmt;

use num_traits::{One, Zero};

use super::AtomSet;
use crate::rational::Q;

/// A grid coordinate `(ζ, t)`: `tag` indexes a formula list, `level` is `i/ℓ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SetVarIndex {
    pub tag: usize,
    pub level: Q,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SetVar {
    Grid(SetVarIndex),
    Named(String),
    /// `Y^tag_index` bound by the `SupChain` with id `binder`.
    Bound { binder: usize, tag: usize, index: usize },
}

impl SetVar {
    pub fn grid(tag: usize, level: Q) -> SetVar {
        SetVar::Grid(SetVarIndex { tag, level })
    }

    pub fn named(name: &str) -> SetVar {
        SetVar::Named(name.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SetTerm {
    Var(SetVar),
    Lit(AtomSet),
    Empty,
    Full,
    Union(Vec<SetTerm>),
    Inter(Vec<SetTerm>),
    Diff(Box<SetTerm>, Box<SetTerm>),
    SymDiff(Box<SetTerm>, Box<SetTerm>),
    Compl(Box<SetTerm>),
}

impl SetTerm {
    pub fn var(v: SetVar) -> SetTerm {
        SetTerm::Var(v)
    }

    pub fn named(name: &str) -> SetTerm {
        SetTerm::Var(SetVar::named(name))
    }

    pub fn diff(a: SetTerm, b: SetTerm) -> SetTerm {
        SetTerm::Diff(Box::new(a), Box::new(b))
    }

    pub fn sym_diff(a: SetTerm, b: SetTerm) -> SetTerm {
        SetTerm::SymDiff(Box::new(a), Box::new(b))
    }

    pub fn compl(a: SetTerm) -> SetTerm {
        SetTerm::Compl(Box::new(a))
    }

    /// Intersection that collapses the empty and singleton cases.
    pub fn inter(mut parts: Vec<SetTerm>) -> SetTerm {
        match parts.len() {
            0 => SetTerm::Full,
            1 => parts.pop().unwrap(),
            _ => SetTerm::Inter(parts),
        }
    }

    pub fn vars_into(&self, out: &mut BTreeSet<SetVar>) {
        match self {
            SetTerm::Var(v) => {
                out.insert(v.clone());
            }
            SetTerm::Lit(_) | SetTerm::Empty | SetTerm::Full => {}
            SetTerm::Union(xs) | SetTerm::Inter(xs) => xs.iter().for_each(|x| x.vars_into(out)),
            SetTerm::Diff(a, b) | SetTerm::SymDiff(a, b) => {
                a.vars_into(out);
                b.vars_into(out);
            }
            SetTerm::Compl(a) => a.vars_into(out),
        }
    }

    pub fn map_vars(&self, f: &mut impl FnMut(&SetVar) -> SetTerm) -> SetTerm {
        match self {
            SetTerm::Var(v) => f(v),
            SetTerm::Lit(_) | SetTerm::Empty | SetTerm::Full => self.clone(),
            SetTerm::Union(xs) => SetTerm::Union(xs.iter().map(|x| x.map_vars(f)).collect()),
            SetTerm::Inter(xs) => SetTerm::Inter(xs.iter().map(|x| x.map_vars(f)).collect()),
            SetTerm::Diff(a, b) => SetTerm::diff(a.map_vars(f), b.map_vars(f)),
            SetTerm::SymDiff(a, b) => SetTerm::sym_diff(a.map_vars(f), b.map_vars(f)),
            SetTerm::Compl(a) => SetTerm::compl(a.map_vars(f)),
        }
    }
}

/// One chain `Y_0 ⊇ Y_1 ⊇ …` of a `SupChain`, with `Y_i ⊆ bounds[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chain {
    pub tag: usize,
    pub bounds: Vec<SetTerm>,
}

/// `⋂ Y^tag_index over members ⊆ bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointBound {
    pub members: Vec<(usize, usize)>,
    pub bound: SetTerm,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChainSpec {
    pub binder: usize,
    pub chains: Vec<Chain>,
    pub joint: Vec<JointBound>,
}

impl ChainSpec {
    pub fn chain_pos(&self, tag: usize) -> Option<usize> {
        self.chains.iter().position(|c| c.tag == tag)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MbaFormula {
    Measure(SetTerm),
    Const(Q),
    Scale(Q, Box<MbaFormula>),
    Add(Box<MbaFormula>, Box<MbaFormula>),
    TruncSub(Box<MbaFormula>, Box<MbaFormula>),
    Max(Vec<MbaFormula>),
    Min(Vec<MbaFormula>),
    /// Supremum of the inner formula over all chain tuples satisfying the spec.
    SupChain(Box<ChainSpec>, Box<MbaFormula>),
}

use MbaFormula as G;

impl MbaFormula {
    pub fn measure(s: SetTerm) -> G {
        G::Measure(s)
    }

    pub fn scale(q: Q, g: G) -> G {
        G::Scale(q, Box::new(g))
    }

    pub fn add(a: G, b: G) -> G {
        G::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: G, b: G) -> G {
        G::TruncSub(Box::new(a), Box::new(b))
    }

    /// Sum of a list, `Const(0)` when empty.
    pub fn sum(parts: Vec<G>) -> G {
        parts.into_iter().reduce(G::add).unwrap_or(G::Const(Q::zero()))
    }

    /// Free set variables, excluding variables bound by enclosing `SupChain`s.
    pub fn free_vars(&self) -> BTreeSet<SetVar> {
        let mut all = BTreeSet::new();
        self.vars_into(&mut all, &mut Vec::new());
        all
    }

    fn vars_into(&self, out: &mut BTreeSet<SetVar>, binders: &mut Vec<usize>) {
        let push_term = |s: &SetTerm, out: &mut BTreeSet<SetVar>, binders: &Vec<usize>| {
            let mut vs = BTreeSet::new();
            s.vars_into(&mut vs);
            out.extend(vs.into_iter().filter(|v| match v {
                SetVar::Bound { binder, .. } => !binders.contains(binder),
                _ => true,
            }));
        };
        match self {
            G::Measure(s) => push_term(s, out, binders),
            G::Const(_) => {}
            G::Scale(_, a) => a.vars_into(out, binders),
            G::Add(a, b) | G::TruncSub(a, b) => {
                a.vars_into(out, binders);
                b.vars_into(out, binders);
            }
            G::Max(xs) | G::Min(xs) => xs.iter().for_each(|x| x.vars_into(out, binders)),
            G::SupChain(spec, inner) => {
                for c in &spec.chains {
                    c.bounds.iter().for_each(|s| push_term(s, out, binders));
                }
                spec.joint.iter().for_each(|j| push_term(&j.bound, out, binders));
                binders.push(spec.binder);
                inner.vars_into(out, binders);
                binders.pop();
            }
        }
    }

    /// An upper bound on the value under every assignment (constants assumed ≥ 0).
    pub fn upper_bound(&self) -> Q {
        match self {
            G::Measure(_) => Q::one(),
            G::Const(q) => *q,
            G::Scale(q, a) => *q * a.upper_bound(),
            G::Add(a, b) => a.upper_bound() + b.upper_bound(),
            G::TruncSub(a, _) => a.upper_bound(),
            G::Max(xs) => xs.iter().map(G::upper_bound).max().unwrap_or_else(Q::zero),
            G::Min(xs) => xs.iter().map(G::upper_bound).min().unwrap_or_else(Q::one),
            G::SupChain(_, inner) => inner.upper_bound(),
        }
    }

    /// Rewrites every set variable occurrence, including those in chain specs.
    pub fn map_vars(&self, f: &mut impl FnMut(&SetVar) -> SetTerm) -> G {
        match self {
            G::Measure(s) => G::Measure(s.map_vars(f)),
            G::Const(q) => G::Const(*q),
            G::Scale(q, a) => G::scale(*q, a.map_vars(f)),
            G::Add(a, b) => G::add(a.map_vars(f), b.map_vars(f)),
            G::TruncSub(a, b) => G::sub(a.map_vars(f), b.map_vars(f)),
            G::Max(xs) => G::Max(xs.iter().map(|x| x.map_vars(f)).collect()),
            G::Min(xs) => G::Min(xs.iter().map(|x| x.map_vars(f)).collect()),
            G::SupChain(spec, inner) => {
                let spec = ChainSpec {
                    binder: spec.binder,
                    chains: spec
                        .chains
                        .iter()
                        .map(|c| Chain {
                            tag: c.tag,
                            bounds: c.bounds.iter().map(|s| s.map_vars(f)).collect(),
                        })
                        .collect(),
                    joint: spec
                        .joint
                        .iter()
                        .map(|j| JointBound {
                            members: j.members.clone(),
                            bound: j.bound.map_vars(f),
                        })
                        .collect(),
                };
                G::SupChain(Box::new(spec), Box::new(inner.map_vars(f)))
            }
        }
    }

    /// Binder ids of all `SupChain` nodes, outermost first.
    pub fn binders(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(&mut |g| {
            if let G::SupChain(spec, _) = g {
                out.push(spec.binder);
            }
        });
        out
    }

    pub fn visit(&self, f: &mut impl FnMut(&G)) {
        f(self);
        match self {
            G::Measure(_) | G::Const(_) => {}
            G::Scale(_, a) => a.visit(f),
            G::Add(a, b) | G::TruncSub(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            G::Max(xs) | G::Min(xs) => xs.iter().for_each(|x| x.visit(f)),
            G::SupChain(_, inner) => inner.visit(f),
        }
    }

    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }
}

/// Renders set variables in `Z^ζ_{t}` notation.
pub struct Pretty<'a> {
    pub formula: &'a MbaFormula,
    /// Optional display names for tags.
    pub tag_names: Option<&'a [String]>,
}

impl fmt::Display for Pretty<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_g(f, self.formula, self.tag_names)
    }
}

fn tag_label(tag: usize, names: Option<&[String]>) -> String {
    match names.and_then(|n| n.get(tag)) {
        Some(name) => format!("{{{name}}}"),
        None => format!("{{ζ{tag}}}"),
    }
}

fn write_var(f: &mut fmt::Formatter<'_>, v: &SetVar, names: Option<&[String]>) -> fmt::Result {
    match v {
        SetVar::Grid(ix) => write!(f, "Z^{}_{{{}}}", tag_label(ix.tag, names), ix.level),
        SetVar::Named(n) => f.write_str(n),
        SetVar::Bound { binder, tag, index } => {
            write!(f, "Y[{binder}]^{}_{index}", tag_label(*tag, names))
        }
    }
}

fn write_s(f: &mut fmt::Formatter<'_>, s: &SetTerm, names: Option<&[String]>) -> fmt::Result {
    let list = |f: &mut fmt::Formatter<'_>, xs: &[SetTerm], op: &str| -> fmt::Result {
        f.write_str("(")?;
        for (i, x) in xs.iter().enumerate() {
            if i > 0 {
                write!(f, " {op} ")?;
            }
            write_s(f, x, names)?;
        }
        f.write_str(")")
    };
    match s {
        SetTerm::Var(v) => write_var(f, v, names),
        SetTerm::Lit(m) => write!(f, "{{#{m:b}}}"),
        SetTerm::Empty => f.write_str("∅"),
        SetTerm::Full => f.write_str("Ω"),
        SetTerm::Union(xs) => list(f, xs, "∪"),
        SetTerm::Inter(xs) => list(f, xs, "∩"),
        SetTerm::Diff(a, b) => list(f, &[(**a).clone(), (**b).clone()], "\\"),
        SetTerm::SymDiff(a, b) => list(f, &[(**a).clone(), (**b).clone()], "Δ"),
        SetTerm::Compl(a) => {
            f.write_str("¬")?;
            write_s(f, a, names)
        }
    }
}

fn write_g(f: &mut fmt::Formatter<'_>, g: &MbaFormula, names: Option<&[String]>) -> fmt::Result {
    match g {
        G::Measure(s) => {
            f.write_str("μ")?;
            match s {
                SetTerm::Union(_) | SetTerm::Inter(_) | SetTerm::Diff(..) | SetTerm::SymDiff(..) => {
                    write_s(f, s, names)
                }
                _ => {
                    f.write_str("(")?;
                    write_s(f, s, names)?;
                    f.write_str(")")
                }
            }
        }
        G::Const(q) => write!(f, "{q}"),
        G::Scale(q, a) => {
            write!(f, "{q}·[")?;
            write_g(f, a, names)?;
            f.write_str("]")
        }
        G::Add(a, b) => {
            f.write_str("(")?;
            write_g(f, a, names)?;
            f.write_str(" + ")?;
            write_g(f, b, names)?;
            f.write_str(")")
        }
        G::TruncSub(a, b) => {
            f.write_str("(")?;
            write_g(f, a, names)?;
            f.write_str(" ∸ ")?;
            write_g(f, b, names)?;
            f.write_str(")")
        }
        G::Max(xs) | G::Min(xs) => {
            f.write_str(if matches!(g, G::Max(_)) { "max(" } else { "min(" })?;
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_g(f, x, names)?;
            }
            f.write_str(")")
        }
        G::SupChain(spec, inner) => {
            write!(f, "sup[{}]{{", spec.binder)?;
            for (ci, c) in spec.chains.iter().enumerate() {
                if ci > 0 {
                    f.write_str("; ")?;
                }
                for (i, u) in c.bounds.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write_var(
                        f,
                        &SetVar::Bound {
                            binder: spec.binder,
                            tag: c.tag,
                            index: i,
                        },
                        names,
                    )?;
                    f.write_str(" ⊆ ")?;
                    write_s(f, u, names)?;
                }
            }
            for j in &spec.joint {
                f.write_str("; ")?;
                for (i, (tag, index)) in j.members.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ∩ ")?;
                    }
                    write_var(
                        f,
                        &SetVar::Bound {
                            binder: spec.binder,
                            tag: *tag,
                            index: *index,
                        },
                        names,
                    )?;
                }
                f.write_str(" ⊆ ")?;
                write_s(f, &j.bound, names)?;
            }
            f.write_str("} ")?;
            write_g(f, inner, names)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn free_vars_skip_bound() {
        let z = SetVar::grid(0, q(1, 2));
        let y = SetVar::Bound { binder: 3, tag: 1, index: 0 };
        let g = G::SupChain(
            Box::new(ChainSpec {
                binder: 3,
                chains: vec![Chain {
                    tag: 1,
                    bounds: vec![SetTerm::Var(z.clone())],
                }],
                joint: vec![],
            }),
            Box::new(G::measure(SetTerm::Var(y))),
        );
        assert_eq!(g.free_vars().into_iter().collect::<Vec<_>>(), vec![z]);
        assert_eq!(g.binders(), vec![3]);
    }

    #[test]
    fn upper_bounds() {
        let m = G::measure(SetTerm::named("X"));
        assert_eq!(G::scale(q(1, 2), G::add(m.clone(), m.clone())).upper_bound(), q(1, 1));
        assert_eq!(G::sub(G::Const(q(1, 4)), m.clone()).upper_bound(), q(1, 4));
        assert_eq!(G::Max(vec![]).upper_bound(), q(0, 1));
    }

    #[test]
    fn pretty_uses_level_notation() {
        let g = G::scale(q(1, 2), G::measure(SetTerm::Var(SetVar::grid(0, q(1, 2)))));
        let s = Pretty { formula: &g, tag_names: None }.to_string();
        assert_eq!(s, "1/2·[μ(Z^{ζ0}_{1/2})]");
    }
}
