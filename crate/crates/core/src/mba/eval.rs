use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};

use super::{AtomSet, ChainSpec, FiniteMeasureAlgebra, MbaError, MbaFormula, SetTerm, SetVar};
use crate::rational::{trunc_sub, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Exhaustive search over feasible chain tuples.
    Enumerate,
    /// Evaluate only at the maximal feasible tuples.
    MaximalElement,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub mode: EvalMode,
    /// Cap on inner evaluations across all `SupChain` nodes of one call.
    pub max_inner_evals: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            mode: EvalMode::Enumerate,
            max_inner_evals: 20_000_000,
        }
    }
}

impl EvalOptions {
    pub fn mode(mode: EvalMode) -> Self {
        EvalOptions {
            mode,
            ..Default::default()
        }
    }
}

pub trait SetAssignment {
    fn lookup(&self, v: &SetVar) -> Option<AtomSet>;
}

impl SetAssignment for HashMap<SetVar, AtomSet> {
    fn lookup(&self, v: &SetVar) -> Option<AtomSet> {
        self.get(v).copied()
    }
}

impl SetAssignment for BTreeMap<SetVar, AtomSet> {
    fn lookup(&self, v: &SetVar) -> Option<AtomSet> {
        self.get(v).copied()
    }
}

impl<F: Fn(&SetVar) -> Option<AtomSet>> SetAssignment for F {
    fn lookup(&self, v: &SetVar) -> Option<AtomSet> {
        self(v)
    }
}

pub fn eval_mba(
    g: &MbaFormula,
    assign: &dyn SetAssignment,
    alg: &FiniteMeasureAlgebra,
    mode: EvalMode,
) -> Result<Q, MbaError> {
    eval_mba_with(g, assign, alg, EvalOptions::mode(mode))
}

pub fn eval_mba_with(
    g: &MbaFormula,
    assign: &dyn SetAssignment,
    alg: &FiniteMeasureAlgebra,
    opts: EvalOptions,
) -> Result<Q, MbaError> {
    let mut ev = Evaluator {
        alg,
        assign,
        opts,
        inner_evals: 0,
        frames: Vec::new(),
    };
    ev.eval(g)
}

/// Evaluates a set term with no bound variables.
pub fn eval_set(s: &SetTerm, assign: &dyn SetAssignment, alg: &FiniteMeasureAlgebra) -> Result<AtomSet, MbaError> {
    let ev = Evaluator {
        alg,
        assign,
        opts: EvalOptions::default(),
        inner_evals: 0,
        frames: Vec::new(),
    };
    ev.set(s)
}

struct Frame {
    binder: usize,
    tags: Vec<usize>,
    sets: Vec<Vec<AtomSet>>,
}

struct Evaluator<'a> {
    alg: &'a FiniteMeasureAlgebra,
    assign: &'a dyn SetAssignment,
    opts: EvalOptions,
    inner_evals: u64,
    frames: Vec<Frame>,
}

impl Evaluator<'_> {
    fn var(&self, v: &SetVar) -> Result<AtomSet, MbaError> {
        if let SetVar::Bound { binder, tag, index } = v {
            let frame = self
                .frames
                .iter()
                .rev()
                .find(|f| f.binder == *binder)
                .ok_or_else(|| MbaError::Unbound(format!("{v:?}")))?;
            return frame
                .tags
                .iter()
                .position(|t| t == tag)
                .and_then(|c| frame.sets[c].get(*index))
                .copied()
                .ok_or_else(|| MbaError::Unbound(format!("{v:?}")));
        }
        self.assign
            .lookup(v)
            .map(|s| s & self.alg.full())
            .ok_or_else(|| MbaError::Unbound(format!("{v:?}")))
    }

    fn set(&self, s: &SetTerm) -> Result<AtomSet, MbaError> {
        let full = self.alg.full();
        Ok(match s {
            SetTerm::Var(v) => self.var(v)?,
            SetTerm::Lit(m) => m & full,
            SetTerm::Empty => 0,
            SetTerm::Full => full,
            SetTerm::Union(xs) => xs.iter().try_fold(0, |acc, x| Ok::<_, MbaError>(acc | self.set(x)?))?,
            SetTerm::Inter(xs) => xs.iter().try_fold(full, |acc, x| Ok::<_, MbaError>(acc & self.set(x)?))?,
            SetTerm::Diff(a, b) => self.set(a)? & !self.set(b)?,
            SetTerm::SymDiff(a, b) => self.set(a)? ^ self.set(b)?,
            SetTerm::Compl(a) => full & !self.set(a)?,
        })
    }

    fn eval(&mut self, g: &MbaFormula) -> Result<Q, MbaError> {
        Ok(match g {
            MbaFormula::Measure(s) => self.alg.measure(self.set(s)?),
            MbaFormula::Const(q) => *q,
            MbaFormula::Scale(q, a) => *q * self.eval(a)?,
            MbaFormula::Add(a, b) => self.eval(a)? + self.eval(b)?,
            MbaFormula::TruncSub(a, b) => {
                let x = self.eval(a)?;
                trunc_sub(x, self.eval(b)?)
            }
            MbaFormula::Max(xs) => {
                let mut best = Q::zero();
                for x in xs {
                    best = best.max(self.eval(x)?);
                }
                best
            }
            MbaFormula::Min(xs) => {
                let mut best = Q::one();
                for x in xs {
                    best = best.min(self.eval(x)?);
                }
                best
            }
            MbaFormula::SupChain(spec, inner) => self.sup_chain(spec, inner)?,
        })
    }

    fn sup_chain(&mut self, spec: &ChainSpec, inner: &MbaFormula) -> Result<Q, MbaError> {
        let n = self.alg.len();
        let mut bounds = Vec::with_capacity(spec.chains.len());
        for c in &spec.chains {
            let us = c.bounds.iter().map(|s| self.set(s)).collect::<Result<Vec<_>, _>>()?;
            if self.opts.mode == EvalMode::MaximalElement {
                if let Some(i) = (1..us.len()).find(|&i| us[i] & !us[i - 1] != 0) {
                    return Err(MbaError::NotDecreasing {
                        binder: spec.binder,
                        tag: c.tag,
                        index: i,
                    });
                }
            }
            bounds.push(us);
        }
        let mut joint = Vec::with_capacity(spec.joint.len());
        for j in &spec.joint {
            let members = j
                .members
                .iter()
                .map(|(tag, index)| {
                    spec.chain_pos(*tag)
                        .filter(|&c| *index < bounds[c].len())
                        .map(|c| (c, *index))
                        .ok_or_else(|| MbaError::Unbound(format!("joint member ({tag}, {index})")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            joint.push((members, self.set(&j.bound)?));
        }
        let lens: Vec<usize> = bounds.iter().map(Vec::len).collect();
        let states = LocalStates::new(&lens);

        // feasible (or maximal feasible) local states per atom
        let mut per_atom: Vec<Vec<Vec<usize>>> = Vec::with_capacity(n);
        for w in 0..n {
            let bit = 1u64 << w;
            let feasible = |s: &[usize]| {
                s.iter().enumerate().all(|(c, &k)| bounds[c][..k].iter().all(|u| u & bit != 0))
                    && joint
                        .iter()
                        .all(|(m, j)| j & bit != 0 || m.iter().any(|&(c, i)| i >= s[c]))
            };
            let mut list: Vec<Vec<usize>> = states.iter().filter(|s| feasible(s)).collect();
            if self.opts.mode == EvalMode::MaximalElement {
                list = list
                    .iter()
                    .filter(|s| {
                        (0..s.len()).all(|c| {
                            if s[c] == lens[c] {
                                return true;
                            }
                            let mut t = (*s).clone();
                            t[c] += 1;
                            !feasible(&t)
                        })
                    })
                    .cloned()
                    .collect();
            }
            per_atom.push(list);
        }

        let total = per_atom
            .iter()
            .try_fold(1u64, |acc, l| acc.checked_mul(l.len() as u64))
            .unwrap_or(u64::MAX);
        if self.inner_evals.saturating_add(total) > self.opts.max_inner_evals {
            return Err(MbaError::Budget(format!(
                "sup-chain {} needs {} inner evaluations, limit {}",
                spec.binder, total, self.opts.max_inner_evals
            )));
        }
        self.inner_evals += total;

        let mut pick = vec![0usize; n];
        let mut best: Option<Q> = None;
        loop {
            let mut sets: Vec<Vec<AtomSet>> = lens.iter().map(|&l| vec![0; l]).collect();
            for (w, &p) in pick.iter().enumerate() {
                let s = &per_atom[w][p];
                for (c, &k) in s.iter().enumerate() {
                    for y in &mut sets[c][..k] {
                        *y |= 1 << w;
                    }
                }
            }
            self.frames.push(Frame {
                binder: spec.binder,
                tags: spec.chains.iter().map(|c| c.tag).collect(),
                sets,
            });
            let v = self.eval(inner);
            self.frames.pop();
            let v = v?;
            best = Some(best.map_or(v, |b| b.max(v)));
            // odometer over atoms
            let mut w = 0;
            loop {
                if w == n {
                    return Ok(best.expect("the empty tuple is always feasible"));
                }
                pick[w] += 1;
                if pick[w] < per_atom[w].len() {
                    break;
                }
                pick[w] = 0;
                w += 1;
            }
        }
    }
}

/// All vectors `s` with `0 ≤ s[c] ≤ lens[c]`, in mixed-radix order.
struct LocalStates<'a> {
    lens: &'a [usize],
}

impl<'a> LocalStates<'a> {
    fn new(lens: &'a [usize]) -> Self {
        LocalStates { lens }
    }

    fn iter(&self) -> impl Iterator<Item = Vec<usize>> + 'a {
        let lens = self.lens;
        let mut cur = Some(vec![0usize; lens.len()]);
        std::iter::from_fn(move || {
            let out = cur.clone()?;
            let s = cur.as_mut().unwrap();
            let mut c = 0;
            loop {
                if c == lens.len() {
                    cur = None;
                    break;
                }
                s[c] += 1;
                if s[c] <= lens[c] {
                    break;
                }
                s[c] = 0;
                c += 1;
            }
            Some(out)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mba::{Chain, JointBound};
    use crate::rational::q;

    fn v(name: &str) -> SetTerm {
        SetTerm::named(name)
    }

    fn bound(binder: usize, tag: usize, index: usize) -> SetTerm {
        SetTerm::Var(SetVar::Bound { binder, tag, index })
    }

    #[test]
    fn measure_lookup_and_truncation() {
        let alg = FiniteMeasureAlgebra::uniform(2).unwrap();
        let a: HashMap<SetVar, AtomSet> = [(SetVar::named("v"), 0b01)].into_iter().collect();
        let g = MbaFormula::measure(v("v"));
        assert_eq!(eval_mba(&g, &a, &alg, EvalMode::Enumerate).unwrap(), q(1, 2));
        let t = MbaFormula::sub(MbaFormula::Const(q(1, 4)), MbaFormula::Const(q(1, 2)));
        assert_eq!(eval_mba(&t, &a, &alg, EvalMode::Enumerate).unwrap(), q(0, 1));
        let missing = MbaFormula::measure(v("w"));
        assert!(matches!(eval_mba(&missing, &a, &alg, EvalMode::Enumerate), Err(MbaError::Unbound(_))));
    }

    #[test]
    fn single_chain_both_modes() {
        let alg = FiniteMeasureAlgebra::uniform(2).unwrap();
        let a: HashMap<SetVar, AtomSet> = [(SetVar::named("u"), 0b01)].into_iter().collect();
        let g = MbaFormula::SupChain(
            Box::new(ChainSpec {
                binder: 0,
                chains: vec![Chain {
                    tag: 0,
                    bounds: vec![v("u")],
                }],
                joint: vec![],
            }),
            Box::new(MbaFormula::measure(bound(0, 0, 0))),
        );
        for mode in [EvalMode::Enumerate, EvalMode::MaximalElement] {
            assert_eq!(eval_mba(&g, &a, &alg, mode).unwrap(), q(1, 2));
        }
    }

    #[test]
    fn maximal_mode_rejects_increasing_bounds() {
        let alg = FiniteMeasureAlgebra::uniform(2).unwrap();
        let a: HashMap<SetVar, AtomSet> =
            [(SetVar::named("u0"), 0b01), (SetVar::named("u1"), 0b11)].into_iter().collect();
        let g = MbaFormula::SupChain(
            Box::new(ChainSpec {
                binder: 0,
                chains: vec![Chain {
                    tag: 0,
                    bounds: vec![v("u0"), v("u1")],
                }],
                joint: vec![],
            }),
            Box::new(MbaFormula::measure(bound(0, 0, 1))),
        );
        assert!(matches!(
            eval_mba(&g, &a, &alg, EvalMode::MaximalElement),
            Err(MbaError::NotDecreasing { index: 1, .. })
        ));
        // the chain condition still forces Y_1 ⊆ Y_0 ⊆ u0
        assert_eq!(eval_mba(&g, &a, &alg, EvalMode::Enumerate).unwrap(), q(1, 2));
    }

    #[test]
    fn joint_bound_splits_maximal_states() {
        // Y^0_0 ⊆ Ω, Y^1_0 ⊆ Ω, Y^0_0 ∩ Y^1_0 ⊆ ∅
        let alg = FiniteMeasureAlgebra::uniform(2).unwrap();
        let a: HashMap<SetVar, AtomSet> = HashMap::new();
        let spec = ChainSpec {
            binder: 0,
            chains: vec![
                Chain {
                    tag: 0,
                    bounds: vec![SetTerm::Full],
                },
                Chain {
                    tag: 1,
                    bounds: vec![SetTerm::Full],
                },
            ],
            joint: vec![JointBound {
                members: vec![(0, 0), (1, 0)],
                bound: SetTerm::Empty,
            }],
        };
        let inner = MbaFormula::add(
            MbaFormula::measure(bound(0, 0, 0)),
            MbaFormula::scale(q(1, 2), MbaFormula::measure(bound(0, 1, 0))),
        );
        let g = MbaFormula::SupChain(Box::new(spec), Box::new(inner));
        for mode in [EvalMode::Enumerate, EvalMode::MaximalElement] {
            assert_eq!(eval_mba(&g, &a, &alg, mode).unwrap(), q(1, 1));
        }
    }

    #[test]
    fn inner_budget_is_enforced() {
        let alg = FiniteMeasureAlgebra::uniform(3).unwrap();
        let a: HashMap<SetVar, AtomSet> = HashMap::new();
        let g = MbaFormula::SupChain(
            Box::new(ChainSpec {
                binder: 0,
                chains: vec![Chain {
                    tag: 0,
                    bounds: vec![SetTerm::Full, SetTerm::Full],
                }],
                joint: vec![],
            }),
            Box::new(MbaFormula::measure(bound(0, 0, 1))),
        );
        let opts = EvalOptions {
            mode: EvalMode::Enumerate,
            max_inner_evals: 26,
        };
        assert!(matches!(eval_mba_with(&g, &a, &alg, opts), Err(MbaError::Budget(_))));
        let opts = EvalOptions {
            max_inner_evals: 27,
            ..opts
        };
        assert_eq!(eval_mba_with(&g, &a, &alg, opts).unwrap(), q(1, 1));
    }

    #[test]
    fn local_states_order() {
        let lens = [1, 2];
        let all: Vec<_> = LocalStates::new(&lens).iter().collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![1, 0]);
        assert_eq!(all[5], vec![1, 2]);
    }
}
