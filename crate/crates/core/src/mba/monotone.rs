//! Coordinatewise-increasing checks for measure-algebra formulas.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::eval::{eval_mba_with, EvalOptions};
use super::{AtomSet, FiniteMeasureAlgebra, MbaError, MbaFormula, SetTerm, SetVar};
use crate::rational::Q;

/// Variables that occur under an odd number of antitone positions.
///
/// An empty result certifies that the formula is coordinatewise increasing in
/// every free variable, and every `SupChain` inner formula is increasing in
/// its bound variables.
pub fn negative_occurrences(g: &MbaFormula) -> BTreeSet<SetVar> {
    let mut neg = BTreeSet::new();
    walk_g(g, true, &mut neg);
    neg
}

fn walk_s(s: &SetTerm, pos: bool, neg: &mut BTreeSet<SetVar>) {
    match s {
        SetTerm::Var(v) => {
            if !pos {
                neg.insert(v.clone());
            }
        }
        SetTerm::Lit(_) | SetTerm::Empty | SetTerm::Full => {}
        SetTerm::Union(xs) | SetTerm::Inter(xs) => xs.iter().for_each(|x| walk_s(x, pos, neg)),
        SetTerm::Diff(a, b) => {
            walk_s(a, pos, neg);
            walk_s(b, !pos, neg);
        }
        SetTerm::SymDiff(a, b) => {
            for x in [a, b] {
                walk_s(x, pos, neg);
                walk_s(x, !pos, neg);
            }
        }
        SetTerm::Compl(a) => walk_s(a, !pos, neg),
    }
}

fn walk_g(g: &MbaFormula, pos: bool, neg: &mut BTreeSet<SetVar>) {
    match g {
        MbaFormula::Measure(s) => walk_s(s, pos, neg),
        MbaFormula::Const(_) => {}
        MbaFormula::Scale(q, a) => walk_g(a, pos == (*q >= Q::from_integer(0)), neg),
        MbaFormula::Add(a, b) => {
            walk_g(a, pos, neg);
            walk_g(b, pos, neg);
        }
        MbaFormula::TruncSub(a, b) => {
            walk_g(a, pos, neg);
            walk_g(b, !pos, neg);
        }
        MbaFormula::Max(xs) | MbaFormula::Min(xs) => xs.iter().for_each(|x| walk_g(x, pos, neg)),
        MbaFormula::SupChain(spec, inner) => {
            for c in &spec.chains {
                c.bounds.iter().for_each(|u| walk_s(u, pos, neg));
            }
            spec.joint.iter().for_each(|j| walk_s(&j.bound, pos, neg));
            let own = |v: &SetVar| matches!(v, SetVar::Bound { binder, .. } if *binder == spec.binder);
            // outer variables take the polarity of the node; the node's own
            // bound variables must be increasing relative to the node
            let mut outer = BTreeSet::new();
            walk_g(inner, pos, &mut outer);
            neg.extend(outer.into_iter().filter(|v| !own(v)));
            let mut rel = BTreeSet::new();
            walk_g(inner, true, &mut rel);
            neg.extend(rel.into_iter().filter(|v| own(v)));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotoneMethod {
    /// Every comparable pair of assignments.
    AllPairs,
    /// Every pair differing in one (variable, atom) bit; equivalent to all
    /// comparable pairs by transitivity.
    CoveringPairs,
    /// Seeded random comparable pairs.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub lower: BTreeMap<SetVar, AtomSet>,
    pub upper: BTreeMap<SetVar, AtomSet>,
    pub lower_value: Q,
    pub upper_value: Q,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotoneReport {
    pub method: MonotoneMethod,
    pub variables: usize,
    pub pairs_checked: u64,
    /// Whether the syntactic polarity certificate holds.
    pub certified: bool,
    pub counterexample: Option<Counterexample>,
}

impl MonotoneReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MonotoneOptions {
    pub trials: u64,
    pub seed: u64,
    /// Check all comparable pairs when atoms × variables is at most this.
    pub all_pairs_bits: u32,
    /// Check all covering pairs when atoms × variables is at most this.
    pub covering_bits: u32,
    pub eval: EvalOptions,
}

impl Default for MonotoneOptions {
    fn default() -> Self {
        MonotoneOptions {
            trials: 2000,
            seed: 0,
            all_pairs_bits: 9,
            covering_bits: 16,
            eval: EvalOptions::default(),
        }
    }
}

/// Searches for `Ā ≤ Ā′` with `G(Ā) > G(Ā′)`; exhaustive when the
/// assignment space is small, seeded sampling otherwise.
pub fn check_monotone(
    g: &MbaFormula,
    alg: &FiniteMeasureAlgebra,
    trials: u64,
    seed: u64,
) -> Result<MonotoneReport, MbaError> {
    check_monotone_with(
        g,
        alg,
        MonotoneOptions {
            trials,
            seed,
            ..Default::default()
        },
    )
}

pub fn check_monotone_with(
    g: &MbaFormula,
    alg: &FiniteMeasureAlgebra,
    opts: MonotoneOptions,
) -> Result<MonotoneReport, MbaError> {
    let vars: Vec<SetVar> = g.free_vars().into_iter().collect();
    let n = alg.len();
    let bits = vars.len() * n;
    let certified = negative_occurrences(g).is_empty();
    let full = alg.full();

    let unpack = |word: u64| -> Vec<AtomSet> { (0..vars.len()).map(|j| (word >> (j * n)) & full).collect() };
    let eval = |sets: &[AtomSet]| -> Result<Q, MbaError> {
        let map: HashMap<SetVar, AtomSet> = vars.iter().cloned().zip(sets.iter().copied()).collect();
        eval_mba_with(g, &map, alg, opts.eval)
    };
    let witness = |lo: &[AtomSet], hi: &[AtomSet], lv: Q, hv: Q| Counterexample {
        lower: vars.iter().cloned().zip(lo.iter().copied()).collect(),
        upper: vars.iter().cloned().zip(hi.iter().copied()).collect(),
        lower_value: lv,
        upper_value: hv,
    };

    if bits as u32 <= opts.covering_bits {
        let space = 1u64 << bits;
        let values = (0..space).map(|w| eval(&unpack(w))).collect::<Result<Vec<_>, _>>()?;
        let all_pairs = bits as u32 <= opts.all_pairs_bits;
        let mut pairs = 0u64;
        let mask = space - 1;
        for a in 0..space {
            let free = !a & mask;
            let mut check = |b: u64| {
                pairs += 1;
                (values[a as usize] > values[b as usize]).then(|| {
                    witness(&unpack(a), &unpack(b), values[a as usize], values[b as usize])
                })
            };
            let found = if all_pairs {
                super::submasks(free).skip(1).find_map(|extra| check(a | extra))
            } else {
                (0..bits).filter(|i| free >> i & 1 == 1).find_map(|i| check(a | 1 << i))
            };
            if let Some(cx) = found {
                return Ok(MonotoneReport {
                    method: if all_pairs { MonotoneMethod::AllPairs } else { MonotoneMethod::CoveringPairs },
                    variables: vars.len(),
                    pairs_checked: pairs,
                    certified,
                    counterexample: Some(cx),
                });
            }
        }
        return Ok(MonotoneReport {
            method: if all_pairs { MonotoneMethod::AllPairs } else { MonotoneMethod::CoveringPairs },
            variables: vars.len(),
            pairs_checked: pairs,
            certified,
            counterexample: None,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for t in 0..opts.trials {
        let lo: Vec<AtomSet> = (0..vars.len()).map(|_| rng.gen::<u64>() & full).collect();
        let hi: Vec<AtomSet> = if t % 2 == 0 {
            let j = rng.gen_range(0..vars.len());
            let mut hi = lo.clone();
            hi[j] |= 1 << rng.gen_range(0..n);
            hi
        } else {
            lo.iter().map(|a| a | (rng.gen::<u64>() & full)).collect()
        };
        let (lv, hv) = (eval(&lo)?, eval(&hi)?);
        if lv > hv {
            return Ok(MonotoneReport {
                method: MonotoneMethod::Sampled,
                variables: vars.len(),
                pairs_checked: t + 1,
                certified,
                counterexample: Some(witness(&lo, &hi, lv, hv)),
            });
        }
    }
    Ok(MonotoneReport {
        method: MonotoneMethod::Sampled,
        variables: vars.len(),
        pairs_checked: opts.trials,
        certified,
        counterexample: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_is_monotone() {
        let alg = FiniteMeasureAlgebra::uniform(3).unwrap();
        let g = MbaFormula::measure(SetTerm::named("v"));
        let r = check_monotone(&g, &alg, 10, 1).unwrap();
        assert!(r.passed());
        assert!(r.certified);
        assert_eq!(r.method, MonotoneMethod::AllPairs);
        assert_eq!(r.pairs_checked, 27 - 8);
    }

    #[test]
    fn complement_is_antitone() {
        let alg = FiniteMeasureAlgebra::uniform(3).unwrap();
        let g = MbaFormula::measure(SetTerm::compl(SetTerm::named("v")));
        let r = check_monotone(&g, &alg, 10, 1).unwrap();
        let cx = r.counterexample.expect("complement must fail");
        assert!(cx.lower_value > cx.upper_value);
        assert!(!r.certified);
    }

    #[test]
    fn sampling_finds_antitone_on_large_spaces() {
        let alg = FiniteMeasureAlgebra::uniform(4).unwrap();
        let parts: Vec<_> = (0..6).map(|i| MbaFormula::measure(SetTerm::named(&format!("v{i}")))).collect();
        let g = MbaFormula::sub(
            MbaFormula::Const(crate::rational::q(1, 1)),
            MbaFormula::scale(crate::rational::q(1, 6), MbaFormula::sum(parts)),
        );
        let r = check_monotone(&g, &alg, 200, 3).unwrap();
        assert_eq!(r.method, MonotoneMethod::Sampled);
        assert!(!r.passed());
    }

    #[test]
    fn covering_mode_between_thresholds() {
        let alg = FiniteMeasureAlgebra::uniform(3).unwrap();
        let g = MbaFormula::sum((0..4).map(|i| MbaFormula::measure(SetTerm::named(&format!("v{i}")))).collect());
        let r = check_monotone(&g, &alg, 1, 0).unwrap();
        assert_eq!(r.method, MonotoneMethod::CoveringPairs);
        assert_eq!(r.pairs_checked, 12 * (1 << 11));
        assert!(r.passed());
    }
}
