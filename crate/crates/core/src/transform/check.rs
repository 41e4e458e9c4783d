//! Checks of a transform against direct-integral evaluation.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{Budgets, TransformError, TransformResult, Transformer};
use crate::direct_integral::{
    eval_on_integral_with, fiber_values, threshold, transport_element, Assignment, FieldError,
    MeasurableField, Strictness, DEFAULT_CHOICE_LIMIT,
};
use crate::formula::{rewrite_inf, MetricFormula};
use crate::mba::{eval_mba_with, AtomSet, EvalOptions, MbaError, SetVar};
use crate::rational::Q;
use crate::structures::{all_tuples, is_isomorphic, EvalError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Mba(#[from] MbaError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub budgets: Budgets,
    pub eval: EvalOptions,
    pub choice_limit: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            budgets: Budgets::default(),
            eval: EvalOptions::default(),
            choice_limit: DEFAULT_CHOICE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    /// `v > l/k ⇒ g > (l−1)/k`
    Upper,
    /// `g > l/k ⇒ v > (l−1)/k`
    Lower,
    /// `|v − g| ≤ 2/k`
    Gap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterminationFailure {
    pub strictness: Strictness,
    pub clause: Clause,
    pub l: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterminationReport {
    pub k: u32,
    pub v: Q,
    /// `G` on strict level sets.
    pub g: Q,
    /// `G` on non-strict level sets.
    pub g_nonstrict: Q,
    pub instances: usize,
    pub failures: Vec<DeterminationFailure>,
}

impl DeterminationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Level sets for every grid variable occurring in `G`.
pub fn level_assignment(
    r: &TransformResult,
    field: &MeasurableField,
    assignment: &Assignment,
    strictness: Strictness,
) -> Result<BTreeMap<SetVar, AtomSet>, EvalError> {
    let mut values: BTreeMap<usize, Vec<Q>> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for v in r.g.free_vars() {
        if let SetVar::Grid(ix) = &v {
            if !values.contains_key(&ix.tag) {
                values.insert(ix.tag, fiber_values(&r.formulas[ix.tag], field, assignment)?);
            }
            let set = threshold(&values[&ix.tag], ix.level, strictness);
            out.insert(v, set);
        }
    }
    Ok(out)
}

pub fn determination_check(
    phi: &MetricFormula,
    k: u32,
    field: &MeasurableField,
    assignment: &Assignment,
) -> Result<DeterminationReport, CheckError> {
    let opts = CheckOptions::default();
    let mut t = Transformer::new(opts.budgets);
    let r = t.transform(&rewrite_inf(phi), k)?;
    determination_check_with(phi, &r, field, assignment, &opts)
}

/// Checks both determination clauses for every relevant `l`, under the
/// strict and the non-strict level sets, against a precomputed transform.
pub fn determination_check_with(
    phi: &MetricFormula,
    r: &TransformResult,
    field: &MeasurableField,
    assignment: &Assignment,
    opts: &CheckOptions,
) -> Result<DeterminationReport, CheckError> {
    let k = r.k;
    let v = eval_on_integral_with(phi, field, assignment, opts.choice_limit)?;
    let alg = field.space();
    let mut gs = Vec::with_capacity(2);
    for s in [Strictness::Strict, Strictness::NonStrict] {
        let a = level_assignment(r, field, assignment, s)?;
        gs.push((s, eval_mba_with(&r.g, &a, alg, opts.eval)?));
    }
    let kq = Q::from_integer(k as i128);
    let at = |l: i64| Q::from_integer(l as i128) / kq;
    let mut failures = Vec::new();
    let mut instances = 0;
    for &(s, g) in &gs {
        // outside this range both clauses hold trivially for values in [0, 1]
        for l in -1..=(k as i64 + 1) {
            instances += 2;
            if v > at(l) && g <= at(l - 1) {
                failures.push(DeterminationFailure { strictness: s, clause: Clause::Upper, l });
            }
            if g > at(l) && v <= at(l - 1) {
                failures.push(DeterminationFailure { strictness: s, clause: Clause::Lower, l });
            }
        }
        instances += 1;
        let gap = if v > g { v - g } else { g - v };
        if gap > Q::new(2, k as i128) {
            failures.push(DeterminationFailure { strictness: s, clause: Clause::Gap, l: 0 });
        }
    }
    Ok(DeterminationReport {
        k,
        v,
        g: gs[0].1,
        g_nonstrict: gs[1].1,
        instances,
        failures,
    })
}

/// Indices `i ∈ 0..=ℓ` where `Ω ∖ {1∸ζ ≥ (ℓ−i)/ℓ}` differs from `{ζ > i/ℓ}`.
pub fn complement_identity_check(
    zeta: &MetricFormula,
    field: &MeasurableField,
    assignment: &Assignment,
    ell: u32,
) -> Result<Vec<u32>, EvalError> {
    let flipped = MetricFormula::one_minus(zeta.clone()).canonicalize();
    let direct = fiber_values(zeta, field, assignment)?;
    let reversed = fiber_values(&flipped, field, assignment)?;
    let full = field.space().full();
    let l = ell as i128;
    Ok((0..=ell)
        .filter(|&i| {
            let lhs = full & !threshold(&reversed, Q::new(l - i as i128, l), Strictness::NonStrict);
            lhs != threshold(&direct, Q::new(i as i128, l), Strictness::Strict)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub formula: usize,
    pub assignment: Assignment,
    pub left: Q,
    pub right: Q,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EquivalenceReport {
    pub comparisons: usize,
    pub mismatches: Vec<Mismatch>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compares `a` and `b` on every formula of `suite` under every assignment
/// of its free variables, matched through fiberwise isomorphisms.
pub fn integral_equivalence_check(
    a: &MeasurableField,
    b: &MeasurableField,
    suite: &[MetricFormula],
    choice_limit: u64,
) -> Result<EquivalenceReport, FieldError> {
    if a.space() != b.space() {
        return Err(FieldError::Document("fields live over different spaces".into()));
    }
    let mut sigmas = Vec::with_capacity(a.atoms());
    for (w, (m, n)) in a.fibers().iter().zip(b.fibers()).enumerate() {
        let s = is_isomorphic(m, n).ok_or_else(|| FieldError::NotIsomorphic(a.space().atoms()[w].clone()))?;
        sigmas.push(s);
    }
    let elems = a.all_choices(choice_limit)?;
    let mut report = EquivalenceReport::default();
    for (fi, phi) in suite.iter().enumerate() {
        let vars: Vec<String> = phi.free_vars().into_iter().collect();
        for t in all_tuples(elems.len(), vars.len()) {
            let left_assign: Assignment = vars.iter().cloned().zip(t.iter().map(|&i| elems[i].clone())).collect();
            let right_assign: Assignment = left_assign
                .iter()
                .map(|(k, e)| (k.clone(), transport_element(e, &sigmas)))
                .collect();
            let left = eval_on_integral_with(phi, a, &left_assign, choice_limit)?;
            let right = eval_on_integral_with(phi, b, &right_assign, choice_limit)?;
            report.comparisons += 1;
            if left != right {
                report.mismatches.push(Mismatch {
                    formula: fi,
                    assignment: left_assign,
                    left,
                    right,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use crate::direct_integral::{relabel_field, IntegralElement, MeasurableField};
    use crate::formula::{parse_formula, Signature};
    use crate::mba::{EvalMode, FiniteMeasureAlgebra};
    use crate::rational::q;
    use crate::structures::FiniteMetricStructure;
    use serde_json::json;

    fn sig() -> Signature {
        Signature::new(&[("P", 1)], &[]).unwrap()
    }

    fn fiber(points: &[&str], p: &[&str]) -> FiniteMetricStructure {
        let n = points.len();
        let dist: Vec<Vec<&str>> = (0..n).map(|i| (0..n).map(|j| if i == j { "0" } else { "1" }).collect()).collect();
        let table: serde_json::Map<String, serde_json::Value> =
            points.iter().zip(p).map(|(a, v)| (a.to_string(), json!(v))).collect();
        FiniteMetricStructure::from_value(&json!({"points": points, "dist": dist, "preds": {"P": table}}), &sig())
            .unwrap()
    }

    fn field(fibers: Vec<FiniteMetricStructure>) -> MeasurableField {
        let n = fibers.len();
        MeasurableField::new(FiniteMeasureAlgebra::uniform(n).unwrap(), fibers, sig()).unwrap()
    }

    fn elem(x: &[usize]) -> Assignment {
        [("x".to_string(), IntegralElement(x.to_vec()))].into_iter().collect()
    }

    #[test]
    fn atomic_example() {
        let f = field(vec![fiber(&["a"], &["3/4"]), fiber(&["b"], &["1/4"])]);
        let phi = parse_formula("P(x)", &sig()).unwrap();
        let rep = determination_check(&phi, 2, &f, &elem(&[0, 0])).unwrap();
        assert_eq!((rep.v, rep.g), (q(1, 2), q(1, 4)));
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn sup_example() {
        let f = field(vec![fiber(&["p", "q"], &["1", "0"]), fiber(&["r"], &["1/4"])]);
        let phi = parse_formula("sup y . P(y)", &sig()).unwrap();
        let rep = determination_check(&phi, 2, &f, &Assignment::new()).unwrap();
        assert_eq!((rep.v, rep.g), (q(5, 8), q(1, 4)));
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn constant_zero() {
        let f = field(vec![fiber(&["a"], &["1"])]);
        let rep = determination_check(&MetricFormula::Const(Q::zero()), 2, &f, &Assignment::new()).unwrap();
        assert_eq!((rep.v, rep.g, rep.g_nonstrict), (Q::zero(), Q::zero(), Q::zero()));
        assert!(rep.passed());
    }

    #[test]
    fn inf_and_sub_pass_on_small_field() {
        let f = field(vec![
            fiber(&["a", "b"], &["1/3", "1"]),
            fiber(&["c"], &["1/2"]),
            fiber(&["d", "e"], &["0", "3/4"]),
        ]);
        let opts = CheckOptions::default();
        for s in ["inf y . P(y)", "sub(P(x), half(P(x)))", "sup y . sub(P(y), P(x))", "sub(1, sup y . P(y))"] {
            let phi = parse_formula(s, &sig()).unwrap();
            for k in [2, 3] {
                let r = Transformer::default().transform(&rewrite_inf(&phi), k).unwrap();
                for x in f.all_choices(100).unwrap() {
                    let a = [("x".to_string(), x)].into_iter().collect();
                    let rep = determination_check_with(&phi, &r, &f, &a, &opts).unwrap();
                    assert!(rep.passed(), "{s} k={k}: {rep:?}");
                    let mut max = opts;
                    max.eval.mode = EvalMode::MaximalElement;
                    let rep2 = determination_check_with(&phi, &r, &f, &a, &max).unwrap();
                    assert_eq!((rep.g, rep.g_nonstrict), (rep2.g, rep2.g_nonstrict));
                }
            }
        }
    }

    #[test]
    fn complement_identity_holds() {
        let f = field(vec![fiber(&["a", "b"], &["1/3", "1"]), fiber(&["c"], &["1/2"])]);
        let phi = parse_formula("sup y . P(y)", &sig()).unwrap();
        for ell in [2, 3, 6] {
            assert!(complement_identity_check(&phi, &f, &Assignment::new(), ell).unwrap().is_empty());
            let px = parse_formula("P(x)", &sig()).unwrap();
            assert!(complement_identity_check(&px, &f, &elem(&[0, 0]), ell).unwrap().is_empty());
        }
    }

    #[test]
    fn equivalence_on_relabelled_fields() {
        let f = field(vec![fiber(&["a", "b", "c"], &["0", "1/2", "1"]), fiber(&["d", "e"], &["1/4", "1"])]);
        let g = relabel_field(&f, &[vec![2, 0, 1], vec![1, 0]]).unwrap();
        let suite: Vec<_> = ["P(x)", "sup y . P(y)", "sub(P(x), inf y . P(y))"]
            .iter()
            .map(|s| parse_formula(s, &sig()).unwrap())
            .collect();
        let rep = integral_equivalence_check(&f, &g, &suite, 1000).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.comparisons, 6 + 1 + 6);
        assert_eq!(integral_equivalence_check(&f, &f, &suite, 1000).unwrap().mismatches, vec![]);

        let h = field(vec![fiber(&["a", "b", "c"], &["0", "1/2", "1/2"]), fiber(&["d", "e"], &["1/4", "1"])]);
        assert!(matches!(
            integral_equivalence_check(&f, &h, &suite, 1000),
            Err(FieldError::NotIsomorphic(_))
        ));
    }
}
