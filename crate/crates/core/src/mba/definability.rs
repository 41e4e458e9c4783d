//! Formulas defining chain sets and their brute-force distance oracles.

use std::collections::HashMap;

use super::{submasks, AtomSet, FiniteMeasureAlgebra, MbaError, MbaFormula, SetTerm, SetVar};
use crate::rational::Q;

/// Variable names `X0..X{len-1}` used by [`phi_chain`].
pub fn chain_var_names(len: usize) -> Vec<String> {
    (0..len).map(|i| format!("X{i}")).collect()
}

/// Variable names used by [`psi_multichain`] for tag `t`.
pub fn multichain_var_names(tag: usize, len: usize) -> Vec<String> {
    (0..len).map(|i| format!("X{tag}_{i}")).collect()
}

/// `max_{0≤m<ℓ} μ(X_m \ ⋂_{j<m} X_j) + μ(X_m \ U_m)`, the empty intersection
/// being the full set.
pub fn phi_chain_terms(xs: &[SetTerm], us: &[SetTerm]) -> Result<MbaFormula, MbaError> {
    if xs.len() != us.len() || xs.is_empty() {
        return Err(MbaError::LengthMismatch {
            expected: us.len(),
            got: xs.len(),
        });
    }
    let terms = (0..xs.len())
        .map(|m| {
            let prefix = SetTerm::inter(xs[..m].to_vec());
            MbaFormula::add(
                MbaFormula::measure(SetTerm::diff(xs[m].clone(), prefix)),
                MbaFormula::measure(SetTerm::diff(xs[m].clone(), us[m].clone())),
            )
        })
        .collect();
    Ok(MbaFormula::Max(terms))
}

pub fn check_decreasing(us: &[AtomSet]) -> Result<(), MbaError> {
    match (1..us.len()).find(|&i| us[i] & !us[i - 1] != 0) {
        Some(i) => Err(MbaError::ChainNotDecreasing(i)),
        None => Ok(()),
    }
}

/// `φ_Ū` over the variables [`chain_var_names`], with the `U_m` as literals.
pub fn phi_chain(us: &[AtomSet]) -> Result<MbaFormula, MbaError> {
    check_decreasing(us)?;
    let xs: Vec<SetTerm> = chain_var_names(us.len()).iter().map(|n| SetTerm::named(n)).collect();
    let ut: Vec<SetTerm> = us.iter().map(|u| SetTerm::Lit(*u)).collect();
    phi_chain_terms(&xs, &ut)
}

/// `ψ_Ū = max over tags of φ` for each tag's chain.
pub fn psi_multichain(chains: &[Vec<AtomSet>]) -> Result<MbaFormula, MbaError> {
    let mut parts = Vec::with_capacity(chains.len());
    for (t, us) in chains.iter().enumerate() {
        check_decreasing(us)?;
        let xs: Vec<SetTerm> = multichain_var_names(t, us.len()).iter().map(|n| SetTerm::named(n)).collect();
        let ut: Vec<SetTerm> = us.iter().map(|u| SetTerm::Lit(*u)).collect();
        parts.push(phi_chain_terms(&xs, &ut)?);
    }
    Ok(MbaFormula::Max(parts))
}

/// `μ(X1 \ X2)` and `μ((X1 ∩ X2) Δ X3)`.
pub fn simple_definables() -> (MbaFormula, MbaFormula) {
    let x = |i: usize| SetTerm::named(&format!("X{i}"));
    (
        MbaFormula::measure(SetTerm::diff(x(1), x(2))),
        MbaFormula::measure(SetTerm::sym_diff(SetTerm::Inter(vec![x(1), x(2)]), x(3))),
    )
}

pub fn named_assignment<S: AsRef<str>>(names: &[S], values: &[AtomSet]) -> HashMap<SetVar, AtomSet> {
    names
        .iter()
        .zip(values)
        .map(|(n, v)| (SetVar::named(n.as_ref()), *v))
        .collect()
}

/// Membership in `X[Ū] = {Ȳ : Y_j ⊆ U_j ∩ ⋂_{i<j} Y_i}`.
pub fn in_chain_set(ys: &[AtomSet], us: &[AtomSet]) -> bool {
    ys.len() == us.len()
        && ys
            .iter()
            .enumerate()
            .all(|(j, y)| y & !us[j] == 0 && (j == 0 || y & !ys[j - 1] == 0))
}

/// Exact max-metric distance from `xs` to `X[Ū]` with a nearest witness.
///
/// Ties are broken by the smallest summed coordinate distance, then by
/// enumeration order.
pub fn dist_to_chain_set(
    xs: &[AtomSet],
    us: &[AtomSet],
    alg: &FiniteMeasureAlgebra,
) -> Result<(Q, Vec<AtomSet>), MbaError> {
    check_decreasing(us)?;
    if xs.len() != us.len() {
        return Err(MbaError::LengthMismatch {
            expected: us.len(),
            got: xs.len(),
        });
    }
    let full = alg.full();
    let mut best: Option<((i128, i128), Vec<AtomSet>)> = None;
    let mut cur = Vec::with_capacity(us.len());
    search_chain(xs, us, alg, full, &mut cur, &mut best);
    let ((d, _), w) = best.expect("the all-empty tuple is always in the chain set");
    Ok((Q::new(d, alg.denom()), w))
}

fn search_chain(
    xs: &[AtomSet],
    us: &[AtomSet],
    alg: &FiniteMeasureAlgebra,
    allowed: AtomSet,
    cur: &mut Vec<AtomSet>,
    best: &mut Option<((i128, i128), Vec<AtomSet>)>,
) {
    let j = cur.len();
    if j == us.len() {
        let ds = cur.iter().zip(xs).map(|(y, x)| alg.scaled_measure(y ^ x));
        let key = ds.clone().fold((0, 0), |(m, s), d| (m.max(d), s + d));
        if best.as_ref().map_or(true, |(b, _)| key < *b) {
            *best = Some((key, cur.clone()));
        }
        return;
    }
    for y in submasks(allowed & us[j]) {
        cur.push(y);
        search_chain(xs, us, alg, y, cur, best);
        cur.pop();
    }
}

/// Brute-force distance from `xs` to `{Ȳ : member(Ȳ)}` over all tuples of the
/// same length; `None` when the set is empty.
pub fn dist_to_set(
    xs: &[AtomSet],
    alg: &FiniteMeasureAlgebra,
    member: impl Fn(&[AtomSet]) -> bool,
) -> Option<(Q, Vec<AtomSet>)> {
    let n = alg.len();
    let k = xs.len();
    let total_bits = n * k;
    assert!(total_bits < 32, "tuple space too large for brute force");
    let full = alg.full();
    let mut best: Option<(i128, Vec<AtomSet>)> = None;
    for word in 0u64..(1 << total_bits) {
        let ys: Vec<AtomSet> = (0..k).map(|j| (word >> (j * n)) & full).collect();
        if !member(&ys) {
            continue;
        }
        let d = ys.iter().zip(xs).map(|(y, x)| alg.scaled_measure(y ^ x)).max().unwrap_or(0);
        if best.as_ref().map_or(true, |(b, _)| d < *b) {
            best = Some((d, ys));
        }
    }
    best.map(|(d, ys)| (Q::new(d, alg.denom()), ys))
}

/// Evaluates a formula built over named variables at the given tuple.
pub fn eval_named(g: &MbaFormula, names: &[String], values: &[AtomSet], alg: &FiniteMeasureAlgebra) -> Result<Q, MbaError> {
    let a = named_assignment(names, values);
    super::eval_mba(g, &a, alg, super::EvalMode::Enumerate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn chain_example_three_atoms() {
        let alg = FiniteMeasureAlgebra::uniform(3).unwrap();
        let us = [0b111, 0b001];
        let xs = [0b110, 0b010];
        let phi = phi_chain(&us).unwrap();
        assert_eq!(eval_named(&phi, &chain_var_names(2), &xs, &alg).unwrap(), q(1, 3));
        let (d, w) = dist_to_chain_set(&xs, &us, &alg).unwrap();
        assert_eq!(d, q(1, 3));
        assert_eq!(w, vec![0b110, 0b000]);
    }

    #[test]
    fn members_have_zero_value() {
        let alg = FiniteMeasureAlgebra::uniform(3).unwrap();
        let us = [0b111, 0b001];
        let phi = phi_chain(&us).unwrap();
        assert_eq!(eval_named(&phi, &chain_var_names(2), &us, &alg).unwrap(), q(0, 1));
        assert_eq!(dist_to_chain_set(&us, &us, &alg).unwrap().0, q(0, 1));

        let one = phi_chain(&[0b111]).unwrap();
        for x in alg.subsets() {
            assert_eq!(eval_named(&one, &chain_var_names(1), &[x], &alg).unwrap(), q(0, 1));
            assert_eq!(dist_to_chain_set(&[x], &[0b111], &alg).unwrap().0, q(0, 1));
        }
    }

    #[test]
    fn single_term_chain_is_not_trivial() {
        // with U_0 proper, a one-term chain must still see X_0 \ U_0
        let alg = FiniteMeasureAlgebra::uniform(2).unwrap();
        let phi = phi_chain(&[0b01]).unwrap();
        assert_eq!(eval_named(&phi, &chain_var_names(1), &[0b10], &alg).unwrap(), q(1, 2));
    }

    #[test]
    fn rejects_bad_chains() {
        let alg = FiniteMeasureAlgebra::uniform(2).unwrap();
        assert!(matches!(phi_chain(&[0b01, 0b11]), Err(MbaError::ChainNotDecreasing(1))));
        assert!(matches!(
            dist_to_chain_set(&[0], &[0b11, 0b01], &alg),
            Err(MbaError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn multichain_reports_violating_tag() {
        let alg = FiniteMeasureAlgebra::uniform(2).unwrap();
        let chains = vec![vec![0b11], vec![0b01]];
        let psi = psi_multichain(&chains).unwrap();
        let mut names = multichain_var_names(0, 1);
        names.extend(multichain_var_names(1, 1));
        // tag 0 satisfied, tag 1 violated by atom 2
        let v = eval_named(&psi, &names, &[0b10, 0b10], &alg).unwrap();
        let phi1 = phi_chain(&chains[1]).unwrap();
        assert_eq!(v, eval_named(&phi1, &chain_var_names(1), &[0b10], &alg).unwrap());
        assert_eq!(v, q(1, 2));
        assert_eq!(eval_named(&psi, &names, &[0b11, 0b01], &alg).unwrap(), q(0, 1));
    }

    #[test]
    fn warm_up_formulas() {
        let alg = FiniteMeasureAlgebra::uniform(2).unwrap();
        let (phi, psi) = simple_definables();
        let n2 = ["X1".to_string(), "X2".to_string()];
        let n3 = ["X1".to_string(), "X2".to_string(), "X3".to_string()];
        assert_eq!(eval_named(&phi, &n2, &[0b01, 0b11], &alg).unwrap(), q(0, 1));
        assert_eq!(eval_named(&phi, &n2, &[0b11, 0b01], &alg).unwrap(), q(1, 2));
        let (d, _) = dist_to_set(&[0b11, 0b01], &alg, |t| t[0] & !t[1] == 0).unwrap();
        assert_eq!(d, q(1, 2));
        assert_eq!(eval_named(&psi, &n3, &[0b11, 0b10, 0b10], &alg).unwrap(), q(0, 1));
    }
}
