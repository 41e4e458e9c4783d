use std::collections::HashSet;

use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::MbaError;
use crate::rational::Q;

/// A subset of atoms, bit `i` standing for the `i`-th atom.
pub type AtomSet = u64;

pub const MAX_ATOMS: usize = 63;

/// A finite probability measure algebra: the power set of an ordered atom
/// list with strictly positive rational weights summing to one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMeasureAlgebra {
    atoms: Vec<String>,
    weights: Vec<Q>,
    // weights scaled to a common denominator, for fast exact sums
    scaled: Vec<i128>,
    denom: i128,
}

#[derive(Serialize, Deserialize)]
struct AlgebraDoc {
    atoms: Vec<String>,
    #[serde(with = "crate::rational::serde_q_vec")]
    weights: Vec<Q>,
}

impl FiniteMeasureAlgebra {
    pub fn new(atoms: Vec<String>, weights: Vec<Q>) -> Result<Self, MbaError> {
        if atoms.is_empty() {
            return Err(MbaError::Algebra("no atoms".into()));
        }
        if atoms.len() > MAX_ATOMS {
            return Err(MbaError::Algebra(format!("more than {MAX_ATOMS} atoms")));
        }
        if atoms.len() != weights.len() {
            return Err(MbaError::Algebra("atoms and weights differ in length".into()));
        }
        let mut seen = HashSet::new();
        if let Some(a) = atoms.iter().find(|a| !seen.insert(a.as_str())) {
            return Err(MbaError::Algebra(format!("duplicate atom `{a}`")));
        }
        if let Some(w) = weights.iter().find(|w| **w <= Q::zero()) {
            return Err(MbaError::Algebra(format!("weight {w} is not positive")));
        }
        if weights.iter().sum::<Q>() != Q::one() {
            return Err(MbaError::Algebra("weights do not sum to 1".into()));
        }
        let denom = weights.iter().fold(1i128, |acc, w| acc.lcm(w.denom()));
        let scaled = weights.iter().map(|w| w.numer() * (denom / w.denom())).collect();
        Ok(FiniteMeasureAlgebra {
            atoms,
            weights,
            scaled,
            denom,
        })
    }

    /// `n` atoms named `w1..wn` with weight `1/n` each.
    pub fn uniform(n: usize) -> Result<Self, MbaError> {
        let atoms = (1..=n).map(|i| format!("w{i}")).collect();
        Self::new(atoms, vec![Q::new(1, n as i128); n])
    }

    pub fn from_json(text: &str) -> Result<Self, MbaError> {
        let doc: AlgebraDoc = serde_json::from_str(text).map_err(|e| MbaError::Json(e.to_string()))?;
        Self::new(doc.atoms, doc.weights)
    }

    pub fn from_value(v: &serde_json::Value) -> Result<Self, MbaError> {
        let doc: AlgebraDoc =
            serde_json::from_value(v.clone()).map_err(|e| MbaError::Json(e.to_string()))?;
        Self::new(doc.atoms, doc.weights)
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(AlgebraDoc {
            atoms: self.atoms.clone(),
            weights: self.weights.clone(),
        })
        .expect("algebra serializes")
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn weights(&self) -> &[Q] {
        &self.weights
    }

    pub fn full(&self) -> AtomSet {
        (1u64 << self.atoms.len()) - 1
    }

    pub fn measure(&self, set: AtomSet) -> Q {
        Q::new(self.scaled_measure(set), self.denom)
    }

    /// `μ(set)` times the common denominator of the weights.
    pub fn scaled_measure(&self, set: AtomSet) -> i128 {
        let mut s = set & self.full();
        let mut total = 0;
        while s != 0 {
            total += self.scaled[s.trailing_zeros() as usize];
            s &= s - 1;
        }
        total
    }

    pub fn denom(&self) -> i128 {
        self.denom
    }

    /// `d_μ(A, B) = μ(A Δ B)`.
    pub fn dist(&self, a: AtomSet, b: AtomSet) -> Q {
        self.measure(a ^ b)
    }

    /// Max metric on tuples.
    pub fn tuple_dist(&self, a: &[AtomSet], b: &[AtomSet]) -> Q {
        a.iter()
            .zip(b)
            .map(|(x, y)| self.scaled_measure(x ^ y))
            .max()
            .map_or(Q::zero(), |m| Q::new(m, self.denom))
    }

    pub fn index_of(&self, atom: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a == atom)
    }

    pub fn subset_from_names<S: AsRef<str>>(&self, names: &[S]) -> Result<AtomSet, MbaError> {
        names.iter().try_fold(0u64, |acc, n| {
            let i = self
                .index_of(n.as_ref())
                .ok_or_else(|| MbaError::Algebra(format!("unknown atom `{}`", n.as_ref())))?;
            Ok(acc | (1 << i))
        })
    }

    pub fn subset_names(&self, set: AtomSet) -> Vec<String> {
        (0..self.atoms.len())
            .filter(|i| set >> i & 1 == 1)
            .map(|i| self.atoms[i].clone())
            .collect()
    }

    /// All subsets in increasing bitmask order.
    pub fn subsets(&self) -> impl Iterator<Item = AtomSet> {
        0..=self.full()
    }
}

/// Iterates over all submasks of `mask`, in increasing order.
pub fn submasks(mask: AtomSet) -> impl Iterator<Item = AtomSet> {
    let mut next = Some(0u64);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == mask { None } else { Some(((cur | !mask).wrapping_add(1)) & mask) };
        Some(cur)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn rejects_bad_weights() {
        let names = |n: usize| (0..n).map(|i| format!("a{i}")).collect::<Vec<_>>();
        assert!(FiniteMeasureAlgebra::new(names(2), vec![q(1, 2), q(1, 3)]).is_err());
        assert!(FiniteMeasureAlgebra::new(names(2), vec![q(1, 1), q(0, 1)]).is_err());
        assert!(FiniteMeasureAlgebra::new(vec!["a".into(), "a".into()], vec![q(1, 2), q(1, 2)]).is_err());
        assert!(FiniteMeasureAlgebra::new(vec![], vec![]).is_err());
    }

    #[test]
    fn measure_and_distance() {
        let alg = FiniteMeasureAlgebra::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![q(1, 2), q(1, 3), q(1, 6)],
        )
        .unwrap();
        assert_eq!(alg.measure(0b011), q(5, 6));
        assert_eq!(alg.measure(alg.full()), q(1, 1));
        assert_eq!(alg.dist(0b001, 0b100), q(2, 3));
        assert_eq!(alg.tuple_dist(&[0b001, 0b010], &[0b001, 0b000]), q(1, 3));
    }

    #[test]
    fn additivity_and_metric_axioms_exhaustive() {
        let alg = FiniteMeasureAlgebra::new(
            (0..5).map(|i| format!("a{i}")).collect(),
            vec![q(1, 10), q(1, 5), q(3, 10), q(1, 4), q(3, 20)],
        )
        .unwrap();
        for a in alg.subsets() {
            for b in alg.subsets() {
                assert_eq!(alg.measure(a | b) + alg.measure(a & b), alg.measure(a) + alg.measure(b));
                assert_eq!(alg.dist(a, b), alg.dist(b, a));
                assert_eq!(alg.dist(a, b) == Q::zero(), a == b);
                for c in [0, 0b10101, 0b11111] {
                    assert!(alg.dist(a, c) <= alg.dist(a, b) + alg.dist(b, c));
                }
            }
        }
    }

    #[test]
    fn submask_enumeration() {
        let v: Vec<_> = submasks(0b1010).collect();
        assert_eq!(v, vec![0, 0b0010, 0b1000, 0b1010]);
        assert_eq!(submasks(0).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn json_round_trip() {
        let alg = FiniteMeasureAlgebra::from_json(r#"{"atoms":["w1","w2"],"weights":["1/2","1/2"]}"#).unwrap();
        assert_eq!(alg, FiniteMeasureAlgebra::uniform(2).unwrap());
        assert_eq!(alg.subset_from_names(&["w2"]).unwrap(), 0b10);
        assert_eq!(FiniteMeasureAlgebra::from_value(&alg.to_value()).unwrap(), alg);
    }
}
