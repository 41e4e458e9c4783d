//! Direct integrals of finite metric structures over finite probability spaces.

use std::collections::BTreeMap;

use num_traits::Zero;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::formula::{MetricFormula, Signature};
use crate::mba::{AtomSet, FiniteMeasureAlgebra, MbaError};
use crate::rational::Q;
use crate::structures::{eval_in, is_isomorphic, Env, EvalError, FiniteMetricStructure, Model, Violation};

/// Finite probability spaces share the representation of measure algebras:
/// atoms with strictly positive weights summing to one.
pub type FiniteProbabilitySpace = FiniteMeasureAlgebra;

pub const DEFAULT_CHOICE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error(transparent)]
    Space(#[from] MbaError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("fiber over `{atom}` is invalid: {violation}")]
    Fiber { atom: String, violation: Violation },
    #[error("fiber over `{0}` does not interpret the signature")]
    Signature(String),
    #[error("expected {expected} fibers, got {got}")]
    FiberCount { expected: usize, got: usize },
    #[error("sentence {0} has free variables")]
    NotSentence(usize),
    #[error("bijection for `{0}` is not an isomorphism")]
    NotIsomorphic(String),
    #[error("field document: {0}")]
    Document(String),
}

/// One structure per atom, all over one signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurableField {
    space: FiniteProbabilitySpace,
    fibers: Vec<FiniteMetricStructure>,
    sig: Signature,
}

/// A choice function: `0[ω]` is a point index of the fiber over `ω`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntegralElement(pub Vec<usize>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    Strict,
    NonStrict,
}

impl MeasurableField {
    pub fn new(space: FiniteProbabilitySpace, fibers: Vec<FiniteMetricStructure>, sig: Signature) -> Result<Self, FieldError> {
        if fibers.len() != space.len() {
            return Err(FieldError::FiberCount {
                expected: space.len(),
                got: fibers.len(),
            });
        }
        for (atom, m) in space.atoms().iter().zip(&fibers) {
            if !m.interprets(&sig) {
                return Err(FieldError::Signature(atom.clone()));
            }
            if let Some(violation) = m.validate() {
                return Err(FieldError::Fiber {
                    atom: atom.clone(),
                    violation,
                });
            }
        }
        Ok(MeasurableField { space, fibers, sig })
    }

    /// Every fiber the same structure.
    pub fn constant(space: FiniteProbabilitySpace, m: FiniteMetricStructure, sig: Signature) -> Result<Self, FieldError> {
        let fibers = vec![m; space.len()];
        Self::new(space, fibers, sig)
    }

    pub fn space(&self) -> &FiniteProbabilitySpace {
        &self.space
    }

    pub fn fibers(&self) -> &[FiniteMetricStructure] {
        &self.fibers
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn atoms(&self) -> usize {
        self.space.len()
    }

    /// `Π_ω |M_ω|`.
    pub fn choice_count(&self) -> u128 {
        self.fibers.iter().map(|m| m.len() as u128).product()
    }

    /// The `index`-th choice function in mixed-radix order (atom 0 fastest).
    pub fn choice(&self, mut index: u64) -> IntegralElement {
        let mut out = Vec::with_capacity(self.fibers.len());
        for m in &self.fibers {
            let n = m.len() as u64;
            out.push((index % n) as usize);
            index /= n;
        }
        IntegralElement(out)
    }

    pub fn all_choices(&self, limit: u64) -> Result<Vec<IntegralElement>, EvalError> {
        let count = self.choice_count();
        if count > limit as u128 {
            return Err(EvalError::TooManyElements { count, limit });
        }
        Ok((0..count as u64).map(|i| self.choice(i)).collect())
    }

    pub fn check_element(&self, a: &IntegralElement) -> Result<(), FieldError> {
        if a.0.len() != self.fibers.len() || a.0.iter().zip(&self.fibers).any(|(&p, m)| p >= m.len()) {
            return Err(FieldError::Document(format!("{:?} is not a choice function", a.0)));
        }
        Ok(())
    }

    /// `d(a, b) = Σ_ω μ(ω)·d_ω(a(ω), b(ω))`.
    pub fn dist(&self, a: &IntegralElement, b: &IntegralElement) -> Q {
        self.fibers
            .iter()
            .enumerate()
            .map(|(w, m)| self.space.weights()[w] * m.dist(a.0[w], b.0[w]))
            .sum()
    }

    pub fn from_value(v: &Value, sig: &Signature) -> Result<Self, FieldError> {
        let obj = v
            .as_object()
            .ok_or_else(|| FieldError::Document("field must be an object".into()))?;
        let space = FiniteMeasureAlgebra::from_value(
            obj.get("space")
                .ok_or_else(|| FieldError::Document("missing `space`".into()))?,
        )?;
        let fibers_doc = obj
            .get("fibers")
            .and_then(Value::as_object)
            .ok_or_else(|| FieldError::Document("missing `fibers`".into()))?;
        let mut fibers = Vec::with_capacity(space.len());
        for atom in space.atoms() {
            let doc = fibers_doc
                .get(atom)
                .ok_or_else(|| FieldError::Document(format!("no fiber for atom `{atom}`")))?;
            fibers.push(FiniteMetricStructure::from_value(doc, sig)?);
        }
        if fibers_doc.len() != space.len() {
            return Err(FieldError::Document("fibers given for unknown atoms".into()));
        }
        Self::new(space, fibers, sig.clone())
    }

    pub fn to_value(&self) -> Value {
        let mut fibers = Map::new();
        for (atom, m) in self.space.atoms().iter().zip(&self.fibers) {
            fibers.insert(atom.clone(), m.to_value());
        }
        serde_json::json!({ "space": self.space.to_value(), "fibers": fibers })
    }

    /// Resolves an element given as point names per atom.
    pub fn element_from_names<S: AsRef<str>>(&self, names: &[S]) -> Result<IntegralElement, FieldError> {
        if names.len() != self.fibers.len() {
            return Err(FieldError::Document("element must name one point per atom".into()));
        }
        names
            .iter()
            .zip(&self.fibers)
            .map(|(n, m)| {
                m.point_index(n.as_ref())
                    .ok_or_else(|| FieldError::Document(format!("unknown point `{}`", n.as_ref())))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(IntegralElement)
    }
}

/// The direct integral as a [`Model`], with a cap on quantifier ranges.
pub struct DirectIntegral<'a> {
    pub field: &'a MeasurableField,
    pub limit: u64,
}

impl Model for DirectIntegral<'_> {
    type Elem = IntegralElement;

    fn universe_size(&self) -> Result<u64, EvalError> {
        let count = self.field.choice_count();
        if count > self.limit as u128 {
            return Err(EvalError::TooManyElements {
                count,
                limit: self.limit,
            });
        }
        Ok(count as u64)
    }

    fn element(&self, index: u64) -> IntegralElement {
        self.field.choice(index)
    }

    fn pred(&self, name: &str, args: &[IntegralElement]) -> Result<Q, EvalError> {
        let mut total = Q::zero();
        let mut at = Vec::with_capacity(args.len());
        for (w, m) in self.field.fibers.iter().enumerate() {
            at.clear();
            at.extend(args.iter().map(|a| a.0[w]));
            total += self.field.space.weights()[w] * m.pred(name, &at)?;
        }
        Ok(total)
    }

    fn func(&self, name: &str, args: &[IntegralElement]) -> Result<IntegralElement, EvalError> {
        let mut out = Vec::with_capacity(self.field.fibers.len());
        for (w, m) in self.field.fibers.iter().enumerate() {
            let at: Vec<usize> = args.iter().map(|a| a.0[w]).collect();
            out.push(m.func(name, &at)?);
        }
        Ok(IntegralElement(out))
    }
}

pub type Assignment = BTreeMap<String, IntegralElement>;

/// `φ^M(ā)` on the direct integral; quantifiers range over all choice functions.
pub fn eval_on_integral(phi: &MetricFormula, field: &MeasurableField, assignment: &Assignment) -> Result<Q, EvalError> {
    eval_on_integral_with(phi, field, assignment, DEFAULT_CHOICE_LIMIT)
}

pub fn eval_on_integral_with(
    phi: &MetricFormula,
    field: &MeasurableField,
    assignment: &Assignment,
    limit: u64,
) -> Result<Q, EvalError> {
    let model = DirectIntegral { field, limit };
    let mut env: Env<IntegralElement> = assignment.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    eval_in(phi, &model, &mut env)
}

/// `ζ(ā_ω)^{M_ω}` for every atom, quantifiers ranging within each fiber.
pub fn fiber_values(zeta: &MetricFormula, field: &MeasurableField, assignment: &Assignment) -> Result<Vec<Q>, EvalError> {
    field
        .fibers
        .iter()
        .enumerate()
        .map(|(w, m)| {
            let mut env: Env<usize> = assignment.iter().map(|(k, v)| (k.clone(), v.0[w])).collect();
            eval_in(zeta, m, &mut env)
        })
        .collect()
}

/// Atoms whose fiber value exceeds `t`, strictly or not.
pub fn threshold(values: &[Q], t: Q, strictness: Strictness) -> AtomSet {
    values.iter().enumerate().fold(0, |acc, (w, v)| {
        let hit = match strictness {
            Strictness::Strict => *v > t,
            Strictness::NonStrict => *v >= t,
        };
        if hit {
            acc | 1 << w
        } else {
            acc
        }
    })
}

/// `Z^ζ_t[ā] = {ω : ζ(ā_ω)^{M_ω} > t}` (or `≥ t` when non-strict).
pub fn level_set(
    zeta: &MetricFormula,
    field: &MeasurableField,
    assignment: &Assignment,
    t: Q,
    strictness: Strictness,
) -> Result<AtomSet, EvalError> {
    Ok(threshold(&fiber_values(zeta, field, assignment)?, t, strictness))
}

/// `μ{ω : φ_j^{M_ω} > r_j for every j}`.
pub fn theory_distribution(field: &MeasurableField, sentences: &[MetricFormula], r: &[Q]) -> Result<Q, FieldError> {
    if sentences.len() != r.len() {
        return Err(FieldError::Document("one threshold per sentence required".into()));
    }
    if let Some(j) = sentences.iter().position(|s| !s.free_vars().is_empty()) {
        return Err(FieldError::NotSentence(j));
    }
    let empty = Assignment::new();
    let mut set = field.space.full();
    for (s, t) in sentences.iter().zip(r) {
        set &= level_set(s, field, &empty, *t, Strictness::Strict)?;
    }
    Ok(field.space.measure(set))
}

/// Transports fiber `ω` along the permutation `bijections[ω]`; point `i`
/// becomes point `σ(i)` and keeps its name.
pub fn relabel_field(field: &MeasurableField, bijections: &[Vec<usize>]) -> Result<MeasurableField, FieldError> {
    if bijections.len() != field.fibers.len() {
        return Err(FieldError::FiberCount {
            expected: field.fibers.len(),
            got: bijections.len(),
        });
    }
    let mut fibers = Vec::with_capacity(field.fibers.len());
    for ((atom, m), sigma) in field.space.atoms().iter().zip(&field.fibers).zip(bijections) {
        if sigma.len() != m.len() {
            return Err(FieldError::NotIsomorphic(atom.clone()));
        }
        let mut names = vec![String::new(); m.len()];
        for (i, &s) in sigma.iter().enumerate() {
            if s >= m.len() {
                return Err(FieldError::NotIsomorphic(atom.clone()));
            }
            names[s] = m.points()[i].clone();
        }
        let n = m
            .transport(sigma, names)
            .map_err(|_| FieldError::NotIsomorphic(atom.clone()))?;
        if is_isomorphic(m, &n).is_none() {
            return Err(FieldError::NotIsomorphic(atom.clone()));
        }
        fibers.push(n);
    }
    MeasurableField::new(field.space.clone(), fibers, field.sig.clone())
}

/// Pushes an element of `field` through the per-fiber bijections.
pub fn transport_element(a: &IntegralElement, bijections: &[Vec<usize>]) -> IntegralElement {
    IntegralElement(a.0.iter().zip(bijections).map(|(&p, s)| s[p]).collect())
}

/// The direct integral as an explicit finite structure, one point per choice
/// function.
pub fn materialize(field: &MeasurableField, limit: u64) -> Result<FiniteMetricStructure, FieldError> {
    let elems = field.all_choices(limit)?;
    let n = elems.len();
    let index_of = |e: &IntegralElement| {
        let mut idx = 0usize;
        for (w, m) in field.fibers.iter().enumerate().rev() {
            idx = idx * m.len() + e.0[w];
        }
        idx
    };
    let names: Vec<String> = elems
        .iter()
        .map(|e| format!("c{}", e.0.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("_")))
        .collect();
    let dist = elems.iter().map(|a| elems.iter().map(|b| field.dist(a, b)).collect()).collect();
    let model = DirectIntegral { field, limit };
    let mut preds = BTreeMap::new();
    for s in &field.sig.predicates {
        let vals = crate::structures::all_tuples(n, s.arity)
            .map(|t| {
                let args: Vec<IntegralElement> = t.iter().map(|&i| elems[i].clone()).collect();
                model.pred(&s.name, &args)
            })
            .collect::<Result<Vec<_>, _>>()?;
        preds.insert(s.name.clone(), (s.arity, vals));
    }
    let mut funcs = BTreeMap::new();
    for s in &field.sig.functions {
        let vals = crate::structures::all_tuples(n, s.arity)
            .map(|t| {
                let args: Vec<IntegralElement> = t.iter().map(|&i| elems[i].clone()).collect();
                model.func(&s.name, &args).map(|e| index_of(&e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        funcs.insert(s.name.clone(), (s.arity, vals));
    }
    Ok(FiniteMetricStructure::new(names, dist, preds, funcs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::rational::q;

    fn sig() -> Signature {
        Signature::new(&[("P", 1)], &[]).unwrap()
    }

    fn single(points: &[&str], p: &[Q]) -> FiniteMetricStructure {
        let n = points.len();
        let dist = (0..n)
            .map(|a| (0..n).map(|b| if a == b { Q::zero() } else { Q::from_integer(1) }).collect())
            .collect();
        FiniteMetricStructure::new(
            points.iter().map(|s| s.to_string()).collect(),
            dist,
            [("P".to_string(), (1, p.to_vec()))].into_iter().collect(),
            BTreeMap::new(),
        )
        .unwrap()
    }

    pub(crate) fn atomic_field() -> MeasurableField {
        MeasurableField::new(
            FiniteMeasureAlgebra::uniform(2).unwrap(),
            vec![single(&["a"], &[q(3, 4)]), single(&["b"], &[q(1, 4)])],
            sig(),
        )
        .unwrap()
    }

    pub(crate) fn sup_field() -> MeasurableField {
        MeasurableField::new(
            FiniteMeasureAlgebra::uniform(2).unwrap(),
            vec![single(&["p", "q"], &[q(1, 1), q(0, 1)]), single(&["r"], &[q(1, 4)])],
            sig(),
        )
        .unwrap()
    }

    #[test]
    fn atomic_integration() {
        let f = atomic_field();
        let a: Assignment = [("x".to_string(), IntegralElement(vec![0, 0]))].into_iter().collect();
        let phi = parse_formula("P(x)", &sig()).unwrap();
        assert_eq!(eval_on_integral(&phi, &f, &a).unwrap(), q(1, 2));
        assert_eq!(eval_on_integral(&MetricFormula::Const(q(2, 7)), &f, &a).unwrap(), q(2, 7));
        assert_eq!(level_set(&phi, &f, &a, q(1, 2), Strictness::Strict).unwrap(), 0b01);
        assert_eq!(level_set(&phi, &f, &a, q(1, 1), Strictness::Strict).unwrap(), 0);
    }

    #[test]
    fn sup_ranges_over_choice_functions() {
        let f = sup_field();
        let phi = parse_formula("sup y . P(y)", &sig()).unwrap();
        assert_eq!(eval_on_integral(&phi, &f, &Assignment::new()).unwrap(), q(5, 8));
        assert_eq!(theory_distribution(&f, &[phi.clone()], &[q(1, 2)]).unwrap(), q(1, 2));
        assert_eq!(theory_distribution(&f, &[], &[]).unwrap(), q(1, 1));
        assert_eq!(theory_distribution(&f, &[phi], &[q(1, 1)]).unwrap(), q(0, 1));
        let open = parse_formula("P(x)", &sig()).unwrap();
        assert!(matches!(theory_distribution(&f, &[open], &[q(0, 1)]), Err(FieldError::NotSentence(0))));
    }

    #[test]
    fn choice_limit_is_enforced() {
        let f = sup_field();
        let phi = parse_formula("sup y . P(y)", &sig()).unwrap();
        assert!(matches!(
            eval_on_integral_with(&phi, &f, &Assignment::new(), 1),
            Err(EvalError::TooManyElements { count: 2, limit: 1 })
        ));
    }

    #[test]
    fn relabel_preserves_values() {
        let f = sup_field();
        let same = relabel_field(&f, &[vec![0, 1], vec![0]]).unwrap();
        assert_eq!(same, f);
        let swapped = relabel_field(&f, &[vec![1, 0], vec![0]]).unwrap();
        let phi = parse_formula("P(x)", &sig()).unwrap();
        for a in f.all_choices(100).unwrap() {
            let b = transport_element(&a, &[vec![1, 0], vec![0]]);
            let va = eval_on_integral(&phi, &f, &[("x".to_string(), a)].into_iter().collect()).unwrap();
            let vb = eval_on_integral(&phi, &swapped, &[("x".to_string(), b)].into_iter().collect()).unwrap();
            assert_eq!(va, vb);
        }
        assert!(relabel_field(&f, &[vec![0], vec![0]]).is_err());
    }

    #[test]
    fn materialized_integral_is_a_structure() {
        let f = sup_field();
        let m = materialize(&f, 100).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.validate(), None);
        assert_eq!(m.pred_value("P", &[0]), Some(q(5, 8)));
    }

    #[test]
    fn json_round_trip() {
        let f = sup_field();
        let g = MeasurableField::from_value(&f.to_value(), &sig()).unwrap();
        assert_eq!(f, g);
    }
}
