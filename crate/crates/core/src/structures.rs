//! Finite metric structures and exact formula evaluation.

use std::collections::{BTreeMap, HashSet};

use num_traits::{One, Zero};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::formula::{MetricFormula, Signature, Term};
use crate::rational::{in_unit_interval, parse_q, trunc_sub, Q};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("variable `{0}` has no assigned element")]
    MissingAssignment(String),
    #[error("symbol `{0}` is not interpreted")]
    Uninterpreted(String),
    #[error("quantifier ranges over {count} elements, limit {limit}")]
    TooManyElements { count: u128, limit: u64 },
    #[error("structure document: {0}")]
    Document(String),
}

/// Anything formulas can be evaluated in: an indexed universe with predicate
/// and function interpretations.
pub trait Model {
    type Elem: Clone;

    /// Number of elements quantifiers range over.
    fn universe_size(&self) -> Result<u64, EvalError>;
    fn element(&self, index: u64) -> Self::Elem;
    fn pred(&self, name: &str, args: &[Self::Elem]) -> Result<Q, EvalError>;
    fn func(&self, name: &str, args: &[Self::Elem]) -> Result<Self::Elem, EvalError>;
}

pub type Env<E> = Vec<(String, E)>;

fn lookup<'a, E>(env: &'a Env<E>, v: &str) -> Result<&'a E, EvalError> {
    env.iter()
        .rev()
        .find(|(n, _)| n == v)
        .map(|(_, e)| e)
        .ok_or_else(|| EvalError::MissingAssignment(v.to_string()))
}

fn eval_term<M: Model>(t: &Term, m: &M, env: &Env<M::Elem>) -> Result<M::Elem, EvalError> {
    match t {
        Term::Var(v) => lookup(env, v).cloned(),
        Term::App(f, args) => {
            let xs = args.iter().map(|a| eval_term(a, m, env)).collect::<Result<Vec<_>, _>>()?;
            m.func(f, &xs)
        }
    }
}

/// Structural evaluation; quantifiers take the exact max/min over the universe.
pub fn eval_in<M: Model>(phi: &MetricFormula, m: &M, env: &mut Env<M::Elem>) -> Result<Q, EvalError> {
    Ok(match phi {
        MetricFormula::Atomic(p, args) => {
            let xs = args.iter().map(|a| eval_term(a, m, env)).collect::<Result<Vec<_>, _>>()?;
            m.pred(p, &xs)?
        }
        MetricFormula::Const(q) => *q,
        MetricFormula::Half(a) => eval_in(a, m, env)? / Q::from_integer(2),
        MetricFormula::TruncSub(a, b) => {
            let x = eval_in(a, m, env)?;
            trunc_sub(x, eval_in(b, m, env)?)
        }
        MetricFormula::Sup(y, a) | MetricFormula::Inf(y, a) => {
            let is_sup = matches!(phi, MetricFormula::Sup(..));
            let n = m.universe_size()?;
            let mut best = if is_sup { Q::zero() } else { Q::one() };
            for i in 0..n {
                env.push((y.clone(), m.element(i)));
                let v = eval_in(a, m, env);
                env.pop();
                let v = v?;
                best = if is_sup { best.max(v) } else { best.min(v) };
            }
            best
        }
    })
}

/// A finite point set with a rational metric and total predicate and
/// function tables, stored flat in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMetricStructure {
    points: Vec<String>,
    dist: Vec<Q>,
    preds: BTreeMap<String, (usize, Vec<Q>)>,
    funcs: BTreeMap<String, (usize, Vec<usize>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NotSymmetric { a: usize, b: usize },
    NotIndiscernible { a: usize, b: usize },
    Triangle { a: usize, b: usize, c: usize },
    DistRange { a: usize, b: usize },
    ValueRange { symbol: String, tuple: Vec<usize> },
    Lipschitz { symbol: String, position: usize, lower: Vec<usize>, upper: Vec<usize> },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NotSymmetric { a, b } => write!(f, "d({a},{b}) ≠ d({b},{a})"),
            Violation::NotIndiscernible { a, b } => write!(f, "d({a},{b}) = 0 for distinct points"),
            Violation::Triangle { a, b, c } => write!(f, "triangle inequality fails for ({a},{b},{c})"),
            Violation::DistRange { a, b } => write!(f, "d({a},{b}) outside [0,1] or d(a,a) ≠ 0"),
            Violation::ValueRange { symbol, tuple } => write!(f, "{symbol}{tuple:?} outside [0,1]"),
            Violation::Lipschitz {
                symbol,
                position,
                lower,
                upper,
            } => write!(f, "{symbol} is not 1-Lipschitz in argument {position} at {lower:?} vs {upper:?}"),
        }
    }
}

fn tuples(n: usize, arity: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n.pow(arity as u32);
    (0..total).map(move |mut i| {
        let mut t = vec![0; arity];
        for slot in t.iter_mut().rev() {
            *slot = i % n;
            i /= n;
        }
        t
    })
}

fn flat_index(n: usize, args: &[usize]) -> usize {
    args.iter().fold(0, |acc, &a| acc * n + a)
}

impl FiniteMetricStructure {
    /// Builds a structure; shapes are checked here, metric and Lipschitz
    /// conditions by [`validate`](Self::validate).
    pub fn new(
        points: Vec<String>,
        dist: Vec<Vec<Q>>,
        preds: BTreeMap<String, (usize, Vec<Q>)>,
        funcs: BTreeMap<String, (usize, Vec<usize>)>,
    ) -> Result<Self, EvalError> {
        let n = points.len();
        let bad = |m: String| Err(EvalError::Document(m));
        if n == 0 {
            return bad("structure has no points".into());
        }
        let mut seen = HashSet::new();
        if let Some(p) = points.iter().find(|p| !seen.insert(p.as_str())) {
            return bad(format!("duplicate point `{p}`"));
        }
        if dist.len() != n || dist.iter().any(|r| r.len() != n) {
            return bad("distance matrix has the wrong shape".into());
        }
        for (name, (arity, vals)) in &preds {
            if vals.len() != n.pow(*arity as u32) {
                return bad(format!("table for `{name}` has the wrong size"));
            }
        }
        for (name, (arity, vals)) in &funcs {
            if *arity == 0 || vals.len() != n.pow(*arity as u32) || vals.iter().any(|&v| v >= n) {
                return bad(format!("table for `{name}` is malformed"));
            }
        }
        Ok(FiniteMetricStructure {
            points,
            dist: dist.into_iter().flatten().collect(),
            preds,
            funcs,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn point_index(&self, name: &str) -> Option<usize> {
        self.points.iter().position(|p| p == name)
    }

    pub fn dist(&self, a: usize, b: usize) -> Q {
        self.dist[a * self.len() + b]
    }

    pub fn pred_value(&self, name: &str, args: &[usize]) -> Option<Q> {
        self.preds.get(name).map(|(_, v)| v[flat_index(self.len(), args)])
    }

    pub fn func_value(&self, name: &str, args: &[usize]) -> Option<usize> {
        self.funcs.get(name).map(|(_, v)| v[flat_index(self.len(), args)])
    }

    pub fn predicates(&self) -> impl Iterator<Item = (&str, usize)> {
        self.preds.iter().map(|(k, (a, _))| (k.as_str(), *a))
    }

    pub fn functions(&self) -> impl Iterator<Item = (&str, usize)> {
        self.funcs.iter().map(|(k, (a, _))| (k.as_str(), *a))
    }

    /// Whether every symbol of `sig` is interpreted with the declared arity.
    pub fn interprets(&self, sig: &Signature) -> bool {
        sig.predicates.iter().all(|s| self.preds.get(&s.name).map(|p| p.0) == Some(s.arity))
            && sig.functions.iter().all(|s| self.funcs.get(&s.name).map(|f| f.0) == Some(s.arity))
    }

    /// The first violated metric, range or Lipschitz condition, if any.
    pub fn validate(&self) -> Option<Violation> {
        let n = self.len();
        for a in 0..n {
            for b in 0..n {
                let d = self.dist(a, b);
                if !in_unit_interval(&d) || (a == b && !d.is_zero()) {
                    return Some(Violation::DistRange { a, b });
                }
                if d != self.dist(b, a) {
                    return Some(Violation::NotSymmetric { a, b });
                }
                if a != b && d.is_zero() {
                    return Some(Violation::NotIndiscernible { a, b });
                }
                for c in 0..n {
                    if self.dist(a, c) > d + self.dist(b, c) {
                        return Some(Violation::Triangle { a, b, c });
                    }
                }
            }
        }
        for (name, (arity, vals)) in &self.preds {
            for t in tuples(n, *arity) {
                if !in_unit_interval(&vals[flat_index(n, &t)]) {
                    return Some(Violation::ValueRange {
                        symbol: name.clone(),
                        tuple: t,
                    });
                }
            }
            if let Some(v) = self.lipschitz(name, *arity, |t| vals[flat_index(n, t)], |x: Q, y: Q| if x > y { x - y } else { y - x }) {
                return Some(v);
            }
        }
        for (name, (arity, vals)) in &self.funcs {
            let v = self.lipschitz(name, *arity, |t| vals[flat_index(n, t)], |x, y| self.dist(x, y));
            if v.is_some() {
                return v;
            }
        }
        None
    }

    fn lipschitz<T: Copy>(
        &self,
        name: &str,
        arity: usize,
        value: impl Fn(&[usize]) -> T,
        gap: impl Fn(T, T) -> Q,
    ) -> Option<Violation> {
        let n = self.len();
        for t in tuples(n, arity) {
            for pos in 0..arity {
                for q in 0..n {
                    if q <= t[pos] {
                        continue;
                    }
                    let mut u = t.clone();
                    u[pos] = q;
                    if gap(value(&t), value(&u)) > self.dist(t[pos], q) {
                        return Some(Violation::Lipschitz {
                            symbol: name.to_string(),
                            position: pos,
                            lower: t,
                            upper: u,
                        });
                    }
                }
            }
        }
        None
    }

    /// Parses the JSON document form against `sig`. Tables nest one object
    /// level per argument, keyed by point names; 0-ary predicates are bare values.
    pub fn from_value(v: &Value, sig: &Signature) -> Result<Self, EvalError> {
        let err = |m: String| EvalError::Document(m);
        let obj = v.as_object().ok_or_else(|| err("structure must be an object".into()))?;
        let points: Vec<String> = obj
            .get("points")
            .and_then(Value::as_array)
            .ok_or_else(|| err("missing `points`".into()))?
            .iter()
            .map(|p| p.as_str().map(str::to_string).ok_or_else(|| err("point names must be strings".into())))
            .collect::<Result<_, _>>()?;
        let dist: Vec<Vec<Q>> = obj
            .get("dist")
            .and_then(Value::as_array)
            .ok_or_else(|| err("missing `dist`".into()))?
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| err("`dist` rows must be arrays".into()))?
                    .iter()
                    .map(|x| q_of(x).map_err(err))
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        let empty = Map::new();
        let ptab = obj.get("preds").and_then(Value::as_object).unwrap_or(&empty);
        let ftab = obj.get("funcs").and_then(Value::as_object).unwrap_or(&empty);
        let idx = |name: &str| {
            points
                .iter()
                .position(|p| p == name)
                .ok_or_else(|| err(format!("unknown point `{name}`")))
        };
        let mut preds = BTreeMap::new();
        for s in &sig.predicates {
            let table = ptab.get(&s.name).ok_or_else(|| err(format!("missing table for `{}`", s.name)))?;
            let vals = read_table(table, &points, s.arity, &|leaf| q_of(leaf).map_err(err))?;
            preds.insert(s.name.clone(), (s.arity, vals));
        }
        let mut funcs = BTreeMap::new();
        for s in &sig.functions {
            let table = ftab.get(&s.name).ok_or_else(|| err(format!("missing table for `{}`", s.name)))?;
            let vals = read_table(table, &points, s.arity, &|leaf| {
                idx(leaf.as_str().ok_or_else(|| err("function values must be point names".into()))?)
            })?;
            funcs.insert(s.name.clone(), (s.arity, vals));
        }
        Self::new(points, dist, preds, funcs)
    }

    pub fn to_value(&self) -> Value {
        let n = self.len();
        let dist: Vec<Value> = (0..n)
            .map(|a| Value::Array((0..n).map(|b| Value::String(self.dist(a, b).to_string())).collect()))
            .collect();
        let mut preds = Map::new();
        for (name, (arity, vals)) in &self.preds {
            preds.insert(name.clone(), write_table(&self.points, *arity, &|t| Value::String(vals[flat_index(n, t)].to_string())));
        }
        let mut funcs = Map::new();
        for (name, (arity, vals)) in &self.funcs {
            funcs.insert(
                name.clone(),
                write_table(&self.points, *arity, &|t| Value::String(self.points[vals[flat_index(n, t)]].clone())),
            );
        }
        serde_json::json!({
            "points": self.points,
            "dist": dist,
            "preds": preds,
            "funcs": funcs,
        })
    }

    /// Transports the structure along `sigma`, point `i` becoming point
    /// `sigma[i]` named `names[sigma[i]]`.
    pub fn transport(&self, sigma: &[usize], names: Vec<String>) -> Result<Self, EvalError> {
        let n = self.len();
        let mut inv = vec![usize::MAX; n];
        if sigma.len() != n || names.len() != n {
            return Err(EvalError::Document("bijection has the wrong size".into()));
        }
        for (i, &s) in sigma.iter().enumerate() {
            if s >= n || inv[s] != usize::MAX {
                return Err(EvalError::Document("map is not a bijection".into()));
            }
            inv[s] = i;
        }
        let dist = (0..n).map(|a| (0..n).map(|b| self.dist(inv[a], inv[b])).collect()).collect();
        let pull = |t: &[usize]| t.iter().map(|&x| inv[x]).collect::<Vec<_>>();
        let preds = self
            .preds
            .iter()
            .map(|(k, (a, v))| {
                let vals = tuples(n, *a).map(|t| v[flat_index(n, &pull(&t))]).collect();
                (k.clone(), (*a, vals))
            })
            .collect();
        let funcs = self
            .funcs
            .iter()
            .map(|(k, (a, v))| {
                let vals = tuples(n, *a).map(|t| sigma[v[flat_index(n, &pull(&t))]]).collect();
                (k.clone(), (*a, vals))
            })
            .collect();
        Self::new(names, dist, preds, funcs)
    }
}

fn q_of(v: &Value) -> Result<Q, String> {
    match v {
        Value::String(s) => parse_q(s).map_err(|e| e.to_string()),
        Value::Number(n) => n
            .as_i64()
            .map(|i| Q::from_integer(i as i128))
            .ok_or_else(|| format!("non-integer number {n}; use a \"p/q\" string")),
        other => Err(format!("expected a rational, got {other}")),
    }
}

fn read_table<T>(
    v: &Value,
    points: &[String],
    arity: usize,
    leaf: &dyn Fn(&Value) -> Result<T, EvalError>,
) -> Result<Vec<T>, EvalError> {
    if arity == 0 {
        return Ok(vec![leaf(v)?]);
    }
    let obj = v
        .as_object()
        .ok_or_else(|| EvalError::Document("table levels must be objects keyed by point".into()))?;
    let mut out = Vec::new();
    for p in points {
        let sub = obj
            .get(p)
            .ok_or_else(|| EvalError::Document(format!("table misses point `{p}`")))?;
        out.extend(read_table(sub, points, arity - 1, leaf)?);
    }
    if obj.len() != points.len() {
        return Err(EvalError::Document("table has keys that are not points".into()));
    }
    Ok(out)
}

fn write_table(points: &[String], arity: usize, leaf: &dyn Fn(&[usize]) -> Value) -> Value {
    fn go(points: &[String], left: usize, prefix: &mut Vec<usize>, leaf: &dyn Fn(&[usize]) -> Value) -> Value {
        if left == 0 {
            return leaf(prefix);
        }
        let mut m = Map::new();
        for (i, p) in points.iter().enumerate() {
            prefix.push(i);
            m.insert(p.clone(), go(points, left - 1, prefix, leaf));
            prefix.pop();
        }
        Value::Object(m)
    }
    go(points, arity, &mut Vec::new(), leaf)
}

impl Model for FiniteMetricStructure {
    type Elem = usize;

    fn universe_size(&self) -> Result<u64, EvalError> {
        Ok(self.len() as u64)
    }

    fn element(&self, index: u64) -> usize {
        index as usize
    }

    fn pred(&self, name: &str, args: &[usize]) -> Result<Q, EvalError> {
        self.pred_value(name, args)
            .ok_or_else(|| EvalError::Uninterpreted(name.to_string()))
    }

    fn func(&self, name: &str, args: &[usize]) -> Result<usize, EvalError> {
        self.func_value(name, args)
            .ok_or_else(|| EvalError::Uninterpreted(name.to_string()))
    }
}

/// Evaluates `phi` under an assignment of point indices.
pub fn eval_formula(
    phi: &MetricFormula,
    m: &FiniteMetricStructure,
    assignment: &BTreeMap<String, usize>,
) -> Result<Q, EvalError> {
    let mut env: Env<usize> = assignment.iter().map(|(k, v)| (k.clone(), *v)).collect();
    eval_in(phi, m, &mut env)
}

/// Max of `phi` over all assignments of its free variables.
pub fn theory_norm(phi: &MetricFormula, m: &FiniteMetricStructure) -> Result<Q, EvalError> {
    let vars: Vec<String> = phi.free_vars().into_iter().collect();
    let mut best = Q::zero();
    for t in tuples(m.len(), vars.len()) {
        let mut env: Env<usize> = vars.iter().cloned().zip(t).collect();
        best = best.max(eval_in(phi, m, &mut env)?);
    }
    Ok(best)
}

/// A bijection `σ` with `N = σ(M)` preserving distances and all tables.
pub fn is_isomorphic(m: &FiniteMetricStructure, n: &FiniteMetricStructure) -> Option<Vec<usize>> {
    if m.len() != n.len() || !m.predicates().eq(n.predicates()) || !m.functions().eq(n.functions()) {
        return None;
    }
    let size = m.len();
    let mut sigma = Vec::with_capacity(size);
    let mut used = vec![false; size];
    iso_search(m, n, &mut sigma, &mut used).then_some(sigma)
}

fn iso_search(m: &FiniteMetricStructure, n: &FiniteMetricStructure, sigma: &mut Vec<usize>, used: &mut [bool]) -> bool {
    let i = sigma.len();
    if i == m.len() {
        return full_match(m, n, sigma);
    }
    for j in 0..n.len() {
        if used[j] {
            continue;
        }
        // partial checks: distances to earlier points and unary tables
        let ok = (0..i).all(|a| m.dist(a, i) == n.dist(sigma[a], j))
            && m.preds.iter().all(|(k, (ar, _))| {
                *ar != 1 || m.pred_value(k, &[i]) == n.pred_value(k, &[j])
            });
        if !ok {
            continue;
        }
        sigma.push(j);
        used[j] = true;
        if iso_search(m, n, sigma, used) {
            return true;
        }
        used[j] = false;
        sigma.pop();
    }
    false
}

fn full_match(m: &FiniteMetricStructure, n: &FiniteMetricStructure, sigma: &[usize]) -> bool {
    let size = m.len();
    let push = |t: &[usize]| t.iter().map(|&x| sigma[x]).collect::<Vec<_>>();
    m.preds.iter().all(|(k, (ar, _))| {
        tuples(size, *ar).all(|t| m.pred_value(k, &t) == n.pred_value(k, &push(&t)))
    }) && m.funcs.iter().all(|(k, (ar, _))| {
        tuples(size, *ar).all(|t| m.func_value(k, &t).map(|v| sigma[v]) == n.func_value(k, &push(&t)))
    })
}

/// All tuples over `0..n` of the given length, in lexicographic order.
pub fn all_tuples(n: usize, len: usize) -> impl Iterator<Item = Vec<usize>> {
    tuples(n, len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse_formula, MetricFormula as F};
    use crate::rational::q;

    fn two_points(d: Q, p: [Q; 2]) -> FiniteMetricStructure {
        let z = Q::zero();
        FiniteMetricStructure::new(
            vec!["p".into(), "q".into()],
            vec![vec![z, d], vec![d, z]],
            [("P".to_string(), (1, p.to_vec()))].into_iter().collect(),
            BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn validate_examples() {
        let one = FiniteMetricStructure::new(
            vec!["p".into()],
            vec![vec![Q::zero()]],
            [("P".to_string(), (1, vec![q(1, 3)]))].into_iter().collect(),
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(one.validate(), None);
        let bad = two_points(q(1, 4), [q(0, 1), q(1, 1)]);
        assert!(matches!(bad.validate(), Some(Violation::Lipschitz { .. })));
        let discrete = two_points(q(1, 1), [q(0, 1), q(1, 1)]);
        assert_eq!(discrete.validate(), None);
    }

    #[test]
    fn validate_metric_axioms() {
        let z = Q::zero();
        let tri = FiniteMetricStructure::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                vec![z, q(1, 4), q(1, 1)],
                vec![q(1, 4), z, q(1, 4)],
                vec![q(1, 1), q(1, 4), z],
            ],
            BTreeMap::new(),
            BTreeMap::new(),
        )
        .unwrap();
        assert!(matches!(tri.validate(), Some(Violation::Triangle { .. })));
        let zero = two_points(z, [z, z]);
        assert!(matches!(zero.validate(), Some(Violation::NotIndiscernible { .. })));
    }

    #[test]
    fn function_lipschitz() {
        let z = Q::zero();
        let m = FiniteMetricStructure::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                vec![z, q(1, 2), q(1, 1)],
                vec![q(1, 2), z, q(1, 2)],
                vec![q(1, 1), q(1, 2), z],
            ],
            BTreeMap::new(),
            [("f".to_string(), (1, vec![0, 2, 2]))].into_iter().collect(),
        )
        .unwrap();
        // f(a)=a, f(b)=c: d(a,c)=1 > d(a,b)=1/2
        assert!(matches!(m.validate(), Some(Violation::Lipschitz { .. })));
    }

    #[test]
    fn eval_examples() {
        let m = two_points(q(1, 1), [q(1, 1), q(0, 1)]);
        let none = BTreeMap::new();
        assert_eq!(eval_formula(&F::Const(q(1, 3)), &m, &none).unwrap(), q(1, 3));
        assert_eq!(eval_formula(&F::sup("y", F::atomic("P", &["y"])), &m, &none).unwrap(), q(1, 1));
        let mut pq = m.clone();
        pq.preds.insert("Q".into(), (1, vec![q(3, 4), q(3, 4)]));
        pq.preds.insert("P".into(), (1, vec![q(1, 4), q(1, 4)]));
        let a: BTreeMap<_, _> = [("x".to_string(), 0)].into_iter().collect();
        let f = F::sub(F::atomic("P", &["x"]), F::atomic("Q", &["x"]));
        assert_eq!(eval_formula(&f, &pq, &a).unwrap(), q(0, 1));
        assert!(matches!(eval_formula(&f, &pq, &none), Err(EvalError::MissingAssignment(_))));
    }

    #[test]
    fn theory_norm_examples() {
        let m = two_points(q(1, 1), [q(1, 4), q(3, 4)]);
        let sig = Signature::new(&[("P", 1)], &[]).unwrap();
        assert_eq!(theory_norm(&parse_formula("P(x)", &sig).unwrap(), &m).unwrap(), q(3, 4));
        let f = parse_formula("sub(P(x), P(y))", &sig).unwrap();
        assert_eq!(theory_norm(&f, &m).unwrap(), q(1, 2));
        let s = parse_formula("sup y . P(y)", &sig).unwrap();
        assert_eq!(theory_norm(&s, &m).unwrap(), eval_formula(&s, &m, &BTreeMap::new()).unwrap());
    }

    #[test]
    fn isomorphism_examples() {
        let m = two_points(q(1, 2), [q(1, 4), q(1, 2)]);
        let swapped = m.transport(&[1, 0], vec!["u".into(), "v".into()]).unwrap();
        let sigma = is_isomorphic(&m, &swapped).unwrap();
        assert_eq!(sigma, vec![1, 0]);
        let other = two_points(q(1, 2), [q(1, 4), q(1, 4)]);
        assert_eq!(is_isomorphic(&m, &other), None);
        let one = FiniteMetricStructure::new(
            vec!["p".into()],
            vec![vec![Q::zero()]],
            [("P".to_string(), (1, vec![q(1, 4)]))].into_iter().collect(),
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(is_isomorphic(&m, &one), None);
    }

    #[test]
    fn json_round_trip() {
        let sig = Signature::new(&[("P", 1), ("R", 2), ("c", 0)], &[("f", 1)]).unwrap();
        let text = r#"{
            "points": ["p", "q"],
            "dist": [["0", "1/2"], ["1/2", "0"]],
            "preds": {
                "P": {"p": "1/4", "q": "1/2"},
                "R": {"p": {"p": "0", "q": "1/2"}, "q": {"p": "1/2", "q": "0"}},
                "c": "1/3"
            },
            "funcs": {"f": {"p": "q", "q": "p"}}
        }"#;
        let v: Value = serde_json::from_str(text).unwrap();
        let m = FiniteMetricStructure::from_value(&v, &sig).unwrap();
        assert_eq!(m.validate(), None);
        assert_eq!(m.pred_value("R", &[0, 1]), Some(q(1, 2)));
        assert_eq!(m.pred_value("c", &[]), Some(q(1, 3)));
        assert_eq!(m.func_value("f", &[0]), Some(1));
        assert_eq!(FiniteMetricStructure::from_value(&m.to_value(), &sig).unwrap(), m);
        let f = parse_formula("R(x, f(x))", &sig).unwrap();
        let a: BTreeMap<_, _> = [("x".to_string(), 0)].into_iter().collect();
        assert_eq!(eval_formula(&f, &m, &a).unwrap(), q(1, 2));
    }

    #[test]
    fn repeated_variable_doubles_the_modulus() {
        let z = Q::zero();
        let d = q(1, 2);
        let m = FiniteMetricStructure::new(
            vec!["a".into(), "b".into()],
            vec![vec![z, d], vec![d, z]],
            [
                ("P".to_string(), (1, vec![q(1, 1), q(1, 2)])),
                ("Q".to_string(), (1, vec![q(0, 1), q(1, 2)])),
            ]
            .into_iter()
            .collect(),
            BTreeMap::new(),
        )
        .unwrap();
        assert_eq!(m.validate(), None);
        let sig = Signature::new(&[("P", 1), ("Q", 1)], &[]).unwrap();
        let phi = parse_formula("sub(P(x), Q(x))", &sig).unwrap();
        let at = |p: usize| eval_formula(&phi, &m, &[("x".to_string(), p)].into_iter().collect()).unwrap();
        // moves by 1 over distance 1/2
        assert_eq!(at(0) - at(1), q(1, 1));
    }
}
