//! Seeded random families and the property suites run by `fvdi selftest`
//! and the acceptance tests.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::direct_integral::{
    eval_on_integral_with, level_set, relabel_field, Assignment, IntegralElement, MeasurableField, Strictness,
};
use crate::formula::{rewrite_inf, MetricFormula, Signature, Term};
use crate::mba::definability::{
    chain_var_names, dist_to_set, eval_named, in_chain_set, multichain_var_names,
};
use crate::mba::{
    check_monotone_with, dist_to_chain_set, negative_occurrences, phi_chain, psi_multichain, simple_definables,
    AtomSet, EvalMode, EvalOptions, FiniteMeasureAlgebra, MbaError, MonotoneMethod, MonotoneOptions,
};
use crate::rational::Q;
use crate::structures::{all_tuples, eval_formula, FiniteMetricStructure};
use crate::transform::{
    complement_identity_check, integral_equivalence_check, determination_check_with, Budgets, CheckError,
    CheckOptions, DeterminationReport, TransformError, TransformResult, Transformer,
};
use crate::type_one::{equiv, tensor, Component, TypeIDescription};

#[derive(Debug, Clone, Copy)]
pub struct HarnessConfig {
    pub seed: u64,
    /// Determination instances to collect, after budget filtering.
    pub instances: usize,
    pub equivalence_pairs: usize,
    pub typei_quadruples: usize,
    /// Sampled pairs per algebra when a monotonicity check cannot be exhaustive.
    pub monotone_trials: u64,
    pub budgets: Budgets,
    /// Cap on sup-chain inner evaluations for one evaluation of `G`.
    pub eval_cap: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            seed: 2024,
            instances: 200,
            equivalence_pairs: 50,
            typei_quadruples: 100,
            monotone_trials: 300,
            budgets: Budgets::default(),
            eval_cap: 2_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub checks: u64,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} [{}] {}: {} checks, {:.1}s; {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.checks,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

// ---------------------------------------------------------------- generators

const GRID: [(i128, i128); 5] = [(0, 1), (1, 4), (1, 2), (3, 4), (1, 1)];
const DISTS: [(i128, i128); 3] = [(1, 2), (3, 4), (1, 1)];

/// Two unary predicates and one binary predicate.
pub fn signature() -> Signature {
    Signature::new(&[("P", 1), ("Q", 1), ("R", 2)], &[]).expect("fixed signature is valid")
}

fn grid_value(rng: &mut ChaCha8Rng) -> Q {
    let (n, d) = *GRID.choose(rng).unwrap();
    Q::new(n, d)
}

/// A random structure with distances in `{1/2, 3/4, 1}` and 1-Lipschitz
/// tables over the quarter grid, filled one entry at a time.
pub fn random_structure(rng: &mut ChaCha8Rng, sig: &Signature, points: usize) -> FiniteMetricStructure {
    let names: Vec<String> = (0..points).map(|i| format!("p{i}")).collect();
    let mut dist = vec![vec![Q::zero(); points]; points];
    for i in 0..points {
        for j in i + 1..points {
            let (n, d) = *DISTS.choose(rng).unwrap();
            dist[i][j] = Q::new(n, d);
            dist[j][i] = dist[i][j];
        }
    }
    let mut preds = BTreeMap::new();
    for s in &sig.predicates {
        let size = points.pow(s.arity as u32);
        let mut vals: Vec<Option<Q>> = vec![None; size];
        for (idx, t) in all_tuples(points, s.arity).enumerate() {
            let ok = |v: &Q| {
                (0..s.arity).all(|pos| {
                    (0..points).filter(|&p| p != t[pos]).all(|p| {
                        let mut u = t.clone();
                        u[pos] = p;
                        let j = u.iter().fold(0, |acc, &a| acc * points + a);
                        vals[j].map_or(true, |w| {
                            let gap = if *v > w { *v - w } else { w - *v };
                            gap <= dist[t[pos]][p]
                        })
                    })
                })
            };
            let cands: Vec<Q> = GRID.iter().map(|&(n, d)| Q::new(n, d)).filter(|v| ok(v)).collect();
            // pairwise-intersecting intervals on a line always share a grid point
            vals[idx] = Some(*cands.choose(rng).expect("Lipschitz constraints are satisfiable"));
        }
        preds.insert(s.name.clone(), (s.arity, vals.into_iter().map(Option::unwrap).collect()));
    }
    let m = FiniteMetricStructure::new(names, dist, preds, BTreeMap::new()).expect("shapes are consistent");
    debug_assert!(m.validate().is_none());
    m
}

pub fn random_space(rng: &mut ChaCha8Rng, atoms: usize) -> FiniteMeasureAlgebra {
    let raw: Vec<i128> = (0..atoms).map(|_| rng.gen_range(1..=4)).collect();
    let total: i128 = raw.iter().sum();
    FiniteMeasureAlgebra::new(
        (1..=atoms).map(|i| format!("w{i}")).collect(),
        raw.iter().map(|&r| Q::new(r, total)).collect(),
    )
    .expect("weights are positive and sum to 1")
}

pub fn random_field(rng: &mut ChaCha8Rng, sig: &Signature, max_atoms: usize, max_points: usize) -> MeasurableField {
    let atoms = rng.gen_range(1..=max_atoms);
    let space = random_space(rng, atoms);
    let fibers = (0..atoms)
        .map(|_| {
            let n = rng.gen_range(1..=max_points);
            random_structure(rng, sig, n)
        })
        .collect();
    MeasurableField::new(space, fibers, sig.clone()).expect("generated fibers are valid")
}

fn random_atomic(rng: &mut ChaCha8Rng, scope: &[String]) -> MetricFormula {
    if scope.is_empty() || rng.gen_bool(0.08) {
        return MetricFormula::Const(grid_value(rng));
    }
    // favour the innermost variable so quantifiers are rarely vacuous
    let pick = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.6) {
            scope.last().unwrap().clone()
        } else {
            scope.choose(rng).unwrap().clone()
        }
    };
    match rng.gen_range(0..5) {
        0 | 1 => MetricFormula::atomic("P", &[&pick(rng)]),
        2 | 3 => MetricFormula::atomic("Q", &[&pick(rng)]),
        _ => {
            let a = pick(rng);
            let b = pick(rng);
            MetricFormula::atomic("R", &[&a, &b])
        }
    }
}

fn random_formula_in(rng: &mut ChaCha8Rng, depth: usize, scope: &mut Vec<String>) -> MetricFormula {
    if depth == 0 {
        return random_atomic(rng, scope);
    }
    let quantify = scope.is_empty() || rng.gen_bool(0.5);
    if quantify {
        let y = format!("y{}", scope.len());
        scope.push(y.clone());
        let body = random_formula_in(rng, depth - 1, scope);
        scope.pop();
        if rng.gen_bool(0.6) {
            MetricFormula::sup(&y, body)
        } else {
            MetricFormula::inf(&y, body)
        }
    } else if rng.gen_bool(0.3) {
        MetricFormula::half(random_formula_in(rng, depth - 1, scope))
    } else {
        let a = random_formula_in(rng, depth - 1, scope);
        let d = rng.gen_range(0..depth);
        let b = random_formula_in(rng, d, scope);
        if rng.gen_bool(0.5) {
            MetricFormula::sub(a, b)
        } else {
            MetricFormula::sub(b, a)
        }
    }
}

/// A canonical formula of exactly the given depth whose free variables are
/// among `free`.
pub fn random_formula(rng: &mut ChaCha8Rng, depth: usize, free: &[&str]) -> MetricFormula {
    let mut scope: Vec<String> = free.iter().map(|s| s.to_string()).collect();
    loop {
        let f = random_formula_in(rng, depth, &mut scope).canonicalize();
        if f.depth() == depth {
            return f;
        }
    }
}

pub fn random_assignment(rng: &mut ChaCha8Rng, phi: &MetricFormula, field: &MeasurableField) -> Assignment {
    phi.free_vars()
        .into_iter()
        .map(|v| {
            let e = field.fibers().iter().map(|m| rng.gen_range(0..m.len())).collect();
            (v, IntegralElement(e))
        })
        .collect()
}

// ------------------------------------------------------ determination family

pub struct Instance {
    pub formula: MetricFormula,
    pub k: u32,
    pub field: MeasurableField,
    pub assignment: Assignment,
    pub transform: Arc<TransformResult>,
    /// Report with exhaustive sup-chain evaluation.
    pub report: DeterminationReport,
}

pub struct Family {
    pub instances: Vec<Instance>,
    /// Candidates dropped because the transform exceeded its budgets.
    pub over_transform_budget: usize,
    /// Candidates dropped because exhaustive evaluation of `G` exceeded the cap.
    pub over_eval_budget: usize,
    /// Determination reports for the second group, evaluated at maximal elements.
    pub heavy_reports: Vec<DeterminationReport>,
    pub elapsed: Duration,
}

impl Family {
    pub fn transforms(&self) -> Vec<Arc<TransformResult>> {
        let mut seen = std::collections::HashSet::new();
        self.instances
            .iter()
            .filter(|i| seen.insert(Arc::as_ptr(&i.transform)))
            .map(|i| Arc::clone(&i.transform))
            .collect()
    }
}

fn check_options(cfg: &HarnessConfig, mode: EvalMode) -> CheckOptions {
    CheckOptions {
        budgets: cfg.budgets,
        eval: EvalOptions {
            mode,
            max_inner_evals: cfg.eval_cap,
        },
        ..Default::default()
    }
}

/// Formulas of depth `0..=3` in rotation, `k ∈ {2, 3}`, fields with at most
/// three atoms and fibers of at most three points.
pub fn determination_family(cfg: &HarnessConfig) -> Family {
    let start = Instant::now();
    let sig = signature();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tr = Transformer::new(cfg.budgets);
    let mut memo: HashMap<(MetricFormula, u32), Arc<TransformResult>> = HashMap::new();
    let mut fam = Family {
        instances: Vec::new(),
        over_transform_budget: 0,
        over_eval_budget: 0,
        heavy_reports: Vec::new(),
        elapsed: Duration::ZERO,
    };
    let enumerate = check_options(cfg, EvalMode::Enumerate);
    let maximal = check_options(cfg, EvalMode::MaximalElement);
    let mut attempt = 0usize;
    while fam.instances.len() < cfg.instances && attempt < 50 * cfg.instances {
        let depth = attempt % 4;
        attempt += 1;
        let free: &[&str] = if rng.gen_bool(0.2) { &["x", "u"] } else { &["x"] };
        let formula = random_formula(&mut rng, depth, free);
        let k = rng.gen_range(2..=3);
        let field = random_field(&mut rng, &sig, 3, 3);
        let assignment = random_assignment(&mut rng, &formula, &field);
        let key = (rewrite_inf(&formula), k);
        let transform = match memo.get(&key) {
            Some(t) => Arc::clone(t),
            None => match tr.transform(&key.0, k) {
                Ok(t) => {
                    memo.insert(key, Arc::clone(&t));
                    t
                }
                Err(TransformError::Budget { .. }) => {
                    fam.over_transform_budget += 1;
                    continue;
                }
                Err(e) => panic!("transform of {formula} failed: {e}"),
            },
        };
        match determination_check_with(&formula, &transform, &field, &assignment, &enumerate) {
            Ok(report) => fam.instances.push(Instance {
                formula,
                k,
                field,
                assignment,
                transform,
                report,
            }),
            Err(CheckError::Mba(MbaError::Budget(_))) => {
                fam.over_eval_budget += 1;
                let report = determination_check_with(&formula, &transform, &field, &assignment, &maximal)
                    .unwrap_or_else(|e| panic!("maximal-element check of {formula} failed: {e}"));
                fam.heavy_reports.push(report);
            }
            Err(e) => panic!("determination check of {formula} failed: {e}"),
        }
    }
    fam.elapsed = start.elapsed();
    fam
}

fn outcome(id: u8, name: &'static str, start: Instant, checks: u64, failure: Option<String>, ok: String) -> CriterionOutcome {
    CriterionOutcome {
        id,
        name,
        passed: failure.is_none(),
        checks,
        detail: failure.unwrap_or(ok),
        elapsed: start.elapsed(),
    }
}

fn depth_histogram(fam: &Family) -> String {
    let mut h = [0usize; 4];
    for i in &fam.instances {
        h[i.formula.depth().min(3)] += 1;
    }
    format!("depths 0..3: {:?}", h)
}

/// Upper and lower determination bounds and the `2/k` gap on every instance.
pub fn criterion_determination(cfg: &HarnessConfig, fam: &Family) -> CriterionOutcome {
    let start = Instant::now();
    let mut checks = 0u64;
    let mut failure = None;
    if fam.instances.len() < cfg.instances {
        failure = Some(format!("only {} instances within budget", fam.instances.len()));
    }
    for i in &fam.instances {
        checks += i.report.instances as u64;
        if !i.report.passed() && failure.is_none() {
            failure = Some(format!("{} at k={}: {:?}", i.formula, i.k, i.report.failures));
        }
    }
    let heavy_failures = fam.heavy_reports.iter().filter(|r| !r.passed()).count();
    let ok = format!(
        "{} instances ({}), {} dropped over transform budget, {} over evaluation cap (those {} pass with maximal-element evaluation: {})",
        fam.instances.len(),
        depth_histogram(fam),
        fam.over_transform_budget,
        fam.over_eval_budget,
        fam.heavy_reports.len(),
        heavy_failures == 0,
    );
    let mut out = outcome(1, "determination bounds", start, checks, failure, ok);
    out.elapsed += fam.elapsed;
    out
}

/// `(1/k)Σ μ(Z_{i/k}) ≤ ∫φ ≤ (1/k)Σ μ(Z_{i/k}) + 1/k` on atomic instances,
/// with the sum computed from level sets directly.
pub fn criterion_layer_cake(fam: &Family) -> CriterionOutcome {
    let start = Instant::now();
    let mut checks = 0u64;
    let mut failure = None;
    for i in fam.instances.iter().filter(|i| matches!(i.formula, MetricFormula::Atomic(..))) {
        let alg = i.field.space();
        let kq = Q::from_integer(i.k as i128);
        let mut sum = Q::zero();
        for l in 1..i.k {
            let t = Q::new(l as i128, i.k as i128);
            let z = level_set(&i.formula, &i.field, &i.assignment, t, Strictness::Strict).expect("atomic evaluation");
            sum += alg.measure(z);
        }
        let lower = sum / kq;
        let v = i.report.v;
        checks += 1;
        if !(lower <= v && v <= lower + Q::one() / kq) || i.report.g != lower {
            failure.get_or_insert(format!("{} at k={}: sum {lower}, integral {v}, G {}", i.formula, i.k, i.report.g));
        }
    }
    if checks == 0 {
        failure = Some("no atomic instances".into());
    }
    outcome(2, "layer-cake bound", start, checks, failure, format!("{checks} atomic instances"))
}

/// Polarity certificate plus exhaustive or sampled pair checks on 1-, 2- and
/// 3-atom algebras for every distinct `G`.
pub fn criterion_monotone(cfg: &HarnessConfig, fam: &Family) -> CriterionOutcome {
    let start = Instant::now();
    let algebras = [
        FiniteMeasureAlgebra::uniform(1).unwrap(),
        FiniteMeasureAlgebra::uniform(2).unwrap(),
        FiniteMeasureAlgebra::uniform(3).unwrap(),
        FiniteMeasureAlgebra::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![Q::new(1, 2), Q::new(1, 3), Q::new(1, 6)],
        )
        .unwrap(),
    ];
    let mut checks = 0u64;
    let mut failure = None;
    let (mut exhaustive, mut sampled, mut uncertified) = (0u64, 0u64, 0u64);
    for (n, t) in fam.transforms().iter().enumerate() {
        if !negative_occurrences(&t.g).is_empty() {
            uncertified += 1;
            failure.get_or_insert(format!("G for {:?} has antitone occurrences", t.formulas.first()));
        }
        for alg in &algebras {
            let opts = MonotoneOptions {
                trials: cfg.monotone_trials,
                seed: cfg.seed ^ n as u64,
                eval: EvalOptions {
                    mode: EvalMode::Enumerate,
                    max_inner_evals: u64::MAX,
                },
                ..Default::default()
            };
            // exhaustive sampling evaluation can blow up on large chains;
            // those fall back to maximal-element evaluation
            let rep = match check_monotone_with(&t.g, alg, opts) {
                Err(MbaError::Budget(_)) => check_monotone_with(
                    &t.g,
                    alg,
                    MonotoneOptions {
                        eval: EvalOptions::mode(EvalMode::MaximalElement),
                        ..opts
                    },
                ),
                r => r,
            };
            match rep {
                Ok(rep) => {
                    checks += rep.pairs_checked;
                    match rep.method {
                        MonotoneMethod::Sampled => sampled += 1,
                        _ => exhaustive += 1,
                    }
                    if let Some(cx) = rep.counterexample {
                        failure.get_or_insert(format!("counterexample {cx:?}"));
                    }
                }
                Err(e) => {
                    failure.get_or_insert(format!("evaluation error {e}"));
                }
            }
        }
    }
    let ok = format!(
        "{} distinct G, all certified ({} uncertified); {} exhaustive and {} sampled algebra checks",
        fam.transforms().len(),
        uncertified,
        exhaustive,
        sampled
    );
    outcome(3, "monotonicity of G", start, checks, failure, ok)
}

/// Exhaustive chain-set distances against `φ_Ū`, `ψ_Ū` and the two warm-up
/// formulas.
pub fn criterion_definability() -> CriterionOutcome {
    let start = Instant::now();
    let mut checks = 0u64;
    let mut failure: Option<String> = None;
    let mut algebras: Vec<FiniteMeasureAlgebra> = (1..=4).map(|n| FiniteMeasureAlgebra::uniform(n).unwrap()).collect();
    algebras.push(
        FiniteMeasureAlgebra::new(
            (0..4).map(|i| format!("v{i}")).collect(),
            vec![Q::new(1, 10), Q::new(1, 5), Q::new(3, 10), Q::new(2, 5)],
        )
        .unwrap(),
    );
    for alg in &algebras {
        let n = alg.len();
        for len in 1..=3 {
            let chains = decreasing_chains(alg.full(), len);
            let names = chain_var_names(len);
            for us in &chains {
                let phi = phi_chain(us).expect("chain is decreasing");
                for xs in all_set_tuples(n, len) {
                    let v = eval_named(&phi, &names, &xs, alg).expect("closed evaluation");
                    let (d, w) = dist_to_chain_set(&xs, us, alg).expect("chain is decreasing");
                    checks += 1;
                    if d > v || (v.is_zero() != in_chain_set(&xs, us)) || !in_chain_set(&w, us) {
                        failure.get_or_insert(format!("phi_chain U={us:?} X={xs:?}: dist {d}, value {v}"));
                    }
                }
            }
        }
        // two tags, all chains and tuples while the tuple space stays small
        for (l1, l2) in [(1, 1), (1, 2), (2, 2), (1, 3)] {
            if n * (l1 + l2) > 12 {
                continue;
            }
            let c1 = decreasing_chains(alg.full(), l1);
            let c2 = decreasing_chains(alg.full(), l2);
            let mut names = multichain_var_names(0, l1);
            names.extend(multichain_var_names(1, l2));
            for u1 in &c1 {
                for u2 in &c2 {
                    let psi = psi_multichain(&[u1.clone(), u2.clone()]).expect("chains are decreasing");
                    for xs in all_set_tuples(n, l1 + l2) {
                        let v = eval_named(&psi, &names, &xs, alg).expect("closed evaluation");
                        let (d1, _) = dist_to_chain_set(&xs[..l1], u1, alg).unwrap();
                        let (d2, _) = dist_to_chain_set(&xs[l1..], u2, alg).unwrap();
                        let member = in_chain_set(&xs[..l1], u1) && in_chain_set(&xs[l1..], u2);
                        checks += 1;
                        if d1.max(d2) > v || v.is_zero() != member {
                            failure.get_or_insert(format!("psi U={u1:?},{u2:?} X={xs:?}"));
                        }
                    }
                }
            }
        }
        let (sub, meet) = simple_definables();
        let names: Vec<String> = (1..=3).map(|i| format!("X{i}")).collect();
        for xs in all_set_tuples(n, 3) {
            let v1 = eval_named(&sub, &names, &xs, alg).unwrap();
            let v2 = eval_named(&meet, &names, &xs, alg).unwrap();
            let (d1, _) = dist_to_set(&xs, alg, |y| y[0] & !y[1] == 0).unwrap();
            let (d2, _) = dist_to_set(&xs, alg, |y| y[2] == y[0] & y[1]).unwrap();
            checks += 2;
            let z1 = xs[0] & !xs[1] == 0;
            let z2 = xs[2] == xs[0] & xs[1];
            if d1 > v1 || v1.is_zero() != z1 || d2 > v2 || v2.is_zero() != z2 {
                failure.get_or_insert(format!("warm-up formulas at X={xs:?}"));
            }
        }
    }
    let ok = "chains of length ≤ 3 over ≤ 4 atoms, two-tag families up to 12 tuple bits, both warm-up formulas".into();
    outcome(4, "definability oracle", start, checks, failure, ok)
}

/// All decreasing chains `U_0 ⊇ … ⊇ U_{len−1}` inside `full`.
pub fn decreasing_chains(full: AtomSet, len: usize) -> Vec<Vec<AtomSet>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        let mut next = Vec::new();
        for c in &out {
            let top = c.last().copied().unwrap_or(full);
            for s in crate::mba::submasks(top) {
                let mut d = c.clone();
                d.push(s);
                next.push(d);
            }
        }
        out = next;
    }
    out
}

fn all_set_tuples(atoms: usize, len: usize) -> impl Iterator<Item = Vec<AtomSet>> {
    let bits = atoms * len;
    let full = (1u64 << atoms) - 1;
    (0u64..1 << bits).map(move |w| (0..len).map(|j| (w >> (j * atoms)) & full).collect())
}

/// Exhaustive and maximal-element evaluation of `G` agree on every instance.
pub fn criterion_sup_collapse(cfg: &HarnessConfig, fam: &Family) -> CriterionOutcome {
    let start = Instant::now();
    let maximal = check_options(cfg, EvalMode::MaximalElement);
    let mut checks = 0u64;
    let mut with_chain = 0u64;
    let mut failure = None;
    for i in &fam.instances {
        let has_chain = !i.transform.g.binders().is_empty();
        let rep = match determination_check_with(&i.formula, &i.transform, &i.field, &i.assignment, &maximal) {
            Ok(r) => r,
            Err(e) => {
                failure.get_or_insert(format!("{}: {e}", i.formula));
                continue;
            }
        };
        checks += 2;
        with_chain += has_chain as u64;
        if (rep.g, rep.g_nonstrict) != (i.report.g, i.report.g_nonstrict) {
            failure.get_or_insert(format!(
                "{}: enumerate ({}, {}) vs maximal ({}, {})",
                i.formula, i.report.g, i.report.g_nonstrict, rep.g, rep.g_nonstrict
            ));
        }
    }
    let ok = format!("{with_chain} instances with sup-chains, strict and non-strict level sets");
    outcome(5, "sup-collapse equivalence", start, checks, failure, ok)
}

/// `Ω ∖ {1∸ζ ≥ (ℓ−i)/ℓ} = {ζ > i/ℓ}` for every `ζ ∈ F[φ]` of every instance.
pub fn criterion_complement(fam: &Family) -> CriterionOutcome {
    let start = Instant::now();
    let mut checks = 0u64;
    let mut failure = None;
    for i in &fam.instances {
        for (z, &l) in i.transform.formulas.iter().zip(&i.transform.levels) {
            let bad = complement_identity_check(z, &i.field, &i.assignment, l).expect("fiber evaluation");
            checks += l as u64 + 1;
            if !bad.is_empty() {
                failure.get_or_insert(format!("{z} at thresholds {bad:?} of {l}"));
            }
        }
    }
    outcome(6, "complement identity", start, checks, failure, format!("{checks} thresholds"))
}

/// A depth ≤ 2 suite: sentences, plus a few formulas in `x`.
pub fn equivalence_suite(rng: &mut ChaCha8Rng) -> Vec<MetricFormula> {
    let mut suite: Vec<MetricFormula> = (0..12).map(|i| random_formula(rng, 1 + i % 2, &[])).collect();
    suite.extend((0..4).map(|i| random_formula(rng, i % 3, &["x"])));
    suite
}

/// Fields against fiberwise relabellings; every fifth pair starts from a
/// constant field.
pub fn criterion_equivalence(cfg: &HarnessConfig) -> CriterionOutcome {
    let start = Instant::now();
    let sig = signature();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(7));
    let suite = equivalence_suite(&mut rng);
    let mut checks = 0u64;
    let mut failure = None;
    for p in 0..cfg.equivalence_pairs {
        let a = if p % 5 == 0 {
            let atoms = rng.gen_range(1..=3);
            let space = random_space(&mut rng, atoms);
            let n = rng.gen_range(1..=3);
            let m = random_structure(&mut rng, &sig, n);
            MeasurableField::constant(space, m, sig.clone()).unwrap()
        } else {
            random_field(&mut rng, &sig, 3, 3)
        };
        let perms: Vec<Vec<usize>> = a
            .fibers()
            .iter()
            .map(|m| {
                let mut s: Vec<usize> = (0..m.len()).collect();
                s.shuffle(&mut rng);
                s
            })
            .collect();
        let b = relabel_field(&a, &perms).expect("permutations relabel isomorphically");
        match integral_equivalence_check(&a, &b, &suite, 1_000_000) {
            Ok(rep) => {
                checks += rep.comparisons as u64;
                if let Some(m) = rep.mismatches.first() {
                    failure.get_or_insert(format!("{}: {} vs {}", suite[m.formula], m.left, m.right));
                }
            }
            Err(e) => {
                failure.get_or_insert(e.to_string());
            }
        }
    }
    let ok = format!("{} field pairs, {} formulas", cfg.equivalence_pairs, suite.len());
    outcome(7, "elementary equivalence of integrals", start, checks, failure, ok)
}

pub fn random_description(rng: &mut ChaCha8Rng) -> TypeIDescription {
    let mut sizes: Vec<u32> = (1..=5).collect();
    sizes.shuffle(rng);
    let count = rng.gen_range(1..=3);
    let mut raw: Vec<(u32, Vec<i128>, i128)> = sizes[..count]
        .iter()
        .map(|&m| {
            let atoms: Vec<i128> = (0..rng.gen_range(0..=3)).map(|_| rng.gen_range(1..=4)).collect();
            let diffuse = if atoms.is_empty() || rng.gen_bool(0.3) { rng.gen_range(1..=4) } else { 0 };
            (m, atoms, diffuse)
        })
        .collect();
    raw.sort();
    let total: i128 = raw.iter().map(|(_, a, d)| a.iter().sum::<i128>() + d).sum();
    let comps = raw
        .into_iter()
        .map(|(m, atoms, d)| Component {
            m,
            atoms: atoms.into_iter().map(|a| Q::new(a, total)).collect(),
            diffuse: Q::new(d, total),
        })
        .collect();
    TypeIDescription::new(comps, Q::zero()).expect("masses sum to 1")
}

/// The same algebra presented differently: components and atoms shuffled,
/// and diffuse parts split into pieces that are merged back.
pub fn represent(rng: &mut ChaCha8Rng, d: &TypeIDescription) -> TypeIDescription {
    let mut comps: Vec<Component> = Vec::new();
    for c in d.components() {
        let mut atoms = c.atoms.clone();
        atoms.shuffle(rng);
        if rng.gen_bool(0.5) && !c.diffuse.is_zero() {
            let half = c.diffuse / Q::from_integer(2);
            comps.push(Component { m: c.m, atoms, diffuse: half });
            comps.push(Component { m: c.m, atoms: vec![], diffuse: c.diffuse - half });
        } else {
            comps.push(Component { m: c.m, atoms, diffuse: c.diffuse });
        }
    }
    comps.shuffle(rng);
    TypeIDescription::merged(comps, d.remainder()).expect("re-presentation keeps the masses")
}

pub fn criterion_type_one(cfg: &HarnessConfig) -> CriterionOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(11));
    let mut checks = 0u64;
    let mut failure = None;
    for _ in 0..cfg.typei_quadruples {
        let d1 = random_description(&mut rng);
        let d2 = random_description(&mut rng);
        let e1 = represent(&mut rng, &d1);
        let e2 = represent(&mut rng, &d2);
        let t = tensor(&d1, &d2).unwrap();
        let u = tensor(&e1, &e2).unwrap();
        let flipped = tensor(&d2, &d1).unwrap();
        checks += 5;
        if !equiv(&d1, &e1) || !equiv(&d2, &e2) {
            failure.get_or_insert("re-presentation changed rho".to_string());
        }
        if !equiv(&t, &u) {
            failure.get_or_insert(format!("congruence fails for {:?} and {:?}", d1, d2));
        }
        if t.total_mass() != Q::one() {
            failure.get_or_insert(format!("tensor mass {}", t.total_mass()));
        }
        if !equiv(&t, &flipped) {
            failure.get_or_insert("tensor is not commutative up to equivalence".to_string());
        }
    }
    let ok = format!("{} quadruples", cfg.typei_quadruples);
    outcome(8, "type I tensor congruence", start, checks, failure, ok)
}

/// Per free variable, the number of occurrences that can move the value:
/// a formula is `L_v`-Lipschitz in `v` with `L_v` as computed here.
pub fn lipschitz_modulus(phi: &MetricFormula) -> BTreeMap<String, Q> {
    fn occ(t: &Term, out: &mut BTreeMap<String, Q>) {
        match t {
            Term::Var(v) => *out.entry(v.clone()).or_insert_with(Q::zero) += Q::one(),
            Term::App(_, args) => args.iter().for_each(|a| occ(a, out)),
        }
    }
    let mut out = BTreeMap::new();
    match phi {
        MetricFormula::Atomic(_, args) => args.iter().for_each(|a| occ(a, &mut out)),
        MetricFormula::Const(_) => {}
        MetricFormula::Half(a) => {
            out = lipschitz_modulus(a).into_iter().map(|(v, l)| (v, l / Q::from_integer(2))).collect();
        }
        MetricFormula::TruncSub(a, b) => {
            out = lipschitz_modulus(a);
            for (v, l) in lipschitz_modulus(b) {
                *out.entry(v).or_insert_with(Q::zero) += l;
            }
        }
        MetricFormula::Sup(y, a) | MetricFormula::Inf(y, a) => {
            out = lipschitz_modulus(a);
            out.remove(y);
        }
    }
    out
}

struct LipschitzTally {
    checks: u64,
    unit_violation: Option<String>,
    modulus_violation: Option<String>,
}

/// Exhaustive Lipschitz checks in each free variable on structures of one to
/// four points and on fields of one or two atoms, plus the one-atom
/// degeneracy on the determination family.
pub fn criterion_lipschitz(cfg: &HarnessConfig, fam: &Family) -> CriterionOutcome {
    let start = Instant::now();
    let sig = signature();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(13));
    let formulas: Vec<MetricFormula> = (0..40)
        .map(|i| random_formula(&mut rng, i % 4, if i % 3 == 0 { &["x", "u"] } else { &["x"] }))
        .collect();
    let mut tally = LipschitzTally {
        checks: 0,
        unit_violation: None,
        modulus_violation: None,
    };

    for points in 1..=4 {
        for _ in 0..3 {
            let m = random_structure(&mut rng, &sig, points);
            for phi in &formulas {
                let vars: Vec<String> = phi.free_vars().into_iter().collect();
                let lmod = lipschitz_modulus(phi);
                let values: BTreeMap<Vec<usize>, Q> = all_tuples(points, vars.len())
                    .map(|t| {
                        let a: BTreeMap<String, usize> = vars.iter().cloned().zip(t.iter().copied()).collect();
                        (t, eval_formula(phi, &m, &a).expect("structure interprets the signature"))
                    })
                    .collect();
                for (t, v) in &values {
                    for (pos, var) in vars.iter().enumerate() {
                        for p in 0..points {
                            let mut u = t.clone();
                            u[pos] = p;
                            let w = values[&u];
                            let gap = if *v > w { *v - w } else { w - *v };
                            let d = m.dist(t[pos], p);
                            tally.checks += 1;
                            if gap > d {
                                tally.unit_violation.get_or_insert(format!(
                                    "{phi} moves by {gap} over distance {d} in {var} on a {points}-point structure"
                                ));
                            }
                            if gap > lmod.get(var).copied().unwrap_or_else(Q::zero) * d {
                                tally.modulus_violation.get_or_insert(format!("{phi} in {var}"));
                            }
                        }
                    }
                }
            }
        }
    }

    for atoms in 1..=2 {
        for _ in 0..3 {
            let field = {
                let space = random_space(&mut rng, atoms);
                let fibers = (0..atoms)
                    .map(|_| {
                        let n = rng.gen_range(1..=3);
                        random_structure(&mut rng, &sig, n)
                    })
                    .collect();
                MeasurableField::new(space, fibers, sig.clone()).unwrap()
            };
            let elems = field.all_choices(1000).unwrap();
            for phi in &formulas {
                let vars: Vec<String> = phi.free_vars().into_iter().collect();
                let lmod = lipschitz_modulus(phi);
                let assigns: Vec<Vec<usize>> = all_tuples(elems.len(), vars.len()).collect();
                let values: Vec<Q> = assigns
                    .iter()
                    .map(|t| {
                        let a: Assignment = vars.iter().cloned().zip(t.iter().map(|&i| elems[i].clone())).collect();
                        eval_on_integral_with(phi, &field, &a, 1000).unwrap()
                    })
                    .collect();
                for (i, s) in assigns.iter().enumerate() {
                    for (j, t) in assigns.iter().enumerate() {
                        let gap = if values[i] > values[j] { values[i] - values[j] } else { values[j] - values[i] };
                        let dists: Vec<Q> = s.iter().zip(t).map(|(&a, &b)| field.dist(&elems[a], &elems[b])).collect();
                        let dmax = dists.iter().copied().max().unwrap_or_else(Q::zero);
                        let bound: Q = vars
                            .iter()
                            .zip(&dists)
                            .map(|(v, d)| lmod.get(v).copied().unwrap_or_else(Q::zero) * d)
                            .sum();
                        tally.checks += 1;
                        if gap > dmax {
                            tally.unit_violation.get_or_insert(format!(
                                "{phi} moves by {gap} over tuple distance {dmax} on a {atoms}-atom field"
                            ));
                        }
                        if gap > bound {
                            tally.modulus_violation.get_or_insert(format!("{phi} on a field"));
                        }
                    }
                }
            }
        }
    }

    let mut degeneracy = None;
    let mut degenerate_checks = 0u64;
    for i in &fam.instances {
        let fiber = &i.field.fibers()[0];
        let single = MeasurableField::constant(FiniteMeasureAlgebra::uniform(1).unwrap(), fiber.clone(), sig.clone())
            .unwrap();
        let a: Assignment = i
            .assignment
            .iter()
            .map(|(k, e)| (k.clone(), IntegralElement(vec![e.0[0]])))
            .collect();
        let pa: BTreeMap<String, usize> = i.assignment.iter().map(|(k, e)| (k.clone(), e.0[0])).collect();
        let lhs = eval_on_integral_with(&i.formula, &single, &a, 1000).unwrap();
        let rhs = eval_formula(&i.formula, fiber, &pa).unwrap();
        degenerate_checks += 1;
        if lhs != rhs {
            degeneracy.get_or_insert(format!("{}: {lhs} vs {rhs}", i.formula));
        }
    }

    let failure = match (&tally.unit_violation, &tally.modulus_violation, &degeneracy) {
        (None, None, None) => None,
        (u, m, d) => Some(
            [
                u.as_ref().map(|s| format!("1-Lipschitz violated: {s}")),
                m.as_ref().map(|s| format!("syntactic modulus violated: {s}")),
                d.as_ref().map(|s| format!("degeneracy violated: {s}")),
            ]
            .into_iter()
            .flatten()
            .collect::<Vec<_>>()
            .join("; "),
        ),
    };
    let ok = format!(
        "{} formulas on 12 structures and 6 fields, degeneracy on {degenerate_checks} instances",
        formulas.len()
    );
    let mut out = outcome(9, "Lipschitz and degeneracy", start, tally.checks + degenerate_checks, failure, ok);
    if tally.unit_violation.is_some() && tally.modulus_violation.is_none() && degeneracy.is_none() {
        out.detail.push_str("; the syntactic-modulus bound and degeneracy hold");
    }
    out
}

/// Runs all nine criteria, sharing one determination family.
pub fn run_all(cfg: &HarnessConfig) -> Vec<CriterionOutcome> {
    let fam = determination_family(cfg);
    vec![
        criterion_determination(cfg, &fam),
        criterion_layer_cake(&fam),
        criterion_monotone(cfg, &fam),
        criterion_definability(),
        criterion_sup_collapse(cfg, &fam),
        criterion_complement(&fam),
        criterion_equivalence(cfg),
        criterion_type_one(cfg),
        criterion_lipschitz(cfg, &fam),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_structures_are_valid() {
        let sig = signature();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=4 {
            for _ in 0..20 {
                assert_eq!(random_structure(&mut rng, &sig, n).validate(), None);
            }
        }
    }

    #[test]
    fn formulas_have_requested_depth_and_scope() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 0..4 {
            for _ in 0..20 {
                let f = random_formula(&mut rng, d, &["x"]);
                assert_eq!(f.depth(), d);
                assert!(f.free_vars().iter().all(|v| v == "x"));
                assert!(random_formula(&mut rng, d, &[]).free_vars().is_empty());
            }
        }
    }

    #[test]
    fn chain_enumeration_counts() {
        // each atom picks how far down the chain it survives
        assert_eq!(decreasing_chains(0b11, 2).len(), 9);
        assert_eq!(decreasing_chains(0b1111, 3).len(), 256);
    }

    #[test]
    fn modulus_counts_occurrences() {
        let sig = signature();
        let phi = crate::formula::parse_formula("sub(R(x, x), half(sup y . R(x, y)))", &sig).unwrap();
        assert_eq!(lipschitz_modulus(&phi)["x"], Q::new(5, 2));
    }

    #[test]
    fn re_presentation_preserves_rho() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let d = random_description(&mut rng);
            assert!(equiv(&d, &represent(&mut rng, &d)));
        }
    }
}
