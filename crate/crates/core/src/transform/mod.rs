//! The Feferman–Vaught transform: a formula `φ` and `k ≥ 2` become a list
//! `F[φ]` of formulas, a level `ℓ(ζ)` per formula, and a coordinatewise
//! increasing measure-algebra formula `G` over the level-set variables
//! `Z^ζ_{i/ℓ(ζ)}`, such that `G` evaluated on the level sets of an element of
//! a direct integral is within `2/k` of `φ` on that element.

mod check;
mod json;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_integer::Integer;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::formula::MetricFormula;
use crate::mba::{Chain, ChainSpec, JointBound, MbaFormula, SetTerm, SetVar, SetVarIndex};
use crate::rational::Q;

pub use check::{
    complement_identity_check, integral_equivalence_check, determination_check, determination_check_with,
    level_assignment, CheckError, CheckOptions, Clause, EquivalenceReport, DeterminationFailure, DeterminationReport,
    Mismatch,
};
pub use json::{result_from_value, result_to_value, PrettyResult};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("k must be at least 2, got {0}")]
    SmallK(u32),
    #[error("inf is not part of the transform's fragment; apply rewrite_inf first")]
    InfPresent,
    #[error("budget exceeded for {what}: {formula} = {value} > {limit}")]
    Budget {
        what: &'static str,
        formula: String,
        value: String,
        limit: u64,
    },
    #[error("transform document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budgets {
    /// Cap on `|C|` in the sup case.
    pub max_c: u64,
    /// Cap on `Σ_ζ ℓ(ζ)`, the number of grid variables.
    pub max_vars: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            max_c: 4096,
            max_vars: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformResult {
    pub k: u32,
    /// `F[φ]`, sorted and without duplicates.
    pub formulas: Vec<MetricFormula>,
    /// `ℓ(ζ)` for each entry of `formulas`.
    pub levels: Vec<u32>,
    pub g: MbaFormula,
}

impl TransformResult {
    /// The full grid `{(ζ, i/ℓ(ζ)) : i < ℓ(ζ)}`.
    pub fn variables(&self) -> Vec<SetVarIndex> {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(tag, &l)| {
                (0..l).map(move |i| SetVarIndex {
                    tag,
                    level: Q::new(i as i128, l as i128),
                })
            })
            .collect()
    }

    pub fn variable_count(&self) -> u64 {
        self.levels.iter().map(|&l| l as u64).sum()
    }

    pub fn index_of(&self, f: &MetricFormula) -> Option<usize> {
        self.formulas.binary_search(f).ok()
    }
}

/// Collects formulas with levels, merging repeats at the lcm of their levels.
#[derive(Default)]
struct FormulaTable {
    levels: BTreeMap<MetricFormula, u32>,
}

impl FormulaTable {
    fn add(&mut self, f: MetricFormula, level: u32) {
        self.levels
            .entry(f)
            .and_modify(|l| *l = l.lcm(&level))
            .or_insert(level);
    }

    fn finish(self) -> (Vec<MetricFormula>, Vec<u32>) {
        self.levels.into_iter().unzip()
    }
}

fn grid_var(tag: usize, level: Q) -> SetTerm {
    SetTerm::Var(SetVar::grid(tag, level))
}

fn lookup(formulas: &[MetricFormula], f: &MetricFormula) -> usize {
    formulas.binary_search(f).expect("formula was added to the table")
}

/// Runs the transform with a memo table and a binder counter local to one
/// instance.
pub struct Transformer {
    budgets: Budgets,
    memo: HashMap<(MetricFormula, u32), Arc<TransformResult>>,
    next_binder: usize,
}

impl Default for Transformer {
    fn default() -> Self {
        Self::new(Budgets::default())
    }
}

impl Transformer {
    pub fn new(budgets: Budgets) -> Self {
        Transformer {
            budgets,
            memo: HashMap::new(),
            next_binder: 0,
        }
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    pub fn transform(&mut self, phi: &MetricFormula, k: u32) -> Result<Arc<TransformResult>, TransformError> {
        if k < 2 {
            return Err(TransformError::SmallK(k));
        }
        if let Some(r) = self.memo.get(&(phi.clone(), k)) {
            return Ok(Arc::clone(r));
        }
        let r = match phi {
            MetricFormula::Inf(..) => return Err(TransformError::InfPresent),
            MetricFormula::Atomic(..) => atomic_case(phi, k),
            // a constant is its own exact value; no level sets needed
            MetricFormula::Const(c) => TransformResult {
                k,
                formulas: vec![],
                levels: vec![],
                g: MbaFormula::Const(*c),
            },
            MetricFormula::Half(psi) => {
                let r = self.transform(psi, k)?;
                TransformResult {
                    k,
                    formulas: r.formulas.clone(),
                    levels: r.levels.clone(),
                    g: MbaFormula::scale(Q::new(1, 2), r.g.clone()),
                }
            }
            MetricFormula::TruncSub(psi, eta) => {
                let rp = self.transform(psi, 3 * k)?;
                let re = self.transform(eta, 3 * k)?;
                sub_case(&rp, &re, k)
            }
            MetricFormula::Sup(y, psi) => {
                let r = self.transform(psi, k)?;
                let binder = self.next_binder;
                self.next_binder += 1;
                self.sup_case(y, &r, k, binder)?
            }
        };
        let total = r.variable_count();
        if total > self.budgets.max_vars {
            return Err(TransformError::Budget {
                what: "set variables",
                formula: format!(
                    "Σ_ζ ℓ(ζ) over {} formulas of F[{}] at k={}",
                    r.formulas.len(),
                    phi,
                    k
                ),
                value: total.to_string(),
                limit: self.budgets.max_vars,
            });
        }
        let r = Arc::new(r);
        self.memo.insert((phi.clone(), k), Arc::clone(&r));
        Ok(r)
    }

    fn sup_case(&self, y: &str, r: &TransformResult, k: u32, binder: usize) -> Result<TransformResult, TransformError> {
        let ls: Vec<u64> = r.levels.iter().map(|&l| l as u64).collect();
        let c_size = ls
            .iter()
            .try_fold(1u64, |acc, l| acc.checked_mul(l + 1))
            .map(|p| p - 1);
        if c_size.map_or(true, |c| c > self.budgets.max_c) {
            let factors: Vec<String> = ls.iter().map(|l| format!("({}+1)", l)).collect();
            return Err(TransformError::Budget {
                what: "|C|",
                formula: format!("Π_ζ (ℓ(ζ)+1) − 1 = {} − 1", factors.join("·")),
                value: c_size.map_or_else(|| "overflow".to_string(), |c| c.to_string()),
                limit: self.budgets.max_c,
            });
        }

        // α as a digit vector: 0 = undefined, d > 0 means α(ζ_j) = (d−1)/ℓ_j
        let n = ls.len();
        let mut alphas: Vec<Vec<u64>> = Vec::with_capacity(c_size.unwrap_or(0) as usize);
        let mut digits = vec![0u64; n];
        loop {
            let mut j = 0;
            while j < n {
                digits[j] += 1;
                if digits[j] <= ls[j] {
                    break;
                }
                digits[j] = 0;
                j += 1;
            }
            if j == n {
                break;
            }
            alphas.push(digits.clone());
        }

        let mut table = FormulaTable::default();
        let mut xis = Vec::with_capacity(alphas.len());
        for alpha in &alphas {
            let dom: Vec<usize> = (0..n).filter(|&j| alpha[j] > 0).collect();
            let big_l = dom.iter().map(|&j| ls[j]).max().expect("domain is nonempty") as u32;
            let xi = xi_formula(y, &r.formulas, &r.levels, alpha, &dom, big_l);
            table.add(xi.clone(), big_l);
            xis.push((xi, big_l, dom));
        }
        let (formulas, levels) = table.finish();

        let cut = |xi: &MetricFormula, big_l: u32| grid_var(lookup(&formulas, xi), Q::new(1, big_l as i128));
        let mut singleton: HashMap<(usize, u64), SetTerm> = HashMap::new();
        let mut joint = Vec::new();
        for (alpha, (xi, big_l, dom)) in alphas.iter().zip(&xis) {
            if let [j] = dom.as_slice() {
                singleton.insert((*j, alpha[*j] - 1), cut(xi, *big_l));
            } else {
                joint.push(JointBound {
                    members: dom.iter().map(|&j| (j, (alpha[j] - 1) as usize)).collect(),
                    bound: cut(xi, *big_l),
                });
            }
        }
        let chains = (0..n)
            .map(|j| Chain {
                tag: j,
                bounds: (0..ls[j])
                    .map(|m| SetTerm::inter((0..=m).map(|i| singleton[&(j, i)].clone()).collect()))
                    .collect(),
            })
            .collect();
        let inner = r.g.map_vars(&mut |v| match v {
            SetVar::Grid(ix) => {
                let l = Q::from_integer(r.levels[ix.tag] as i128);
                let i = ix.level * l;
                debug_assert!(i.is_integer());
                SetTerm::Var(SetVar::Bound {
                    binder,
                    tag: ix.tag,
                    index: i.to_integer() as usize,
                })
            }
            other => SetTerm::Var(other.clone()),
        });
        Ok(TransformResult {
            k,
            formulas,
            levels,
            g: MbaFormula::SupChain(Box::new(ChainSpec { binder, chains, joint }), Box::new(inner)),
        })
    }
}

fn atomic_case(phi: &MetricFormula, k: u32) -> TransformResult {
    let parts = (1..k)
        .map(|i| MbaFormula::measure(grid_var(0, Q::new(i as i128, k as i128))))
        .collect();
    TransformResult {
        k,
        formulas: vec![phi.clone()],
        levels: vec![k],
        g: MbaFormula::scale(Q::new(1, k as i128), MbaFormula::sum(parts)),
    }
}

fn sub_case(rp: &TransformResult, re: &TransformResult, k: u32) -> TransformResult {
    let flipped: Vec<MetricFormula> = re
        .formulas
        .iter()
        .map(|z| MetricFormula::one_minus(z.clone()).canonicalize())
        .collect();
    let mut table = FormulaTable::default();
    for (f, &l) in rp.formulas.iter().zip(&rp.levels) {
        table.add(f.clone(), l);
    }
    for (f, &l) in flipped.iter().zip(&re.levels) {
        table.add(f.clone(), l);
    }
    let (formulas, levels) = table.finish();

    let gp = rp.g.map_vars(&mut |v| match v {
        SetVar::Grid(ix) => grid_var(lookup(&formulas, &rp.formulas[ix.tag]), ix.level),
        other => SetTerm::Var(other.clone()),
    });
    // Z^ζ_t is read off 1∸ζ as the complement of its level set at 1−t
    let ge = re.g.map_vars(&mut |v| match v {
        SetVar::Grid(ix) if ix.level.is_zero() => SetTerm::Full,
        SetVar::Grid(ix) => SetTerm::compl(grid_var(lookup(&formulas, &flipped[ix.tag]), Q::one() - ix.level)),
        other => SetTerm::Var(other.clone()),
    });
    TransformResult {
        k,
        formulas,
        levels,
        g: MbaFormula::sub(gp, ge),
    }
}

/// `ξ_α = sup_y min_{ζ∈dom α} max(0, 1/L + (ζ − α(ζ))/2)`, written in the
/// fragment. `ξ_α > 1/L` iff some `y` has `ζ > α(ζ)` for all `ζ ∈ dom α`.
fn xi_formula(
    y: &str,
    zetas: &[MetricFormula],
    levels: &[u32],
    alpha: &[u64],
    dom: &[usize],
    big_l: u32,
) -> MetricFormula {
    let c = Q::new(1, big_l as i128);
    let terms: Vec<MetricFormula> = dom
        .iter()
        .map(|&j| {
            let shifted = MetricFormula::one_minus(MetricFormula::sub(
                MetricFormula::Const(Q::one() - c),
                MetricFormula::half(zetas[j].clone()),
            ));
            let a = Q::new((alpha[j] - 1) as i128, 2 * levels[j] as i128);
            MetricFormula::sub(shifted, MetricFormula::Const(a))
        })
        .collect();
    MetricFormula::sup(y, balanced_min(terms)).canonicalize()
}

fn balanced_min(mut xs: Vec<MetricFormula>) -> MetricFormula {
    if xs.len() == 1 {
        return xs.pop().unwrap();
    }
    let right = xs.split_off(xs.len() / 2);
    MetricFormula::min(balanced_min(xs), balanced_min(right))
}

/// Transform with default budgets.
pub fn transform(phi: &MetricFormula, k: u32) -> Result<TransformResult, TransformError> {
    transform_with(phi, k, Budgets::default())
}

pub fn transform_with(phi: &MetricFormula, k: u32, budgets: Budgets) -> Result<TransformResult, TransformError> {
    let mut t = Transformer::new(budgets);
    let r = t.transform(phi, k)?;
    drop(t);
    Ok(Arc::try_unwrap(r).unwrap_or_else(|r| (*r).clone()))
}
