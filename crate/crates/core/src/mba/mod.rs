//! Finite probability measure algebras and formulas over their elements.

mod algebra;
pub mod definability;
mod eval;
pub mod json;
mod monotone;
mod syntax;

use thiserror::Error;

pub use algebra::{submasks, AtomSet, FiniteMeasureAlgebra, MAX_ATOMS};
pub use definability::{dist_to_chain_set, phi_chain, psi_multichain, simple_definables};
pub use eval::{eval_mba, eval_mba_with, eval_set, EvalMode, EvalOptions, SetAssignment};
pub use monotone::{
    check_monotone, check_monotone_with, negative_occurrences, Counterexample, MonotoneMethod, MonotoneOptions,
    MonotoneReport,
};
pub use syntax::{Chain, ChainSpec, JointBound, MbaFormula, Pretty, SetTerm, SetVar, SetVarIndex};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MbaError {
    #[error("unbound set variable {0}")]
    Unbound(String),
    #[error("chain bounds of sup-chain {binder} for tag {tag} increase at index {index}")]
    NotDecreasing { binder: usize, tag: usize, index: usize },
    #[error("chain is not decreasing at index {0}")]
    ChainNotDecreasing(usize),
    #[error("expected {expected} sets, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("evaluation budget exceeded: {0}")]
    Budget(String),
    #[error("invalid measure algebra: {0}")]
    Algebra(String),
    #[error("invalid document: {0}")]
    Json(String),
}
