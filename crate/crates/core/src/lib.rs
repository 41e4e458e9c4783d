//! Feferman–Vaught transform for direct integrals of finite metric
//! structures, with exact rational evaluation on both sides.
//!
//! A continuous-logic formula `φ` and an integer `k ≥ 2` are compiled into a
//! finite list of formulas `ζ`, a level per `ζ`, and a measure-algebra
//! formula `G` such that the value of `φ` on a direct integral is pinned down
//! to within `2/k` by `G` evaluated on the level sets of the `ζ`.

pub mod direct_integral;
pub mod formula;
pub mod harness;
pub mod mba;
pub mod rational;
pub mod structures;
pub mod transform;
pub mod type_one;

pub use rational::Q;
