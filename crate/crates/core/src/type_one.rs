//! The invariant `ρ` of type I tracial von Neumann algebras, computed from
//! central decomposition data, and the tensor calculus on such data.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::rational::{serde_q, serde_q_vec, Q};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeIError {
    #[error("matrix size must be at least 1")]
    ZeroSize,
    #[error("atom mass {0} is not positive")]
    NonPositiveAtom(Q),
    #[error("mass {0} is negative")]
    NegativeMass(Q),
    #[error("total mass is {0}, not 1")]
    Mass(Q),
    #[error("two components with matrix size {0}")]
    DuplicateSize(u32),
    #[error("description has a type II remainder of mass {0}")]
    NotTypeI(Q),
    #[error("matrix factor must be at least 1")]
    ZeroFactor,
    #[error("description document: {0}")]
    Document(String),
}

/// `M_m(L∞(X, μ))` restricted to one matrix size: the atoms of `μ` and its
/// diffuse mass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub m: u32,
    #[serde(with = "serde_q_vec", default)]
    pub atoms: Vec<Q>,
    #[serde(with = "serde_q", default = "zero")]
    pub diffuse: Q,
}

fn zero() -> Q {
    Q::zero()
}

impl Component {
    pub fn mass(&self) -> Q {
        self.atoms.iter().sum::<Q>() + self.diffuse
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeIDescription {
    components: Vec<Component>,
    #[serde(with = "serde_q", default = "zero")]
    remainder: Q,
}

impl TypeIDescription {
    pub fn new(components: Vec<Component>, remainder: Q) -> Result<Self, TypeIError> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &components {
            if c.m == 0 {
                return Err(TypeIError::ZeroSize);
            }
            if !seen.insert(c.m) {
                return Err(TypeIError::DuplicateSize(c.m));
            }
            if let Some(a) = c.atoms.iter().find(|a| **a <= Q::zero()) {
                return Err(TypeIError::NonPositiveAtom(*a));
            }
            if c.diffuse < Q::zero() {
                return Err(TypeIError::NegativeMass(c.diffuse));
            }
        }
        if remainder < Q::zero() {
            return Err(TypeIError::NegativeMass(remainder));
        }
        let total = components.iter().map(Component::mass).sum::<Q>() + remainder;
        if total != Q::one() {
            return Err(TypeIError::Mass(total));
        }
        Ok(TypeIDescription { components, remainder })
    }

    /// Like [`TypeIDescription::new`] but merges components of equal size.
    pub fn merged(components: Vec<Component>, remainder: Q) -> Result<Self, TypeIError> {
        let mut by_size: BTreeMap<u32, Component> = BTreeMap::new();
        for c in components {
            match by_size.get_mut(&c.m) {
                Some(e) => {
                    e.atoms.extend(c.atoms);
                    e.diffuse += c.diffuse;
                }
                None => {
                    by_size.insert(c.m, c);
                }
            }
        }
        Self::new(by_size.into_values().collect(), remainder)
    }

    /// `M_m(ℂ)` with full mass.
    pub fn matrix(m: u32) -> Result<Self, TypeIError> {
        Self::new(
            vec![Component {
                m,
                atoms: vec![Q::one()],
                diffuse: Q::zero(),
            }],
            Q::zero(),
        )
    }

    pub fn from_json(text: &str) -> Result<Self, TypeIError> {
        let v: Value = serde_json::from_str(text).map_err(|e| TypeIError::Document(e.to_string()))?;
        Self::from_value(&v)
    }

    pub fn from_value(v: &Value) -> Result<Self, TypeIError> {
        let d: TypeIDescription =
            serde_json::from_value(v.clone()).map_err(|e| TypeIError::Document(e.to_string()))?;
        Self::new(d.components, d.remainder)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("description serializes")
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn remainder(&self) -> Q {
        self.remainder
    }

    pub fn is_type_one(&self) -> bool {
        self.remainder.is_zero()
    }

    pub fn total_mass(&self) -> Q {
        self.components.iter().map(Component::mass).sum::<Q>() + self.remainder
    }
}

/// Nonzero entries of `ρ`: `(m, 0)` is the diffuse mass at size `m`, and
/// `(m, n)` for `n ≥ 1` the `n`-th largest atom.
pub fn rho(d: &TypeIDescription) -> BTreeMap<(u32, u32), Q> {
    let mut out = BTreeMap::new();
    for c in &d.components {
        if !c.diffuse.is_zero() {
            out.insert((c.m, 0), c.diffuse);
        }
        let mut atoms = c.atoms.clone();
        atoms.sort_by(|a, b| b.cmp(a));
        for (n, a) in atoms.into_iter().enumerate() {
            out.insert((c.m, n as u32 + 1), a);
        }
    }
    out
}

/// `{"(m,n)": "p/q"}` for the nonzero entries.
pub fn rho_to_value(table: &BTreeMap<(u32, u32), Q>) -> Value {
    let map: Map<String, Value> = table
        .iter()
        .map(|((m, n), v)| (format!("({m},{n})"), Value::String(v.to_string())))
        .collect();
    Value::Object(map)
}

pub fn equiv(a: &TypeIDescription, b: &TypeIDescription) -> bool {
    a.remainder == b.remainder && rho(a) == rho(b)
}

pub fn tensor(a: &TypeIDescription, b: &TypeIDescription) -> Result<TypeIDescription, TypeIError> {
    for d in [a, b] {
        if !d.is_type_one() {
            return Err(TypeIError::NotTypeI(d.remainder));
        }
    }
    let mut out = Vec::new();
    for c in &a.components {
        for e in &b.components {
            let atoms = c
                .atoms
                .iter()
                .flat_map(|x| e.atoms.iter().map(move |y| x * y))
                .collect();
            // any diffuse factor makes the product diffuse
            let diffuse = c.diffuse * e.mass() + (c.mass() - c.diffuse) * e.diffuse;
            out.push(Component {
                m: c.m * e.m,
                atoms,
                diffuse,
            });
        }
    }
    TypeIDescription::merged(out, Q::zero())
}

/// Tensoring with `M_j(ℂ)`: sizes scale by `j`, masses stay.
pub fn matrix_tensor(d: &TypeIDescription, j: u32) -> Result<TypeIDescription, TypeIError> {
    if j == 0 {
        return Err(TypeIError::ZeroFactor);
    }
    let components = d
        .components
        .iter()
        .map(|c| Component {
            m: c.m * j,
            ..c.clone()
        })
        .collect();
    TypeIDescription::new(components, d.remainder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn comp(m: u32, atoms: &[Q], diffuse: Q) -> Component {
        Component {
            m,
            atoms: atoms.to_vec(),
            diffuse,
        }
    }

    #[test]
    fn rho_normal_form() {
        let m2 = TypeIDescription::matrix(2).unwrap();
        assert_eq!(rho(&m2), BTreeMap::from([((2, 1), q(1, 1))]));
        assert_eq!(rho_to_value(&rho(&m2)), serde_json::json!({"(2,1)": "1"}));
        let diffuse = TypeIDescription::new(vec![comp(2, &[], q(1, 1))], Q::zero()).unwrap();
        assert_eq!(rho(&diffuse), BTreeMap::from([((2, 0), q(1, 1))]));
        let sorted = TypeIDescription::new(vec![comp(3, &[q(1, 3), q(2, 3)], Q::zero())], Q::zero()).unwrap();
        assert_eq!(rho(&sorted), BTreeMap::from([((3, 1), q(2, 3)), ((3, 2), q(1, 3))]));
    }

    #[test]
    fn validation() {
        assert_eq!(
            TypeIDescription::new(vec![comp(2, &[q(1, 2)], Q::zero())], Q::zero()),
            Err(TypeIError::Mass(q(1, 2)))
        );
        assert_eq!(
            TypeIDescription::new(vec![comp(2, &[q(1, 2)], Q::zero()), comp(2, &[q(1, 2)], Q::zero())], Q::zero()),
            Err(TypeIError::DuplicateSize(2))
        );
        assert_eq!(
            TypeIDescription::new(vec![comp(0, &[q(1, 1)], Q::zero())], Q::zero()),
            Err(TypeIError::ZeroSize)
        );
        assert!(TypeIDescription::new(vec![comp(1, &[q(0, 1), q(1, 1)], Q::zero())], Q::zero()).is_err());
        let merged =
            TypeIDescription::merged(vec![comp(2, &[q(1, 2)], Q::zero()), comp(2, &[q(1, 2)], Q::zero())], Q::zero())
                .unwrap();
        assert_eq!(merged.components().len(), 1);
    }

    #[test]
    fn equivalence() {
        let a = TypeIDescription::new(
            vec![comp(2, &[q(1, 4), q(1, 2)], Q::zero()), comp(1, &[], q(1, 4))],
            Q::zero(),
        )
        .unwrap();
        let b = TypeIDescription::new(
            vec![comp(1, &[], q(1, 4)), comp(2, &[q(1, 2), q(1, 4)], Q::zero())],
            Q::zero(),
        )
        .unwrap();
        assert!(equiv(&a, &b));
        assert!(!equiv(&TypeIDescription::matrix(2).unwrap(), &TypeIDescription::matrix(3).unwrap()));
        let c = TypeIDescription::new(vec![comp(2, &[q(1, 2)], Q::zero())], q(1, 2)).unwrap();
        let d = TypeIDescription::new(vec![comp(2, &[q(1, 2)], q(1, 4))], q(1, 4)).unwrap();
        let e = TypeIDescription::new(vec![comp(2, &[q(1, 2)], Q::zero()), comp(5, &[], q(1, 4))], q(1, 4)).unwrap();
        assert!(!equiv(&c, &d));
        assert_eq!(rho(&c).len(), 1);
        assert!(!equiv(&c, &e));
    }

    #[test]
    fn tensor_examples() {
        let m2 = TypeIDescription::matrix(2).unwrap();
        let m3 = TypeIDescription::matrix(3).unwrap();
        assert_eq!(rho(&tensor(&m2, &m3).unwrap()), BTreeMap::from([((6, 1), q(1, 1))]));

        let m2m2 = TypeIDescription::new(vec![comp(2, &[q(1, 2), q(1, 2)], Q::zero())], Q::zero()).unwrap();
        assert_eq!(
            rho(&tensor(&m2m2, &m3).unwrap()),
            BTreeMap::from([((6, 1), q(1, 2)), ((6, 2), q(1, 2))])
        );

        let diffuse = TypeIDescription::new(vec![comp(1, &[], q(1, 1))], Q::zero()).unwrap();
        let mixed = TypeIDescription::new(vec![comp(2, &[q(1, 3)], q(1, 3)), comp(4, &[q(1, 3)], Q::zero())], Q::zero())
            .unwrap();
        let t = tensor(&diffuse, &mixed).unwrap();
        assert!(t.components().iter().all(|c| c.atoms.is_empty()));
        assert_eq!(t.total_mass(), q(1, 1));

        let rem = TypeIDescription::new(vec![comp(2, &[q(1, 2)], Q::zero())], q(1, 2)).unwrap();
        assert_eq!(tensor(&rem, &m2), Err(TypeIError::NotTypeI(q(1, 2))));
    }

    #[test]
    fn matrix_tensor_matches_tensor() {
        let d = TypeIDescription::new(vec![comp(2, &[q(1, 3)], q(1, 3)), comp(3, &[q(1, 3)], Q::zero())], Q::zero())
            .unwrap();
        assert_eq!(matrix_tensor(&d, 1).unwrap(), d);
        for j in 1..5 {
            let via = tensor(&d, &TypeIDescription::matrix(j).unwrap()).unwrap();
            assert!(equiv(&matrix_tensor(&d, j).unwrap(), &via));
        }
        assert_eq!(
            matrix_tensor(&TypeIDescription::matrix(2).unwrap(), 3).unwrap(),
            TypeIDescription::matrix(6).unwrap()
        );
        assert_eq!(matrix_tensor(&d, 0), Err(TypeIError::ZeroFactor));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"components":[{"m":2,"atoms":["1/2","1/2"],"diffuse":"0"}],"remainder":"0"}"#;
        let d = TypeIDescription::from_json(text).unwrap();
        assert_eq!(TypeIDescription::from_value(&d.to_value()).unwrap(), d);
        assert!(TypeIDescription::from_json(r#"{"components":[{"m":2,"atoms":["1/2"]}]}"#).is_err());
    }
}
