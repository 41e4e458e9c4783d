//! JSON documents for measure-algebra formulas.
//!
//! Set variables are strings: `Z[<tag>][<level>]` for grid variables,
//! `Y[<binder>][<tag>][<index>]` for chain-bound variables, anything else for
//! named variables.

use serde_json::{json, Map, Value};

use super::{Chain, ChainSpec, JointBound, MbaError, MbaFormula, SetTerm, SetVar};
use crate::rational::{parse_q, Q};

/// Renders a grid level; the default prints the reduced rational.
pub type LevelFmt<'a> = &'a dyn Fn(usize, &Q) -> String;

pub fn var_name(v: &SetVar, level_fmt: Option<LevelFmt<'_>>) -> String {
    match v {
        SetVar::Grid(ix) => {
            let level = match level_fmt {
                Some(f) => f(ix.tag, &ix.level),
                None => ix.level.to_string(),
            };
            format!("Z[{}][{}]", ix.tag, level)
        }
        SetVar::Named(n) => n.clone(),
        SetVar::Bound { binder, tag, index } => format!("Y[{binder}][{tag}][{index}]"),
    }
}

pub fn parse_var_name(s: &str) -> Result<SetVar, MbaError> {
    let bad = || MbaError::Json(format!("bad variable name `{s}`"));
    let fields = |rest: &str| -> Option<Vec<String>> {
        let mut out = Vec::new();
        let mut r = rest;
        while !r.is_empty() {
            let body = r.strip_prefix('[')?;
            let end = body.find(']')?;
            out.push(body[..end].to_string());
            r = &body[end + 1..];
        }
        Some(out)
    };
    if let Some(rest) = s.strip_prefix('Z') {
        if rest.starts_with('[') {
            let f = fields(rest).ok_or_else(bad)?;
            if f.len() != 2 {
                return Err(bad());
            }
            let tag = f[0].parse().map_err(|_| bad())?;
            let level = parse_q(&f[1]).map_err(|_| bad())?;
            return Ok(SetVar::grid(tag, level));
        }
    }
    if let Some(rest) = s.strip_prefix('Y') {
        if rest.starts_with('[') {
            let f = fields(rest).ok_or_else(bad)?;
            let n: Vec<usize> = f.iter().map(|x| x.parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
            if n.len() != 3 {
                return Err(bad());
            }
            return Ok(SetVar::Bound {
                binder: n[0],
                tag: n[1],
                index: n[2],
            });
        }
    }
    if s.is_empty() {
        return Err(bad());
    }
    Ok(SetVar::Named(s.to_string()))
}

pub fn set_to_value(s: &SetTerm, lf: Option<LevelFmt<'_>>) -> Value {
    let list = |xs: &[SetTerm]| Value::Array(xs.iter().map(|x| set_to_value(x, lf)).collect());
    match s {
        SetTerm::Var(v) => json!({ "var": var_name(v, lf) }),
        SetTerm::Lit(m) => {
            let idx: Vec<u32> = (0..64).filter(|i| m >> i & 1 == 1).collect();
            json!({ "lit": idx })
        }
        SetTerm::Empty => json!("empty"),
        SetTerm::Full => json!("full"),
        SetTerm::Union(xs) => json!({ "union": list(xs) }),
        SetTerm::Inter(xs) => json!({ "inter": list(xs) }),
        SetTerm::Diff(a, b) => json!({ "diff": [set_to_value(a, lf), set_to_value(b, lf)] }),
        SetTerm::SymDiff(a, b) => json!({ "symdiff": [set_to_value(a, lf), set_to_value(b, lf)] }),
        SetTerm::Compl(a) => json!({ "compl": set_to_value(a, lf) }),
    }
}

pub fn to_value(g: &MbaFormula, lf: Option<LevelFmt<'_>>) -> Value {
    let list = |xs: &[MbaFormula]| Value::Array(xs.iter().map(|x| to_value(x, lf)).collect());
    match g {
        MbaFormula::Measure(s) => json!({ "measure": set_to_value(s, lf) }),
        MbaFormula::Const(q) => json!({ "const": q.to_string() }),
        MbaFormula::Scale(q, a) => json!({ "scale": { "by": q.to_string(), "of": to_value(a, lf) } }),
        MbaFormula::Add(a, b) => json!({ "add": [to_value(a, lf), to_value(b, lf)] }),
        MbaFormula::TruncSub(a, b) => json!({ "sub": [to_value(a, lf), to_value(b, lf)] }),
        MbaFormula::Max(xs) => json!({ "max": list(xs) }),
        MbaFormula::Min(xs) => json!({ "min": list(xs) }),
        MbaFormula::SupChain(spec, inner) => {
            let chains: Vec<Value> = spec
                .chains
                .iter()
                .map(|c| {
                    json!({
                        "tag": c.tag,
                        "bounds": c.bounds.iter().map(|u| set_to_value(u, lf)).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let joint: Vec<Value> = spec
                .joint
                .iter()
                .map(|j| json!({ "members": j.members, "bound": set_to_value(&j.bound, lf) }))
                .collect();
            json!({ "supchain": {
                "binder": spec.binder,
                "chains": chains,
                "joint": joint,
                "inner": to_value(inner, lf),
            }})
        }
    }
}

fn err(msg: impl Into<String>) -> MbaError {
    MbaError::Json(msg.into())
}

fn single(v: &Value) -> Result<(&String, &Value), MbaError> {
    let obj = v.as_object().ok_or_else(|| err(format!("expected object, got {v}")))?;
    if obj.len() != 1 {
        return Err(err(format!("expected a single-key object, got {v}")));
    }
    Ok(obj.iter().next().unwrap())
}

fn pair<'a>(v: &'a Value, what: &str) -> Result<(&'a Value, &'a Value), MbaError> {
    match v.as_array().map(Vec::as_slice) {
        Some([a, b]) => Ok((a, b)),
        _ => Err(err(format!("`{what}` expects two operands"))),
    }
}

fn q_field(v: &Value) -> Result<Q, MbaError> {
    let s = v.as_str().ok_or_else(|| err("rational must be a string"))?;
    parse_q(s).map_err(|e| err(e.to_string()))
}

pub fn set_from_value(v: &Value) -> Result<SetTerm, MbaError> {
    match v.as_str() {
        Some("empty") => return Ok(SetTerm::Empty),
        Some("full") => return Ok(SetTerm::Full),
        Some(other) => return Err(err(format!("unknown set constant `{other}`"))),
        None => {}
    }
    let (k, body) = single(v)?;
    let list = |b: &Value| -> Result<Vec<SetTerm>, MbaError> {
        b.as_array()
            .ok_or_else(|| err("expected array"))?
            .iter()
            .map(set_from_value)
            .collect()
    };
    Ok(match k.as_str() {
        "var" => SetTerm::Var(parse_var_name(body.as_str().ok_or_else(|| err("variable must be a string"))?)?),
        "lit" => {
            let idx = body.as_array().ok_or_else(|| err("lit expects atom indices"))?;
            let mut m = 0u64;
            for i in idx {
                let i = i.as_u64().filter(|i| *i < 64).ok_or_else(|| err("bad atom index"))?;
                m |= 1 << i;
            }
            SetTerm::Lit(m)
        }
        "union" => SetTerm::Union(list(body)?),
        "inter" => SetTerm::Inter(list(body)?),
        "diff" => {
            let (a, b) = pair(body, "diff")?;
            SetTerm::diff(set_from_value(a)?, set_from_value(b)?)
        }
        "symdiff" => {
            let (a, b) = pair(body, "symdiff")?;
            SetTerm::sym_diff(set_from_value(a)?, set_from_value(b)?)
        }
        "compl" => SetTerm::compl(set_from_value(body)?),
        other => return Err(err(format!("unknown set operator `{other}`"))),
    })
}

pub fn from_value(v: &Value) -> Result<MbaFormula, MbaError> {
    let (k, body) = single(v)?;
    let list = |b: &Value| -> Result<Vec<MbaFormula>, MbaError> {
        b.as_array()
            .ok_or_else(|| err("expected array"))?
            .iter()
            .map(from_value)
            .collect()
    };
    let field = |o: &Map<String, Value>, name: &str| -> Result<Value, MbaError> {
        o.get(name).cloned().ok_or_else(|| err(format!("missing field `{name}`")))
    };
    Ok(match k.as_str() {
        "measure" => MbaFormula::Measure(set_from_value(body)?),
        "const" => MbaFormula::Const(q_field(body)?),
        "scale" => {
            let o = body.as_object().ok_or_else(|| err("scale expects an object"))?;
            MbaFormula::scale(q_field(&field(o, "by")?)?, from_value(&field(o, "of")?)?)
        }
        "add" => {
            let (a, b) = pair(body, "add")?;
            MbaFormula::add(from_value(a)?, from_value(b)?)
        }
        "sub" => {
            let (a, b) = pair(body, "sub")?;
            MbaFormula::sub(from_value(a)?, from_value(b)?)
        }
        "max" => MbaFormula::Max(list(body)?),
        "min" => MbaFormula::Min(list(body)?),
        "supchain" => {
            let o = body.as_object().ok_or_else(|| err("supchain expects an object"))?;
            let binder = field(o, "binder")?.as_u64().ok_or_else(|| err("binder must be an integer"))? as usize;
            let mut chains = Vec::new();
            for c in field(o, "chains")?.as_array().ok_or_else(|| err("chains must be an array"))? {
                let co = c.as_object().ok_or_else(|| err("chain must be an object"))?;
                let tag = field(co, "tag")?.as_u64().ok_or_else(|| err("tag must be an integer"))? as usize;
                let bounds = field(co, "bounds")?
                    .as_array()
                    .ok_or_else(|| err("bounds must be an array"))?
                    .iter()
                    .map(set_from_value)
                    .collect::<Result<_, _>>()?;
                chains.push(Chain { tag, bounds });
            }
            let mut joint = Vec::new();
            for j in o.get("joint").and_then(Value::as_array).map(Vec::as_slice).unwrap_or(&[]) {
                let jo = j.as_object().ok_or_else(|| err("joint bound must be an object"))?;
                let members: Vec<(usize, usize)> =
                    serde_json::from_value(field(jo, "members")?).map_err(|e| err(e.to_string()))?;
                joint.push(JointBound {
                    members,
                    bound: set_from_value(&field(jo, "bound")?)?,
                });
            }
            let inner = from_value(&field(o, "inner")?)?;
            MbaFormula::SupChain(Box::new(ChainSpec { binder, chains, joint }), Box::new(inner))
        }
        other => return Err(err(format!("unknown formula operator `{other}`"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn var_names_round_trip() {
        for v in [
            SetVar::grid(3, q(2, 5)),
            SetVar::grid(0, q(0, 1)),
            SetVar::Bound { binder: 1, tag: 2, index: 3 },
            SetVar::named("X1"),
        ] {
            assert_eq!(parse_var_name(&var_name(&v, None)).unwrap(), v);
        }
        assert_eq!(parse_var_name("Z[0][2/4]").unwrap(), SetVar::grid(0, q(1, 2)));
        assert!(parse_var_name("Z[0]").is_err());
        assert!(parse_var_name("Y[0][1]").is_err());
    }

    #[test]
    fn formula_round_trip() {
        let y = SetTerm::Var(SetVar::Bound { binder: 0, tag: 1, index: 0 });
        let g = MbaFormula::SupChain(
            Box::new(ChainSpec {
                binder: 0,
                chains: vec![Chain {
                    tag: 1,
                    bounds: vec![SetTerm::Inter(vec![SetTerm::Var(SetVar::grid(0, q(1, 2))), SetTerm::Full])],
                }],
                joint: vec![JointBound {
                    members: vec![(1, 0)],
                    bound: SetTerm::Lit(0b101),
                }],
            }),
            Box::new(MbaFormula::Max(vec![
                MbaFormula::scale(q(1, 3), MbaFormula::measure(SetTerm::compl(y.clone()))),
                MbaFormula::sub(
                    MbaFormula::Const(q(1, 2)),
                    MbaFormula::measure(SetTerm::sym_diff(y, SetTerm::diff(SetTerm::Empty, SetTerm::named("A")))),
                ),
                MbaFormula::Min(vec![MbaFormula::add(MbaFormula::Const(q(0, 1)), MbaFormula::Const(q(1, 1)))]),
                MbaFormula::measure(SetTerm::Union(vec![])),
            ])),
        );
        let v = to_value(&g, None);
        assert_eq!(from_value(&v).unwrap(), g);
    }

    #[test]
    fn rejects_malformed_documents() {
        assert!(from_value(&json!({"add": [{"const": "1"}]})).is_err());
        assert!(from_value(&json!({"bogus": 1})).is_err());
        assert!(from_value(&json!({"const": "x"})).is_err());
        assert!(set_from_value(&json!("nothing")).is_err());
    }
}
