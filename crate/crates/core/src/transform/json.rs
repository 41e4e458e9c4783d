use std::fmt;

use serde_json::{json, Map, Value};

use super::{TransformError, TransformResult};
use crate::formula::{parse_formula, Signature};
use crate::mba::{json as mba_json, Pretty};
use crate::rational::Q;

/// `{"k": 2, "formulas": ["P(x)"], "levels": {"0": 2}, "G": {...}}`, with
/// grid variables written `Z[tag][i/ℓ]` on the tag's own grid.
pub fn result_to_value(r: &TransformResult) -> Value {
    let levels = &r.levels;
    let on_grid = |tag: usize, t: &Q| {
        let l = levels.get(tag).copied().unwrap_or(1) as i128;
        let i = t * Q::from_integer(l);
        if i.is_integer() {
            format!("{}/{}", i.to_integer(), l)
        } else {
            t.to_string()
        }
    };
    let lv: Map<String, Value> = levels
        .iter()
        .enumerate()
        .map(|(i, l)| (i.to_string(), json!(l)))
        .collect();
    json!({
        "k": r.k,
        "formulas": r.formulas.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
        "levels": lv,
        "G": mba_json::to_value(&r.g, Some(&on_grid)),
    })
}

pub fn result_from_value(v: &Value, sig: &Signature) -> Result<TransformResult, TransformError> {
    let bad = |m: &str| TransformError::Document(m.to_string());
    let k = v.get("k").and_then(Value::as_u64).ok_or_else(|| bad("missing `k`"))? as u32;
    let formulas = v
        .get("formulas")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("missing `formulas`"))?
        .iter()
        .map(|f| {
            let s = f.as_str().ok_or_else(|| bad("formulas must be strings"))?;
            parse_formula(s, sig).map_err(|e| TransformError::Document(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let lv = v.get("levels").and_then(Value::as_object).ok_or_else(|| bad("missing `levels`"))?;
    let levels = (0..formulas.len())
        .map(|i| {
            lv.get(&i.to_string())
                .and_then(Value::as_u64)
                .map(|l| l as u32)
                .ok_or_else(|| bad("levels must cover every formula"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let g = mba_json::from_value(v.get("G").ok_or_else(|| bad("missing `G`"))?)
        .map_err(|e| TransformError::Document(e.to_string()))?;
    Ok(TransformResult { k, formulas, levels, g })
}

/// Human-readable listing of `F[φ]`, the levels and `G`.
pub struct PrettyResult<'a>(pub &'a TransformResult);

impl fmt::Display for PrettyResult<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.0;
        writeln!(f, "k = {}", r.k)?;
        for (i, (z, l)) in r.formulas.iter().zip(&r.levels).enumerate() {
            writeln!(f, "ζ{i} = {z}    ℓ = {l}")?;
        }
        write!(
            f,
            "G = {}",
            Pretty {
                formula: &r.g,
                tag_names: None
            }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::transform::transform;

    #[test]
    fn round_trip_and_grid_names() {
        let sig = Signature::new(&[("P", 1), ("Q", 1)], &[]).unwrap();
        for s in ["P(x)", "sub(P(x), Q(x))", "sup y . P(y)"] {
            let r = transform(&parse_formula(s, &sig).unwrap(), 2).unwrap();
            let v = result_to_value(&r);
            assert_eq!(result_from_value(&v, &sig).unwrap(), r);
        }
        let r = transform(&parse_formula("sub(P(x), Q(x))", &sig).unwrap(), 2).unwrap();
        let text = result_to_value(&r).to_string();
        assert!(text.contains("Z[0][3/6]"), "{text}");
        let pretty = PrettyResult(&r).to_string();
        assert!(pretty.contains("ℓ = 6"));
    }
}
