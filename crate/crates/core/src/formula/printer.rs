use std::fmt::{self, Write};

use super::{MetricFormula, Term};

pub(super) fn write_term(out: &mut impl Write, t: &Term) -> fmt::Result {
    match t {
        Term::Var(v) => out.write_str(v),
        Term::App(f, args) => {
            write!(out, "{f}(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.write_str(", ")?;
                }
                write_term(out, a)?;
            }
            out.write_char(')')
        }
    }
}

pub(super) fn write_formula(out: &mut impl Write, f: &MetricFormula) -> fmt::Result {
    match f {
        MetricFormula::Atomic(p, args) => {
            write!(out, "{p}(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.write_str(", ")?;
                }
                write_term(out, a)?;
            }
            out.write_char(')')
        }
        MetricFormula::Const(q) => write!(out, "{q}"),
        MetricFormula::Half(a) => {
            out.write_str("half(")?;
            write_formula(out, a)?;
            out.write_char(')')
        }
        MetricFormula::TruncSub(a, b) => {
            out.write_str("sub(")?;
            write_formula(out, a)?;
            out.write_str(", ")?;
            write_formula(out, b)?;
            out.write_char(')')
        }
        MetricFormula::Sup(y, a) => {
            write!(out, "sup {y} . ")?;
            write_formula(out, a)
        }
        MetricFormula::Inf(y, a) => {
            write!(out, "inf {y} . ")?;
            write_formula(out, a)
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::formula::{parse_formula, MetricFormula as F, Signature};
    use crate::rational::q;

    #[test]
    fn prints_dsl() {
        let f = F::sup("y0", F::sub(F::atomic("R", &["x", "y0"]), F::half(F::Const(q(1, 3)))));
        assert_eq!(f.to_string(), "sup y0 . sub(R(x, y0), half(1/3))");
        let sig = Signature::new(&[("R", 2)], &[]).unwrap();
        assert_eq!(parse_formula(&f.to_string(), &sig).unwrap(), f);
    }
}
