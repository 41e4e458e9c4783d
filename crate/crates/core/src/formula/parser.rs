//! Recursive-descent parser for the formula DSL.

use super::{FormulaError, MetricFormula, Signature, Term, RESERVED};
use crate::rational::{in_unit_interval, Q};

/// Parses `text` against `sig` and canonically renames bound variables.
pub fn parse_formula(text: &str, sig: &Signature) -> Result<MetricFormula, FormulaError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, sig };
    let f = p.formula()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(f.canonicalize())
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    sig: &'a Signature,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: impl Into<String>) -> FormulaError {
        FormulaError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), FormulaError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{}`", c as char)))
        }
    }

    fn ident(&mut self) -> Result<String, FormulaError> {
        self.skip_ws();
        let start = self.pos;
        match self.src.get(self.pos) {
            Some(c) if c.is_ascii_alphabetic() || *c == b'_' => self.pos += 1,
            _ => return Err(self.err("expected identifier")),
        }
        while matches!(self.src.get(self.pos), Some(c) if c.is_ascii_alphanumeric() || *c == b'_') {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn integer(&mut self) -> Result<i128, FormulaError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.src.get(self.pos), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| FormulaError::Syntax {
                pos: start,
                msg: "integer too large".into(),
            })
    }

    fn formula(&mut self) -> Result<MetricFormula, FormulaError> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(c) if c.is_ascii_digit() => self.rational(),
            Some(_) => {
                let start = self.pos;
                let name = self.ident()?;
                match name.as_str() {
                    "half" => {
                        self.expect(b'(')?;
                        let a = self.formula()?;
                        self.expect(b')')?;
                        Ok(MetricFormula::half(a))
                    }
                    "sub" => {
                        self.expect(b'(')?;
                        let a = self.formula()?;
                        self.expect(b',')?;
                        let b = self.formula()?;
                        self.expect(b')')?;
                        Ok(MetricFormula::sub(a, b))
                    }
                    "sup" | "inf" => {
                        let y = self.ident()?;
                        if RESERVED.contains(&y.as_str()) || self.is_symbol(&y) {
                            return Err(self.err(format!("`{y}` cannot be bound")));
                        }
                        self.expect(b'.')?;
                        let body = Box::new(self.formula()?);
                        Ok(if name == "sup" {
                            MetricFormula::Sup(y, body)
                        } else {
                            MetricFormula::Inf(y, body)
                        })
                    }
                    _ => self.atom(name, start),
                }
            }
        }
    }

    fn is_symbol(&self, name: &str) -> bool {
        self.sig.predicate_arity(name).is_some() || self.sig.function_arity(name).is_some()
    }

    fn rational(&mut self) -> Result<MetricFormula, FormulaError> {
        let n = self.integer()?;
        let d = if self.peek() == Some(b'/') {
            self.pos += 1;
            let d = self.integer()?;
            if d == 0 {
                return Err(self.err("zero denominator"));
            }
            d
        } else {
            1
        };
        let q = Q::new(n, d);
        if !in_unit_interval(&q) {
            return Err(FormulaError::ConstRange(q));
        }
        Ok(MetricFormula::Const(q))
    }

    fn atom(&mut self, name: String, start: usize) -> Result<MetricFormula, FormulaError> {
        let expected = match self.sig.predicate_arity(&name) {
            Some(a) => a,
            None => {
                self.pos = start;
                return Err(FormulaError::Undeclared(name));
            }
        };
        self.expect(b'(')?;
        let mut args = Vec::new();
        if self.peek() == Some(b')') {
            self.pos += 1;
        } else {
            loop {
                args.push(self.term()?);
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.err("expected `,` or `)`")),
                }
            }
        }
        if args.len() != expected {
            return Err(FormulaError::Arity {
                name,
                expected,
                got: args.len(),
            });
        }
        Ok(MetricFormula::Atomic(name, args))
    }

    fn term(&mut self) -> Result<Term, FormulaError> {
        let name = self.ident()?;
        if self.peek() != Some(b'(') {
            if self.is_symbol(&name) || RESERVED.contains(&name.as_str()) {
                return Err(self.err(format!("symbol `{name}` used as a variable")));
            }
            return Ok(Term::Var(name));
        }
        let expected = self
            .sig
            .function_arity(&name)
            .ok_or_else(|| FormulaError::Undeclared(name.clone()))?;
        self.pos += 1;
        let mut args = vec![self.term()?];
        loop {
            match self.peek() {
                Some(b',') => {
                    self.pos += 1;
                    args.push(self.term()?);
                }
                Some(b')') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.err("expected `,` or `)`")),
            }
        }
        if args.len() != expected {
            return Err(FormulaError::Arity {
                name,
                expected,
                got: args.len(),
            });
        }
        Ok(Term::App(name, args))
    }
}
