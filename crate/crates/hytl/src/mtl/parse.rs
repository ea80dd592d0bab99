//! Recursive-descent parser for the textual formula syntax.
//!
//! ```text
//! or     := and ('|' and)*
//! and    := until ('&' until)*
//! until  := unary ('U' interval unary)?
//! unary  := '!' unary | 'F' interval unary | 'G' interval unary
//!         | '(' or ')' | 'true' | 'false' | atom
//! atom   := term (('+' | '-') term)* ('>=' | '>' | '<=' | '<') number
//! term   := [number '*'] 'x' digits | '-' 'x' digits
//! interval := ('[' | '(') number ',' (number | 'inf') (']' | ')')
//! ```

use super::{Cmp, Formula, Interval, MtlError, Predicate};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Var(usize),
    Ident(String),
    Sym(&'static str),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, MtlError> {
    let b = src.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    let err = |pos: usize, msg: &str| MtlError::Parse {
        pos,
        msg: msg.to_string(),
    };
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == b'.' {
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && b[j].is_ascii_digit() {
                    i = j;
                    while i < b.len() && b[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let v: f64 = src[start..i]
                .parse()
                .map_err(|_| err(start, "malformed number"))?;
            out.push((start, Tok::Num(v)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            let word = &src[start..i];
            let tok = match word.strip_prefix('x') {
                Some(d) if !d.is_empty() && d.bytes().all(|c| c.is_ascii_digit()) => {
                    let k: usize = d.parse().map_err(|_| err(start, "bad variable index"))?;
                    if k == 0 {
                        return Err(err(start, "variables are numbered from x1"));
                    }
                    Tok::Var(k - 1)
                }
                _ => Tok::Ident(word.to_string()),
            };
            out.push((start, tok));
            continue;
        }
        let two = if i + 1 < b.len() { &src[i..i + 2] } else { "" };
        let sym: &'static str = match two {
            ">=" => ">=",
            "<=" => "<=",
            "&&" => "&",
            "||" => "|",
            _ => match c {
                b'>' => ">",
                b'<' => "<",
                b'(' => "(",
                b')' => ")",
                b'[' => "[",
                b']' => "]",
                b',' => ",",
                b'!' | b'~' => "!",
                b'&' => "&",
                b'|' => "|",
                b'*' => "*",
                b'+' => "+",
                b'-' => "-",
                _ => return Err(err(i, &format!("unexpected character {:?}", c as char))),
            },
        };
        i += if matches!(two, ">=" | "<=" | "&&" | "||") { 2 } else { 1 };
        out.push((start, Tok::Sym(sym)));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn at(&self) -> usize {
        self.toks.get(self.pos).map_or(self.len, |t| t.0)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, MtlError> {
        Err(MtlError::Parse {
            pos: self.at(),
            msg: msg.into(),
        })
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(x)) if *x == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), MtlError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected {s:?}"))
        }
    }

    fn is_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == s)
    }

    fn number(&mut self) -> Result<f64, MtlError> {
        let neg = if self.eat_sym("-") {
            true
        } else {
            self.eat_sym("+");
            false
        };
        let v = match self.peek() {
            Some(Tok::Num(v)) => *v,
            Some(Tok::Ident(w)) if w == "inf" => f64::INFINITY,
            _ => return self.err("expected a number"),
        };
        self.pos += 1;
        Ok(if neg { -v } else { v })
    }

    fn interval(&mut self) -> Result<Interval, MtlError> {
        let lo_open = if self.eat_sym("(") {
            true
        } else if self.eat_sym("[") {
            false
        } else {
            return self.err("expected '[' or '(' opening an interval");
        };
        let lo = self.number()?;
        self.expect_sym(",")?;
        let hi = self.number()?;
        let hi_open = if self.eat_sym(")") {
            true
        } else if self.eat_sym("]") {
            false
        } else {
            return self.err("expected ']' or ')' closing an interval");
        };
        let iv = Interval {
            lo,
            hi,
            lo_open,
            hi_open,
        };
        iv.validate()?;
        Ok(iv)
    }

    fn or(&mut self) -> Result<Formula, MtlError> {
        let mut f = self.and()?;
        while self.eat_sym("|") {
            let r = self.and()?;
            f = Formula::or(f, r);
        }
        Ok(f)
    }

    fn and(&mut self) -> Result<Formula, MtlError> {
        let mut f = self.until()?;
        while self.eat_sym("&") {
            let r = self.until()?;
            f = Formula::and(f, r);
        }
        Ok(f)
    }

    fn until(&mut self) -> Result<Formula, MtlError> {
        let f = self.unary()?;
        if self.is_ident("U") {
            self.pos += 1;
            let iv = self.interval()?;
            let r = self.unary()?;
            return Ok(Formula::until(f, iv, r));
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula, MtlError> {
        if self.eat_sym("!") {
            return Ok(Formula::not(self.unary()?));
        }
        if self.eat_sym("(") {
            let f = self.or()?;
            self.expect_sym(")")?;
            return Ok(f);
        }
        for (name, always) in [("F", false), ("G", true)] {
            if self.is_ident(name) {
                self.pos += 1;
                let iv = self.interval()?;
                let f = self.unary()?;
                return Ok(if always {
                    Formula::always(iv, f)
                } else {
                    Formula::eventually(iv, f)
                });
            }
        }
        if self.is_ident("true") {
            self.pos += 1;
            return Ok(Formula::True);
        }
        if self.is_ident("false") {
            self.pos += 1;
            return Ok(Formula::not(Formula::True));
        }
        self.atom()
    }

    fn term(&mut self, sign: f64) -> Result<(usize, f64), MtlError> {
        let mut w = sign;
        if self.eat_sym("-") {
            w = -w;
        }
        if let Some(Tok::Num(v)) = self.peek() {
            w *= *v;
            self.pos += 1;
            self.expect_sym("*")?;
        }
        match self.peek() {
            Some(Tok::Var(j)) => {
                let j = *j;
                self.pos += 1;
                Ok((j, w))
            }
            _ => self.err("expected a variable such as x1"),
        }
    }

    fn atom(&mut self) -> Result<Formula, MtlError> {
        let mut terms = vec![self.term(1.0)?];
        loop {
            if self.eat_sym("+") {
                terms.push(self.term(1.0)?);
            } else if self.eat_sym("-") {
                terms.push(self.term(-1.0)?);
            } else {
                break;
            }
        }
        let cmp = if self.eat_sym(">=") || self.eat_sym(">") {
            Cmp::Ge
        } else if self.eat_sym("<=") || self.eat_sym("<") {
            Cmp::Le
        } else {
            return self.err("expected a comparison");
        };
        let bound = self.number()?;
        if !bound.is_finite() {
            return self.err("predicate bound must be finite");
        }
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (j, w) in terms {
            match merged.iter_mut().find(|t| t.0 == j) {
                Some(t) => t.1 += w,
                None => merged.push((j, w)),
            }
        }
        if merged.iter().all(|t| t.1 == 0.0) {
            return self.err("predicate has no nonzero coefficient");
        }
        Ok(Formula::Atom(Predicate {
            terms: merged,
            cmp,
            bound,
        }))
    }
}

/// Parse a formula from text.
pub fn parse(src: &str) -> Result<Formula, MtlError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        len: src.len(),
    };
    let f = p.or()?;
    if p.pos != p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(f)
}
