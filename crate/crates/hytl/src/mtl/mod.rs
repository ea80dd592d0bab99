//! Metric temporal logic over sampled signals.
//!
//! Formulas are built from half-space predicates on the state, boolean
//! connectives and interval-bounded temporal operators. Besides the usual
//! quantitative semantics there is an extended semantics for signals that
//! are undefined before time zero: the strong view treats missing samples as
//! violating and the weak view as satisfying.

mod eval;
mod parse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use eval::{
    ext_robustness, ext_robustness_range, horizon, robustness, sat, window_offsets, Verdict,
    View,
};
pub use parse::parse;

#[derive(Debug, Error, PartialEq)]
pub enum MtlError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("formula needs the signal at t={needed} but it ends at t={available}")]
    Horizon { needed: f64, available: f64 },
    #[error("formula needs the signal at t={0} < 0")]
    BeforeStart(f64),
    #[error("predicate refers to x{index} but the signal has dimension {dim}")]
    Coordinate { index: usize, dim: usize },
    #[error("invalid interval [{0}, {1}]")]
    Interval(f64, f64),
}

/// Time interval with independently open or closed ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_open: false,
            hi_open: false,
        }
    }

    pub fn validate(&self) -> Result<(), MtlError> {
        if !(self.lo >= 0.0 && self.lo <= self.hi) || self.lo.is_infinite() {
            return Err(MtlError::Interval(self.lo, self.hi));
        }
        Ok(())
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hi = if self.hi.is_infinite() {
            "inf".to_string()
        } else {
            format!("{}", self.hi)
        };
        write!(
            f,
            "{}{},{}{}",
            if self.lo_open { '(' } else { '[' },
            self.lo,
            hi,
            if self.hi_open { ')' } else { ']' }
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Ge,
    Le,
}

/// `sum_j w_j x_j  (>= | <=)  bound`, coordinates 0-based.
#[derive(Clone, Debug, PartialEq)]
pub struct Predicate {
    pub terms: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub bound: f64,
}

impl Predicate {
    pub fn coord(j: usize, cmp: Cmp, bound: f64) -> Self {
        Self {
            terms: vec![(j, 1.0)],
            cmp,
            bound,
        }
    }

    /// Signed distance to the boundary hyperplane, positive inside.
    pub fn signed_dist(&self, x: &[f64]) -> f64 {
        let norm = self.terms.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        let lin: f64 = self.terms.iter().map(|&(j, w)| w * x[j]).sum();
        match self.cmp {
            Cmp::Ge => (lin - self.bound) / norm,
            Cmp::Le => (self.bound - lin) / norm,
        }
    }

    pub fn max_index(&self) -> usize {
        self.terms.iter().map(|t| t.0).max().unwrap_or(0)
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &(j, w)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if w == 1.0 {
                write!(f, "x{}", j + 1)?;
            } else {
                write!(f, "{}*x{}", w, j + 1)?;
            }
        }
        let op = match self.cmp {
            Cmp::Ge => ">=",
            Cmp::Le => "<=",
        };
        write!(f, " {op} {}", self.bound)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Formula {
    True,
    Atom(Predicate),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Until(Box<Formula>, Interval, Box<Formula>),
    Eventually(Interval, Box<Formula>),
    Always(Interval, Box<Formula>),
}

impl Formula {
    pub fn atom(p: Predicate) -> Self {
        Formula::Atom(p)
    }
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }
    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }
    pub fn until(a: Formula, i: Interval, b: Formula) -> Self {
        Formula::Until(Box::new(a), i, Box::new(b))
    }
    pub fn eventually(i: Interval, f: Formula) -> Self {
        Formula::Eventually(i, Box::new(f))
    }
    pub fn always(i: Interval, f: Formula) -> Self {
        Formula::Always(i, Box::new(f))
    }

    /// Coordinates referenced by predicates, sorted and deduplicated.
    pub fn coordinates(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |p| out.extend(p.terms.iter().map(|t| t.0)));
        out.sort_unstable();
        out.dedup();
        out
    }

    fn visit_atoms(&self, f: &mut dyn FnMut(&Predicate)) {
        match self {
            Formula::True => {}
            Formula::Atom(p) => f(p),
            Formula::Not(a) | Formula::Eventually(_, a) | Formula::Always(_, a) => a.visit_atoms(f),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, _, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            Formula::Until(..) => 3,
            _ => 4,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.prec() < min {
            f.write_str("(")?;
            self.write_prec(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Formula::True => f.write_str("true"),
            Formula::Atom(p) => write!(f, "{p}"),
            Formula::Not(a) => write!(f, "!({a})"),
            Formula::Eventually(i, a) => write!(f, "F{i}({a})"),
            Formula::Always(i, a) => write!(f, "G{i}({a})"),
            Formula::Until(a, i, b) => write!(f, "({a}) U{i} ({b})"),
            Formula::And(a, b) => {
                a.write_prec(f, 2)?;
                f.write_str(" & ")?;
                b.write_prec(f, 3)
            }
            Formula::Or(a, b) => {
                a.write_prec(f, 1)?;
                f.write_str(" | ")?;
                b.write_prec(f, 2)
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

impl FromStr for Formula {
    type Err = MtlError;
    fn from_str(s: &str) -> Result<Self, MtlError> {
        parse(s)
    }
}

impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Signal sampled on the uniform grid `t_i = i * step`, `i = 0..len`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSignal {
    pub step: f64,
    pub values: Vec<Vec<f64>>,
}

impl SampledSignal {
    pub fn new(step: f64, values: Vec<Vec<f64>>) -> Self {
        assert!(step > 0.0, "signal step must be positive");
        Self { step, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Last sampled time.
    pub fn end_time(&self) -> f64 {
        self.len().saturating_sub(1) as f64 * self.step
    }

    /// Grid index nearest to `t`.
    pub fn index_of(&self, t: f64) -> i64 {
        (t / self.step).round() as i64
    }
}
