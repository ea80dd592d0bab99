//! Independent oracles and random generators shared by the integration tests.
#![allow(dead_code)]

use hytl::linalg::{Mat, Vector};
use hytl::mtl::{Cmp, Formula, Interval, Predicate, SampledSignal};
use rand::Rng;
use rand_distr::StandardNormal;

const GRID_EPS: f64 = 1e-9;

/// Grid offsets selected by `iv`, found by scanning every candidate offset.
///
/// An endpoint that sits on a grid point honours its bracket; an endpoint
/// between grid points pulls in the neighbouring sample outside it.
pub fn oracle_offsets(iv: &Interval, step: f64, cap: i64) -> Vec<i64> {
    let on_grid = |x: f64| (0..=cap).any(|k| (k as f64 * step - x).abs() < GRID_EPS * step.max(1.0));
    let lo_on = on_grid(iv.lo);
    let hi_on = iv.hi.is_finite() && on_grid(iv.hi);
    (0..=cap)
        .filter(|&k| {
            let t = k as f64 * step;
            let tol = GRID_EPS * step.max(1.0);
            let above_lo = if lo_on {
                if iv.lo_open {
                    t > iv.lo + tol
                } else {
                    t >= iv.lo - tol
                }
            } else {
                t > iv.lo - step
            };
            let below_hi = if iv.hi.is_infinite() {
                true
            } else if hi_on {
                if iv.hi_open {
                    t < iv.hi - tol
                } else {
                    t <= iv.hi + tol
                }
            } else {
                t < iv.hi + step
            };
            above_lo && below_hi
        })
        .collect()
}

fn oracle_dist(p: &Predicate, x: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut norm2 = 0.0;
    for &(j, w) in &p.terms {
        dot += w * x[j];
        norm2 += w * w;
    }
    let d = (dot - p.bound) / norm2.sqrt();
    match p.cmp {
        Cmp::Ge => d,
        Cmp::Le => -d,
    }
}

/// Direct recursive evaluation of the extended semantics at grid index `i`.
/// `strong` selects the view; negation swaps it.
pub fn oracle_robustness(sig: &SampledSignal, f: &Formula, i: i64, strong: bool, cap: i64) -> f64 {
    match f {
        Formula::True => f64::INFINITY,
        Formula::Atom(p) => {
            if i < 0 {
                if strong {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            } else {
                oracle_dist(p, &sig.values[i as usize])
            }
        }
        Formula::Not(a) => -oracle_robustness(sig, a, i, !strong, cap),
        Formula::And(a, b) => {
            oracle_robustness(sig, a, i, strong, cap).min(oracle_robustness(sig, b, i, strong, cap))
        }
        Formula::Or(a, b) => {
            oracle_robustness(sig, a, i, strong, cap).max(oracle_robustness(sig, b, i, strong, cap))
        }
        Formula::Eventually(iv, a) => oracle_offsets(iv, sig.step, cap)
            .into_iter()
            .map(|k| oracle_robustness(sig, a, i + k, strong, cap))
            .fold(f64::NEG_INFINITY, f64::max),
        Formula::Always(iv, a) => oracle_offsets(iv, sig.step, cap)
            .into_iter()
            .map(|k| oracle_robustness(sig, a, i + k, strong, cap))
            .fold(f64::INFINITY, f64::min),
        Formula::Until(a, iv, b) => oracle_offsets(iv, sig.step, cap)
            .into_iter()
            .map(|k| {
                let hold = (i..i + k)
                    .map(|j| oracle_robustness(sig, a, j, strong, cap))
                    .fold(f64::INFINITY, f64::min);
                oracle_robustness(sig, b, i + k, strong, cap).min(hold)
            })
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Equal as extended reals, or within `tol` when both are finite.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol
}

/// `|a - b|` with equal infinities counting as zero.
pub fn ext_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_matrix<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Mat {
    Mat::from_fn(n, n, |_, _| scale * normal(rng))
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vector {
    Vector::from_fn(n, |_, _| scale * normal(rng))
}

/// Random Hurwitz matrix: either negative-definite symmetric part plus a
/// rotation, or a shifted strictly upper-triangular (non-normal) matrix.
pub fn random_hurwitz<R: Rng>(rng: &mut R, n: usize) -> Mat {
    if rng.random_bool(0.5) {
        let b = random_matrix(rng, n, 0.6);
        let s = random_matrix(rng, n, 0.8);
        -(&b * b.transpose()) - Mat::identity(n, n) * 0.2 + (&s - s.transpose())
    } else {
        let alpha = rng.random_range(0.2..2.0);
        let mut a = Mat::identity(n, n) * -alpha;
        for i in 0..n {
            for j in i + 1..n {
                a[(i, j)] = 1.2 * normal(rng);
            }
        }
        a
    }
}

pub fn random_spd<R: Rng>(rng: &mut R, n: usize) -> Mat {
    let c = random_matrix(rng, n, 0.7);
    &c * c.transpose() + Mat::identity(n, n) * 0.3
}

/// Solve `A^T M + M A = -Q` through the `n^2` Kronecker system.
pub fn kronecker_lyapunov(a: &Mat, q: &Mat) -> Mat {
    let n = a.nrows();
    let id = Mat::identity(n, n);
    let at = a.transpose();
    // column-major vec: vec(A^T M) = (I kron A^T) vec M, vec(M A) = (A^T kron I) vec M
    let k = id.kronecker(&at) + at.kronecker(&id);
    let rhs = Vector::from_iterator(n * n, q.iter().map(|v| -v));
    let sol = k.lu().solve(&rhs).expect("Kronecker system is nonsingular for Hurwitz A");
    Mat::from_column_slice(n, n, sol.as_slice())
}

/// Interval on a quarter-step lattice so that on-grid and off-grid endpoints
/// both occur.
pub fn random_interval<R: Rng>(rng: &mut R, step: f64, max_quarters: i64) -> Interval {
    let q0 = rng.random_range(0..=max_quarters);
    let q1 = q0 + rng.random_range(0..=max_quarters);
    Interval {
        lo: q0 as f64 * step / 4.0,
        hi: q1 as f64 * step / 4.0,
        lo_open: rng.random_bool(0.3),
        hi_open: rng.random_bool(0.3),
    }
}

pub fn random_predicate<R: Rng>(rng: &mut R, dim: usize, single: Option<usize>, scale: f64) -> Predicate {
    let cmp = if rng.random_bool(0.5) { Cmp::Ge } else { Cmp::Le };
    let bound = (scale * normal(rng) * 1e4).round() / 1e4;
    match single {
        Some(j) => Predicate::coord(j, cmp, bound),
        None => {
            let mut terms: Vec<(usize, f64)> = Vec::new();
            for j in 0..dim {
                let w = (normal(rng) * 100.0).round() / 100.0;
                if rng.random_bool(0.6) && w != 0.0 {
                    terms.push((j, w));
                }
            }
            if terms.is_empty() {
                terms.push((rng.random_range(0..dim), 1.0));
            }
            Predicate { terms, cmp, bound }
        }
    }
}

/// Options for [`random_formula`].
#[derive(Clone, Copy)]
pub struct FormulaShape {
    pub dim: usize,
    /// Restrict every predicate to this coordinate.
    pub single: Option<usize>,
    pub with_until: bool,
    pub step: f64,
    pub max_quarters: i64,
    pub bound_scale: f64,
}

pub fn random_formula<R: Rng>(rng: &mut R, depth: usize, s: &FormulaShape) -> Formula {
    let leaf = depth == 0 || rng.random_bool(0.25);
    if leaf {
        if rng.random_bool(0.05) {
            return Formula::True;
        }
        return Formula::atom(random_predicate(rng, s.dim, s.single, s.bound_scale));
    }
    let kinds = if s.with_until { 6 } else { 5 };
    let sub = |rng: &mut R| random_formula(rng, depth - 1, s);
    match rng.random_range(0..kinds) {
        0 => Formula::not(sub(rng)),
        1 => Formula::and(sub(rng), sub(rng)),
        2 => Formula::or(sub(rng), sub(rng)),
        3 => Formula::eventually(random_interval(rng, s.step, s.max_quarters), sub(rng)),
        4 => Formula::always(random_interval(rng, s.step, s.max_quarters), sub(rng)),
        _ => Formula::until(sub(rng), random_interval(rng, s.step, s.max_quarters), sub(rng)),
    }
}

pub fn random_signal<R: Rng>(rng: &mut R, dim: usize, len: usize, step: f64) -> SampledSignal {
    // random walk so neighbouring samples are correlated
    let mut x: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
    let values = (0..len)
        .map(|_| {
            for v in &mut x {
                *v += 0.3 * normal(rng);
            }
            x.clone()
        })
        .collect();
    SampledSignal::new(step, values)
}
