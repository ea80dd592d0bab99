//! Quantitative semantics on the sample grid.
//!
//! Evaluation is vectorised over a contiguous range of grid indices; temporal
//! operators use monotone-deque sliding windows. Interval endpoints that fall
//! between grid points are widened to the enclosing samples.

use std::collections::VecDeque;

use super::{Formula, Interval, MtlError, Predicate, SampledSignal};

/// Which completion of a signal that is undefined before time zero to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    Strong,
    Weak,
}

impl View {
    fn flip(self) -> Self {
        match self {
            View::Strong => View::Weak,
            View::Weak => View::Strong,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Domain {
    Classical,
    Extended(View),
}

impl Domain {
    fn negated(self) -> Self {
        match self {
            Domain::Classical => Domain::Classical,
            Domain::Extended(v) => Domain::Extended(v.flip()),
        }
    }
}

/// Grid offsets `(k_lo, k_hi)` covered by `interval`, or `None` if empty.
pub fn window_offsets(iv: &Interval, step: f64) -> Option<(i64, i64)> {
    const EPS: f64 = 1e-9;
    let a = iv.lo / step;
    let klo = if (a - a.round()).abs() < EPS {
        a.round() as i64 + i64::from(iv.lo_open)
    } else {
        a.floor() as i64
    };
    let khi = if iv.hi.is_infinite() {
        i64::MAX / 4
    } else {
        let b = iv.hi / step;
        if (b - b.round()).abs() < EPS {
            b.round() as i64 - i64::from(iv.hi_open)
        } else {
            b.ceil() as i64
        }
    };
    (klo <= khi).then_some((klo, khi))
}

/// Largest look-ahead of the formula in time units.
pub fn horizon(f: &Formula) -> f64 {
    match f {
        Formula::True | Formula::Atom(_) => 0.0,
        Formula::Not(a) => horizon(a),
        Formula::And(a, b) | Formula::Or(a, b) => horizon(a).max(horizon(b)),
        Formula::Eventually(i, a) | Formula::Always(i, a) => i.hi + horizon(a),
        Formula::Until(a, i, b) => i.hi + horizon(a).max(horizon(b)),
    }
}

fn atom_at(sig: &SampledSignal, p: &Predicate, i: i64, dom: Domain) -> Result<f64, MtlError> {
    if i < 0 {
        return match dom {
            Domain::Classical => Err(MtlError::BeforeStart(i as f64 * sig.step)),
            Domain::Extended(View::Strong) => Ok(f64::NEG_INFINITY),
            Domain::Extended(View::Weak) => Ok(f64::INFINITY),
        };
    }
    let iu = i as usize;
    if iu >= sig.len() {
        return Err(MtlError::Horizon {
            needed: i as f64 * sig.step,
            available: sig.end_time(),
        });
    }
    Ok(p.signed_dist(&sig.values[iu]))
}

/// Sliding extremum: `out[i] = ext(child[i + klo ..= i + khi])` where `child`
/// starts at offset `klo` relative to `out`.
fn sliding(child: &[f64], width: usize, n_out: usize, take_max: bool) -> Vec<f64> {
    let better = |a: f64, b: f64| if take_max { a >= b } else { a <= b };
    let mut out = Vec::with_capacity(n_out);
    let mut dq: VecDeque<usize> = VecDeque::new();
    for j in 0..child.len() {
        while let Some(&back) = dq.back() {
            if better(child[j], child[back]) {
                dq.pop_back();
            } else {
                break;
            }
        }
        dq.push_back(j);
        if j + 1 >= width {
            let start = j + 1 - width;
            while let Some(&front) = dq.front() {
                if front < start {
                    dq.pop_front();
                } else {
                    break;
                }
            }
            out.push(child[*dq.front().expect("window is nonempty")]);
        }
    }
    debug_assert_eq!(out.len(), n_out);
    out
}

fn eval_range(
    sig: &SampledSignal,
    f: &Formula,
    lo: i64,
    hi: i64,
    dom: Domain,
) -> Result<Vec<f64>, MtlError> {
    let n = (hi - lo + 1).max(0) as usize;
    match f {
        Formula::True => Ok(vec![f64::INFINITY; n]),
        Formula::Atom(p) => {
            if p.max_index() >= sig.dim() {
                return Err(MtlError::Coordinate {
                    index: p.max_index() + 1,
                    dim: sig.dim(),
                });
            }
            (lo..=hi).map(|i| atom_at(sig, p, i, dom)).collect()
        }
        Formula::Not(a) => Ok(eval_range(sig, a, lo, hi, dom.negated())?
            .into_iter()
            .map(|v| -v)
            .collect()),
        Formula::And(a, b) | Formula::Or(a, b) => {
            let va = eval_range(sig, a, lo, hi, dom)?;
            let vb = eval_range(sig, b, lo, hi, dom)?;
            let is_and = matches!(f, Formula::And(..));
            Ok(va
                .into_iter()
                .zip(vb)
                .map(|(x, y)| if is_and { x.min(y) } else { x.max(y) })
                .collect())
        }
        Formula::Eventually(iv, a) | Formula::Always(iv, a) => {
            let is_f = matches!(f, Formula::Eventually(..));
            let Some((klo, khi)) = window_offsets(iv, sig.step) else {
                let empty = if is_f { f64::NEG_INFINITY } else { f64::INFINITY };
                return Ok(vec![empty; n]);
            };
            if n == 0 {
                return Ok(Vec::new());
            }
            let child = eval_range(sig, a, lo + klo, hi + khi, dom)?;
            Ok(sliding(&child, (khi - klo + 1) as usize, n, is_f))
        }
        Formula::Until(a, iv, b) => {
            let Some((klo, khi)) = window_offsets(iv, sig.step) else {
                return Ok(vec![f64::NEG_INFINITY; n]);
            };
            if n == 0 {
                return Ok(Vec::new());
            }
            let va = eval_range(sig, a, lo, hi + khi, dom)?;
            let vb = eval_range(sig, b, lo + klo, hi + khi, dom)?;
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let mut run = f64::INFINITY;
                let mut best = f64::NEG_INFINITY;
                // run = min of `a` over [i, j)
                for k in 0..klo {
                    run = run.min(va[i + k as usize]);
                }
                for k in klo..=khi {
                    let j = i + k as usize;
                    best = best.max(vb[i + (k - klo) as usize].min(run));
                    run = run.min(va[j]);
                }
                out.push(best);
            }
            Ok(out)
        }
    }
}

fn index_of(sig: &SampledSignal, tau: f64) -> i64 {
    sig.index_of(tau)
}

/// Classical robustness at time `tau`; the signal must cover every time the
/// formula looks at.
pub fn robustness(sig: &SampledSignal, f: &Formula, tau: f64) -> Result<f64, MtlError> {
    let i = index_of(sig, tau);
    Ok(eval_range(sig, f, i, i, Domain::Classical)?[0])
}

/// Extended robustness at time `tau` (which may be negative).
pub fn ext_robustness(
    sig: &SampledSignal,
    f: &Formula,
    tau: f64,
    view: View,
) -> Result<f64, MtlError> {
    let i = index_of(sig, tau);
    Ok(eval_range(sig, f, i, i, Domain::Extended(view))?[0])
}

/// Extended robustness for every grid index in `lo..=hi`.
pub fn ext_robustness_range(
    sig: &SampledSignal,
    f: &Formula,
    lo: i64,
    hi: i64,
    view: View,
) -> Result<Vec<f64>, MtlError> {
    eval_range(sig, f, lo, hi, Domain::Extended(view))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Verdict {
    pub value: f64,
    pub satisfied: bool,
    /// Robustness exactly zero: satisfaction is not decided by the sign.
    pub boundary: bool,
}

/// Satisfaction in the given extended view, decided by the sign of the
/// robustness.
pub fn sat(sig: &SampledSignal, f: &Formula, tau: f64, view: View) -> Result<Verdict, MtlError> {
    let value = ext_robustness(sig, f, tau, view)?;
    Ok(Verdict {
        value,
        satisfied: value > 0.0,
        boundary: value == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Cmp, Formula, Interval, Predicate, SampledSignal};
    use super::*;

    fn ramp(n: usize, step: f64) -> SampledSignal {
        SampledSignal::new(step, (0..n).map(|i| vec![i as f64 * step]).collect())
    }

    #[test]
    fn always_on_ramp_is_window_start() {
        let s = ramp(101, 0.1);
        let f = parse("G[1,2](x1 >= 0.5)").unwrap();
        let r = robustness(&s, &f, 3.0).unwrap();
        assert!((r - 3.5).abs() < 1e-12);
    }

    #[test]
    fn true_is_infinite() {
        let s = ramp(3, 1.0);
        assert_eq!(robustness(&s, &Formula::True, 0.0).unwrap(), f64::INFINITY);
        let nt = Formula::not(Formula::True);
        assert_eq!(ext_robustness(&s, &nt, 0.0, View::Strong).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn extended_views_before_start() {
        // constant x1 = 1 on [0,3]; evaluated at -2 over [0,5]
        let s = SampledSignal::new(0.5, vec![vec![1.0]; 7]);
        let f = parse("G[0,5](x1 >= 0)").unwrap();
        assert_eq!(ext_robustness(&s, &f, -2.0, View::Strong).unwrap(), f64::NEG_INFINITY);
        assert_eq!(ext_robustness(&s, &f, -2.0, View::Weak).unwrap(), 1.0);
        assert!(matches!(robustness(&s, &f, -2.0), Err(MtlError::BeforeStart(_))));
    }

    #[test]
    fn horizon_error_past_end() {
        let s = ramp(11, 0.1);
        let f = parse("F[0,2](x1 >= 0)").unwrap();
        assert!(matches!(robustness(&s, &f, 0.0), Err(MtlError::Horizon { .. })));
    }

    #[test]
    fn off_grid_endpoints_widen() {
        assert_eq!(window_offsets(&Interval::closed(0.12, 0.28), 0.1), Some((1, 3)));
        let open = Interval { lo: 0.1, hi: 0.3, lo_open: true, hi_open: true };
        assert_eq!(window_offsets(&open, 0.1), Some((2, 2)));
        let empty = Interval { lo: 0.1, hi: 0.1, lo_open: true, hi_open: false };
        assert_eq!(window_offsets(&empty, 0.1), None);
    }

    #[test]
    fn until_basic() {
        // x1 ramps; x1 <= 1 holds until x1 >= 0.8
        let s = ramp(31, 0.1);
        let a = Formula::atom(Predicate::coord(0, Cmp::Le, 1.0));
        let b = Formula::atom(Predicate::coord(0, Cmp::Ge, 0.8));
        let f = Formula::until(a, Interval::closed(0.0, 2.0), b);
        let r = robustness(&s, &f, 0.0).unwrap();
        // best witness j near 0.9: min(0.1, 1 - 0.8=0.2 over prefix) = 0.1
        assert!((r - 0.1).abs() < 1e-9, "{r}");
    }
}
