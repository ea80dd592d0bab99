//! Formula inference over labelled time-robust tubes.
//!
//! A tube is a nominal segment trajectory, a clock window and a robustness
//! radius. Its margin for a formula is the smallest weak robustness of the
//! nominal trajectory over the window, minus the radius bound that covers
//! every member of the tube; a positive margin certifies that the whole tube
//! is classified. The search walks a fixed list of formula templates and
//! tunes each template's interval and thresholds by particle swarm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bisim;
use crate::linalg::{self, Mat, Vector};
use crate::mtl::{self, Cmp, Formula, Interval, MtlError, Predicate, SampledSignal, View};
use crate::par::{self, Exec};
use crate::pso::{self, PsoConfig};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("tube set needs members of both classes")]
    OneClass,
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("tube {tube}: {source}")]
    Mtl {
        tube: String,
        #[source]
        source: MtlError,
    },
}

pub type Result<T> = std::result::Result<T, InferenceError>;

/// Margins at or below this count as violated.
pub const MARGIN_EPS: f64 = 1e-9;

/// One labelled tube with everything needed to evaluate and sample it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tube {
    pub name: String,
    /// `+1` for the class the formula must accept, `-1` otherwise.
    pub class: i8,
    /// Clock window `[lo, hi]` of the segment, relative to the anchor.
    pub lo: f64,
    pub hi: f64,
    #[serde(with = "linalg::rows")]
    pub a: Mat,
    #[serde(with = "linalg::vector")]
    pub b: Vector,
    #[serde(with = "linalg::vector")]
    pub x0: Vector,
    #[serde(with = "linalg::rows")]
    pub m: Mat,
    pub gamma: f64,
}

impl Tube {
    pub fn gamma_hat(&self) -> f64 {
        bisim::gamma_hat(&self.m, self.gamma)
    }

    pub fn gamma_tilde(&self, j: usize) -> f64 {
        bisim::gamma_tilde(&self.m, self.gamma, j)
    }

    /// Radius bound for `f`: per-coordinate when it reads one coordinate.
    pub fn bound_for(&self, f: &Formula) -> f64 {
        match f.coordinates().as_slice() {
            [j] => self.gamma_tilde(*j),
            [] => 0.0,
            _ => self.gamma_hat(),
        }
    }
}

/// Segment flow from `x0` sampled at `k * step` for `k = 0..len`.
pub fn flow_signal(a: &Mat, b: &Vector, x0: &Vector, step: f64, len: usize) -> SampledSignal {
    let (p, c) = linalg::affine_propagator(a, b, step);
    let mut x = x0.clone();
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        values.push(x.as_slice().to_vec());
        x = &p * &x + &c;
    }
    SampledSignal::new(step, values)
}

/// Tubes together with nominal signals long enough for formulas that look
/// at most `lookahead` ahead.
#[derive(Clone, Debug)]
pub struct TubeSet {
    pub tubes: Vec<Tube>,
    pub step: f64,
    pub lookahead: f64,
    signals: Vec<SampledSignal>,
}

fn grid_range(lo: f64, hi: f64, step: f64) -> (i64, i64) {
    ((lo / step + 1e-9).floor() as i64, (hi / step - 1e-9).ceil() as i64)
}

fn signal_len(hi: f64, step: f64, lookahead: f64) -> usize {
    let last = grid_range(0.0, hi.max(0.0), step).1 + (lookahead / step).ceil() as i64 + 2;
    last.max(1) as usize
}

impl TubeSet {
    pub fn new(tubes: Vec<Tube>, step: f64, lookahead: f64) -> Self {
        let signals = tubes
            .iter()
            .map(|t| flow_signal(&t.a, &t.b, &t.x0, step, signal_len(t.hi, step, lookahead)))
            .collect();
        Self {
            tubes,
            step,
            lookahead,
            signals,
        }
    }

    pub fn signal(&self, i: usize) -> &SampledSignal {
        &self.signals[i]
    }

    /// Nominal margin of tube `i`.
    pub fn margin(&self, i: usize, f: &Formula) -> Result<f64> {
        let t = &self.tubes[i];
        let g = if t.class > 0 { f.clone() } else { Formula::not(f.clone()) };
        let (lo, hi) = grid_range(t.lo, t.hi, self.step);
        let r = mtl::ext_robustness_range(&self.signals[i], &g, lo, hi, View::Weak)
            .map_err(|source| InferenceError::Mtl {
                tube: t.name.clone(),
                source,
            })?;
        let worst = r.into_iter().fold(f64::INFINITY, f64::min);
        Ok(worst - t.bound_for(f))
    }

    pub fn margins(&self, f: &Formula) -> Result<Vec<f64>> {
        (0..self.tubes.len()).map(|i| self.margin(i, f)).collect()
    }
}

/// `zeta` times the number of tubes whose margin is not positive.
pub fn cost(margins: &[f64], zeta: f64) -> f64 {
    zeta * margins.iter().filter(|m| !(**m >= MARGIN_EPS)).count() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    AlwaysGe,
    AlwaysLe,
    EventuallyGe,
    EventuallyLe,
    /// `G[a,b](x >= c1) & G[a,b](x <= c2)`
    AlwaysBand,
    /// `F[a,b](x >= c1) | F[a,b](x <= c2)`
    EventuallyEither,
}

impl Template {
    pub const ALL: [Template; 6] = [
        Template::AlwaysGe,
        Template::AlwaysLe,
        Template::EventuallyGe,
        Template::EventuallyLe,
        Template::AlwaysBand,
        Template::EventuallyEither,
    ];

    fn thresholds(self) -> usize {
        match self {
            Template::AlwaysBand | Template::EventuallyEither => 2,
            _ => 1,
        }
    }

    /// Instantiate with `p = [a, b, c...]`; `a` and `b` are sorted.
    pub fn instantiate(self, j: usize, p: &[f64]) -> Formula {
        let iv = Interval::closed(p[0].min(p[1]), p[0].max(p[1]));
        let atom = |cmp, c| Formula::atom(Predicate::coord(j, cmp, c));
        match self {
            Template::AlwaysGe => Formula::always(iv, atom(Cmp::Ge, p[2])),
            Template::AlwaysLe => Formula::always(iv, atom(Cmp::Le, p[2])),
            Template::EventuallyGe => Formula::eventually(iv, atom(Cmp::Ge, p[2])),
            Template::EventuallyLe => Formula::eventually(iv, atom(Cmp::Le, p[2])),
            Template::AlwaysBand => Formula::and(
                Formula::always(iv, atom(Cmp::Ge, p[2])),
                Formula::always(iv, atom(Cmp::Le, p[3])),
            ),
            Template::EventuallyEither => Formula::or(
                Formula::eventually(iv, atom(Cmp::Ge, p[2])),
                Formula::eventually(iv, atom(Cmp::Le, p[3])),
            ),
        }
    }
}

fn default_zeta() -> f64 {
    1.0
}
fn default_slack() -> f64 {
    0.1
}
fn default_templates() -> Vec<Template> {
    Template::ALL.to_vec()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchConfig {
    #[serde(default)]
    pub pso: PsoConfig,
    /// Coordinates (0-based) to build predicates on.
    pub coordinates: Vec<usize>,
    /// Upper bound on the interval end `b`.
    pub max_time: f64,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    /// Threshold range is the observed range widened by this fraction.
    #[serde(default = "default_slack")]
    pub slack: f64,
    #[serde(default = "default_templates")]
    pub templates: Vec<Template>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TemplateTrial {
    pub template: Template,
    pub coordinate: usize,
    pub formula: Formula,
    pub cost: f64,
    pub min_margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SearchReport {
    pub formula: Formula,
    pub template: Template,
    pub cost: f64,
    pub min_margin: f64,
    pub margins: Vec<f64>,
    pub tubes: Vec<String>,
    /// Zero cost was reached.
    pub found: bool,
    pub evaluations: usize,
    pub trials: Vec<TemplateTrial>,
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn fitness(set: &TubeSet, f: &Formula, zeta: f64) -> (f64, f64) {
    match set.margins(f) {
        Ok(m) => {
            let lo = m.iter().copied().fold(f64::INFINITY, f64::min);
            (cost(&m, zeta), -lo.clamp(-1e300, 1e300))
        }
        Err(_) => (f64::INFINITY, f64::INFINITY),
    }
}

/// Search templates in order and return the first zero-cost formula, or the
/// best one seen when none reaches zero.
pub fn pso_search(set: &TubeSet, cfg: &SearchConfig, exec: Exec) -> Result<SearchReport> {
    if !set.tubes.iter().any(|t| t.class > 0) || !set.tubes.iter().any(|t| t.class < 0) {
        return Err(InferenceError::OneClass);
    }
    if !(cfg.zeta > 0.0) || !(cfg.max_time > 0.0) || cfg.coordinates.is_empty() {
        return Err(InferenceError::Config("need zeta > 0, max_time > 0 and a coordinate".into()));
    }
    if cfg.max_time > set.lookahead + 1e-12 {
        return Err(InferenceError::Config(format!(
            "max_time {} exceeds the signal lookahead {}",
            cfg.max_time, set.lookahead
        )));
    }
    let mut trials = Vec::new();
    let mut evaluations = 0;
    let mut best: Option<(TemplateTrial, Vec<f64>)> = None;
    for (ti, &tpl) in cfg.templates.iter().enumerate() {
        for &j in &cfg.coordinates {
            let (vmin, vmax) = value_range(set, j);
            let span = (vmax - vmin).max(1e-9);
            let (clo, chi) = (vmin - cfg.slack * span, vmax + cfg.slack * span);
            let mut lo = vec![0.0, 0.0];
            let mut hi = vec![cfg.max_time, cfg.max_time];
            for _ in 0..tpl.thresholds() {
                lo.push(clo);
                hi.push(chi);
            }
            let mid = 0.5 * (vmin + vmax);
            let seed_pt: Vec<f64> = [0.0, cfg.max_time]
                .into_iter()
                .chain(std::iter::repeat_n(mid, tpl.thresholds()))
                .collect();
            let pcfg = PsoConfig {
                seed: cfg.pso.seed.wrapping_add((ti * 1000 + j) as u64),
                ..cfg.pso.clone()
            };
            let res = pso::minimize(
                |p| fitness(set, &tpl.instantiate(j, p), cfg.zeta),
                &lo,
                &hi,
                &[seed_pt],
                &pcfg,
                exec,
            );
            evaluations += res.evaluations;
            // prefer the rounded formula when it still classifies
            let rounded: Vec<f64> = res.best.iter().map(|v| round4(*v)).collect();
            let mut formula = tpl.instantiate(j, &rounded);
            let mut margins = set.margins(&formula)?;
            if cost(&margins, cfg.zeta) > res.fitness.0 {
                formula = tpl.instantiate(j, &res.best);
                margins = set.margins(&formula)?;
            }
            let c = cost(&margins, cfg.zeta);
            let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
            log::debug!("template {tpl:?} x{}: {formula} cost {c} min margin {min_margin}", j + 1);
            let trial = TemplateTrial {
                template: tpl,
                coordinate: j,
                formula,
                cost: c,
                min_margin,
            };
            trials.push(trial.clone());
            let improves = best
                .as_ref()
                .is_none_or(|(b, _)| c < b.cost || (c == b.cost && min_margin > b.min_margin));
            if improves {
                best = Some((trial, margins));
            }
            if c == 0.0 {
                break;
            }
        }
        if best.as_ref().is_some_and(|(b, _)| b.cost == 0.0) {
            break;
        }
    }
    let (b, margins) = best.ok_or_else(|| InferenceError::Config("no templates".into()))?;
    Ok(SearchReport {
        formula: b.formula,
        template: b.template,
        cost: b.cost,
        min_margin: b.min_margin,
        margins,
        tubes: set.tubes.iter().map(|t| t.name.clone()).collect(),
        found: b.cost == 0.0,
        evaluations,
        trials,
    })
}

fn value_range(set: &TubeSet, j: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, t) in set.tubes.iter().enumerate() {
        let sig = set.signal(i);
        let (a, _) = grid_range(t.lo, t.hi, set.step);
        let start = a.max(0) as usize;
        for v in sig.values.iter().skip(start) {
            lo = lo.min(v[j]);
            hi = hi.max(v[j]);
        }
    }
    (lo, hi)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TubeCheck {
    pub tube: String,
    pub margin: f64,
    pub samples: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub formula: Formula,
    pub per_tube: Vec<TubeCheck>,
    pub violations: usize,
}

/// Sample members of every tube (start in the open `gamma` ball, clock in
/// the window) and count those whose weak verdict disagrees with the label.
pub fn verify_classification(
    f: &Formula,
    set: &TubeSet,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<ClassificationReport> {
    let neg = Formula::not(f.clone());
    let mut per_tube = Vec::new();
    for (ti, t) in set.tubes.iter().enumerate() {
        let margin = set.margin(ti, f)?;
        let g = if t.class > 0 { f } else { &neg };
        let len = signal_len(t.hi, set.step, set.lookahead);
        let outcomes = par::try_map(exec, samples, |s| -> Result<bool> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((ti as u64) << 32) | s as u64);
            let x = bisim::sample_ball(&t.m, &t.x0, t.gamma, &mut rng);
            let tau = if t.hi > t.lo { rng.random_range(t.lo..=t.hi) } else { t.lo };
            let sig = flow_signal(&t.a, &t.b, &x, set.step, len);
            let v = mtl::sat(&sig, g, tau, View::Weak).map_err(|source| InferenceError::Mtl {
                tube: t.name.clone(),
                source,
            })?;
            Ok(v.satisfied)
        })?;
        let violations = outcomes.iter().filter(|ok| !**ok).count();
        per_tube.push(TubeCheck {
            tube: t.name.clone(),
            margin,
            samples,
            violations,
        });
    }
    let violations = per_tube.iter().map(|c| c.violations).sum();
    Ok(ClassificationReport {
        formula: f.clone(),
        per_tube,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn const_tube(name: &str, class: i8, value: f64, gamma: f64) -> Tube {
        Tube {
            name: name.into(),
            class,
            lo: 0.0,
            hi: 1.0,
            a: Mat::zeros(1, 1),
            b: Vector::zeros(1),
            x0: Vector::from_element(1, value),
            m: Mat::identity(1, 1),
            gamma,
        }
    }

    #[test]
    fn margin_of_constant_signal() {
        // x == 291 over the window, G[0,1](x >= 290.6), gamma_tilde = 0.1
        let set = TubeSet::new(vec![const_tube("t", 1, 291.0, 0.1)], 0.05, 1.0);
        let f = mtl::parse("G[0,1](x1 >= 290.6)").unwrap();
        assert!((set.margin(0, &f).unwrap() - 0.3).abs() < 1e-9);
        assert_eq!(set.margin(0, &Formula::True).unwrap(), f64::INFINITY);
    }

    #[test]
    fn cost_counts_violations() {
        assert_eq!(cost(&[0.5, 1.0], 10.0), 0.0);
        assert_eq!(cost(&[0.5, -1.0], 10.0), 10.0);
        assert_eq!(cost(&[0.0], 10.0), 10.0);
    }

    #[test]
    fn separable_classes_are_found() {
        let set = TubeSet::new(
            vec![const_tube("hi", 1, 2.0, 0.05), const_tube("lo", -1, 1.0, 0.05)],
            0.05,
            2.0,
        );
        let cfg = SearchConfig {
            pso: PsoConfig { iterations: 40, ..Default::default() },
            coordinates: vec![0],
            max_time: 2.0,
            zeta: 1.0,
            slack: 0.1,
            templates: Template::ALL.to_vec(),
        };
        let r = pso_search(&set, &cfg, Exec::Sequential).unwrap();
        assert!(r.found, "{r:?}");
        assert_eq!(r.template, Template::AlwaysGe);
        let Formula::Always(_, p) = &r.formula else { panic!() };
        let Formula::Atom(p) = p.as_ref() else { panic!() };
        assert!(p.bound > 1.05 && p.bound < 1.95);
        let rep = verify_classification(&r.formula, &set, 200, 1, Exec::Sequential).unwrap();
        assert_eq!(rep.violations, 0);
    }

    #[test]
    fn identical_classes_are_flagged() {
        let set = TubeSet::new(
            vec![const_tube("a", 1, 1.0, 0.05), const_tube("b", -1, 1.0, 0.05)],
            0.05,
            1.0,
        );
        let cfg = SearchConfig {
            pso: PsoConfig { iterations: 10, swarm: 10, ..Default::default() },
            coordinates: vec![0],
            max_time: 1.0,
            zeta: 1.0,
            slack: 0.1,
            templates: Template::ALL.to_vec(),
        };
        let r = pso_search(&set, &cfg, Exec::Sequential).unwrap();
        assert!(!r.found);
        assert!(r.cost > 0.0);
    }
}
