//! Affine hybrid automata: model types, closed-form flows and simulation.
//!
//! Each location carries dynamics `x' = A x + b` and a polyhedral invariant.
//! Deterministic events fire as soon as their guard is reached; nondeterministic
//! events fire only when an external schedule asks for them.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, affine_propagator, Mat, Vector};

#[derive(Debug, Error)]
pub enum HybridError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("unknown location {0:?}")]
    UnknownLocation(String),
    #[error("unknown event {0:?}")]
    UnknownEvent(String),
    #[error("deadlock in location {location:?} at t={time}: invariant left with no event enabled")]
    Deadlock { location: String, time: f64 },
    #[error("non-finite state in location {location:?} at t={time}")]
    NonFinite { location: String, time: f64 },
    #[error("scheduled event {event:?} at t={time} is not enabled in location {location:?}")]
    NotEnabled {
        event: String,
        location: String,
        time: f64,
    },
    #[error("more than {0} events in one run")]
    TooManyEvents(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HybridError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=", alias = "le")]
    Le,
    #[serde(rename = ">=", alias = "ge")]
    Ge,
    #[serde(rename = "==", alias = "eq")]
    Eq,
}

/// `coeffs . x  rel  bound`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    pub rel: Relation,
    pub bound: f64,
}

impl LinearConstraint {
    pub fn new(coeffs: Vec<f64>, rel: Relation, bound: f64) -> Self {
        Self { coeffs, rel, bound }
    }

    /// Constraint on a single coordinate (0-based) of an `n`-dimensional state.
    pub fn coord(n: usize, j: usize, rel: Relation, bound: f64) -> Self {
        let mut coeffs = vec![0.0; n];
        coeffs[j] = 1.0;
        Self::new(coeffs, rel, bound)
    }

    /// `coeffs . x - bound`
    pub fn value(&self, x: &Vector) -> f64 {
        self.coeffs.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>() - self.bound
    }

    pub fn holds(&self, x: &Vector, tol: f64) -> bool {
        let v = self.value(x);
        match self.rel {
            Relation::Le => v <= tol,
            Relation::Ge => v >= -tol,
            Relation::Eq => v.abs() <= tol,
        }
    }

    pub fn normal(&self) -> Vector {
        Vector::from_column_slice(&self.coeffs)
    }
}

pub fn all_hold(cs: &[LinearConstraint], x: &Vector, tol: f64) -> bool {
    cs.iter().all(|c| c.holds(x, tol))
}

/// `x -> R x + d`; a missing `R` is the identity and a missing `d` is zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineReset {
    #[serde(default, with = "linalg::opt_rows", skip_serializing_if = "Option::is_none")]
    pub r: Option<Mat>,
    #[serde(default, with = "linalg::opt_vector", skip_serializing_if = "Option::is_none")]
    pub d: Option<Vector>,
}

impl AffineReset {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn translation(d: Vector) -> Self {
        Self { r: None, d: Some(d) }
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        let y = match &self.r {
            Some(r) => r * x,
            None => x.clone(),
        };
        match &self.d {
            Some(d) => y + d,
            None => y,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    #[serde(with = "linalg::rows")]
    pub a: Mat,
    #[serde(with = "linalg::vector")]
    pub b: Vector,
    #[serde(default)]
    pub invariant: Vec<LinearConstraint>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    #[default]
    Deterministic,
    Nondeterministic,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Event {
    pub id: String,
    pub source: String,
    pub target: String,
    #[serde(default)]
    pub guard: Vec<LinearConstraint>,
    #[serde(default)]
    pub reset: AffineReset,
    /// Output symbol; `None` is the silent output.
    #[serde(default)]
    pub symbol: Option<String>,
    #[serde(default)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct AutomatonDoc {
    dim: usize,
    locations: Vec<Location>,
    events: Vec<Event>,
}

/// Validated hybrid automaton.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "AutomatonDoc", into = "AutomatonDoc")]
pub struct HybridAutomaton {
    dim: usize,
    locations: Vec<Location>,
    events: Vec<Event>,
    loc_index: HashMap<String, usize>,
    event_index: HashMap<String, usize>,
    event_src: Vec<usize>,
    event_dst: Vec<usize>,
    outgoing: Vec<Vec<usize>>,
}

impl From<HybridAutomaton> for AutomatonDoc {
    fn from(h: HybridAutomaton) -> Self {
        AutomatonDoc {
            dim: h.dim,
            locations: h.locations,
            events: h.events,
        }
    }
}

impl TryFrom<AutomatonDoc> for HybridAutomaton {
    type Error = HybridError;
    fn try_from(d: AutomatonDoc) -> Result<Self> {
        HybridAutomaton::new(d.dim, d.locations, d.events)
    }
}

fn check_constraints(n: usize, cs: &[LinearConstraint], what: &str) -> Result<()> {
    for c in cs {
        if c.coeffs.len() != n {
            return Err(HybridError::Dimension(format!(
                "{what}: constraint has {} coefficients, expected {n}",
                c.coeffs.len()
            )));
        }
        if !c.bound.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(HybridError::Invalid(format!("{what}: non-finite constraint")));
        }
    }
    Ok(())
}

impl HybridAutomaton {
    pub fn new(dim: usize, locations: Vec<Location>, events: Vec<Event>) -> Result<Self> {
        if dim == 0 {
            return Err(HybridError::Dimension("state dimension must be positive".into()));
        }
        let mut loc_index = HashMap::new();
        for (i, l) in locations.iter().enumerate() {
            if l.a.nrows() != dim || l.a.ncols() != dim {
                return Err(HybridError::Dimension(format!(
                    "location {:?}: A is {}x{}, expected {dim}x{dim}",
                    l.id,
                    l.a.nrows(),
                    l.a.ncols()
                )));
            }
            if l.b.len() != dim {
                return Err(HybridError::Dimension(format!(
                    "location {:?}: b has length {}, expected {dim}",
                    l.id,
                    l.b.len()
                )));
            }
            if l.a.iter().chain(l.b.iter()).any(|v| !v.is_finite()) {
                return Err(HybridError::Invalid(format!("location {:?}: non-finite dynamics", l.id)));
            }
            check_constraints(dim, &l.invariant, &format!("invariant of {:?}", l.id))?;
            if loc_index.insert(l.id.clone(), i).is_some() {
                return Err(HybridError::Invalid(format!("duplicate location id {:?}", l.id)));
            }
        }
        let mut event_index = HashMap::new();
        let mut event_src = Vec::with_capacity(events.len());
        let mut event_dst = Vec::with_capacity(events.len());
        let mut outgoing = vec![Vec::new(); locations.len()];
        for (i, e) in events.iter().enumerate() {
            let s = *loc_index
                .get(&e.source)
                .ok_or_else(|| HybridError::UnknownLocation(e.source.clone()))?;
            let t = *loc_index
                .get(&e.target)
                .ok_or_else(|| HybridError::UnknownLocation(e.target.clone()))?;
            check_constraints(dim, &e.guard, &format!("guard of {:?}", e.id))?;
            if let Some(r) = &e.reset.r {
                if r.nrows() != dim || r.ncols() != dim {
                    return Err(HybridError::Dimension(format!("reset matrix of {:?}", e.id)));
                }
            }
            if let Some(d) = &e.reset.d {
                if d.len() != dim {
                    return Err(HybridError::Dimension(format!("reset offset of {:?}", e.id)));
                }
            }
            if event_index.insert(e.id.clone(), i).is_some() {
                return Err(HybridError::Invalid(format!("duplicate event id {:?}", e.id)));
            }
            event_src.push(s);
            event_dst.push(t);
            outgoing[s].push(i);
        }
        Ok(Self {
            dim,
            locations,
            events,
            loc_index,
            event_index,
            event_src,
            event_dst,
            outgoing,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn location(&self, i: usize) -> &Location {
        &self.locations[i]
    }

    pub fn event(&self, i: usize) -> &Event {
        &self.events[i]
    }

    pub fn location_index(&self, id: &str) -> Result<usize> {
        self.loc_index
            .get(id)
            .copied()
            .ok_or_else(|| HybridError::UnknownLocation(id.to_string()))
    }

    pub fn event_index(&self, id: &str) -> Result<usize> {
        self.event_index
            .get(id)
            .copied()
            .ok_or_else(|| HybridError::UnknownEvent(id.to_string()))
    }

    pub fn event_source(&self, e: usize) -> usize {
        self.event_src[e]
    }

    pub fn event_target(&self, e: usize) -> usize {
        self.event_dst[e]
    }

    pub fn outgoing(&self, loc: usize) -> &[usize] {
        &self.outgoing[loc]
    }

    /// Closed-form flow of location `loc` from `x0` for clock time `tau`.
    pub fn flow(&self, loc: usize, x0: &Vector, tau: f64) -> Vector {
        let l = &self.locations[loc];
        let (phi, c) = affine_propagator(&l.a, &l.b, tau);
        phi * x0 + c
    }

    /// Flow of `loc` sampled at `i * step` for `i = 0..=ceil(t_end/step)`.
    pub fn sample_flow(&self, loc: usize, x0: &Vector, t_end: f64, step: f64) -> Vec<Vector> {
        let n = (t_end / step - 1e-9).ceil().max(0.0) as usize;
        let l = &self.locations[loc];
        let (phi, c) = affine_propagator(&l.a, &l.b, step);
        let mut out = Vec::with_capacity(n + 1);
        let mut x = x0.clone();
        out.push(x.clone());
        for _ in 0..n {
            x = &phi * &x + &c;
            out.push(x.clone());
        }
        out
    }
}

fn default_step() -> f64 {
    0.05
}
fn default_event_tol() -> f64 {
    1e-9
}
fn default_invariant_tol() -> f64 {
    1e-6
}
fn default_max_events() -> usize {
    10_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimConfig {
    /// Absolute end time of the run.
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    /// Event-time accuracy of the bisection.
    #[serde(default = "default_event_tol")]
    pub event_tol: f64,
    #[serde(default = "default_invariant_tol")]
    pub invariant_tol: f64,
    #[serde(default = "default_max_events")]
    pub max_events: usize,
}

impl SimConfig {
    pub fn with_horizon(horizon: f64) -> Self {
        Self {
            horizon,
            step: default_step(),
            event_tol: default_event_tol(),
            invariant_tol: default_invariant_tol(),
            max_events: default_max_events(),
        }
    }
}

/// External request to take a nondeterministic event at an absolute time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub time: f64,
    pub event: String,
}

/// One maximal stretch of continuous evolution inside a location.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Segment {
    /// Event that entered this segment; `None` for the first segment.
    pub event: Option<String>,
    pub location: String,
    /// Absolute entry time.
    pub start: f64,
    pub dwell: f64,
    /// Reset initial state.
    #[serde(with = "linalg::vector")]
    pub x0: Vector,
    /// Sample clock times: `k * step`, followed by `dwell` if it is off-grid.
    pub clock: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Segment {
    /// Linear interpolation between samples; clamps outside `[0, dwell]`.
    pub fn state_at(&self, tau: f64) -> Vector {
        let n = self.clock.len();
        if n == 0 {
            return self.x0.clone();
        }
        if tau <= self.clock[0] {
            return Vector::from_column_slice(&self.states[0]);
        }
        if tau >= self.clock[n - 1] {
            return Vector::from_column_slice(&self.states[n - 1]);
        }
        let i = self.clock.partition_point(|&c| c <= tau) - 1;
        let (t0, t1) = (self.clock[i], self.clock[i + 1]);
        let w = if t1 > t0 { (tau - t0) / (t1 - t0) } else { 0.0 };
        let a = Vector::from_column_slice(&self.states[i]);
        let b = Vector::from_column_slice(&self.states[i + 1]);
        a * (1.0 - w) + b * w
    }

    pub fn end_state(&self) -> Vector {
        Vector::from_column_slice(self.states.last().expect("segment has samples"))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub segments: Vec<Segment>,
    pub horizon: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedSymbol {
    pub time: f64,
    pub symbol: String,
}

impl Trajectory {
    /// Observable output: the symbols of the events between segments.
    pub fn outputs(&self, ha: &HybridAutomaton) -> Vec<TimedSymbol> {
        self.segments
            .iter()
            .filter_map(|s| {
                let e = s.event.as_ref()?;
                let idx = ha.event_index(e).ok()?;
                let sym = ha.event(idx).symbol.clone()?;
                Some(TimedSymbol {
                    time: s.start,
                    symbol: sym,
                })
            })
            .collect()
    }

    /// Segment index and clock time at absolute time `t`.
    pub fn locate(&self, t: f64) -> Option<(usize, f64)> {
        let i = self
            .segments
            .iter()
            .rposition(|s| s.start <= t + 1e-12)?;
        let s = &self.segments[i];
        Some((i, (t - s.start).clamp(0.0, s.dwell)))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let n = self.segments.first().map_or(0, |s| s.x0.len());
        let mut header = vec![
            "segment".to_string(),
            "location".into(),
            "time".into(),
            "clock".into(),
        ];
        header.extend((1..=n).map(|i| format!("x{i}")));
        wr.write_record(&header)?;
        for (k, s) in self.segments.iter().enumerate() {
            for (c, x) in s.clock.iter().zip(&s.states) {
                let mut rec = vec![
                    k.to_string(),
                    s.location.clone(),
                    format!("{}", s.start + c),
                    format!("{c}"),
                ];
                rec.extend(x.iter().map(|v| format!("{v}")));
                wr.write_record(&rec)?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// How a single-location run ended.
#[derive(Clone, Debug, PartialEq)]
pub enum RunEnd {
    /// Event index taken.
    Event(usize),
    /// The clock limit was reached.
    Limit,
}

#[derive(Clone, Debug)]
pub struct LocationRun {
    pub end: RunEnd,
    pub dwell: f64,
    /// State just before the event (or at the limit).
    pub state: Vector,
    pub clock: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Step propagators cached per location for a fixed grid step.
pub struct Simulator<'a> {
    ha: &'a HybridAutomaton,
    cfg: SimConfig,
    props: Vec<(Mat, Vector)>,
}

impl<'a> Simulator<'a> {
    pub fn new(ha: &'a HybridAutomaton, cfg: SimConfig) -> Self {
        let props = ha
            .locations
            .iter()
            .map(|l| affine_propagator(&l.a, &l.b, cfg.step))
            .collect();
        Self { ha, cfg, props }
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn automaton(&self) -> &'a HybridAutomaton {
        self.ha
    }

    fn advance(&self, loc: usize, x: &Vector, dt: f64) -> Vector {
        if dt == self.cfg.step {
            let (p, c) = &self.props[loc];
            p * x + c
        } else {
            self.ha.flow(loc, x, dt)
        }
    }

    /// Earliest deterministic event of `loc` reached within `(0, dt]` from `x`.
    fn first_trigger(&self, loc: usize, x: &Vector, x_end: &Vector, dt: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for &e in self.ha.outgoing(loc) {
            let ev = &self.ha.events[e];
            if ev.kind != EventKind::Deterministic || ev.guard.is_empty() {
                continue;
            }
            if let Some(t) = self.crossing(loc, &ev.guard, x, x_end, dt) {
                if best.is_none_or(|(_, bt)| t < bt) {
                    best = Some((e, t));
                }
            }
        }
        best
    }

    fn crossing(
        &self,
        loc: usize,
        guard: &[LinearConstraint],
        x: &Vector,
        x_end: &Vector,
        dt: f64,
    ) -> Option<f64> {
        let tol = self.cfg.invariant_tol;
        let reached: Box<dyn Fn(&Vector) -> bool> =
            match guard.iter().position(|c| c.rel == Relation::Eq) {
                Some(ei) => {
                    let v0 = guard[ei].value(x);
                    if v0 == 0.0 {
                        return None;
                    }
                    let s0 = v0.signum();
                    let eq = guard[ei].clone();
                    Box::new(move |y: &Vector| eq.value(y) * s0 <= 0.0)
                }
                None => {
                    if all_hold(guard, x, 0.0) {
                        return None;
                    }
                    Box::new(|y: &Vector| all_hold(guard, y, 0.0))
                }
            };
        if !reached(x_end) {
            return None;
        }
        let (mut lo, mut hi) = (0.0, dt);
        while hi - lo > self.cfg.event_tol {
            let mid = 0.5 * (lo + hi);
            if reached(&self.ha.flow(loc, x, mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let y = self.ha.flow(loc, x, hi);
        // remaining (non-crossing) constraints must hold at the crossing point
        if all_hold(guard, &y, tol.max(1e-9)) {
            Some(hi)
        } else {
            None
        }
    }

    /// Evolve in `loc` from `x0` until a deterministic event, the scheduled
    /// event (clock time, event index), or clock `limit`.
    pub fn run_location(
        &self,
        loc: usize,
        x0: &Vector,
        limit: f64,
        scheduled: Option<(f64, usize)>,
        record: bool,
    ) -> Result<LocationRun> {
        let l = &self.ha.locations[loc];
        let h = self.cfg.step;
        let mut clock = Vec::new();
        let mut states = Vec::new();
        if record {
            clock.push(0.0);
            states.push(x0.as_slice().to_vec());
        }
        // inequality guards already satisfied on entry fire at once
        for &e in self.ha.outgoing(loc) {
            let ev = &self.ha.events[e];
            if ev.kind == EventKind::Deterministic
                && !ev.guard.is_empty()
                && ev.guard.iter().all(|c| c.rel != Relation::Eq)
                && all_hold(&ev.guard, x0, 0.0)
            {
                return Ok(LocationRun {
                    end: RunEnd::Event(e),
                    dwell: 0.0,
                    state: x0.clone(),
                    clock,
                    states,
                });
            }
        }
        let mut x = x0.clone();
        let mut k: u64 = 0;
        loop {
            let tau = k as f64 * h;
            let mut dt = h;
            let mut stop_limit = false;
            let mut stop_sched = None;
            if tau + dt >= limit {
                dt = (limit - tau).max(0.0);
                stop_limit = true;
            }
            if let Some((ts, e)) = scheduled {
                if ts <= tau + dt {
                    dt = (ts - tau).max(0.0);
                    stop_sched = Some(e);
                    stop_limit = false;
                }
            }
            let x_next = self.advance(loc, &x, dt);
            if !linalg::all_finite(&x_next) {
                return Err(HybridError::NonFinite {
                    location: l.id.clone(),
                    time: tau + dt,
                });
            }
            if dt > 0.0 {
                if let Some((e, t)) = self.first_trigger(loc, &x, &x_next, dt) {
                    let y = self.ha.flow(loc, &x, t);
                    if record {
                        clock.push(tau + t);
                        states.push(y.as_slice().to_vec());
                    }
                    return Ok(LocationRun {
                        end: RunEnd::Event(e),
                        dwell: tau + t,
                        state: y,
                        clock,
                        states,
                    });
                }
            }
            if let Some(e) = stop_sched {
                let ev = &self.ha.events[e];
                if !all_hold(&ev.guard, &x_next, self.cfg.invariant_tol) {
                    return Err(HybridError::NotEnabled {
                        event: ev.id.clone(),
                        location: l.id.clone(),
                        time: tau + dt,
                    });
                }
                if record && dt > 0.0 {
                    clock.push(tau + dt);
                    states.push(x_next.as_slice().to_vec());
                }
                return Ok(LocationRun {
                    end: RunEnd::Event(e),
                    dwell: tau + dt,
                    state: x_next,
                    clock,
                    states,
                });
            }
            if !all_hold(&l.invariant, &x_next, self.cfg.invariant_tol) {
                return Err(HybridError::Deadlock {
                    location: l.id.clone(),
                    time: tau + dt,
                });
            }
            if record && (dt > 0.0 || clock.is_empty()) {
                clock.push(tau + dt);
                states.push(x_next.as_slice().to_vec());
            }
            if stop_limit {
                return Ok(LocationRun {
                    end: RunEnd::Limit,
                    dwell: tau + dt,
                    state: x_next,
                    clock,
                    states,
                });
            }
            x = x_next;
            k += 1;
        }
    }

    /// Hybrid run from `(location, x0)` at time 0 up to the horizon.
    pub fn simulate(
        &self,
        init_location: &str,
        x0: &Vector,
        schedule: &[ScheduledEvent],
    ) -> Result<Trajectory> {
        let ha = self.ha;
        if x0.len() != ha.dim {
            return Err(HybridError::Dimension(format!(
                "initial state has length {}, expected {}",
                x0.len(),
                ha.dim
            )));
        }
        let mut sched: Vec<(f64, usize)> = schedule
            .iter()
            .map(|s| Ok((s.time, ha.event_index(&s.event)?)))
            .collect::<Result<_>>()?;
        sched.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut next_sched = 0usize;

        let mut loc = ha.location_index(init_location)?;
        let mut x = x0.clone();
        let mut start = 0.0;
        let mut entered_by: Option<String> = None;
        let mut segments = Vec::new();
        for _ in 0..=self.cfg.max_events {
            let pending = sched.get(next_sched).copied();
            // a due event whose source is not the current location is reported below
            let scheduled = match pending {
                Some((t, e)) if t < self.cfg.horizon => Some((t - start, e)),
                _ => None,
            };
            let run = self.run_location(loc, &x, self.cfg.horizon - start, scheduled, true)?;
            if let RunEnd::Event(e) = run.end {
                if Some(e) == pending.map(|p| p.1) && ha.events[e].kind == EventKind::Nondeterministic
                {
                    if ha.event_source(e) != loc {
                        return Err(HybridError::NotEnabled {
                            event: ha.events[e].id.clone(),
                            location: ha.locations[loc].id.clone(),
                            time: start + run.dwell,
                        });
                    }
                    next_sched += 1;
                }
            }
            segments.push(Segment {
                event: entered_by.clone(),
                location: ha.locations[loc].id.clone(),
                start,
                dwell: run.dwell,
                x0: x.clone(),
                clock: run.clock,
                states: run.states,
            });
            match run.end {
                RunEnd::Limit => {
                    return Ok(Trajectory {
                        segments,
                        horizon: self.cfg.horizon,
                        step: self.cfg.step,
                    })
                }
                RunEnd::Event(e) => {
                    start += run.dwell;
                    x = ha.events[e].reset.apply(&run.state);
                    loc = ha.event_target(e);
                    entered_by = Some(ha.events[e].id.clone());
                }
            }
        }
        Err(HybridError::TooManyEvents(self.cfg.max_events))
    }
}

/// Convenience wrapper around [`Simulator::simulate`].
pub fn simulate(
    ha: &HybridAutomaton,
    init_location: &str,
    x0: &Vector,
    schedule: &[ScheduledEvent],
    cfg: &SimConfig,
) -> Result<Trajectory> {
    Simulator::new(ha, cfg.clone()).simulate(init_location, x0, schedule)
}
