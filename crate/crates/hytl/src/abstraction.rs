//! Single-clock timed automaton built from simulated trajectories.
//!
//! Each state `(k, n)` stands for segment `n` of trajectory `k` (1-based `k`,
//! 0-based `n`). Edges reset the clock. Segment ends become guard windows
//! `[tau - lead, tau + lag]`; the last segment either loops back to the
//! initial segments of the covering trajectories or ends in `EoS`; faults add
//! early exits into other trajectories. Times are exact rationals quantised
//! to a fixed resolution, rounded outward where they bound a window.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Time = Rational64;

#[derive(Debug, Error, PartialEq)]
pub enum AbstractionError {
    #[error("trajectory {0} has no segments")]
    Empty(usize),
    #[error("trajectory {k}: {msg}")]
    Segment { k: usize, msg: String },
    #[error("reference to unknown trajectory {0}")]
    UnknownTrajectory(usize),
    #[error("fault refers to missing segment ({0},{1})")]
    UnknownSegment(usize, usize),
    #[error("trajectory {0} ends in a cover with no targets")]
    EmptyCover(usize),
    #[error("resolution must be positive")]
    Resolution,
    #[error("replay of trajectory {k} fails at segment {n}: {msg}")]
    Replay { k: usize, n: usize, msg: String },
    #[error("bad state name {0:?}")]
    StateName(String),
}

/// Serde helpers writing rationals as `"p/q"` (or `"p"`).
pub mod rat {
    use super::Time;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn to_string(t: &Time) -> String {
        if *t.denom() == 1 {
            t.numer().to_string()
        } else {
            format!("{}/{}", t.numer(), t.denom())
        }
    }

    pub fn parse(s: &str) -> Result<Time, String> {
        let s = s.trim();
        let err = || format!("bad rational {s:?}");
        match s.split_once('/') {
            Some((p, q)) => {
                let p: i64 = p.trim().parse().map_err(|_| err())?;
                let q: i64 = q.trim().parse().map_err(|_| err())?;
                if q == 0 {
                    return Err(err());
                }
                Ok(Time::new(p, q))
            }
            None => s.parse::<i64>().map(Time::from_integer).map_err(|_| err()),
        }
    }

    pub fn serialize<S: Serializer>(t: &Time, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_string(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Time, D::Error> {
        parse(&String::deserialize(d)?).map_err(serde::de::Error::custom)
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(t: &Option<Time>, s: S) -> Result<S::Ok, S::Error> {
            match t {
                Some(t) => s.serialize_some(&to_string(t)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Time>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|v| parse(&v).map_err(serde::de::Error::custom))
                .transpose()
        }
    }
}

/// Round `x` to the grid `res`: down, up or to nearest.
pub fn quantize_down(x: f64, res: Time) -> Time {
    let r = *res.numer() as f64 / *res.denom() as f64;
    let k = (x / r + 1e-9).floor() as i64;
    res * k
}

pub fn quantize_up(x: f64, res: Time) -> Time {
    let r = *res.numer() as f64 / *res.denom() as f64;
    let k = (x / r - 1e-9).ceil() as i64;
    res * k
}

pub fn quantize_nearest(x: f64, res: Time) -> Time {
    let r = *res.numer() as f64 / *res.denom() as f64;
    res * ((x / r).round() as i64)
}

pub fn to_f64(t: Time) -> f64 {
    *t.numer() as f64 / *t.denom() as f64
}

/// Timed-automaton state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaLoc {
    Seg { k: usize, n: usize },
    /// End of simulation.
    Eos,
}

impl TaLoc {
    pub fn seg(k: usize, n: usize) -> Self {
        TaLoc::Seg { k, n }
    }
}

impl fmt::Display for TaLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaLoc::Seg { k, n } => write!(f, "({k},{n})"),
            TaLoc::Eos => f.write_str("EoS"),
        }
    }
}

impl FromStr for TaLoc {
    type Err = AbstractionError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t == "EoS" {
            return Ok(TaLoc::Eos);
        }
        let bad = || AbstractionError::StateName(s.to_string());
        let inner = t.strip_prefix('(').and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?;
        let (k, n) = inner.split_once(',').ok_or_else(bad)?;
        Ok(TaLoc::Seg {
            k: k.trim().parse().map_err(|_| bad())?,
            n: n.trim().parse().map_err(|_| bad())?,
        })
    }
}

impl Serialize for TaLoc {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TaLoc {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Segment `n` to `n + 1` of the same trajectory.
    Nominal,
    /// Last segment back to an initial segment covering its end set.
    Cover,
    /// Last segment of a run that stops at the horizon.
    End,
    /// Early exit into another trajectory.
    Fault,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaEdge {
    pub source: TaLoc,
    pub target: TaLoc,
    #[serde(with = "rat")]
    pub lo: Time,
    #[serde(with = "rat")]
    pub hi: Time,
    /// Observable output, `None` for silent edges.
    pub symbol: Option<String>,
    pub kind: EdgeKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaState {
    pub id: TaLoc,
    /// Clock invariant `[0, upper]`; `None` is unbounded.
    #[serde(with = "rat::opt")]
    pub upper: Option<Time>,
    pub initial: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedAutomaton {
    #[serde(with = "rat")]
    pub resolution: Time,
    pub states: Vec<TaState>,
    pub edges: Vec<TaEdge>,
    #[serde(skip)]
    index: BTreeMap<TaLoc, (usize, Vec<usize>)>,
}

/// Robust timing of one trajectory segment, in seconds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SegmentTiming {
    pub tau: f64,
    #[serde(default)]
    pub lead: f64,
    #[serde(default)]
    pub lag: f64,
    /// Output of the event ending this segment (ignored for the last one).
    #[serde(default)]
    pub symbol: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryEnd {
    /// End set covered by the initial balls of these trajectories.
    Cover(Vec<usize>),
    EndOfSimulation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajectoryTiming {
    #[serde(default = "yes")]
    pub initial: bool,
    pub segments: Vec<SegmentTiming>,
    pub end: TrajectoryEnd,
    /// Output on the cover edge.
    #[serde(default)]
    pub end_symbol: Option<String>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fault {
    pub trajectory: usize,
    pub segment: usize,
    #[serde(default)]
    pub symbol: Option<String>,
    pub targets: Vec<usize>,
}

fn default_resolution() -> Time {
    Time::new(1, 10)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AbstractionInput {
    #[serde(with = "rat", default = "default_resolution")]
    pub resolution: Time,
    pub trajectories: Vec<TrajectoryTiming>,
    #[serde(default)]
    pub faults: Vec<Fault>,
}

impl TimedAutomaton {
    /// Assemble from states and edges, building the lookup index.
    pub fn from_parts(resolution: Time, states: Vec<TaState>, edges: Vec<TaEdge>) -> Self {
        let mut ta = Self {
            resolution,
            states,
            edges,
            index: BTreeMap::new(),
        };
        ta.reindex();
        ta
    }

    fn reindex(&mut self) {
        self.index.clear();
        for (i, s) in self.states.iter().enumerate() {
            self.index.insert(s.id, (i, Vec::new()));
        }
        for (j, e) in self.edges.iter().enumerate() {
            if let Some(entry) = self.index.get_mut(&e.source) {
                entry.1.push(j);
            }
        }
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        let mut ta: Self = serde_json::from_str(s)?;
        ta.reindex();
        Ok(ta)
    }

    pub fn state(&self, q: TaLoc) -> Option<&TaState> {
        self.index.get(&q).map(|(i, _)| &self.states[*i])
    }

    pub fn upper(&self, q: TaLoc) -> Option<Time> {
        self.state(q).and_then(|s| s.upper)
    }

    /// Outgoing edges of `q` (the feasible events).
    pub fn outgoing(&self, q: TaLoc) -> impl Iterator<Item = &TaEdge> + '_ {
        self.index
            .get(&q)
            .map(|(_, es)| es.as_slice())
            .unwrap_or(&[])
            .iter()
            .map(move |&j| &self.edges[j])
    }

    pub fn initial_states(&self) -> Vec<TaLoc> {
        self.states.iter().filter(|s| s.initial).map(|s| s.id).collect()
    }

    /// Follow the nominal run of trajectory `k` (dwelling `tau` in every
    /// segment) and return its timed output word. Checks every dwell against
    /// the edge guard and the state invariant.
    pub fn replay(&self, input: &AbstractionInput, k: usize) -> Result<Vec<(Time, String)>, AbstractionError> {
        let tr = input
            .trajectories
            .get(k.wrapping_sub(1))
            .ok_or(AbstractionError::UnknownTrajectory(k))?;
        let res = self.resolution;
        let mut now = Time::from_integer(0);
        let mut word = Vec::new();
        let last = tr.segments.len() - 1;
        for (n, seg) in tr.segments.iter().enumerate() {
            let q = TaLoc::seg(k, n);
            let tau = quantize_nearest(seg.tau, res);
            let fail = |msg: String| AbstractionError::Replay { k, n, msg };
            if let Some(u) = self.upper(q) {
                if tau > u {
                    return Err(fail(format!("dwell {tau} exceeds invariant {u}")));
                }
            }
            let want = if n < last {
                Some(TaLoc::seg(k, n + 1))
            } else {
                match &tr.end {
                    TrajectoryEnd::Cover(ks) => Some(TaLoc::seg(ks[0], 0)),
                    TrajectoryEnd::EndOfSimulation => Some(TaLoc::Eos),
                }
            };
            let edge = self
                .outgoing(q)
                .find(|e| Some(e.target) == want && e.kind != EdgeKind::Fault)
                .ok_or_else(|| fail("missing edge".into()))?;
            if tau < edge.lo || tau > edge.hi {
                return Err(fail(format!("dwell {tau} outside [{}, {}]", edge.lo, edge.hi)));
            }
            now += tau;
            if let Some(s) = &edge.symbol {
                word.push((now, s.clone()));
            }
        }
        Ok(word)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph timed_abstraction {\n  rankdir=LR;\n");
        for s in &self.states {
            let inv = s.upper.map_or("inf".to_string(), |u| rat::to_string(&u));
            let shape = if s.initial { "doublecircle" } else { "circle" };
            out.push_str(&format!(
                "  \"{}\" [shape={shape}, label=\"{}\\nc<={inv}\"];\n",
                s.id, s.id
            ));
        }
        for e in &self.edges {
            let sym = e.symbol.as_deref().unwrap_or("eps");
            let style = if e.kind == EdgeKind::Fault { ", style=dashed" } else { "" };
            out.push_str(&format!(
                "  \"{}\" -> \"{}\" [label=\"{sym}[{},{}]\"{style}];\n",
                e.source,
                e.target,
                rat::to_string(&e.lo),
                rat::to_string(&e.hi)
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// Build the timed abstraction.
pub fn build_abstraction(input: &AbstractionInput) -> Result<TimedAutomaton, AbstractionError> {
    let res = input.resolution;
    if res <= Time::from_integer(0) {
        return Err(AbstractionError::Resolution);
    }
    let nk = input.trajectories.len();
    let zero = Time::from_integer(0);
    let mut states = Vec::new();
    let mut edges = Vec::new();
    let mut uppers: BTreeMap<(usize, usize), Time> = BTreeMap::new();
    let mut needs_eos = false;
    for (ki, tr) in input.trajectories.iter().enumerate() {
        let k = ki + 1;
        if tr.segments.is_empty() {
            return Err(AbstractionError::Empty(k));
        }
        let last = tr.segments.len() - 1;
        for (n, seg) in tr.segments.iter().enumerate() {
            let bad = |msg: &str| AbstractionError::Segment {
                k,
                msg: format!("segment {n}: {msg}"),
            };
            if !(seg.tau.is_finite() && seg.tau >= 0.0) {
                return Err(bad("dwell must be finite and nonnegative"));
            }
            if !(seg.lead >= 0.0 && seg.lag >= 0.0) {
                return Err(bad("lead and lag must be nonnegative"));
            }
            let q = TaLoc::seg(k, n);
            if n < last {
                let lo = quantize_down(seg.tau - seg.lead, res).max(zero);
                let hi = quantize_up(seg.tau + seg.lag, res);
                uppers.insert((k, n), hi);
                states.push(TaState {
                    id: q,
                    upper: Some(hi),
                    initial: n == 0 && tr.initial,
                });
                edges.push(TaEdge {
                    source: q,
                    target: TaLoc::seg(k, n + 1),
                    lo,
                    hi,
                    symbol: seg.symbol.clone(),
                    kind: EdgeKind::Nominal,
                });
            } else {
                let tau = quantize_nearest(seg.tau, res);
                uppers.insert((k, n), tau);
                states.push(TaState {
                    id: q,
                    upper: Some(tau),
                    initial: n == 0 && tr.initial,
                });
                match &tr.end {
                    TrajectoryEnd::Cover(ks) => {
                        if ks.is_empty() {
                            return Err(AbstractionError::EmptyCover(k));
                        }
                        for &k2 in ks {
                            if k2 == 0 || k2 > nk {
                                return Err(AbstractionError::UnknownTrajectory(k2));
                            }
                            edges.push(TaEdge {
                                source: q,
                                target: TaLoc::seg(k2, 0),
                                lo: tau,
                                hi: tau,
                                symbol: tr.end_symbol.clone(),
                                kind: EdgeKind::Cover,
                            });
                        }
                    }
                    TrajectoryEnd::EndOfSimulation => {
                        needs_eos = true;
                        edges.push(TaEdge {
                            source: q,
                            target: TaLoc::Eos,
                            lo: tau,
                            hi: tau,
                            symbol: None,
                            kind: EdgeKind::End,
                        });
                    }
                }
            }
        }
    }
    let mut seen = BTreeSet::new();
    for f in &input.faults {
        let upper = *uppers
            .get(&(f.trajectory, f.segment))
            .ok_or(AbstractionError::UnknownSegment(f.trajectory, f.segment))?;
        for &k2 in &f.targets {
            if k2 == 0 || k2 > nk {
                return Err(AbstractionError::UnknownTrajectory(k2));
            }
            if !seen.insert((f.trajectory, f.segment, k2, f.symbol.clone())) {
                continue;
            }
            edges.push(TaEdge {
                source: TaLoc::seg(f.trajectory, f.segment),
                target: TaLoc::seg(k2, 0),
                lo: zero,
                hi: upper,
                symbol: f.symbol.clone(),
                kind: EdgeKind::Fault,
            });
        }
    }
    if needs_eos {
        states.push(TaState {
            id: TaLoc::Eos,
            upper: None,
            initial: false,
        });
    }
    Ok(TimedAutomaton::from_parts(res, states, edges))
}

/// Timing input of the three-trajectory worked example: a nominal cycle with
/// one observable event and a fault from its middle segment into two
/// terminating trajectories.
pub fn toy_input() -> AbstractionInput {
    let seg = |tau: f64, d: f64, sym: Option<&str>| SegmentTiming {
        tau,
        lead: d,
        lag: d,
        symbol: sym.map(str::to_string),
    };
    AbstractionInput {
        resolution: Time::from_integer(1),
        trajectories: vec![
            TrajectoryTiming {
                initial: true,
                segments: vec![seg(23.0, 6.0, None), seg(6.0, 1.0, Some("alpha")), seg(20.0, 0.0, None)],
                end: TrajectoryEnd::Cover(vec![1]),
                end_symbol: None,
            },
            TrajectoryTiming {
                initial: false,
                segments: vec![seg(36.0, 0.0, None)],
                end: TrajectoryEnd::EndOfSimulation,
                end_symbol: None,
            },
            TrajectoryTiming {
                initial: false,
                segments: vec![seg(36.0, 0.0, None)],
                end: TrajectoryEnd::EndOfSimulation,
                end_symbol: None,
            },
        ],
        faults: vec![Fault {
            trajectory: 1,
            segment: 1,
            symbol: None,
            targets: vec![2, 3],
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(n: i64) -> Time {
        Time::from_integer(n)
    }

    #[test]
    fn toy_edges() {
        let ta = build_abstraction(&toy_input()).unwrap();
        let e: Vec<_> = ta
            .outgoing(TaLoc::seg(1, 0))
            .map(|e| (e.target, e.lo, e.hi))
            .collect();
        assert_eq!(e, vec![(TaLoc::seg(1, 1), t(17), t(29))]);
        let e: Vec<_> = ta
            .outgoing(TaLoc::seg(1, 1))
            .map(|e| (e.target, e.lo, e.hi, e.symbol.clone()))
            .collect();
        assert_eq!(
            e,
            vec![
                (TaLoc::seg(1, 2), t(5), t(7), Some("alpha".into())),
                (TaLoc::seg(2, 0), t(0), t(7), None),
                (TaLoc::seg(3, 0), t(0), t(7), None),
            ]
        );
        assert_eq!(ta.upper(TaLoc::seg(1, 2)), Some(t(20)));
        assert_eq!(ta.upper(TaLoc::seg(2, 0)), Some(t(36)));
        assert_eq!(ta.upper(TaLoc::Eos), None);
        assert_eq!(ta.initial_states(), vec![TaLoc::seg(1, 0)]);
    }

    #[test]
    fn replay_and_json_round_trip() {
        let input = toy_input();
        let ta = build_abstraction(&input).unwrap();
        assert_eq!(ta.replay(&input, 1).unwrap(), vec![(t(29), "alpha".to_string())]);
        let back = TimedAutomaton::from_json(&serde_json::to_string(&ta).unwrap()).unwrap();
        assert_eq!(back.edges, ta.edges);
        assert_eq!(back.outgoing(TaLoc::seg(1, 1)).count(), 3);
    }

    #[test]
    fn outward_quantisation() {
        let r = Time::new(1, 10);
        assert_eq!(quantize_down(29.13, r), Time::new(291, 10));
        assert_eq!(quantize_up(47.51, r), Time::new(476, 10));
        assert_eq!(quantize_up(47.5, r), Time::new(475, 10));
        assert_eq!(quantize_down(-0.0, r), t(0));
    }

    #[test]
    fn bad_references_are_errors() {
        let mut input = toy_input();
        input.faults[0].targets.push(9);
        assert_eq!(build_abstraction(&input), Err(AbstractionError::UnknownTrajectory(9)));
        let mut input = toy_input();
        input.trajectories[0].end = TrajectoryEnd::Cover(vec![]);
        assert_eq!(build_abstraction(&input), Err(AbstractionError::EmptyCover(1)));
    }

    #[test]
    fn state_names_parse() {
        assert_eq!("(3,2)".parse::<TaLoc>().unwrap(), TaLoc::seg(3, 2));
        assert_eq!("EoS".parse::<TaLoc>().unwrap(), TaLoc::Eos);
        assert!("(3;2)".parse::<TaLoc>().is_err());
    }
}
