//! Deterministic observer over sets of timed atoms.
//!
//! An atom `q[lo, hi]` says the abstraction may be in state `q` with clock in
//! `[lo + t, hi + t]`, where `t` is the external timer since the observer
//! last reset it. Negative clocks are latent: the transition into `q` may
//! still happen within the next `-lo` time units.
//!
//! From every observer state there is one blank transition, taken when the
//! timer reaches [`blank_min`] without an observation, and a set of symbol
//! transitions whose time windows partition the observation interval per
//! symbol string, which makes the automaton deterministic. Refinement adds a
//! verdict transition at a checkpoint: the atoms are split by whether the
//! classifying formula holds, without resetting the timer.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{rat, to_f64, TaLoc, Time, TimedAutomaton};
use crate::hybrid::TimedSymbol;
use crate::mtl::Formula;

#[derive(Debug, Error, PartialEq)]
pub enum ObserverError {
    #[error("zero-time silent transitions form a cycle")]
    Cycle,
    #[error("observer exceeds {0} states")]
    TooManyStates(usize),
    #[error("abstraction has no initial state")]
    NoInitial,
    #[error("observation inconsistent at t={time}: {msg}")]
    Inconsistent { time: f64, msg: String },
    #[error("symbols {symbols:?} at t={time} are not explained by any state")]
    Unexplained { time: f64, symbols: Vec<String> },
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("formula does not decide atom {0}")]
    Ambiguous(String),
    #[error("symbol stream is not ordered in time at t={0}")]
    Unordered(f64),
}

pub type Result<T> = std::result::Result<T, ObserverError>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub q: TaLoc,
    #[serde(with = "rat")]
    pub lo: Time,
    #[serde(with = "rat")]
    pub hi: Time,
}

impl Atom {
    pub fn new(q: TaLoc, lo: Time, hi: Time) -> Self {
        Self { q, lo, hi }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{},{}]", self.q, rat::to_string(&self.lo), rat::to_string(&self.hi))
    }
}

/// Observer state: canonical atom set plus the timer value at entry (nonzero
/// only for states entered through a verdict).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObsState {
    pub atoms: Vec<Atom>,
    #[serde(with = "rat")]
    pub offset: Time,
}

impl ObsState {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Self {
            atoms: canonical(atoms),
            offset: Time::zero(),
        }
    }
}

impl fmt::Display for ObsState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")?;
        if !self.offset.is_zero() {
            write!(f, "@{}", rat::to_string(&self.offset))?;
        }
        Ok(())
    }
}

/// Sort atoms and merge overlapping or touching intervals of the same state.
pub fn canonical(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort();
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(l) if l.q == a.q && a.lo <= l.hi => l.hi = l.hi.max(a.hi),
            _ => out.push(a),
        }
    }
    out
}

fn covered(set: &[Atom], a: &Atom) -> bool {
    set.iter().any(|b| b.q == a.q && b.lo <= a.lo && b.hi >= a.hi)
}

/// Close `atoms` under silent edges with zero lower guard: every `q[lo, 0]`
/// adds `q'[lo - g_hi, 0]`.
pub fn eps0_extension(ta: &TimedAutomaton, atoms: Vec<Atom>) -> Result<Vec<Atom>> {
    let mut set = canonical(atoms);
    let limit = 4 * (ta.states.len() + 1) * (ta.edges.len() + 1);
    for _ in 0..limit {
        let mut added = Vec::new();
        for a in set.iter().filter(|a| a.hi.is_zero()) {
            for e in ta.outgoing(a.q) {
                if e.symbol.is_none() && e.lo.is_zero() {
                    let n = Atom::new(e.target, a.lo - e.hi, Time::zero());
                    if !covered(&set, &n) && !covered(&added, &n) {
                        added.push(n);
                    }
                }
            }
        }
        if added.is_empty() {
            return Ok(set);
        }
        set.extend(added);
        set = canonical(set);
    }
    Err(ObserverError::Cycle)
}

/// Time until the next forced update when nothing is observed; `None` for
/// states that can wait forever.
pub fn blank_min(ta: &TimedAutomaton, atoms: &[Atom]) -> Option<Time> {
    let mut best: Option<Time> = None;
    let mut cand = |v: Time| {
        if v > Time::zero() && best.is_none_or(|b| v < b) {
            best = Some(v);
        }
    };
    for a in atoms {
        if let Some(u) = ta.upper(a.q) {
            cand(u - a.lo);
        }
        for e in ta.outgoing(a.q) {
            match e.symbol {
                None if a.hi < e.lo => cand(e.lo - a.hi),
                Some(_) if a.lo < e.hi => cand(e.hi - a.lo),
                _ => {}
            }
        }
    }
    best
}

/// Atoms after `a` time units without observation: shifted, cut by the
/// invariants, plus latent successors of silent edges whose guard opens at
/// exactly this time.
pub fn step_eps(ta: &TimedAutomaton, atoms: &[Atom], a: Time) -> Result<Vec<Atom>> {
    let mut out = Vec::new();
    for at in atoms {
        let u = ta.upper(at.q);
        if u.is_none_or(|u| at.lo + a < u) {
            let hi = u.map_or(at.hi + a, |u| (at.hi + a).min(u));
            out.push(Atom::new(at.q, at.lo + a, hi));
        }
        for e in ta.outgoing(at.q) {
            if e.symbol.is_none() && at.hi < e.lo && e.lo == at.hi + a {
                out.push(Atom::new(e.target, at.lo + a - e.hi, Time::zero()));
            }
        }
    }
    eps0_extension(ta, out)
}

/// Time window of a symbol label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    #[serde(with = "rat")]
    pub lo: Time,
    #[serde(with = "rat")]
    pub hi: Time,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Window {
    pub fn contains(&self, t: Time) -> bool {
        (t > self.lo || (self.lo_closed && t == self.lo)) && (t < self.hi || (self.hi_closed && t == self.hi))
    }

    /// Containment of a float timer value; closed ends get a `1e-9` slack.
    pub fn contains_f64(&self, t: f64) -> bool {
        let (lo, hi) = (to_f64(self.lo), to_f64(self.hi));
        let above = if self.lo_closed { t >= lo - 1e-9 } else { t > lo };
        let below = if self.hi_closed { t <= hi + 1e-9 } else { t < hi };
        above && below
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{},{}{}",
            if self.lo_closed { '[' } else { '(' },
            rat::to_string(&self.lo),
            rat::to_string(&self.hi),
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Label {
    /// Nothing observed for `after` time units.
    Blank {
        #[serde(with = "rat")]
        after: Time,
    },
    /// Symbol string observed at a timer value inside `window`.
    Symbol { symbols: Vec<String>, window: Window },
    /// Formula verdict at timer value `at`; the timer keeps running.
    Verdict {
        holds: bool,
        #[serde(with = "rat")]
        at: Time,
        formula: Formula,
    },
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Blank { after } => write!(f, "eps[{}]", rat::to_string(after)),
            Label::Symbol { symbols, window } => write!(f, "{}{window}", symbols.join(".")),
            Label::Verdict { holds, at, .. } => {
                write!(f, "{}phi[{}]", if *holds { "" } else { "!" }, rat::to_string(at))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub label: Label,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObserverAutomaton {
    pub states: Vec<ObsState>,
    /// Blank time per state, `None` for states that never time out.
    #[serde(with = "opt_rat_vec")]
    pub blank: Vec<Option<Time>>,
    pub transitions: Vec<Transition>,
    pub initial: usize,
}

mod opt_rat_vec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Option<Time>], s: S) -> std::result::Result<S::Ok, S::Error> {
        let strs: Vec<Option<String>> = v.iter().map(|t| t.map(|t| rat::to_string(&t))).collect();
        strs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Option<Time>>, D::Error> {
        Vec::<Option<String>>::deserialize(d)?
            .into_iter()
            .map(|o| o.map(|s| rat::parse(&s).map_err(serde::de::Error::custom)).transpose())
            .collect()
    }
}

fn default_max_states() -> usize {
    100_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BuildOptions {
    #[serde(default = "default_max_states")]
    pub max_states: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            max_states: default_max_states(),
        }
    }
}

/// Where and how a refinement splits a state.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub state: ObsState,
    pub at: Time,
    pub formula: Formula,
    pub holds: Vec<Atom>,
    pub fails: Vec<Atom>,
}

struct Piece {
    symbols: Vec<String>,
    lo: Time,
    hi: Time,
    lo_closed: bool,
    targets: Vec<Atom>,
}

const MAX_CHAIN: usize = 8;

/// Extend a symbol string with observable edges that can fire at the same
/// instant from freshly entered atoms.
fn chain(ta: &TimedAutomaton, base: &Piece, out: &mut Vec<Piece>, depth: usize) -> Result<()> {
    if depth >= MAX_CHAIN {
        return Ok(());
    }
    for a in base.targets.iter().filter(|a| a.hi.is_zero()) {
        for e in ta.outgoing(a.q) {
            if let (Some(s), true) = (&e.symbol, e.lo.is_zero()) {
                let mut symbols = base.symbols.clone();
                symbols.push(s.clone());
                let p = Piece {
                    symbols,
                    lo: base.lo,
                    hi: base.hi,
                    lo_closed: base.lo_closed,
                    targets: eps0_extension(ta, vec![Atom::new(e.target, Time::zero(), Time::zero())])?,
                };
                chain(ta, &p, out, depth + 1)?;
                out.push(p);
            }
        }
    }
    Ok(())
}

/// Symbols, timer window and successor atoms of one outgoing symbol label.
pub type SymbolLabel = (Vec<String>, Window, Vec<Atom>);

/// Symbol labels of a state whose observation interval is `(offset, end]`.
pub fn symbol_labels(
    ta: &TimedAutomaton,
    atoms: &[Atom],
    offset: Time,
    end: Time,
    blank_successor: Option<&[Atom]>,
) -> Result<Vec<SymbolLabel>> {
    let zero = Time::zero();
    let mut pieces = Vec::new();
    let push = |p: Piece, pieces: &mut Vec<Piece>| -> Result<()> {
        chain(ta, &p, pieces, 1)?;
        pieces.push(p);
        Ok(())
    };
    for a in atoms {
        for e in ta.outgoing(a.q) {
            let Some(sym) = &e.symbol else { continue };
            let lo = (e.lo - a.hi).max(zero);
            let hi = (e.hi - a.lo).min(end);
            if hi < lo || hi <= offset {
                continue;
            }
            let (lo, lo_closed) = if lo > offset { (lo, true) } else { (offset, false) };
            let targets = eps0_extension(ta, vec![Atom::new(e.target, zero, zero)])?;
            push(
                Piece {
                    symbols: vec![sym.clone()],
                    lo,
                    hi,
                    lo_closed,
                    targets,
                },
                &mut pieces,
            )?;
        }
    }
    // symbols emitted at the blank instant by successors entered right then
    if let Some(next) = blank_successor {
        if end > offset {
            for a in next.iter().filter(|a| a.hi.is_zero()) {
                for e in ta.outgoing(a.q) {
                    if let (Some(sym), true) = (&e.symbol, e.lo.is_zero()) {
                        let targets = eps0_extension(ta, vec![Atom::new(e.target, zero, zero)])?;
                        push(
                            Piece {
                                symbols: vec![sym.clone()],
                                lo: end,
                                hi: end,
                                lo_closed: true,
                                targets,
                            },
                            &mut pieces,
                        )?;
                    }
                }
            }
        }
    }
    let mut by_sym: BTreeMap<Vec<String>, Vec<&Piece>> = BTreeMap::new();
    for p in &pieces {
        by_sym.entry(p.symbols.clone()).or_default().push(p);
    }
    let mut out = Vec::new();
    for (symbols, ps) in by_sym {
        let pts: Vec<Time> = ps
            .iter()
            .flat_map(|p| [p.lo, p.hi])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        // elementary pieces in order: point, open gap, point, ...
        let mut elems: Vec<(Time, Time, bool, Vec<Atom>)> = Vec::new();
        for (i, &pt) in pts.iter().enumerate() {
            let at_point: Vec<Atom> = ps
                .iter()
                .filter(|p| (p.lo < pt || (p.lo == pt && p.lo_closed)) && pt <= p.hi)
                .flat_map(|p| p.targets.iter().cloned())
                .collect();
            elems.push((pt, pt, true, canonical(at_point)));
            if let Some(&next) = pts.get(i + 1) {
                let inside: Vec<Atom> = ps
                    .iter()
                    .filter(|p| p.lo <= pt && p.hi >= next)
                    .flat_map(|p| p.targets.iter().cloned())
                    .collect();
                elems.push((pt, next, false, canonical(inside)));
            }
        }
        let mut run: Option<(Window, Vec<Atom>)> = None;
        for (lo, hi, is_point, targets) in elems {
            if let Some((w, t)) = &mut run {
                if *t == targets {
                    w.hi = hi;
                    w.hi_closed = is_point;
                    continue;
                }
                let (w, t) = run.take().expect("run is set");
                out.push((symbols.clone(), w, t));
            }
            if !targets.is_empty() {
                run = Some((
                    Window {
                        lo,
                        hi,
                        lo_closed: is_point,
                        hi_closed: is_point,
                    },
                    targets,
                ));
            }
        }
        if let Some((w, t)) = run {
            out.push((symbols.clone(), w, t));
        }
    }
    Ok(out)
}

impl ObserverAutomaton {
    pub fn outgoing(&self, s: usize) -> impl Iterator<Item = &Transition> + '_ {
        self.transitions.iter().filter(move |t| t.from == s)
    }

    pub fn find_state(&self, s: &ObsState) -> Option<usize> {
        self.states.iter().position(|x| x == s)
    }

    /// Target of the blank transition, if any.
    pub fn blank_target(&self, s: usize) -> Option<usize> {
        self.outgoing(s)
            .find(|t| matches!(t.label, Label::Blank { .. }))
            .map(|t| t.to)
    }

    /// Target of the symbol string observed at timer value `t`.
    pub fn symbol_target(&self, s: usize, symbols: &[String], t: Time) -> Option<usize> {
        self.outgoing(s)
            .find(|tr| matches!(&tr.label, Label::Symbol { symbols: ss, window } if ss == symbols && window.contains(t)))
            .map(|t| t.to)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph observer {\n  rankdir=LR;\n  node [shape=box];\n");
        for (i, s) in self.states.iter().enumerate() {
            let shape = if i == self.initial { ", peripheries=2" } else { "" };
            out.push_str(&format!("  s{i} [label=\"s{i}\\n{s}\"{shape}];\n"));
        }
        for t in &self.transitions {
            let style = if matches!(t.label, Label::Verdict { .. }) { ", color=blue" } else { "" };
            out.push_str(&format!("  s{} -> s{} [label=\"{}\"{style}];\n", t.from, t.to, t.label));
        }
        out.push_str("}\n");
        out
    }
}

/// Observer of `ta`, optionally split at a checkpoint.
pub fn build_observer_with(
    ta: &TimedAutomaton,
    opts: &BuildOptions,
    checkpoint: Option<&Checkpoint>,
) -> Result<ObserverAutomaton> {
    let init: Vec<Atom> = ta
        .initial_states()
        .into_iter()
        .map(|q| Atom::new(q, Time::zero(), Time::zero()))
        .collect();
    if init.is_empty() {
        return Err(ObserverError::NoInitial);
    }
    let s0 = ObsState::new(eps0_extension(ta, init)?);
    let mut index: BTreeMap<ObsState, usize> = BTreeMap::new();
    let mut states = vec![s0.clone()];
    index.insert(s0, 0);
    let mut blank = Vec::new();
    let mut transitions = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    let mut intern = |s: ObsState, states: &mut Vec<ObsState>, queue: &mut VecDeque<usize>| -> Result<usize> {
        if let Some(&i) = index.get(&s) {
            return Ok(i);
        }
        if states.len() >= opts.max_states {
            return Err(ObserverError::TooManyStates(opts.max_states));
        }
        let i = states.len();
        index.insert(s.clone(), i);
        states.push(s);
        queue.push_back(i);
        Ok(i)
    };
    while let Some(i) = queue.pop_front() {
        let s = states[i].clone();
        let b = blank_min(ta, &s.atoms);
        if blank.len() <= i {
            blank.resize(i + 1, None);
        }
        blank[i] = b;
        let cp = checkpoint.filter(|c| c.state == s);
        let Some(b) = b else { continue };
        let next = step_eps(ta, &s.atoms, b)?;
        let end = cp.map_or(b, |c| c.at);
        let labels = symbol_labels(ta, &s.atoms, s.offset, end, cp.is_none().then_some(next.as_slice()))?;
        for (symbols, window, targets) in labels {
            let to = intern(ObsState::new(targets), &mut states, &mut queue)?;
            transitions.push(Transition {
                from: i,
                to,
                label: Label::Symbol { symbols, window },
            });
        }
        match cp {
            Some(c) => {
                for (holds, atoms) in [(true, &c.holds), (false, &c.fails)] {
                    if atoms.is_empty() {
                        continue;
                    }
                    let target = ObsState {
                        atoms: canonical(atoms.clone()),
                        offset: c.at,
                    };
                    let to = intern(target, &mut states, &mut queue)?;
                    transitions.push(Transition {
                        from: i,
                        to,
                        label: Label::Verdict {
                            holds,
                            at: c.at,
                            formula: c.formula.clone(),
                        },
                    });
                }
            }
            None if !next.is_empty() => {
                let to = intern(ObsState::new(next), &mut states, &mut queue)?;
                transitions.push(Transition {
                    from: i,
                    to,
                    label: Label::Blank { after: b },
                });
            }
            None => {}
        }
    }
    blank.resize(states.len(), None);
    Ok(ObserverAutomaton {
        states,
        blank,
        transitions,
        initial: 0,
    })
}

pub fn build_observer(ta: &TimedAutomaton, opts: &BuildOptions) -> Result<ObserverAutomaton> {
    build_observer_with(ta, opts, None)
}

/// Classification of one atom by the refining formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomVerdict {
    Holds,
    Fails,
    Ambiguous,
}

/// Rebuild the observer with a verdict transition at timer value `at` from
/// `state`. `classify` decides each atom of that state; any undecided atom
/// rejects the refinement.
pub fn refine_observer<C>(
    ta: &TimedAutomaton,
    obs: &ObserverAutomaton,
    state: usize,
    at: Time,
    formula: &Formula,
    mut classify: C,
    opts: &BuildOptions,
) -> Result<ObserverAutomaton>
where
    C: FnMut(&Atom) -> AtomVerdict,
{
    let s = obs
        .states
        .get(state)
        .ok_or_else(|| ObserverError::Checkpoint(format!("no state {state}")))?
        .clone();
    let b = obs.blank[state];
    if at <= s.offset || b.is_some_and(|b| at >= b) {
        return Err(ObserverError::Checkpoint(format!(
            "evaluation time {} must lie in ({}, {})",
            rat::to_string(&at),
            rat::to_string(&s.offset),
            b.map_or("inf".into(), |b| rat::to_string(&b))
        )));
    }
    let (mut holds, mut fails) = (Vec::new(), Vec::new());
    for a in &s.atoms {
        match classify(a) {
            AtomVerdict::Holds => holds.push(a.clone()),
            AtomVerdict::Fails => fails.push(a.clone()),
            AtomVerdict::Ambiguous => return Err(ObserverError::Ambiguous(a.to_string())),
        }
    }
    let cp = Checkpoint {
        state: s,
        at,
        formula: formula.clone(),
        holds,
        fails,
    };
    build_observer_with(ta, opts, Some(&cp))
}

/// Clock-time interval of one atom at timer value `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tube {
    pub q: TaLoc,
    pub lo: f64,
    pub hi: f64,
}

pub fn tubes_of(s: &ObsState, t: f64) -> Vec<Tube> {
    s.atoms
        .iter()
        .map(|a| Tube {
            q: a.q,
            lo: t + to_f64(a.lo),
            hi: t + to_f64(a.hi),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cause {
    Start,
    Blank,
    Symbol { symbols: Vec<String> },
    Verdict { holds: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Update {
    /// Absolute time of the update.
    pub time: f64,
    /// Absolute time at which the timer was last reset.
    pub timer_origin: f64,
    pub state: usize,
    pub cause: Cause,
}

impl Update {
    pub fn timer(&self) -> f64 {
        self.time - self.timer_origin
    }
}

/// Drive the observer with a timed symbol stream up to absolute time
/// `until`. `verdict(origin, formula)` answers checkpoint queries, where
/// `origin` is the absolute time the timer was last reset.
pub fn run_observer<V>(
    obs: &ObserverAutomaton,
    stream: &[TimedSymbol],
    until: f64,
    mut verdict: V,
) -> Result<Vec<Update>>
where
    V: FnMut(f64, &Formula) -> bool,
{
    let mut groups: Vec<(f64, Vec<String>)> = Vec::new();
    for s in stream {
        match groups.last_mut() {
            Some((t, syms)) if *t == s.time => syms.push(s.symbol.clone()),
            Some((t, _)) if *t > s.time => return Err(ObserverError::Unordered(s.time)),
            _ => groups.push((s.time, vec![s.symbol.clone()])),
        }
    }
    let mut cur = obs.initial;
    let mut origin = 0.0;
    let mut out = vec![Update {
        time: 0.0,
        timer_origin: 0.0,
        state: cur,
        cause: Cause::Start,
    }];
    let mut gi = 0;
    let max_steps = 1_000_000;
    for _ in 0..max_steps {
        let blank = obs.blank[cur].map(to_f64);
        let check = obs.outgoing(cur).find_map(|t| match &t.label {
            Label::Verdict { at, formula, .. } => Some((to_f64(*at), formula.clone())),
            _ => None,
        });
        let cut = check
            .as_ref()
            .map(|c| c.0)
            .or(blank)
            .unwrap_or(f64::INFINITY);
        if let Some((ts, syms)) = groups.get(gi) {
            let rel = ts - origin;
            if rel <= cut + 1e-9 {
                let to = obs
                    .outgoing(cur)
                    .find(|t| matches!(&t.label, Label::Symbol { symbols, window } if symbols == syms && window.contains_f64(rel)))
                    .map(|t| t.to)
                    .ok_or_else(|| ObserverError::Unexplained {
                        time: *ts,
                        symbols: syms.clone(),
                    })?;
                cur = to;
                origin = *ts;
                out.push(Update {
                    time: *ts,
                    timer_origin: origin,
                    state: cur,
                    cause: Cause::Symbol { symbols: syms.clone() },
                });
                gi += 1;
                continue;
            }
        }
        if !cut.is_finite() || origin + cut > until {
            return Ok(out);
        }
        if let Some((at, formula)) = check {
            let h = verdict(origin, &formula);
            let to = obs
                .outgoing(cur)
                .find(|t| matches!(t.label, Label::Verdict { holds, .. } if holds == h))
                .map(|t| t.to)
                .ok_or_else(|| ObserverError::Inconsistent {
                    time: origin + at,
                    msg: format!("no state is consistent with verdict {h}"),
                })?;
            cur = to;
            out.push(Update {
                time: origin + at,
                timer_origin: origin,
                state: cur,
                cause: Cause::Verdict { holds: h },
            });
            continue;
        }
        let b = blank.expect("finite cut without verdict is a blank");
        let to = obs.blank_target(cur).ok_or_else(|| ObserverError::Inconsistent {
            time: origin + b,
            msg: "expected an observation before the timer ran out".into(),
        })?;
        cur = to;
        origin += b;
        out.push(Update {
            time: origin,
            timer_origin: origin,
            state: cur,
            cause: Cause::Blank,
        });
    }
    Err(ObserverError::Inconsistent {
        time: origin,
        msg: "step limit reached".into(),
    })
}
