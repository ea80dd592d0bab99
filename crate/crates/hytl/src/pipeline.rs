//! Stage functions chaining simulation, certificates, abstraction, observer
//! construction, formula inference and refinement.
//!
//! Every stage takes the previous stage's serialisable output, so a driver can
//! persist each artifact and resume from any of them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{
    self, build_abstraction, AbstractionError, AbstractionInput, SegmentTiming, TaLoc, Time, TimedAutomaton,
    TrajectoryEnd, TrajectoryTiming,
};
use crate::bisim::{self, BisimError, CoverReport, LeadLagConfig, NominalExit, VerifyOptions, VerifyReport};
use crate::hybrid::{EventKind, HybridAutomaton, HybridError, SimConfig, Simulator, TimedSymbol, Trajectory};
use crate::inference::{
    self, ClassificationReport, InferenceError, SearchConfig, SearchReport, Tube, TubeSet, MARGIN_EPS,
};
use crate::linalg::{self, Mat, Vector};
use crate::mtl::{self, Formula, View};
use crate::observer::{
    self, Atom, AtomVerdict, Cause, ObsState, ObserverAutomaton, ObserverError, Update,
};
use crate::par::Exec;
use crate::scenario::{
    build_smart_building, CertificateRule, HybridScenario, ModelSource, ScenarioConfig,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("model: {0}")]
    Model(#[from] HybridError),
    #[error("bisim: {context}: {source}")]
    Bisim {
        context: String,
        #[source]
        source: BisimError,
    },
    #[error("abstract: {0}")]
    Abstraction(#[from] AbstractionError),
    #[error("observe: {0}")]
    Observer(#[from] ObserverError),
    #[error("infer: {0}")]
    Inference(String),
}

impl PipelineError {
    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 3,
            PipelineError::Bisim { .. } => 4,
            PipelineError::Model(_) => 5,
            PipelineError::Abstraction(_) | PipelineError::Observer(_) => 6,
            PipelineError::Inference(_) => 7,
        }
    }
}

impl From<InferenceError> for PipelineError {
    fn from(e: InferenceError) -> Self {
        PipelineError::Inference(e.to_string())
    }
}

fn bisim_err(context: impl Into<String>) -> impl FnOnce(BisimError) -> PipelineError {
    let context = context.into();
    move |source| PipelineError::Bisim { context, source }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Parse a scenario from JSON text and validate it.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
    cfg.validate().map_err(PipelineError::Config)?;
    Ok(cfg)
}

/// Resolve the hybrid model; file paths are relative to `base`.
pub fn load_model(sc: &HybridScenario, base: Option<&Path>) -> Result<HybridAutomaton> {
    match &sc.model {
        ModelSource::Inline(h) => Ok(h.clone()),
        ModelSource::SmartBuilding(p) => Ok(build_smart_building(p)?),
        ModelSource::File(f) => {
            let path = base.map_or_else(|| Path::new(f).to_path_buf(), |b| b.join(f));
            let text = std::fs::read_to_string(&path)
                .map_err(|e| PipelineError::Config(format!("model file {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("model file {}: {e}", path.display())))
        }
    }
}

fn sim_config(sc: &HybridScenario) -> SimConfig {
    SimConfig {
        step: sc.step,
        ..SimConfig::with_horizon(sc.horizon)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassRun {
    pub name: String,
    pub label: i8,
    pub trajectory: Trajectory,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Simulation {
    pub runs: Vec<ClassRun>,
}

/// Nominal run of every class.
pub fn simulate_classes(sc: &HybridScenario, ha: &HybridAutomaton) -> Result<Simulation> {
    let sim = Simulator::new(ha, sim_config(sc));
    let runs = sc
        .classes
        .iter()
        .map(|c| {
            if c.x0.len() != ha.dim() {
                return Err(PipelineError::Config(format!("class {:?}: x0 has wrong length", c.name)));
            }
            let trajectory = sim.simulate(&c.location, &Vector::from_column_slice(&c.x0), &c.schedule)?;
            log::info!("class {}: {} segments", c.name, trajectory.segments.len());
            Ok(ClassRun {
                name: c.name.clone(),
                label: c.label,
                trajectory,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Simulation { runs })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocationCert {
    pub location: String,
    #[serde(with = "linalg::rows")]
    pub m: Mat,
    pub verify: VerifyReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SegmentData {
    pub location: String,
    pub start: f64,
    #[serde(with = "linalg::vector")]
    pub x0: Vector,
    pub exit: NominalExit,
    /// Output of the event that ends the segment.
    pub symbol: Option<String>,
    /// Radius needed to contain the start set.
    pub gamma_needed: f64,
    /// Largest radius that keeps the tube away from other exits.
    pub gamma_safe: f64,
    pub gamma: f64,
    pub gamma_hat: f64,
    pub gamma_tilde: Vec<f64>,
    pub tau: f64,
    pub lead: f64,
    pub lag: f64,
    pub cover: Option<CoverReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobustData {
    pub certificates: Vec<LocationCert>,
    /// `segments[k][n]`: class `k` (0-based), segment `n`.
    pub segments: Vec<Vec<SegmentData>>,
}

impl RobustData {
    pub fn certificate(&self, location: &str) -> Option<&Mat> {
        self.certificates.iter().find(|c| c.location == location).map(|c| &c.m)
    }

    /// Segment data for an abstraction state `(k, n)` (1-based `k`).
    pub fn segment(&self, q: TaLoc) -> Option<&SegmentData> {
        match q {
            TaLoc::Seg { k, n } => self.segments.get(k.checked_sub(1)?)?.get(n),
            TaLoc::Eos => None,
        }
    }
}

fn certificate(sc: &HybridScenario, ha: &HybridAutomaton, loc: usize) -> Result<LocationCert> {
    let l = ha.location(loc);
    let rule = sc.certificates.iter().find(|c| c.location == l.id).map(|c| &c.rule);
    let ctx = format!("certificate for {}", l.id);
    let m = match rule {
        Some(CertificateRule::Shaping(sh)) => bisim::optimize_m(&l.a, sh).map_err(bisim_err(&ctx))?.m,
        Some(CertificateRule::Weights(w)) => {
            bisim::structured_certificate(&l.a, &w.q, &w.s).map_err(bisim_err(&ctx))?
        }
        None => {
            let nc = bisim::constant_coordinates(&l.a).len();
            bisim::structured_certificate(&l.a, &vec![1.0; ha.dim() - nc], &vec![1.0; nc])
                .map_err(bisim_err(&ctx))?
        }
    };
    let opts = VerifyOptions {
        seed: sc.seed ^ loc as u64,
        ..Default::default()
    };
    let verify = bisim::verify_bisim(&l.a, &m, &opts).map_err(bisim_err(&ctx))?;
    if !verify.valid {
        return Err(PipelineError::Bisim {
            context: ctx,
            source: BisimError::Infeasible(format!("certificate fails verification: {verify:?}")),
        });
    }
    Ok(LocationCert {
        location: l.id.clone(),
        m,
        verify,
    })
}

fn box_vertices(lo: &[f64], hi: &[f64]) -> Vec<Vector> {
    let n = lo.len();
    (0..1usize << n)
        .map(|mask| Vector::from_fn(n, |i, _| if mask >> i & 1 == 1 { hi[i] } else { lo[i] }))
        .collect()
}

/// Certificates, tube radii and event-time spreads for every nominal segment.
///
/// Radii are chained: each segment's ball must hold its configured start box
/// and the reset images of the previous segment's perturbed exits, and must
/// stay inside the safe radius of its location.
pub fn robust_data(sc: &HybridScenario, ha: &HybridAutomaton, sim: &Simulation, exec: Exec) -> Result<RobustData> {
    let simulator = Simulator::new(ha, sim_config(sc));
    let mut certs: BTreeMap<usize, LocationCert> = BTreeMap::new();
    let mut cert_of = |loc: usize| -> Result<Mat> {
        if let Some(c) = certs.get(&loc) {
            return Ok(c.m.clone());
        }
        let c = certificate(sc, ha, loc)?;
        let m = c.m.clone();
        certs.insert(loc, c);
        Ok(m)
    };
    let mut all = Vec::new();
    for (k, (run, class)) in sim.runs.iter().zip(&sc.classes).enumerate() {
        let segs = &run.trajectory.segments;
        let mut carried: f64 = 0.0;
        let mut out = Vec::new();
        for (n, seg) in segs.iter().enumerate() {
            let ctx = format!("class {} segment {n}", run.name);
            let loc = ha.location_index(&seg.location)?;
            let m = cert_of(loc)?;
            let (exit, event) = match segs.get(n + 1) {
                Some(next) => {
                    let e = ha.event_index(next.event.as_deref().unwrap_or_default())?;
                    let exit = match ha.event(e).kind {
                        EventKind::Deterministic => NominalExit::Event { event: e, tau: seg.dwell },
                        EventKind::Nondeterministic => NominalExit::Scheduled { event: e, tau: seg.dwell },
                    };
                    (exit, Some(e))
                }
                None => (NominalExit::End { dwell: seg.dwell }, None),
            };
            let nominal = ha.sample_flow(loc, &seg.x0, 2.0 * seg.dwell, sc.step);
            let obstacles = bisim::obstacles_for(ha, loc, event);
            let gamma_safe =
                bisim::gamma_for_segment(&m, &nominal, &obstacles, sc.gamma_max).map_err(bisim_err(&ctx))?;
            let boxes: Vec<_> = class.boxes.iter().filter(|b| b.segment == n).collect();
            let from_boxes = boxes
                .iter()
                .map(|b| bisim::enclosing_radius(&m, &seg.x0, &box_vertices(&b.lo, &b.hi)))
                .fold(0.0, f64::max);
            let gamma_needed = 1.05 * carried.max(from_boxes);
            let gamma = gamma_needed.max(sc.gamma_floor);
            if gamma > gamma_safe {
                return Err(PipelineError::Bisim {
                    context: ctx,
                    source: BisimError::Infeasible(format!(
                        "tube needs radius {gamma:.6e} but only {gamma_safe:.6e} is safe"
                    )),
                });
            }
            let mut cover = None;
            for b in boxes {
                let rep = bisim::check_cover(&m, &seg.x0, gamma, &b.lo, &b.hi, sc.cover_grid)
                    .map_err(bisim_err(&ctx))?;
                if !rep.covered {
                    return Err(PipelineError::Bisim {
                        context: ctx,
                        source: BisimError::Infeasible(format!("start box not covered: {rep:?}")),
                    });
                }
                cover = Some(rep);
            }
            let cfg = LeadLagConfig {
                seed: sc.lead_lag.seed ^ sc.seed ^ ((k as u64) << 32 | n as u64),
                ..sc.lead_lag.clone()
            };
            let ll = bisim::lead_lag(&simulator, loc, &seg.x0, &exit, &m, gamma, &cfg, exec)
                .map_err(bisim_err(&ctx))?;
            if let Some(next) = segs.get(n + 1) {
                let m_next = cert_of(ha.location_index(&next.location)?)?;
                carried = bisim::enclosing_radius(&m_next, &next.x0, &ll.exits);
            }
            log::info!(
                "{ctx}: gamma {gamma:.4e} (safe {gamma_safe:.4e}), lead {:.4} lag {:.4}",
                ll.lead,
                ll.lag
            );
            out.push(SegmentData {
                location: seg.location.clone(),
                start: seg.start,
                x0: seg.x0.clone(),
                symbol: event.and_then(|e| ha.event(e).symbol.clone()),
                exit,
                gamma_needed,
                gamma_safe,
                gamma,
                gamma_hat: bisim::gamma_hat(&m, gamma),
                gamma_tilde: (0..ha.dim()).map(|j| bisim::gamma_tilde(&m, gamma, j)).collect(),
                tau: seg.dwell,
                lead: ll.lead,
                lag: ll.lag,
                cover,
            });
        }
        all.push(out);
    }
    Ok(RobustData {
        certificates: certs.into_values().collect(),
        segments: all,
    })
}

/// Timing input for the abstraction: one trajectory per class, ending at the
/// horizon.
pub fn abstraction_input(sc: &HybridScenario, rd: &RobustData) -> AbstractionInput {
    AbstractionInput {
        resolution: sc.resolution,
        trajectories: rd
            .segments
            .iter()
            .map(|segs| TrajectoryTiming {
                initial: true,
                segments: segs
                    .iter()
                    .map(|s| SegmentTiming {
                        tau: s.tau,
                        lead: s.lead,
                        lag: s.lag,
                        symbol: s.symbol.clone(),
                    })
                    .collect(),
                end: TrajectoryEnd::EndOfSimulation,
                end_symbol: None,
            })
            .collect(),
        faults: Vec::new(),
    }
}

pub fn abstract_timing(input: &AbstractionInput) -> Result<TimedAutomaton> {
    Ok(build_abstraction(input)?)
}

/// Inference tube for an atom at timer value 0.
pub fn atom_tube(sc: &HybridScenario, ha: &HybridAutomaton, rd: &RobustData, atom: &Atom) -> Option<Tube> {
    let TaLoc::Seg { k, .. } = atom.q else {
        return None;
    };
    let seg = rd.segment(atom.q)?;
    let loc = ha.location(ha.location_index(&seg.location).ok()?);
    Some(Tube {
        name: atom.to_string(),
        class: sc.classes.get(k - 1)?.label,
        lo: abstraction::to_f64(atom.lo),
        hi: abstraction::to_f64(atom.hi),
        a: loc.a.clone(),
        b: loc.b.clone(),
        x0: seg.x0.clone(),
        m: rd.certificate(&seg.location)?.clone(),
        gamma: seg.gamma,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Attempt {
    pub state: usize,
    pub atoms: String,
    pub outcome: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Inferred {
    pub state: usize,
    pub atoms: String,
    #[serde(with = "abstraction::rat")]
    pub window: Time,
    pub formula: Formula,
    pub formula_text: String,
    pub search: SearchReport,
    pub classification: ClassificationReport,
    pub attempts: Vec<Attempt>,
}

/// Walk observer states in order and return the first one whose tubes are
/// separated by a zero-cost formula read within the refinement window.
pub fn infer_checkpoint(
    sc: &HybridScenario,
    ha: &HybridAutomaton,
    rd: &RobustData,
    obs: &ObserverAutomaton,
    exec: Exec,
) -> Result<Inferred> {
    let d = sc.refine.window;
    let dt = abstraction::to_f64(d);
    let search = SearchConfig {
        max_time: sc.search.max_time.min(dt),
        pso: crate::pso::PsoConfig {
            seed: sc.search.pso.seed ^ sc.seed,
            ..sc.search.pso.clone()
        },
        ..sc.search.clone()
    };
    let mut attempts = Vec::new();
    let mut tried = 0;
    for (si, s) in obs.states.iter().enumerate() {
        if tried >= sc.refine.max_candidates {
            break;
        }
        let mut skip = |why: &str| {
            attempts.push(Attempt {
                state: si,
                atoms: s.to_string(),
                outcome: why.to_string(),
            })
        };
        if !(s.offset < d) || obs.blank[si].is_none_or(|b| b <= d) {
            skip("refinement window does not fit before the blank");
            continue;
        }
        let tubes: Option<Vec<Tube>> = s.atoms.iter().map(|a| atom_tube(sc, ha, rd, a)).collect();
        let Some(tubes) = tubes else {
            skip("state has atoms without tubes");
            continue;
        };
        if !tubes.iter().any(|t| t.class > 0) || !tubes.iter().any(|t| t.class < 0) {
            skip("single class");
            continue;
        }
        tried += 1;
        let set = TubeSet::new(tubes, sc.step, search.max_time);
        let report = inference::pso_search(&set, &search, exec)?;
        if !report.found {
            skip(&format!("no zero-cost formula (best cost {})", report.cost));
            continue;
        }
        let classification =
            inference::verify_classification(&report.formula, &set, sc.refine.samples, sc.seed, exec)?;
        if classification.violations > 0 {
            skip(&format!("{} sampled violations", classification.violations));
            continue;
        }
        log::info!("checkpoint s{si}: {}", report.formula);
        attempts.push(Attempt {
            state: si,
            atoms: s.to_string(),
            outcome: "selected".into(),
        });
        return Ok(Inferred {
            state: si,
            atoms: s.to_string(),
            window: d,
            formula_text: report.formula.to_string(),
            formula: report.formula.clone(),
            search: report,
            classification,
            attempts,
        });
    }
    Err(PipelineError::Inference(format!(
        "no checkpoint state is separable: {}",
        serde_json::to_string(&attempts).unwrap_or_default()
    )))
}

/// Observer with verdict transitions at the inferred checkpoint.
pub fn refine(
    sc: &HybridScenario,
    ha: &HybridAutomaton,
    rd: &RobustData,
    ta: &TimedAutomaton,
    obs: &ObserverAutomaton,
    inf: &Inferred,
) -> Result<ObserverAutomaton> {
    let classify = |a: &Atom| {
        let Some(t) = atom_tube(sc, ha, rd, a) else {
            return AtomVerdict::Ambiguous;
        };
        let set = TubeSet::new(vec![t], sc.step, abstraction::to_f64(inf.window));
        match set.margin(0, &inf.formula) {
            Ok(m) if m > MARGIN_EPS && set.tubes[0].class > 0 => AtomVerdict::Holds,
            Ok(m) if m > MARGIN_EPS => AtomVerdict::Fails,
            _ => AtomVerdict::Ambiguous,
        }
    };
    Ok(observer::refine_observer(
        ta,
        obs,
        inf.state,
        inf.window,
        &inf.formula,
        classify,
        &sc.observer,
    )?)
}

/// Weak verdict of `f` at absolute time `t` on the extended trajectory of the
/// segment active at `t`.
pub fn trajectory_verdict(ha: &HybridAutomaton, tr: &Trajectory, t: f64, f: &Formula) -> Result<bool> {
    let (si, clock) = tr
        .locate(t)
        .ok_or_else(|| PipelineError::Inference(format!("time {t} outside the trajectory")))?;
    let seg = &tr.segments[si];
    let loc = ha.location_index(&seg.location)?;
    let x = ha.flow(loc, &seg.x0, clock);
    let len = (mtl::horizon(f) / tr.step).ceil() as usize + 2;
    let l = ha.location(loc);
    let sig = inference::flow_signal(&l.a, &l.b, &x, tr.step, len);
    let v = mtl::sat(&sig, f, 0.0, View::Weak).map_err(|e| PipelineError::Inference(e.to_string()))?;
    Ok(v.satisfied)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassSeparation {
    pub class: String,
    pub label: i8,
    pub outputs: Vec<TimedSymbol>,
    pub updates: Vec<Update>,
    /// Absolute time of the verdict update, if one happened.
    pub verdict_time: Option<f64>,
    pub verdict: Option<bool>,
    /// Every atom of the post-verdict state belongs to this class.
    pub separated: bool,
    /// Verdict time minus the first observed symbol time.
    pub delay_after_first_symbol: Option<f64>,
    pub final_atoms: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparationReport {
    pub classes: Vec<ClassSeparation>,
    pub separated: bool,
    /// Largest delay over the classes.
    pub max_delay: Option<f64>,
}

fn atom_class(q: TaLoc) -> Option<usize> {
    match q {
        TaLoc::Seg { k, .. } => Some(k - 1),
        TaLoc::Eos => None,
    }
}

/// Run the refined observer on each class's nominal output stream and check
/// that the verdict isolates the class.
pub fn separation(
    sc: &HybridScenario,
    ha: &HybridAutomaton,
    sim: &Simulation,
    refined: &ObserverAutomaton,
) -> Result<SeparationReport> {
    let mut classes = Vec::new();
    for (k, run) in sim.runs.iter().enumerate() {
        let outputs = run.trajectory.outputs(ha);
        let mut err = None;
        let updates = observer::run_observer(refined, &outputs, sc.horizon, |origin, f| {
            match trajectory_verdict(ha, &run.trajectory, origin, f) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    false
                }
            }
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        let verdict = updates.iter().find_map(|u| match u.cause {
            Cause::Verdict { holds } => Some((u.time, holds, u.state)),
            _ => None,
        });
        let label_of = |kk: usize| sc.classes[kk].label;
        let separated = verdict.is_some_and(|(_, _, s)| {
            refined.states[s]
                .atoms
                .iter()
                .all(|a| atom_class(a.q).is_some_and(|kk| label_of(kk) == label_of(k)))
        });
        let first = outputs.first().map(|o| o.time);
        classes.push(ClassSeparation {
            class: run.name.clone(),
            label: run.label,
            verdict_time: verdict.map(|v| v.0),
            verdict: verdict.map(|v| v.1),
            separated,
            delay_after_first_symbol: verdict.zip(first).map(|(v, f)| v.0 - f),
            final_atoms: updates
                .last()
                .map(|u| refined.states[u.state].to_string())
                .unwrap_or_default(),
            outputs,
            updates,
        });
    }
    let separated = classes.iter().all(|c| c.separated);
    let max_delay = classes
        .iter()
        .map(|c| c.delay_after_first_symbol)
        .try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d)));
    Ok(SeparationReport {
        classes,
        separated,
        max_delay,
    })
}

/// Everything the hybrid pipeline produces.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HybridArtifacts {
    pub simulation: Simulation,
    pub robust: RobustData,
    pub timing: AbstractionInput,
    pub abstraction: TimedAutomaton,
    pub observer: ObserverAutomaton,
    pub inferred: Inferred,
    pub refined: ObserverAutomaton,
    pub separation: SeparationReport,
}

/// Run every stage of a hybrid scenario.
pub fn run_hybrid(sc: &HybridScenario, ha: &HybridAutomaton, exec: Exec) -> Result<HybridArtifacts> {
    let simulation = simulate_classes(sc, ha)?;
    let robust = robust_data(sc, ha, &simulation, exec)?;
    let timing = abstraction_input(sc, &robust);
    let abstraction = abstract_timing(&timing)?;
    let observer = observer::build_observer(&abstraction, &sc.observer)?;
    let inferred = infer_checkpoint(sc, ha, &robust, &observer, exec)?;
    let refined = refine(sc, ha, &robust, &abstraction, &observer, &inferred)?;
    let separation = separation(sc, ha, &simulation, &refined)?;
    Ok(HybridArtifacts {
        simulation,
        robust,
        timing,
        abstraction,
        observer,
        inferred,
        refined,
        separation,
    })
}

/// State ids visited by the observer on each named stream.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StreamRun {
    pub name: String,
    pub updates: Vec<Update>,
}

/// Find a state by its atom list, as printed.
pub fn state_by_text(obs: &ObserverAutomaton, text: &str) -> Option<usize> {
    obs.states.iter().position(|s: &ObsState| s.to_string() == text)
}
