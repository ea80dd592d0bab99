//! Scenario configuration and the bundled case studies.
//!
//! A scenario is either a hybrid model with labelled nominal runs (the full
//! pipeline) or a timing-only abstraction input (observer construction only).

use serde::{Deserialize, Serialize};

use crate::abstraction::{self, AbstractionInput, Time};
use crate::bisim::{LeadLagConfig, Shaping};
use crate::hybrid::{
    AffineReset, Event, EventKind, HybridAutomaton, HybridError, LinearConstraint, Location, Relation,
    ScheduledEvent, TimedSymbol,
};
use crate::inference::{SearchConfig, Template};
use crate::linalg::{Mat, Vector};
use crate::observer::BuildOptions;
use crate::pso::PsoConfig;

/// Physical constants of the single-room model.
///
/// State: `x1` humidity ratio, `x2` air temperature (K), `x3` moisture
/// generated by occupants (mg/s), `x4` heat generated by occupants (W).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmartBuildingParams {
    /// Thermal capacitance of the room air (J/K).
    pub c: f64,
    /// Air mass (kg).
    pub m_air: f64,
    /// Infiltration mass flow (kg/s).
    pub g: f64,
    /// Wall conductance (W/K).
    pub k: f64,
    /// Specific heat of air (J/(kg K)).
    pub cp: f64,
    /// Latent heat coupling of infiltration moisture (J/kg).
    pub beta: f64,
    pub t_supply: f64,
    pub t_ambient: f64,
    pub w_supply: f64,
    pub w_ambient: f64,
    /// Supply mass flow per location, in the order of [`LOCATIONS`].
    pub mass_flow: [f64; 6],
    /// Temperature band `[lo, hi]` per occupancy level (1, 2, 3).
    pub bands: [[f64; 2]; 3],
    /// Occupant load `[moisture mg/s, heat W]` added by each person entering.
    pub per_person: [f64; 2],
    /// mg/s to kg/s.
    pub moisture_scale: f64,
}

impl Default for SmartBuildingParams {
    fn default() -> Self {
        Self {
            c: 13_000.0,
            m_air: 110.0,
            g: 0.002,
            k: 12.36,
            cp: 620.0,
            beta: 1000.0,
            t_supply: 290.0,
            t_ambient: 303.0,
            w_supply: 0.01,
            w_ambient: 0.0105,
            mass_flow: [0.5, 0.5, 0.6, 0.5, 0.6, 0.8],
            bands: [[290.4, 290.6], [290.5, 290.7], [290.6, 290.8]],
            per_person: [300.0, 80.0],
            moisture_scale: 1e-6,
        }
    }
}

/// Location ids: empty room, then `(level, persons)`.
pub const LOCATIONS: [&str; 6] = ["l0", "l1_1", "l2_1", "l1_2", "l2_2", "l3_2"];

impl SmartBuildingParams {
    pub fn validate(&self) -> Result<(), String> {
        let pos = [self.c, self.m_air, self.g, self.k, self.cp, self.beta, self.moisture_scale];
        if pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) || self.mass_flow.iter().any(|v| !(*v > 0.0)) {
            return Err("physical constants and mass flows must be positive".into());
        }
        if !(self.t_supply < self.t_ambient) {
            return Err("supply temperature must be below ambient".into());
        }
        let flat: Vec<f64> = self.bands.iter().flatten().copied().collect();
        if flat.iter().any(|t| !(290.4..=290.8).contains(t)) {
            return Err("temperature bands must lie in [290.4, 290.8]".into());
        }
        for (i, b) in self.bands.iter().enumerate() {
            if !(b[0] < b[1]) || (i > 0 && !(self.bands[i - 1][0] < b[0] && self.bands[i - 1][1] < b[1])) {
                return Err("temperature bands must be ordered".into());
            }
        }
        Ok(())
    }

    /// Dynamics of a location with supply flow `mdot`; `occupied` adds the
    /// occupant coupling terms.
    pub fn dynamics(&self, mdot: f64, occupied: bool) -> (Mat, Vector) {
        let mut a = Mat::zeros(4, 4);
        let mut b = Vector::zeros(4);
        a[(0, 0)] = -(mdot + self.g) / self.m_air;
        b[0] = (mdot * self.w_supply + self.g * self.w_ambient) / self.m_air;
        a[(1, 1)] = -(mdot * self.cp + self.k) / self.c;
        a[(1, 0)] = self.beta * self.g / self.c;
        b[1] = (mdot * self.cp * self.t_supply - self.beta * self.g * self.w_ambient + self.k * self.t_ambient) / self.c;
        if occupied {
            a[(0, 2)] = self.moisture_scale / self.m_air;
            a[(1, 2)] = -self.moisture_scale * self.beta / self.c;
            a[(1, 3)] = 1.0 / self.c;
        }
        (a, b)
    }

    /// Steady state of the empty room with no occupant load.
    pub fn empty_equilibrium(&self) -> Vector {
        let (a, b) = self.dynamics(self.mass_flow[0], false);
        let w = -b[0] / a[(0, 0)];
        let t = -(b[1] + a[(1, 0)] * w) / a[(1, 1)];
        Vector::from_vec(vec![w, t, 0.0, 0.0])
    }

    /// Reset offset for `persons` people entering.
    pub fn entry_offset(&self, persons: f64) -> Vector {
        Vector::from_vec(vec![0.0, 0.0, persons * self.per_person[0], persons * self.per_person[1]])
    }
}

fn band(lo: f64, hi: f64) -> Vec<LinearConstraint> {
    vec![
        LinearConstraint::coord(4, 1, Relation::Ge, lo),
        LinearConstraint::coord(4, 1, Relation::Le, hi),
    ]
}

/// Six-location occupancy model: a door event (one or two persons) and
/// temperature thresholds that raise the ventilation level.
pub fn build_smart_building(p: &SmartBuildingParams) -> Result<HybridAutomaton, HybridError> {
    p.validate().map_err(HybridError::Invalid)?;
    let occupancy = [0usize, 1, 2, 1, 2, 3];
    let locations = LOCATIONS
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let (a, b) = p.dynamics(p.mass_flow[i], i > 0);
            let invariant = match occupancy[i] {
                0 => Vec::new(),
                lvl => band(p.bands[lvl - 1][0], p.bands[lvl - 1][1]),
            };
            Location {
                id: (*id).to_string(),
                a,
                b,
                invariant,
            }
        })
        .collect();
    let door = |id: &str, target: &str, persons: f64| Event {
        id: id.into(),
        source: "l0".into(),
        target: target.into(),
        guard: Vec::new(),
        reset: AffineReset::translation(p.entry_offset(persons)),
        symbol: Some("door".into()),
        kind: EventKind::Nondeterministic,
    };
    let threshold = |id: &str, source: &str, target: &str, at: f64| Event {
        id: id.into(),
        source: source.into(),
        target: target.into(),
        guard: vec![LinearConstraint::coord(4, 1, Relation::Eq, at)],
        reset: AffineReset::identity(),
        symbol: None,
        kind: EventKind::Deterministic,
    };
    let events = vec![
        door("e1_1", "l1_1", 1.0),
        door("e1_2", "l1_2", 2.0),
        threshold("e2_1", "l1_1", "l2_1", p.bands[0][1]),
        threshold("e2_2", "l1_2", "l2_2", p.bands[0][1]),
        threshold("e3_2", "l2_2", "l3_2", p.bands[1][1]),
    ];
    HybridAutomaton::new(4, locations, events)
}

/// Where the hybrid model comes from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    /// Path to a hybrid automaton JSON file, relative to the config file.
    File(String),
    Inline(HybridAutomaton),
    SmartBuilding(SmartBuildingParams),
}

/// Axis-aligned box of start states for one segment of a class.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InitialBox {
    /// Segment index the box belongs to (0 is the initial location).
    pub segment: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// A labelled nominal run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    /// `+1` or `-1`; the inferred formula accepts the `+1` class.
    pub label: i8,
    pub location: String,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub schedule: Vec<ScheduledEvent>,
    /// Start sets that the segment balls must cover.
    #[serde(default)]
    pub boxes: Vec<InitialBox>,
}

/// Explicit Lyapunov weights: `q` for moving coordinates, `s` for constant ones.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Weights {
    pub q: Vec<f64>,
    #[serde(default)]
    pub s: Vec<f64>,
}

/// How to build one location's certificate. Locations without an entry use
/// unit weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateRule {
    Shaping(Shaping),
    Weights(Weights),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocationCertificate {
    pub location: String,
    pub rule: CertificateRule,
}

fn default_step() -> f64 {
    0.05
}
fn default_gamma_floor() -> f64 {
    1e-6
}
fn default_cover_grid() -> usize {
    5
}
fn default_resolution() -> Time {
    Time::new(1, 10)
}
fn default_samples() -> usize {
    500
}
fn default_candidates() -> usize {
    8
}

/// Checkpoint search and refinement settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Evaluation time `d` on the checkpoint state's timer.
    #[serde(with = "abstraction::rat")]
    pub window: Time,
    /// Classification samples per tube.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// How many candidate observer states to try, in state order.
    #[serde(default = "default_candidates")]
    pub max_candidates: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HybridScenario {
    pub name: String,
    pub model: ModelSource,
    pub classes: Vec<ClassSpec>,
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    /// Upper bound on any tube radius.
    pub gamma_max: f64,
    /// Smallest radius used for a segment without a start set.
    #[serde(default = "default_gamma_floor")]
    pub gamma_floor: f64,
    #[serde(default)]
    pub certificates: Vec<LocationCertificate>,
    #[serde(default = "default_cover_grid")]
    pub cover_grid: usize,
    #[serde(default)]
    pub lead_lag: LeadLagConfig,
    #[serde(with = "abstraction::rat", default = "default_resolution")]
    pub resolution: Time,
    #[serde(default)]
    pub observer: BuildOptions,
    pub search: SearchConfig,
    pub refine: RefineConfig,
    #[serde(default)]
    pub seed: u64,
}

/// A named observation stream for the observer-only scenarios.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NamedStream {
    pub name: String,
    pub symbols: Vec<TimedSymbol>,
    pub until: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimedScenario {
    pub name: String,
    pub abstraction: AbstractionInput,
    #[serde(default)]
    pub observer: BuildOptions,
    #[serde(default)]
    pub streams: Vec<NamedStream>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum ScenarioConfig {
    Hybrid(HybridScenario),
    Timed(TimedScenario),
}

impl ScenarioConfig {
    pub fn name(&self) -> &str {
        match self {
            ScenarioConfig::Hybrid(h) => &h.name,
            ScenarioConfig::Timed(t) => &t.name,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ScenarioConfig::Hybrid(h) = self else {
            return Ok(());
        };
        if !(h.horizon > 0.0) || !(h.step > 0.0) {
            return Err("horizon and step must be positive".into());
        }
        if !(h.gamma_max > 0.0) || !(h.gamma_floor > 0.0) || h.gamma_floor > h.gamma_max {
            return Err("need 0 < gamma_floor <= gamma_max".into());
        }
        if h.classes.is_empty() {
            return Err("no classes".into());
        }
        for c in &h.classes {
            if c.label != 1 && c.label != -1 {
                return Err(format!("class {:?}: label must be +1 or -1", c.name));
            }
            for b in &c.boxes {
                if b.lo.len() != c.x0.len() || b.hi.len() != c.x0.len() {
                    return Err(format!("class {:?}: box dimension differs from x0", c.name));
                }
            }
        }
        if !(h.refine.window > Time::from_integer(0)) || !(h.resolution > Time::from_integer(0)) {
            return Err("refine window and resolution must be positive".into());
        }
        if let ModelSource::SmartBuilding(p) = &h.model {
            p.validate()?;
        }
        Ok(())
    }
}

/// The bundled occupancy case study with default constants.
pub fn smart_building() -> ScenarioConfig {
    let p = SmartBuildingParams::default();
    let x0 = p.empty_equilibrium();
    let door_at = 10.0;
    // Occupant loads vary per visit (+-20 mg/s, +-1.75 W). They sit in x3, x4
    // from the start; the empty room ignores them, the door adds the nominal load.
    let spread = [0.0, 0.0, 20.0, 1.75];
    let class = |name: &str, label: i8, event: &str| ClassSpec {
        name: name.into(),
        label,
        location: "l0".into(),
        x0: x0.as_slice().to_vec(),
        schedule: vec![ScheduledEvent {
            time: door_at,
            event: event.into(),
        }],
        boxes: vec![InitialBox {
            segment: 0,
            lo: (0..4).map(|i| x0[i] - spread[i]).collect(),
            hi: (0..4).map(|i| x0[i] + spread[i]).collect(),
        }],
    };
    let mut certificates = vec![LocationCertificate {
        location: "l0".into(),
        rule: CertificateRule::Weights(Weights {
            q: vec![1e8, 1e8],
            s: spread[2..].iter().map(|d| 1.0 / (d * d)).collect(),
        }),
    }];
    certificates.extend(LOCATIONS[1..].iter().map(|l| LocationCertificate {
        location: (*l).to_string(),
        rule: CertificateRule::Shaping(Shaping {
            target: 1,
            floor: 1.0,
            caps: vec![None, None, Some(1e-8), Some(2e-5)],
        }),
    }));
    ScenarioConfig::Hybrid(HybridScenario {
        name: "smart_building".into(),
        model: ModelSource::SmartBuilding(p),
        classes: vec![class("one_person", -1, "e1_1"), class("two_persons", 1, "e1_2")],
        horizon: 310.0,
        step: default_step(),
        gamma_max: 10.0,
        gamma_floor: default_gamma_floor(),
        certificates,
        cover_grid: default_cover_grid(),
        lead_lag: LeadLagConfig::default(),
        resolution: default_resolution(),
        observer: BuildOptions::default(),
        search: SearchConfig {
            pso: PsoConfig::default(),
            coordinates: vec![1],
            max_time: 5.0,
            zeta: 1.0,
            slack: 0.1,
            templates: Template::ALL.to_vec(),
        },
        refine: RefineConfig {
            window: Time::from_integer(5),
            samples: default_samples(),
            max_candidates: default_candidates(),
        },
        seed: 2024,
    })
}

/// The three-trajectory worked example, observer only.
pub fn toy() -> ScenarioConfig {
    ScenarioConfig::Timed(TimedScenario {
        name: "toy".into(),
        abstraction: abstraction::toy_input(),
        observer: BuildOptions::default(),
        streams: vec![
            NamedStream {
                name: "nominal".into(),
                symbols: vec![TimedSymbol {
                    time: 29.0,
                    symbol: "alpha".into(),
                }],
                until: 60.0,
            },
            NamedStream {
                name: "silent".into(),
                symbols: Vec::new(),
                until: 80.0,
            },
        ],
    })
}

/// Built-in scenario by name.
pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    match name {
        "smart-building" | "smart_building" => Some(smart_building()),
        "toy" => Some(toy()),
        _ => None,
    }
}
