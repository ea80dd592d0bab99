//! Quadratic bisimulation functions and the robustness data derived from them.
//!
//! For a location with dynamics `x' = A x + b`, `Phi(x1, x2) =
//! sqrt((x1-x2)^T M (x1-x2))` is nonincreasing along pairs of trajectories
//! whenever `M > 0` and `A^T M + M A <= 0`. Sublevel sets of `Phi` around a
//! nominal trajectory are the tubes used by the timed abstraction.
//!
//! Locations whose `A` has zero rows (states that stay constant, such as
//! occupancy parameters) are not Hurwitz. For those the certificate is built
//! on the coordinates `w = x_D + A_DD^{-1} A_DC x_C` (deviation from the
//! parameter-dependent equilibrium), which makes the derivative of `Phi^2`
//! negative semidefinite instead of definite.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hybrid::{HybridError, LinearConstraint, Relation, RunEnd, Simulator};
use crate::linalg::{self, Mat, Vector};
use crate::par::{self, Exec};

#[derive(Debug, Error)]
pub enum BisimError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("A is not Hurwitz (spectral abscissa {0})")]
    NotHurwitz(f64),
    #[error("matrix is not positive definite (min eigenvalue {0})")]
    NotPositiveDefinite(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("no feasible certificate: {0}")]
    Infeasible(String),
    #[error("perturbed sample {sample} left through {got:?} instead of {expected:?}")]
    Inconsistent {
        sample: usize,
        expected: String,
        got: String,
    },
    #[error(transparent)]
    Hybrid(#[from] HybridError),
}

pub type Result<T> = std::result::Result<T, BisimError>;

/// `Phi(x1, x2) = sqrt((x1 - x2)^T M (x1 - x2))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBisim {
    #[serde(with = "linalg::rows")]
    pub m: Mat,
}

impl QuadraticBisim {
    pub fn new(m: Mat) -> Result<Self> {
        if !linalg::is_symmetric(&m, 1e-10) {
            return Err(BisimError::Validation("M is not symmetric".into()));
        }
        let l = linalg::min_eigenvalue(&m);
        if !(l > 0.0) {
            return Err(BisimError::NotPositiveDefinite(l));
        }
        Ok(Self { m })
    }

    pub fn phi(&self, x1: &Vector, x2: &Vector) -> f64 {
        linalg::weighted_norm(&self.m, &(x1 - x2))
    }

    /// Euclidean radius bound of the `Phi < gamma` ball.
    pub fn gamma_hat(&self, gamma: f64) -> f64 {
        gamma_hat(&self.m, gamma)
    }

    /// Bound on the deviation of coordinate `j` inside the `Phi < gamma` ball.
    pub fn gamma_tilde(&self, gamma: f64, j: usize) -> f64 {
        gamma_tilde(&self.m, gamma, j)
    }
}

/// `gamma / sqrt(lambda_min(M))`.
pub fn gamma_hat(m: &Mat, gamma: f64) -> f64 {
    gamma / linalg::min_eigenvalue(m).sqrt()
}

/// Largest `z` with `z^2 e_j e_j^T <= M`, i.e. `1 / sqrt((M^-1)_jj)`.
pub fn z_bound(m: &Mat, j: usize) -> f64 {
    match m.clone().try_inverse() {
        Some(inv) if inv[(j, j)] > 0.0 => 1.0 / inv[(j, j)].sqrt(),
        _ => 0.0,
    }
}

/// `gamma / z_j`.
pub fn gamma_tilde(m: &Mat, gamma: f64, j: usize) -> f64 {
    gamma / z_bound(m, j)
}

/// Solve `A^T M + M A = -Q` for symmetric `M`.
///
/// Requires `Q` symmetric positive definite and `A` Hurwitz. The system is
/// solved directly on the `n(n+1)/2` independent entries of `M`.
pub fn solve_lyapunov(a: &Mat, q: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(BisimError::Validation("A and Q must be square of equal size".into()));
    }
    if !linalg::is_symmetric(q, 1e-12) {
        return Err(BisimError::Validation("Q is not symmetric".into()));
    }
    let qmin = linalg::min_eigenvalue(q);
    if !(qmin > 0.0) {
        return Err(BisimError::NotPositiveDefinite(qmin));
    }
    let abscissa = linalg::spectral_abscissa(a);
    if !(abscissa < 0.0) {
        return Err(BisimError::NotHurwitz(abscissa));
    }
    let idx = |i: usize, j: usize| {
        let (p, q) = if i <= j { (i, j) } else { (j, i) };
        p * n - p * (p + 1) / 2 + q
    };
    let nu = n * (n + 1) / 2;
    let mut sys = DMatrix::<f64>::zeros(nu, nu);
    let mut rhs = Vector::zeros(nu);
    for p in 0..n {
        for qq in p..n {
            let row = idx(p, qq);
            rhs[row] = -q[(p, qq)];
            for k in 0..n {
                sys[(row, idx(k, qq))] += a[(k, p)];
                sys[(row, idx(p, k))] += a[(k, qq)];
            }
        }
    }
    let sol = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| BisimError::Numerical("singular Lyapunov system".into()))?;
    let m = Mat::from_fn(n, n, |i, j| sol[idx(i, j)]);
    let resid = (a.transpose() * &m + &m * a + q).norm();
    if resid > 1e-8 * q.norm() {
        return Err(BisimError::Numerical(format!(
            "Lyapunov residual {resid:e} exceeds tolerance"
        )));
    }
    Ok(m)
}

/// Indices of coordinates whose row of `A` is identically zero.
pub fn constant_coordinates(a: &Mat) -> Vec<usize> {
    (0..a.nrows())
        .filter(|&i| a.row(i).iter().all(|v| *v == 0.0))
        .collect()
}

/// Certificate from diagonal weights: `q` for the moving coordinates and
/// `s` for the constant ones (empty when `A` is Hurwitz).
pub fn structured_certificate(a: &Mat, q: &[f64], s: &[f64]) -> Result<Mat> {
    let n = a.nrows();
    let cs = constant_coordinates(a);
    let ds: Vec<usize> = (0..n).filter(|i| !cs.contains(i)).collect();
    if q.len() != ds.len() || s.len() != cs.len() {
        return Err(BisimError::Validation(format!(
            "expected {} dynamic and {} constant weights",
            ds.len(),
            cs.len()
        )));
    }
    if ds.is_empty() {
        return Err(BisimError::Infeasible("every coordinate is constant".into()));
    }
    let add = Mat::from_fn(ds.len(), ds.len(), |i, j| a[(ds[i], ds[j])]);
    let m11 = solve_lyapunov(&add, &Mat::from_diagonal(&Vector::from_column_slice(q)))?;
    if cs.is_empty() {
        return Ok(m11);
    }
    let adc = Mat::from_fn(ds.len(), cs.len(), |i, j| a[(ds[i], cs[j])]);
    let k = add
        .clone()
        .lu()
        .solve(&adc)
        .ok_or_else(|| BisimError::Numerical("singular dynamic block".into()))?;
    let mdc = &m11 * &k;
    let mcc = k.transpose() * &m11 * &k + Mat::from_diagonal(&Vector::from_column_slice(s));
    let mut m = Mat::zeros(n, n);
    for (i, &di) in ds.iter().enumerate() {
        for (j, &dj) in ds.iter().enumerate() {
            m[(di, dj)] = m11[(i, j)];
        }
        for (j, &cj) in cs.iter().enumerate() {
            m[(di, cj)] = mdc[(i, j)];
            m[(cj, di)] = mdc[(i, j)];
        }
    }
    for (i, &ci) in cs.iter().enumerate() {
        for (j, &cj) in cs.iter().enumerate() {
            m[(ci, cj)] = mcc[(i, j)];
        }
    }
    Ok((&m + m.transpose()) * 0.5)
}

fn default_pairs() -> usize {
    100
}
fn default_pair_horizon() -> f64 {
    20.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyOptions {
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_pair_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            pairs: default_pairs(),
            horizon: default_pair_horizon(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub min_eig_m: f64,
    pub max_eig_lyap: f64,
    pub lyap_tolerance: f64,
    /// Largest relative increase of `Phi` seen over the sampled pairs.
    pub worst_increase: f64,
    pub valid: bool,
}

/// Check the certificate conditions for `(A, M)` and sample trajectory pairs.
pub fn verify_bisim(a: &Mat, m: &Mat, opts: &VerifyOptions) -> Result<VerifyReport> {
    let n = a.nrows();
    if m.nrows() != n || m.ncols() != n {
        return Err(BisimError::Validation("M and A differ in size".into()));
    }
    if !linalg::is_symmetric(m, 1e-10) {
        return Err(BisimError::Validation("M is not symmetric".into()));
    }
    let min_eig_m = linalg::min_eigenvalue(m);
    let lyap = a.transpose() * m + m * a;
    let max_eig_lyap = linalg::max_eigenvalue(&lyap);
    let lyap_tolerance = 1e-9 * a.norm().max(1.0) * m.norm();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..opts.pairs {
        let d0 = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut t1: f64 = rng.random_range(0.0..opts.horizon);
        let mut t2: f64 = rng.random_range(0.0..opts.horizon);
        if t1 > t2 {
            std::mem::swap(&mut t1, &mut t2);
        }
        let d1 = linalg::expm(&(a * t1)) * &d0;
        let d2 = linalg::expm(&(a * t2)) * &d0;
        let p1 = linalg::weighted_norm(m, &d1);
        let p2 = linalg::weighted_norm(m, &d2);
        if p1 > 0.0 {
            worst = worst.max((p2 - p1) / p1);
        }
    }
    let valid = min_eig_m > 0.0 && max_eig_lyap <= lyap_tolerance && worst <= 1e-7;
    Ok(VerifyReport {
        min_eig_m,
        max_eig_lyap,
        lyap_tolerance,
        worst_increase: worst,
        valid,
    })
}

/// Diagonal shaping targets for [`optimize_m`].
///
/// `caps[k] = Some(eta)` bounds `M_kk <= eta`; the target coordinate must also
/// satisfy `M_jj >= floor`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Shaping {
    /// Target coordinate (0-based) whose deviation bound `z_j` is maximised.
    pub target: usize,
    pub floor: f64,
    pub caps: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizedM {
    #[serde(with = "linalg::rows")]
    pub m: Mat,
    pub z: f64,
    pub evaluations: usize,
}

fn shaped(a: &Mat, theta: &[f64], nd: usize, sh: &Shaping) -> Option<(Mat, f64, f64)> {
    let q: Vec<f64> = theta[..nd].iter().map(|t| t.exp()).collect();
    let s: Vec<f64> = theta[nd..].iter().map(|t| t.exp()).collect();
    let mut m = structured_certificate(a, &q, &s).ok()?;
    let j = sh.target;
    let scale = sh
        .caps
        .iter()
        .enumerate()
        .filter_map(|(k, c)| c.map(|eta| eta / m[(k, k)]))
        .fold(f64::INFINITY, f64::min);
    let scale = if scale.is_finite() { scale } else { sh.floor / m[(j, j)] };
    m *= scale;
    if m[(j, j)] < sh.floor * (1.0 - 1e-9) {
        return None;
    }
    let z = z_bound(&m, j);
    let ev = linalg::sym_eigenvalues(&m);
    let cond = ev[0] / ev[ev.len() - 1];
    (z.is_finite() && ev[0] > 0.0).then_some((m, z, cond))
}

/// Maximise `z_j` subject to the shaping caps and floor.
///
/// The certificate is parameterised by log-diagonal Lyapunov weights (plus
/// weights for constant coordinates), scaled to the tightest cap, and refined
/// by a deterministic compass search. Ties in `z` prefer better conditioning.
pub fn optimize_m(a: &Mat, sh: &Shaping) -> Result<OptimizedM> {
    let n = a.nrows();
    if sh.target >= n || sh.caps.len() != n {
        return Err(BisimError::Validation(format!(
            "shaping for dimension {n} needs a target < {n} and {n} caps"
        )));
    }
    if !(sh.floor > 0.0) {
        return Err(BisimError::Validation("floor must be positive".into()));
    }
    let cs = constant_coordinates(a);
    let nd = n - cs.len();
    if nd == 0 {
        return Err(BisimError::Infeasible("every coordinate is constant".into()));
    }
    let add = Mat::from_fn(nd, nd, |i, j| {
        let ds: Vec<usize> = (0..n).filter(|k| !cs.contains(k)).collect();
        a[(ds[i], ds[j])]
    });
    let abscissa = linalg::spectral_abscissa(&add);
    if !(abscissa < 0.0) {
        return Err(BisimError::NotHurwitz(abscissa));
    }
    let better = |x: &(Mat, f64, f64), y: &(Mat, f64, f64)| {
        let rel = (x.1 - y.1) / y.1.max(1e-300);
        rel > 1e-12 || (rel.abs() <= 1e-12 && x.2 > y.2 + 1e-12)
    };
    let mut theta = vec![0.0; n];
    let mut evals = 1;
    let mut best = shaped(a, &theta, nd, sh);
    // a few coarse restarts in case the origin is infeasible
    if best.is_none() {
        'outer: for scale in [2.0, 4.0, 8.0, 16.0] {
            for k in 0..n {
                for sgn in [1.0, -1.0] {
                    let mut t = vec![0.0; n];
                    t[k] = sgn * scale;
                    evals += 1;
                    if let Some(c) = shaped(a, &t, nd, sh) {
                        theta = t;
                        best = Some(c);
                        break 'outer;
                    }
                }
            }
        }
    }
    let Some(mut best) = best else {
        return Err(BisimError::Infeasible(
            "no weighting satisfies the floor under the caps".into(),
        ));
    };
    let mut step = 1.0;
    while step > 1e-7 && evals < 20_000 {
        let mut improved = false;
        for k in 0..n {
            for sgn in [1.0, -1.0] {
                let mut t = theta.clone();
                t[k] += sgn * step;
                evals += 1;
                if let Some(c) = shaped(a, &t, nd, sh) {
                    if better(&c, &best) {
                        best = c;
                        theta = t;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let (m, z, _) = best;
    Ok(OptimizedM {
        m,
        z,
        evaluations: evals,
    })
}

/// Exit region that the tube must avoid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Obstacle {
    pub constraints: Vec<LinearConstraint>,
}

/// Guards of the other deterministic events of `loc` plus the outside of each
/// invariant face, except faces lying on the nominal event's guard.
pub fn obstacles_for(
    ha: &crate::hybrid::HybridAutomaton,
    loc: usize,
    nominal_event: Option<usize>,
) -> Vec<Obstacle> {
    use crate::hybrid::EventKind;
    let mut out = Vec::new();
    let nominal_guard: &[LinearConstraint] = nominal_event
        .map(|e| ha.event(e).guard.as_slice())
        .unwrap_or(&[]);
    for &e in ha.outgoing(loc) {
        let ev = ha.event(e);
        if Some(e) == nominal_event || ev.kind != EventKind::Deterministic || ev.guard.is_empty() {
            continue;
        }
        out.push(Obstacle {
            constraints: ev.guard.clone(),
        });
    }
    for face in &ha.location(loc).invariant {
        let on_nominal = nominal_guard.iter().any(|g| same_hyperplane(g, face));
        if on_nominal {
            continue;
        }
        let rel = match face.rel {
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
            Relation::Eq => continue,
        };
        out.push(Obstacle {
            constraints: vec![LinearConstraint::new(face.coeffs.clone(), rel, face.bound)],
        });
    }
    out
}

fn same_hyperplane(a: &LinearConstraint, b: &LinearConstraint) -> bool {
    let na: f64 = a.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return false;
    }
    let dot: f64 = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
    if (dot.abs() - 1.0).abs() > 1e-12 {
        return false;
    }
    (a.bound / na - dot.signum() * b.bound / nb).abs() <= 1e-9 * (1.0 + (a.bound / na).abs())
}

/// `M`-weighted distance from `p` to the region; exact for a single
/// constraint and a lower bound for intersections.
pub fn weighted_distance(m_inv: &Mat, ob: &Obstacle, p: &Vector) -> f64 {
    let mut d: f64 = 0.0;
    for c in &ob.constraints {
        let w = c.normal();
        let denom = w.dot(&(m_inv * &w)).sqrt();
        if denom == 0.0 {
            continue;
        }
        let v = c.value(p);
        let gap = match c.rel {
            Relation::Ge => (-v).max(0.0),
            Relation::Le => v.max(0.0),
            Relation::Eq => v.abs(),
        };
        d = d.max(gap / denom);
    }
    d
}

/// Largest safe tube radius along the nominal samples, times 0.99, capped at
/// `gamma_max`.
pub fn gamma_for_segment(m: &Mat, nominal: &[Vector], obstacles: &[Obstacle], gamma_max: f64) -> Result<f64> {
    if obstacles.is_empty() {
        return Ok(gamma_max);
    }
    let m_inv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| BisimError::Numerical("M is singular".into()))?;
    let mut dmin = f64::INFINITY;
    for p in nominal {
        for ob in obstacles {
            dmin = dmin.min(weighted_distance(&m_inv, ob, p));
        }
    }
    Ok((0.99 * dmin).min(gamma_max))
}

/// Point on the boundary `Phi(x, center) = radius`.
pub fn sample_boundary<R: Rng>(m: &Mat, center: &Vector, radius: f64, rng: &mut R) -> Vector {
    // whiten with M = Q diag(l) Q^T so directions are uniform on the ellipsoid's own sphere
    let eig = m.clone().symmetric_eigen();
    let n = center.len();
    loop {
        let u = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = u.norm();
        if norm > 1e-12 {
            let w = Vector::from_fn(n, |i, _| u[i] / (norm * eig.eigenvalues[i].max(f64::MIN_POSITIVE).sqrt()));
            let d = &eig.eigenvectors * w;
            let r = linalg::weighted_norm(m, &d);
            return center + d * (radius / r);
        }
    }
}

/// Point drawn uniformly from the ball `Phi(x, center) <= radius`.
pub fn sample_ball<R: Rng>(m: &Mat, center: &Vector, radius: f64, rng: &mut R) -> Vector {
    let n = center.len();
    let s: f64 = rng.random::<f64>().powf(1.0 / n as f64);
    sample_boundary(m, center, radius * s, rng)
}

/// How the nominal segment ends.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum NominalExit {
    /// Deterministic event reached at clock `tau`.
    Event { event: usize, tau: f64 },
    /// Externally scheduled event taken at clock `tau`.
    Scheduled { event: usize, tau: f64 },
    /// Run ends (horizon) at clock `dwell` without an event.
    End { dwell: f64 },
}

fn default_ll_samples() -> usize {
    500
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeadLagConfig {
    #[serde(default = "default_ll_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for LeadLagConfig {
    fn default() -> Self {
        Self {
            samples: default_ll_samples(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeadLag {
    pub lead: f64,
    pub lag: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Post-reset states of the perturbed samples, for chaining tubes.
    #[serde(skip)]
    pub exits: Vec<Vector>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Spread of event times over perturbed starts on `Phi = 0.999 gamma`.
///
/// Returns `(tau - min, max - tau)` inflated by 5%. Any sample that leaves by
/// a different event (or deadlocks) is an error.
#[allow(clippy::too_many_arguments)]
pub fn lead_lag(
    sim: &Simulator<'_>,
    loc: usize,
    x0: &Vector,
    exit: &NominalExit,
    m: &Mat,
    gamma: f64,
    cfg: &LeadLagConfig,
    exec: Exec,
) -> Result<LeadLag> {
    let ha_name = |e: usize| format!("event #{e}");
    let results = par::try_map(exec, cfg.samples, |i| -> Result<(f64, Option<Vector>)> {
        let mut rng = rng_for(cfg.seed, i as u64);
        let x = sample_boundary(m, x0, 0.999 * gamma, &mut rng);
        let inconsistent = |got: String, expected: String| BisimError::Inconsistent {
            sample: i,
            expected,
            got,
        };
        match exit {
            NominalExit::Event { event, tau } => {
                let run = sim
                    .run_location(loc, &x, 2.0 * tau + 10.0, None, false)
                    .map_err(|e| inconsistent(e.to_string(), ha_name(*event)))?;
                match run.end {
                    RunEnd::Event(e) if e == *event => Ok((run.dwell, Some(run.state))),
                    RunEnd::Event(e) => Err(inconsistent(ha_name(e), ha_name(*event))),
                    RunEnd::Limit => Err(inconsistent("no event".into(), ha_name(*event))),
                }
            }
            NominalExit::Scheduled { event, tau } => {
                let run = sim
                    .run_location(loc, &x, tau + 1.0, Some((*tau, *event)), false)
                    .map_err(|e| inconsistent(e.to_string(), ha_name(*event)))?;
                match run.end {
                    RunEnd::Event(e) if e == *event => Ok((run.dwell, Some(run.state))),
                    RunEnd::Event(e) => Err(inconsistent(ha_name(e), ha_name(*event))),
                    RunEnd::Limit => Err(inconsistent("no event".into(), ha_name(*event))),
                }
            }
            NominalExit::End { dwell } => {
                let run = sim
                    .run_location(loc, &x, *dwell, None, false)
                    .map_err(|e| inconsistent(e.to_string(), "end".into()))?;
                match run.end {
                    RunEnd::Limit => Ok((run.dwell, None)),
                    RunEnd::Event(e) => Err(inconsistent(ha_name(e), "end".into())),
                }
            }
        }
    })?;
    let (tau, event) = match exit {
        NominalExit::Event { event, tau } => (*tau, Some(*event)),
        NominalExit::Scheduled { event, tau } => (*tau, Some(*event)),
        NominalExit::End { dwell } => (*dwell, None),
    };
    let tmin = results.iter().map(|r| r.0).fold(tau, f64::min);
    let tmax = results.iter().map(|r| r.0).fold(tau, f64::max);
    let exits = match event {
        Some(e) => results
            .into_iter()
            .filter_map(|r| r.1)
            .map(|s| sim_reset(sim, e, &s))
            .collect(),
        None => Vec::new(),
    };
    let deterministic = matches!(exit, NominalExit::Event { .. });
    Ok(LeadLag {
        lead: if deterministic { 1.05 * (tau - tmin) } else { 0.0 },
        lag: if deterministic { 1.05 * (tmax - tau) } else { 0.0 },
        tau_min: tmin,
        tau_max: tmax,
        exits,
    })
}

fn sim_reset(sim: &Simulator<'_>, e: usize, x: &Vector) -> Vector {
    sim.automaton().event(e).reset.apply(x)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverReport {
    pub covered: bool,
    pub max_phi: f64,
    pub witness: Option<Vec<f64>>,
    pub points: usize,
}

/// Whether the box `[lo, hi]` lies in `Phi(., center) < gamma`, checked on a
/// grid with `per_axis` points per nondegenerate axis plus all vertices.
pub fn check_cover(
    m: &Mat,
    center: &Vector,
    gamma: f64,
    lo: &[f64],
    hi: &[f64],
    per_axis: usize,
) -> Result<CoverReport> {
    let n = center.len();
    if lo.len() != n || hi.len() != n || lo.iter().zip(hi).any(|(a, b)| a > b) {
        return Err(BisimError::Validation("box bounds do not match the state".into()));
    }
    let per_axis = per_axis.max(2);
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            if lo[i] == hi[i] {
                vec![lo[i]]
            } else {
                (0..per_axis)
                    .map(|k| lo[i] + (hi[i] - lo[i]) * k as f64 / (per_axis - 1) as f64)
                    .collect()
            }
        })
        .collect();
    let mut idx = vec![0usize; n];
    let mut max_phi: f64 = 0.0;
    let mut witness = None;
    let mut points = 0;
    loop {
        let p = Vector::from_fn(n, |i, _| axes[i][idx[i]]);
        let phi = linalg::weighted_norm(m, &(&p - center));
        points += 1;
        if phi > max_phi {
            max_phi = phi;
            if phi >= gamma {
                witness = Some(p.as_slice().to_vec());
            }
        }
        let mut k = 0;
        loop {
            if k == n {
                return Ok(CoverReport {
                    covered: max_phi < gamma,
                    max_phi,
                    witness,
                    points,
                });
            }
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Smallest radius whose ball around `center` contains all `points`.
pub fn enclosing_radius(m: &Mat, center: &Vector, points: &[Vector]) -> f64 {
    points
        .iter()
        .map(|p| linalg::weighted_norm(m, &(p - center)))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lyapunov_of_negative_identity() {
        let a = -Mat::identity(2, 2);
        let m = solve_lyapunov(&a, &(Mat::identity(2, 2) * 2.0)).unwrap();
        assert_relative_eq!(m, Mat::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn unstable_a_is_rejected() {
        let a = Mat::identity(2, 2);
        assert!(matches!(
            solve_lyapunov(&a, &Mat::identity(2, 2)),
            Err(BisimError::NotHurwitz(_))
        ));
    }

    #[test]
    fn nonsymmetric_m_is_invalid() {
        let a = -Mat::identity(2, 2);
        let m = Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            verify_bisim(&a, &m, &VerifyOptions::default()),
            Err(BisimError::Validation(_))
        ));
    }

    #[test]
    fn optimize_identity_case() {
        let a = -Mat::identity(2, 2);
        let sh = Shaping {
            target: 0,
            floor: 1.0,
            caps: vec![Some(1.0), Some(1.0)],
        };
        let r = optimize_m(&a, &sh).unwrap();
        assert!((r.z - 1.0).abs() < 1e-6);
        assert_relative_eq!(r.m, Mat::identity(2, 2), epsilon = 1e-6);
    }

    #[test]
    fn constant_coordinates_give_semidefinite_certificate() {
        // x1' = -x1 + x2, x2' = 0
        let a = Mat::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, 0.0]);
        let m = structured_certificate(&a, &[1.0], &[0.5]).unwrap();
        let rep = verify_bisim(&a, &m, &VerifyOptions::default()).unwrap();
        assert!(rep.valid, "{rep:?}");
        assert!(rep.min_eig_m > 0.0);
    }

    #[test]
    fn weighted_distance_to_plane() {
        let m = Mat::from_diagonal(&Vector::from_vec(vec![4.0, 1.0]));
        let ob = Obstacle {
            constraints: vec![LinearConstraint::coord(2, 0, Relation::Ge, 3.0)],
        };
        let d = weighted_distance(&m.clone().try_inverse().unwrap(), &ob, &Vector::from_vec(vec![1.0, 7.0]));
        // |1 - 3| / sqrt(1/4) = 4
        assert_relative_eq!(d, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn cover_reports_witness() {
        let m = Mat::identity(2, 2);
        let c = Vector::zeros(2);
        let rep = check_cover(&m, &c, 1.0, &[-0.5, -0.5], &[0.5, 0.5], 5).unwrap();
        assert!(rep.covered);
        let rep = check_cover(&m, &c, 1.0, &[-0.8, -0.8], &[0.8, 0.8], 5).unwrap();
        assert!(!rep.covered);
        let w = rep.witness.unwrap();
        assert!((w[0].abs() - 0.8).abs() < 1e-12 && (w[1].abs() - 0.8).abs() < 1e-12);
    }
}
