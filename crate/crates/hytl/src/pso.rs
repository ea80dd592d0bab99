//! Box-constrained particle swarm minimiser with lexicographic fitness.
//!
//! Fitness is a pair compared lexicographically, so a secondary objective can
//! break ties among points with equal primary cost. Every particle owns a
//! ChaCha stream derived from the seed; fitness evaluation is the only
//! parallel step, which keeps results identical across execution modes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::par::{self, Exec};

fn default_swarm() -> usize {
    40
}
fn default_iterations() -> usize {
    200
}
fn default_inertia() -> f64 {
    0.729
}
fn default_accel() -> f64 {
    1.494
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsoConfig {
    #[serde(default = "default_swarm")]
    pub swarm: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_inertia")]
    pub inertia: f64,
    #[serde(default = "default_accel")]
    pub cognitive: f64,
    #[serde(default = "default_accel")]
    pub social: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            swarm: default_swarm(),
            iterations: default_iterations(),
            inertia: default_inertia(),
            cognitive: default_accel(),
            social: default_accel(),
            seed: 0,
        }
    }
}

/// `(primary, secondary)`, smaller is better in both.
pub type Fitness = (f64, f64);

fn better(a: Fitness, b: Fitness) -> bool {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a.1 < b.1,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsoResult {
    pub best: Vec<f64>,
    pub fitness: Fitness,
    pub iterations: usize,
    pub evaluations: usize,
    /// Best primary cost after each iteration.
    pub history: Vec<f64>,
}

/// Minimise `f` over the box `[lo, hi]`.
///
/// `seeds` are extra starting positions (clamped into the box) that replace
/// the first random particles.
pub fn minimize<F>(
    f: F,
    lo: &[f64],
    hi: &[f64],
    seeds: &[Vec<f64>],
    cfg: &PsoConfig,
    exec: Exec,
) -> PsoResult
where
    F: Fn(&[f64]) -> Fitness + Sync + Send,
{
    assert_eq!(lo.len(), hi.len(), "bound lengths differ");
    assert!(cfg.swarm > 0, "empty swarm");
    let d = lo.len();
    let vmax: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.swarm)
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
            r.set_stream(i as u64);
            r
        })
        .collect();
    let mut pos: Vec<Vec<f64>> = rngs
        .iter_mut()
        .enumerate()
        .map(|(i, r)| {
            let mut p: Vec<f64> = (0..d).map(|k| lo[k] + (hi[k] - lo[k]) * r.random::<f64>()).collect();
            if let Some(s) = seeds.get(i) {
                for k in 0..d {
                    p[k] = s[k].clamp(lo[k], hi[k]);
                }
            }
            p
        })
        .collect();
    let mut vel: Vec<Vec<f64>> = rngs
        .iter_mut()
        .map(|r| (0..d).map(|k| vmax[k] * (2.0 * r.random::<f64>() - 1.0) * 0.2).collect())
        .collect();

    let mut fit = par::map(exec, cfg.swarm, |i| f(&pos[i]));
    let mut evaluations = cfg.swarm;
    let mut pbest = pos.clone();
    let mut pfit = fit.clone();
    let mut g = 0;
    for i in 1..cfg.swarm {
        if better(pfit[i], pfit[g]) {
            g = i;
        }
    }
    let mut gbest = pbest[g].clone();
    let mut gfit = pfit[g];
    let mut history = Vec::with_capacity(cfg.iterations);

    for _ in 0..cfg.iterations {
        for i in 0..cfg.swarm {
            let r = &mut rngs[i];
            for k in 0..d {
                let (r1, r2): (f64, f64) = (r.random(), r.random());
                let v = cfg.inertia * vel[i][k]
                    + cfg.cognitive * r1 * (pbest[i][k] - pos[i][k])
                    + cfg.social * r2 * (gbest[k] - pos[i][k]);
                vel[i][k] = v.clamp(-vmax[k], vmax[k]);
                let x = pos[i][k] + vel[i][k];
                if x < lo[k] || x > hi[k] {
                    vel[i][k] = 0.0;
                }
                pos[i][k] = x.clamp(lo[k], hi[k]);
            }
        }
        fit = par::map(exec, cfg.swarm, |i| f(&pos[i]));
        evaluations += cfg.swarm;
        for i in 0..cfg.swarm {
            if better(fit[i], pfit[i]) {
                pfit[i] = fit[i];
                pbest[i] = pos[i].clone();
            }
            if better(pfit[i], gfit) {
                gfit = pfit[i];
                gbest = pbest[i].clone();
            }
        }
        history.push(gfit.0);
    }
    PsoResult {
        best: gbest,
        fitness: gfit,
        iterations: cfg.iterations,
        evaluations,
        history,
    }
}
