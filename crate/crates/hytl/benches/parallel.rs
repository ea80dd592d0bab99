//! Parallel vs sequential execution of the three batch kernels: lead/lag
//! Monte Carlo, PSO fitness evaluation and sampled classification checks.
//!
//! Without the `parallel` feature both variants run on one thread.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hytl::bisim::{self, LeadLagConfig};
use hytl::hybrid::{SimConfig, Simulator};
use hytl::inference::{self, Tube, TubeSet};
use hytl::par::Exec;
use hytl::pipeline::{self, HybridArtifacts};
use hytl::scenario::{self, HybridScenario, ScenarioConfig};

const MODES: [(&str, Exec); 2] = [("parallel", Exec::Parallel), ("sequential", Exec::Sequential)];

fn setup() -> (HybridScenario, hytl::hybrid::HybridAutomaton, HybridArtifacts) {
    let ScenarioConfig::Hybrid(sc) = scenario::smart_building() else {
        unreachable!()
    };
    let ha = pipeline::load_model(&sc, None).unwrap();
    let art = pipeline::run_hybrid(&sc, &ha, Exec::Parallel).unwrap();
    (sc, ha, art)
}

fn checkpoint_tubes(sc: &HybridScenario, ha: &hytl::hybrid::HybridAutomaton, art: &HybridArtifacts) -> TubeSet {
    let state = &art.observer.states[art.inferred.state];
    let tubes: Vec<Tube> = state
        .atoms
        .iter()
        .filter_map(|a| pipeline::atom_tube(sc, ha, &art.robust, a))
        .collect();
    let lookahead = sc.search.max_time.min(hytl::abstraction::to_f64(art.inferred.window));
    TubeSet::new(tubes, sc.step, lookahead)
}

fn benches(c: &mut Criterion) {
    let (sc, ha, art) = setup();
    let sim = Simulator::new(
        &ha,
        SimConfig {
            step: sc.step,
            ..SimConfig::with_horizon(sc.horizon)
        },
    );
    // first occupied segment of the two-person class
    let seg = &art.robust.segments[1][1];
    let loc = ha.location_index(&seg.location).unwrap();
    let m = art.robust.certificate(&seg.location).unwrap().clone();
    let ll_cfg = LeadLagConfig {
        samples: 500,
        seed: 1,
    };

    let mut g = c.benchmark_group("lead_lag");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(bisim::lead_lag(&sim, loc, &seg.x0, &seg.exit, &m, seg.gamma, &ll_cfg, exec).unwrap()))
        });
    }
    g.finish();

    let set = checkpoint_tubes(&sc, &ha, &art);
    let mut search = sc.search.clone();
    search.max_time = set.lookahead;
    search.pso.iterations = 60;

    let mut g = c.benchmark_group("pso_search");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(inference::pso_search(&set, &search, exec).unwrap()))
        });
    }
    g.finish();

    let f = &art.inferred.formula;
    let mut g = c.benchmark_group("verify_classification");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| black_box(inference::verify_classification(f, &set, 500, 3, exec).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(parallel, benches);
criterion_main!(parallel);
