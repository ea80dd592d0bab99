use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use hytl::abstraction::TimedAutomaton;
use hytl::hybrid::{HybridAutomaton, TimedSymbol};
use hytl::observer::{self, ObserverAutomaton, Update};
use hytl::par::Exec;
use hytl::pipeline::{self, Inferred, PipelineError, RobustData, Simulation, StreamRun};
use hytl::scenario::{self, HybridScenario, ScenarioConfig, TimedScenario};

const EXIT_IO: u8 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Stage {
    Simulate,
    Bisim,
    Abstract,
    Observe,
    Infer,
    Refine,
    Pipeline,
}

/// Robust timed observers and MTL discrimination for affine hybrid automata.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Scenario JSON file, or a built-in name (smart-building, toy).
    #[arg(long, default_value = "smart-building")]
    config: String,
    /// Stage to run; single stages read the previous stage's files from --out.
    #[arg(long, value_enum, default_value = "pipeline")]
    stage: Stage,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the simulation grid step (seconds).
    #[arg(long)]
    grid_step: Option<f64>,
    /// Override the observer state cap.
    #[arg(long)]
    max_states: Option<usize>,
    /// JSON-lines symbol stream ({"time":..,"symbol":..}) for the observe stage.
    #[arg(long)]
    stream: Option<PathBuf>,
    /// End time for --stream runs (defaults to the last symbol plus 100 s).
    #[arg(long)]
    until: Option<f64>,
    /// Run batch work on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug)]
enum CliError {
    Pipeline(PipelineError),
    Io(anyhow::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Pipeline(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "io: {e:#}"),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Pipeline(e)
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Pipeline(e) => e.exit_code() as u8,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    scenario: String,
    seed: Option<u64>,
    grid_step: Option<f64>,
    version: String,
    /// Wall time per stage, seconds. Timing lives only here so the other
    /// artifacts stay byte-identical across runs.
    wall_time: BTreeMap<String, f64>,
    files: BTreeMap<String, Vec<String>>,
}

struct Ctx {
    out: PathBuf,
    exec: Exec,
    manifest: Manifest,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&mut self, stage: &str, name: &str, contents: &str) -> Result<()> {
        let p = self.path(name);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
        let files = self.manifest.files.entry(stage.to_string()).or_default();
        if !files.iter().any(|f| f == name) {
            files.push(name.to_string());
        }
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, stage: &str, name: &str, v: &T) -> Result<()> {
        let s = serde_json::to_string_pretty(v).context("serialising")?;
        self.write(stage, name, &(s + "\n"))
    }

    fn read_json<T: DeserializeOwned>(&self, name: &str, produced_by: &str) -> Result<T> {
        let p = self.path(name);
        let text = fs::read_to_string(&p)
            .with_context(|| format!("reading {} (run --stage {produced_by} first)", p.display()))?;
        Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?)
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let r = f(self);
        self.manifest
            .wall_time
            .insert(stage.to_string(), t0.elapsed().as_secs_f64());
        r
    }
}

fn load_config(cli: &Cli) -> Result<(ScenarioConfig, Option<PathBuf>)> {
    let (mut cfg, base) = match scenario::builtin(&cli.config) {
        Some(c) => (c, None),
        None => {
            let p = Path::new(&cli.config);
            let text = fs::read_to_string(p).map_err(|e| {
                PipelineError::Config(format!("config {}: {e}", p.display()))
            })?;
            (pipeline::parse_scenario(&text)?, p.parent().map(Path::to_path_buf))
        }
    };
    match &mut cfg {
        ScenarioConfig::Hybrid(h) => {
            if let Some(s) = cli.seed {
                h.seed = s;
            }
            if let Some(g) = cli.grid_step {
                h.step = g;
            }
            if let Some(m) = cli.max_states {
                h.observer.max_states = m;
            }
        }
        ScenarioConfig::Timed(t) => {
            if let Some(m) = cli.max_states {
                t.observer.max_states = m;
            }
        }
    }
    cfg.validate().map_err(PipelineError::Config)?;
    Ok((cfg, base))
}

fn read_stream(path: &Path) -> Result<Vec<TimedSymbol>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| PipelineError::Config(format!("{} line {}: {e}", path.display(), i + 1)).into())
        })
        .collect()
}

#[derive(Serialize)]
struct TraceLine {
    external_time: f64,
    state_id: usize,
    tubes: Vec<observer::Tube>,
}

fn trace_lines(obs: &ObserverAutomaton, updates: &[Update]) -> String {
    updates
        .iter()
        .map(|u| {
            let line = TraceLine {
                external_time: u.time,
                state_id: u.state,
                tubes: observer::tubes_of(&obs.states[u.state], u.timer()),
            };
            serde_json::to_string(&line).expect("trace line serialises") + "\n"
        })
        .collect()
}

fn no_verdicts(_: f64, _: &hytl::mtl::Formula) -> bool {
    false
}

fn run_stream(ctx: &mut Ctx, cli: &Cli, obs: &ObserverAutomaton) -> Result<()> {
    let Some(path) = &cli.stream else {
        return Ok(());
    };
    let stream = read_stream(path)?;
    let until = cli
        .until
        .unwrap_or_else(|| stream.last().map_or(0.0, |s| s.time) + 100.0);
    let updates = observer::run_observer(obs, &stream, until, no_verdicts).map_err(PipelineError::from)?;
    let lines = trace_lines(obs, &updates);
    ctx.write("observe", "trace.jsonl", &lines)
}

fn write_observer(ctx: &mut Ctx, stage: &str, name: &str, obs: &ObserverAutomaton) -> Result<()> {
    ctx.write_json(stage, &format!("{name}.json"), obs)?;
    ctx.write(stage, &format!("{name}.dot"), &obs.to_dot())
}

fn write_abstraction(ctx: &mut Ctx, ta: &TimedAutomaton) -> Result<()> {
    ctx.write_json("abstract", "abstraction.json", ta)?;
    ctx.write("abstract", "abstraction.dot", &ta.to_dot())
}

fn stage_simulate(ctx: &mut Ctx, sc: &HybridScenario, ha: &HybridAutomaton) -> Result<Simulation> {
    let sim = pipeline::simulate_classes(sc, ha)?;
    ctx.write_json("simulate", "trajectories.json", &sim)?;
    for run in &sim.runs {
        let mut buf = Vec::new();
        run.trajectory
            .write_csv(&mut buf)
            .map_err(|e| CliError::Io(anyhow::anyhow!("csv for {}: {e}", run.name)))?;
        let text = String::from_utf8(buf).context("csv is utf-8")?;
        ctx.write("simulate", &format!("trajectories/{}.csv", run.name), &text)?;
    }
    Ok(sim)
}

fn stage_bisim(ctx: &mut Ctx, sc: &HybridScenario, ha: &HybridAutomaton, sim: &Simulation) -> Result<RobustData> {
    let rd = pipeline::robust_data(sc, ha, sim, ctx.exec)?;
    ctx.write_json("bisim", "robust.json", &rd)?;
    Ok(rd)
}

fn stage_abstract(ctx: &mut Ctx, sc: &HybridScenario, rd: &RobustData) -> Result<TimedAutomaton> {
    let input = pipeline::abstraction_input(sc, rd);
    ctx.write_json("abstract", "timing.json", &input)?;
    let ta = pipeline::abstract_timing(&input)?;
    write_abstraction(ctx, &ta)?;
    Ok(ta)
}

fn stage_observe(
    ctx: &mut Ctx,
    cli: &Cli,
    sc: &HybridScenario,
    ha: &HybridAutomaton,
    sim: &Simulation,
    ta: &TimedAutomaton,
) -> Result<ObserverAutomaton> {
    let obs = observer::build_observer(ta, &sc.observer).map_err(PipelineError::from)?;
    write_observer(ctx, "observe", "observer", &obs)?;
    let runs = sim
        .runs
        .iter()
        .map(|r| {
            let updates = observer::run_observer(&obs, &r.trajectory.outputs(ha), sc.horizon, no_verdicts)
                .map_err(PipelineError::from)?;
            Ok(StreamRun {
                name: r.name.clone(),
                updates,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ctx.write_json("observe", "observer_runs.json", &runs)?;
    run_stream(ctx, cli, &obs)?;
    Ok(obs)
}

fn stage_infer(
    ctx: &mut Ctx,
    sc: &HybridScenario,
    ha: &HybridAutomaton,
    rd: &RobustData,
    obs: &ObserverAutomaton,
) -> Result<Inferred> {
    let inf = pipeline::infer_checkpoint(sc, ha, rd, obs, ctx.exec)?;
    ctx.write_json("infer", "inference.json", &inf)?;
    Ok(inf)
}

#[allow(clippy::too_many_arguments)]
fn stage_refine(
    ctx: &mut Ctx,
    sc: &HybridScenario,
    ha: &HybridAutomaton,
    sim: &Simulation,
    rd: &RobustData,
    ta: &TimedAutomaton,
    obs: &ObserverAutomaton,
    inf: &Inferred,
) -> Result<()> {
    let refined = pipeline::refine(sc, ha, rd, ta, obs, inf)?;
    write_observer(ctx, "refine", "refined_observer", &refined)?;
    let sep = pipeline::separation(sc, ha, sim, &refined)?;
    ctx.write_json("refine", "separation.json", &sep)?;
    match sep.max_delay {
        Some(d) if sep.separated => log::info!("classes separated {d:.2} s after the first symbol"),
        _ => log::warn!("refined observer does not separate every class"),
    }
    Ok(())
}

fn load_ta(ctx: &Ctx) -> Result<TimedAutomaton> {
    let p = ctx.path("abstraction.json");
    let text = fs::read_to_string(&p)
        .with_context(|| format!("reading {} (run --stage abstract first)", p.display()))?;
    Ok(TimedAutomaton::from_json(&text).with_context(|| format!("parsing {}", p.display()))?)
}

fn run_hybrid(ctx: &mut Ctx, cli: &Cli, sc: &HybridScenario, ha: &HybridAutomaton) -> Result<()> {
    match cli.stage {
        Stage::Simulate => ctx.timed("simulate", |c| stage_simulate(c, sc, ha)).map(drop),
        Stage::Bisim => {
            let sim = ctx.read_json("trajectories.json", "simulate")?;
            ctx.timed("bisim", |c| stage_bisim(c, sc, ha, &sim)).map(drop)
        }
        Stage::Abstract => {
            let rd = ctx.read_json("robust.json", "bisim")?;
            ctx.timed("abstract", |c| stage_abstract(c, sc, &rd)).map(drop)
        }
        Stage::Observe => {
            let sim = ctx.read_json("trajectories.json", "simulate")?;
            let ta = load_ta(ctx)?;
            ctx.timed("observe", |c| stage_observe(c, cli, sc, ha, &sim, &ta)).map(drop)
        }
        Stage::Infer => {
            let rd = ctx.read_json("robust.json", "bisim")?;
            let obs = ctx.read_json("observer.json", "observe")?;
            ctx.timed("infer", |c| stage_infer(c, sc, ha, &rd, &obs)).map(drop)
        }
        Stage::Refine => {
            let sim = ctx.read_json("trajectories.json", "simulate")?;
            let rd = ctx.read_json("robust.json", "bisim")?;
            let ta = load_ta(ctx)?;
            let obs = ctx.read_json("observer.json", "observe")?;
            let inf = ctx.read_json("inference.json", "infer")?;
            ctx.timed("refine", |c| stage_refine(c, sc, ha, &sim, &rd, &ta, &obs, &inf))
        }
        Stage::Pipeline => {
            let t0 = Instant::now();
            let sim = ctx.timed("simulate", |c| stage_simulate(c, sc, ha))?;
            let rd = ctx.timed("bisim", |c| stage_bisim(c, sc, ha, &sim))?;
            let ta = ctx.timed("abstract", |c| stage_abstract(c, sc, &rd))?;
            let obs = ctx.timed("observe", |c| stage_observe(c, cli, sc, ha, &sim, &ta))?;
            let inf = ctx.timed("infer", |c| stage_infer(c, sc, ha, &rd, &obs))?;
            ctx.timed("refine", |c| stage_refine(c, sc, ha, &sim, &rd, &ta, &obs, &inf))?;
            ctx.manifest
                .wall_time
                .insert("pipeline".into(), t0.elapsed().as_secs_f64());
            Ok(())
        }
    }
}

fn run_timed(ctx: &mut Ctx, cli: &Cli, sc: &TimedScenario) -> Result<()> {
    let abstract_stage = |c: &mut Ctx| -> Result<TimedAutomaton> {
        c.write_json("abstract", "timing.json", &sc.abstraction)?;
        let ta = pipeline::abstract_timing(&sc.abstraction)?;
        write_abstraction(c, &ta)?;
        Ok(ta)
    };
    let observe_stage = |c: &mut Ctx, ta: &TimedAutomaton| -> Result<()> {
        let obs = observer::build_observer(ta, &sc.observer).map_err(PipelineError::from)?;
        write_observer(c, "observe", "observer", &obs)?;
        let runs = sc
            .streams
            .iter()
            .map(|s| {
                let updates =
                    observer::run_observer(&obs, &s.symbols, s.until, no_verdicts).map_err(PipelineError::from)?;
                Ok(StreamRun {
                    name: s.name.clone(),
                    updates,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        c.write_json("observe", "observer_runs.json", &runs)?;
        run_stream(c, cli, &obs)
    };
    match cli.stage {
        Stage::Abstract => ctx.timed("abstract", abstract_stage).map(drop),
        Stage::Observe => {
            let ta = load_ta(ctx)?;
            ctx.timed("observe", |c| observe_stage(c, &ta))
        }
        Stage::Pipeline => {
            let ta = ctx.timed("abstract", abstract_stage)?;
            ctx.timed("observe", |c| observe_stage(c, &ta))
        }
        other => Err(PipelineError::Config(format!(
            "stage {other:?} needs a hybrid scenario; {:?} is timing-only",
            sc.name
        ))
        .into()),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let (cfg, base) = load_config(cli)?;
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let manifest_path = cli.out.join("manifest.json");
    let manifest = fs::read_to_string(&manifest_path)
        .ok()
        .and_then(|t| serde_json::from_str::<Manifest>(&t).ok())
        .filter(|m| m.scenario == cfg.name())
        .unwrap_or_default();
    let mut ctx = Ctx {
        out: cli.out.clone(),
        exec: if cli.sequential { Exec::Sequential } else { Exec::Parallel },
        manifest,
    };
    ctx.manifest.scenario = cfg.name().to_string();
    ctx.manifest.version = env!("CARGO_PKG_VERSION").to_string();
    ctx.write_json("config", "scenario.json", &cfg)?;
    let result = match &cfg {
        ScenarioConfig::Hybrid(sc) => {
            ctx.manifest.seed = Some(sc.seed);
            ctx.manifest.grid_step = Some(sc.step);
            let ha = pipeline::load_model(sc, base.as_deref())?;
            ctx.write_json("config", "model.json", &ha)?;
            run_hybrid(&mut ctx, cli, sc, &ha)
        }
        ScenarioConfig::Timed(sc) => run_timed(&mut ctx, cli, sc),
    };
    let m = serde_json::to_string_pretty(&ctx.manifest).context("serialising manifest")?;
    fs::write(&manifest_path, m + "\n").with_context(|| format!("writing {}", manifest_path.display()))?;
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HYTL_LOG", "info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
