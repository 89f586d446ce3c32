use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::agents::{select_action, Agent, DqnAgent, DqnInput, EffectiveActionAgent, TabularAgent, Transition};
use crate::delay::DelayedEnv;
use crate::env::{make, rng_from_seed, ActionId, EnvSpec};
use crate::error::{Error, Result};

use super::aggregate::{aggregate, RunMetrics, Summary};
use super::config::{AgentKind, ExperimentConfig, Precision};
use super::records::{RecordKind, RunRecord, RunWriter};

pub const VERSION: &str = concat!("drrl ", env!("CARGO_PKG_VERSION"));

/// Independent stream `stream` of a run seeded with `seed` (splitmix64).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const ENV_STREAM: u64 = 1;
const DELAY_STREAM: u64 = 2;
const AGENT_STREAM: u64 = 3;
const EVAL_STREAM: u64 = 1 << 32;

pub fn build_agent(cfg: &ExperimentConfig, spec: &EnvSpec, seed: u64) -> Result<Box<dyn Agent>> {
    let a = &cfg.agent_config;
    let capacity = cfg.delay.buffer;
    Ok(match (cfg.agent, cfg.precision) {
        (AgentKind::Tabular, _) => Box::new(TabularAgent::new(spec.action_count, a)),
        (AgentKind::EffectiveAction, _) => Box::new(EffectiveActionAgent::new(
            spec.action_count,
            a,
            cfg.delay.channel,
            &cfg.delay.process(),
        )?),
        (AgentKind::Drdqn, Precision::F32) => {
            Box::new(DqnAgent::<f32>::new(spec, DqnInput::InformationState { capacity }, a, seed)?)
        }
        (AgentKind::Drdqn, Precision::F64) => {
            Box::new(DqnAgent::<f64>::new(spec, DqnInput::InformationState { capacity }, a, seed)?)
        }
        (AgentKind::NaiveDqn, Precision::F32) => Box::new(DqnAgent::<f32>::new(spec, DqnInput::RawObservation, a, seed)?),
        (AgentKind::NaiveDqn, Precision::F64) => Box::new(DqnAgent::<f64>::new(spec, DqnInput::RawObservation, a, seed)?),
    })
}

pub fn wrap_env(cfg: &ExperimentConfig, delay_seed: u64) -> Result<DelayedEnv> {
    DelayedEnv::wrap(make(&cfg.env)?, cfg.delay.process(), cfg.delay.channel, cfg.delay.buffer, delay_seed)
}

/// Mean undelayed return of `episodes` greedy episodes on fresh wrappers.
/// Frozen steps emit the no-action.
pub fn evaluate(agent: &dyn Agent, cfg: &ExperimentConfig, seed: u64, episodes: usize) -> Result<f64> {
    let mut total = 0.0;
    for ep in 0..episodes {
        let ep_seed = derive_seed(seed, ep as u64);
        let mut env = wrap_env(cfg, derive_seed(ep_seed, DELAY_STREAM))?;
        let mut rng = rng_from_seed(derive_seed(ep_seed, ENV_STREAM));
        let mut info = env.reset(&mut rng);
        loop {
            let action = if env.is_frozen() {
                ActionId::NONE
            } else {
                select_action(agent, &info, &mut rng, 0.0)?
            };
            let out = env.step(action, &mut rng)?;
            total += out.released_reward;
            if out.terminal || out.truncated {
                break;
            }
            info = out.info;
        }
    }
    Ok(total / episodes.max(1) as f64)
}

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run: usize,
    pub seed: u64,
    pub metrics: RunMetrics,
    pub seconds: f64,
    /// Wall-clock steps actually executed (frozen steps included).
    pub steps: usize,
}

/// Trains one seeded run for `cfg.total_steps` wall-clock steps, streaming
/// every record to `sink`. Checkpoints fall on multiples of `eval_every`
/// and at the final step.
pub fn train_run(cfg: &ExperimentConfig, run: usize, sink: &mut dyn FnMut(&RunRecord) -> Result<()>) -> Result<RunOutcome> {
    let seed = cfg.seed(run);
    let started = Instant::now();
    let mut env = wrap_env(cfg, derive_seed(seed, DELAY_STREAM))?;
    let mut agent = build_agent(cfg, env.spec(), derive_seed(seed, AGENT_STREAM))?;
    let mut rng = rng_from_seed(derive_seed(seed, ENV_STREAM));
    let schedule = cfg.agent_config.epsilon();
    let mut records = Vec::new();
    let mut emit = |r: RunRecord, records: &mut Vec<RunRecord>| -> Result<()> {
        sink(&r)?;
        records.push(r);
        Ok(())
    };

    let mut info = env.reset(&mut rng);
    let (mut step, mut episode, mut episode_return) = (0usize, 0usize, 0.0);
    let mut next_eval = cfg.eval_every;
    let mut evals = 0u64;
    while step < cfg.total_steps {
        let epsilon = schedule.at(step);
        let action = select_action(agent.as_ref(), &info, &mut rng, epsilon)?;
        let mut out = env.step(action, &mut rng)?;
        step += 1;
        let mut reward = out.released_reward;
        while out.frozen && !(out.terminal || out.truncated) {
            out = env.step(ActionId::NONE, &mut rng)?;
            step += 1;
            reward += out.released_reward;
        }
        episode_return += reward;
        let done = out.terminal || out.truncated;
        let transition = Transition::new(info, action, reward, out.info, out.terminal)?;
        agent.observe(&transition)?;
        info = transition.after;
        if done {
            emit(
                RunRecord {
                    kind: RecordKind::Episode,
                    run,
                    seed,
                    step,
                    episode,
                    episode_return: Some(episode_return),
                    epsilon,
                    eval_return: None,
                    cumulative_seconds: started.elapsed().as_secs_f64(),
                },
                &mut records,
            )?;
            episode += 1;
            episode_return = 0.0;
            info = env.reset(&mut rng);
        }
        while step >= next_eval && next_eval <= cfg.total_steps {
            let r = checkpoint(cfg, agent.as_ref(), run, seed, next_eval, episode, evals, &started)?;
            emit(r, &mut records)?;
            evals += 1;
            next_eval += cfg.eval_every;
        }
    }
    if !cfg.total_steps.is_multiple_of(cfg.eval_every) {
        let r = checkpoint(cfg, agent.as_ref(), run, seed, cfg.total_steps, episode, evals, &started)?;
        emit(r, &mut records)?;
    }
    let metrics = RunMetrics::from_records(&records, cfg.final_window);
    Ok(RunOutcome { run, seed, metrics, seconds: started.elapsed().as_secs_f64(), steps: step })
}

#[allow(clippy::too_many_arguments)]
fn checkpoint(
    cfg: &ExperimentConfig,
    agent: &dyn Agent,
    run: usize,
    seed: u64,
    at: usize,
    episode: usize,
    index: u64,
    started: &Instant,
) -> Result<RunRecord> {
    let eval_return = if cfg.eval_episodes > 0 {
        Some(evaluate(agent, cfg, derive_seed(seed, EVAL_STREAM + index), cfg.eval_episodes)?)
    } else {
        None
    };
    Ok(RunRecord {
        kind: RecordKind::Checkpoint,
        run,
        seed,
        step: at,
        episode,
        episode_return: None,
        epsilon: cfg.agent_config.epsilon().at(at),
        eval_return,
        cumulative_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Per-run status in an experiment.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub run: usize,
    pub seed: u64,
    pub result: std::result::Result<RunOutcome, String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub runs: Vec<RunReport>,
    pub summary: Summary,
}

impl ExperimentSummary {
    pub fn succeeded(&self) -> impl Iterator<Item = &RunOutcome> {
        self.runs.iter().filter_map(|r| r.result.as_ref().ok())
    }

    pub fn final_evals(&self) -> Vec<f64> {
        self.succeeded().filter_map(|o| o.metrics.final_eval).collect()
    }

    pub fn final_window_means(&self) -> Vec<f64> {
        self.succeeded().filter_map(|o| o.metrics.final_window_mean).collect()
    }
}

/// Concurrency cap: `DRRL_THREADS` if set, otherwise the available cores.
pub fn thread_cap() -> Result<usize> {
    match std::env::var("DRRL_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("DRRL_THREADS must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn run_csv_path(dir: &Path, run: usize) -> PathBuf {
    dir.join(format!("run_{run:03}.csv"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn execute_run(cfg: &ExperimentConfig, run: usize) -> std::result::Result<RunOutcome, String> {
    let path = run_csv_path(&cfg.out, run);
    let timing_path = cfg.out.join(format!("run_{run:03}.timing.csv"));
    let attempt = || -> Result<RunOutcome> {
        let mut writer = RunWriter::create(&path)?;
        let timing_file = File::create(&timing_path).map_err(|e| Error::io(&timing_path, e))?;
        let mut timing = BufWriter::new(timing_file);
        writeln!(timing, "step,seconds").map_err(|e| Error::io(&timing_path, e))?;
        let outcome = train_run(cfg, run, &mut |r| {
            if r.kind == RecordKind::Checkpoint {
                writeln!(timing, "{},{}", r.step, r.cumulative_seconds).map_err(|e| Error::io(&timing_path, e))?;
            }
            writer.write(r)
        })?;
        writer.finish()?;
        timing.flush().map_err(|e| Error::io(&timing_path, e))?;
        Ok(outcome)
    };
    let result = match catch_unwind(AssertUnwindSafe(attempt)) {
        Ok(r) => r.map_err(|e| e.to_string()),
        Err(panic) => Err(panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "run panicked".into())),
    };
    if result.is_err() && path.exists() {
        let _ = std::fs::rename(&path, cfg.out.join(format!("run_{run:03}.failed.csv")));
    }
    result
}

/// Runs every seed of `cfg` (at most `thread_cap()` at a time), writes
/// provenance files, per-run CSVs and the aggregated summary into
/// `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    run_experiment_with_threads(cfg, thread_cap()?)
}

pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentSummary> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    write_text(&cfg.out.join("config.txt"), &cfg.to_text())?;
    write_text(&cfg.out.join("VERSION"), &format!("{VERSION}\n"))?;
    let seeds: String = (0..cfg.runs).map(|i| format!("{i} {}\n", cfg.seed(i))).collect();
    write_text(&cfg.out.join("seeds.txt"), &seeds)?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<RunReport>>> = Mutex::new(vec![None; cfg.runs]);
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, cfg.runs) {
            scope.spawn(|| loop {
                let run = next.fetch_add(1, Ordering::SeqCst);
                if run >= cfg.runs {
                    break;
                }
                let result = execute_run(cfg, run);
                results.lock().expect("result sink")[run] = Some(RunReport { run, seed: cfg.seed(run), result });
            });
        }
    });
    let runs: Vec<RunReport> = results
        .into_inner()
        .expect("result sink")
        .into_iter()
        .map(|r| r.expect("every run reported"))
        .collect();

    let ok: Vec<PathBuf> = runs
        .iter()
        .filter(|r| r.result.is_ok())
        .map(|r| run_csv_path(&cfg.out, r.run))
        .collect();
    let summary = if ok.is_empty() {
        Summary::default()
    } else {
        aggregate(&ok, cfg.final_window)?
    };
    let mut status = String::from("run,seed,status,final_eval,final_window_mean,whole_run_mean,seconds,message\n");
    for r in &runs {
        match &r.result {
            Ok(o) => status.push_str(&format!(
                "{},{},ok,{},{},{},{:.3},\n",
                r.run,
                r.seed,
                opt(o.metrics.final_eval),
                opt(o.metrics.final_window_mean),
                opt(o.metrics.whole_run_mean),
                o.seconds
            )),
            Err(msg) => status.push_str(&format!("{},{},failed,,,,,{:?}\n", r.run, r.seed, msg.replace(',', ";"))),
        }
    }
    write_text(&cfg.out.join("runs.csv"), &status)?;
    summary.write(&cfg.out)?;
    Ok(ExperimentSummary { config: cfg.clone(), runs, summary })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
