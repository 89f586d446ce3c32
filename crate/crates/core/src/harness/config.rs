use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::agents::AgentConfig;
use crate::delay::{DelayKind, DelayProcess};
use crate::env::make;
use crate::error::{Error, Result};

/// Which learner a run trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Tabular,
    Drdqn,
    NaiveDqn,
    EffectiveAction,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Tabular => "tabular",
            AgentKind::Drdqn => "drdqn",
            AgentKind::NaiveDqn => "naive-dqn",
            AgentKind::EffectiveAction => "effective-action",
        }
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "tabular" => AgentKind::Tabular,
            "drdqn" => AgentKind::Drdqn,
            "naive-dqn" => AgentKind::NaiveDqn,
            "effective-action" => AgentKind::EffectiveAction,
            _ => return Err("expected tabular, drdqn, naive-dqn or effective-action".into()),
        })
    }
}

/// Float width of DQN networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err("expected f32 or f64".into()),
        }
    }
}

impl Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayShape {
    None,
    Constant(usize),
    Uniform(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelaySettings {
    pub shape: DelayShape,
    pub channel: DelayKind,
    /// Action-buffer length n+1.
    pub buffer: usize,
}

impl DelaySettings {
    pub fn process(&self) -> DelayProcess {
        match self.shape {
            DelayShape::None => DelayProcess::Constant(0),
            DelayShape::Constant(d) => DelayProcess::Constant(d),
            DelayShape::Uniform(max) => DelayProcess::Uniform { max },
        }
    }

    /// Short label such as `d=4` or `d~U{0..10}`.
    pub fn label(&self) -> String {
        match self.shape {
            DelayShape::None => "d=0".into(),
            DelayShape::Constant(d) => format!("d={d}"),
            DelayShape::Uniform(m) => format!("d~U{{0..{m}}}"),
        }
    }
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: String,
    pub delay: DelaySettings,
    pub agent: AgentKind,
    pub agent_config: AgentConfig,
    pub precision: Precision,
    pub total_steps: usize,
    pub runs: usize,
    pub base_seed: u64,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub final_window: usize,
    pub out: PathBuf,
}

const KEYS: &[&str] = &[
    "env",
    "delay.kind",
    "delay.value",
    "delay.max",
    "delay.channel",
    "delay.buffer",
    "agent",
    "agent.gamma",
    "agent.epsilon_start",
    "agent.epsilon_end",
    "agent.epsilon_decay_steps",
    "agent.alpha",
    "agent.batch_size",
    "agent.replay_capacity",
    "agent.learning_starts",
    "agent.target_sync_period",
    "agent.train_every",
    "agent.learning_rate",
    "agent.hidden",
    "agent.precision",
    "steps",
    "runs",
    "seed",
    "eval.every",
    "eval.episodes",
    "final_window",
    "out",
];

fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T>
where
    T::Err: Display,
{
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|e: T::Err| Error::parse(key, format!("{v:?}: {e}"))),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses `key=value` lines (`#` comments, blank lines ignored),
    /// applies defaults and validates every constraint.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(format!("line {}", i + 1), "expected key=value"))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::parse(k, "unknown key"));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::parse(k, "given more than once"));
            }
        }
        Self::from_map(&map)
    }

    fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let env: String = map.get("env").cloned().ok_or_else(|| Error::parse("env", "required"))?;
        make(&env).map_err(|e| Error::parse("env", e.to_string()))?;
        let agent: AgentKind = map
            .get("agent")
            .ok_or_else(|| Error::parse("agent", "required"))?
            .parse()
            .map_err(|e: String| Error::parse("agent", e))?;

        let kind: String = get(map, "delay.kind", "none".to_string())?;
        let shape = match kind.as_str() {
            "none" => {
                for k in ["delay.value", "delay.max"] {
                    if map.contains_key(k) {
                        return Err(Error::parse(k, "not used with delay.kind=none"));
                    }
                }
                DelayShape::None
            }
            "constant" => {
                if map.contains_key("delay.max") {
                    return Err(Error::parse("delay.max", "not used with delay.kind=constant"));
                }
                let d = map.get("delay.value").ok_or_else(|| Error::parse("delay.value", "required for constant delay"))?;
                DelayShape::Constant(d.parse().map_err(|e| Error::parse("delay.value", format!("{d:?}: {e}")))?)
            }
            "uniform" => {
                if map.contains_key("delay.value") {
                    return Err(Error::parse("delay.value", "not used with delay.kind=uniform"));
                }
                let m = map.get("delay.max").ok_or_else(|| Error::parse("delay.max", "required for uniform delay"))?;
                DelayShape::Uniform(m.parse().map_err(|e| Error::parse("delay.max", format!("{m:?}: {e}")))?)
            }
            other => return Err(Error::parse("delay.kind", format!("{other:?}: expected none, constant or uniform"))),
        };
        let channel: DelayKind = match map.get("delay.channel").map(String::as_str) {
            None => DelayKind::Observation,
            Some(c) => c.parse().map_err(|e: Error| Error::parse("delay.channel", e.to_string()))?,
        };
        let needed = match shape {
            DelayShape::None => 0,
            DelayShape::Constant(d) | DelayShape::Uniform(d) => d,
        };
        let buffer: usize = get(map, "delay.buffer", needed + 1)?;
        if buffer == 0 {
            return Err(Error::parse("delay.buffer", "must be at least 1"));
        }
        if let DelayShape::Constant(d) = shape {
            if d > buffer - 1 {
                return Err(Error::parse("delay.value", format!("constant delay {d} exceeds delay.buffer - 1 = {}", buffer - 1)));
            }
        }

        let total_steps: usize = get(map, "steps", 300_000)?;
        if total_steps == 0 {
            return Err(Error::parse("steps", "must be at least 1"));
        }
        let runs: usize = get(map, "runs", 10)?;
        if runs == 0 {
            return Err(Error::parse("runs", "must be at least 1"));
        }
        let d = AgentConfig::default();
        let hidden = match map.get("agent.hidden") {
            None => d.hidden.clone(),
            Some(v) => v
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse("agent.hidden", format!("{v:?}: {e}")))?,
        };
        let agent_config = AgentConfig {
            gamma: get(map, "agent.gamma", d.gamma)?,
            epsilon_start: get(map, "agent.epsilon_start", d.epsilon_start)?,
            epsilon_end: get(map, "agent.epsilon_end", d.epsilon_end)?,
            epsilon_decay_steps: get(map, "agent.epsilon_decay_steps", total_steps / 10)?,
            alpha: get(map, "agent.alpha", d.alpha)?,
            batch_size: get(map, "agent.batch_size", d.batch_size)?,
            replay_capacity: get(map, "agent.replay_capacity", d.replay_capacity)?,
            learning_starts: get(map, "agent.learning_starts", d.learning_starts)?,
            target_sync_period: get(map, "agent.target_sync_period", d.target_sync_period)?,
            train_every: get(map, "agent.train_every", d.train_every)?,
            learning_rate: get(map, "agent.learning_rate", d.learning_rate)?,
            hidden,
        };
        agent_config.validate()?;
        if agent == AgentKind::EffectiveAction {
            if channel != DelayKind::Action {
                return Err(Error::parse("delay.channel", "effective-action agent needs action delay"));
            }
            if matches!(shape, DelayShape::Uniform(_)) {
                return Err(Error::parse("delay.kind", "effective-action agent needs a known constant delay"));
            }
        }
        let eval_every: usize = get(map, "eval.every", 5_000)?;
        if eval_every == 0 {
            return Err(Error::parse("eval.every", "must be positive"));
        }
        Ok(Self {
            env,
            delay: DelaySettings { shape, channel, buffer },
            agent,
            agent_config,
            precision: get(map, "agent.precision", Precision::F32)?,
            total_steps,
            runs,
            base_seed: get(map, "seed", 0)?,
            eval_every,
            eval_episodes: get(map, "eval.episodes", 10)?,
            final_window: get(map, "final_window", 1_000)?,
            out: get(map, "out", PathBuf::from("out"))?,
        })
    }

    /// Canonical `key=value` text with every default spelled out. Parsing
    /// it yields the same config.
    pub fn to_text(&self) -> String {
        let a = &self.agent_config;
        let channel = match self.delay.channel {
            DelayKind::Observation => "observation",
            DelayKind::Action => "action",
        };
        let mut lines = vec![format!("env={}", self.env)];
        match self.delay.shape {
            DelayShape::None => lines.push("delay.kind=none".into()),
            DelayShape::Constant(d) => lines.extend(["delay.kind=constant".into(), format!("delay.value={d}")]),
            DelayShape::Uniform(m) => lines.extend(["delay.kind=uniform".into(), format!("delay.max={m}")]),
        }
        let hidden: Vec<String> = a.hidden.iter().map(|h| h.to_string()).collect();
        lines.extend([
            format!("delay.channel={channel}"),
            format!("delay.buffer={}", self.delay.buffer),
            format!("agent={}", self.agent.as_str()),
            format!("agent.gamma={:?}", a.gamma),
            format!("agent.epsilon_start={:?}", a.epsilon_start),
            format!("agent.epsilon_end={:?}", a.epsilon_end),
            format!("agent.epsilon_decay_steps={}", a.epsilon_decay_steps),
            format!("agent.alpha={:?}", a.alpha),
            format!("agent.batch_size={}", a.batch_size),
            format!("agent.replay_capacity={}", a.replay_capacity),
            format!("agent.learning_starts={}", a.learning_starts),
            format!("agent.target_sync_period={}", a.target_sync_period),
            format!("agent.train_every={}", a.train_every),
            format!("agent.learning_rate={:?}", a.learning_rate),
            format!("agent.hidden={}", hidden.join(",")),
            format!("agent.precision={}", self.precision),
            format!("steps={}", self.total_steps),
            format!("runs={}", self.runs),
            format!("seed={}", self.base_seed),
            format!("eval.every={}", self.eval_every),
            format!("eval.episodes={}", self.eval_episodes),
            format!("final_window={}", self.final_window),
            format!("out={}", self.out.display()),
        ]);
        let mut text = lines.join("\n");
        text.push('\n');
        text
    }

    /// Seed of run `i`.
    pub fn seed(&self, run: usize) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }
}
