//! Delay-resolved tabular Q-learning, DRDQN, and the two baselines (naive
//! DQN on raw observations, effective-action Q-learning).

mod dqn;
mod replay;
mod tabular;

pub use dqn::{DqnAgent, DqnInput};
pub use replay::ReplayBuffer;
pub use tabular::{effective_action_update, EffectiveActionAgent, InfoKey, QTable, TabularAgent};

use rand::Rng;

use crate::delay::InformationState;
use crate::env::{ActionId, EnvRng};
use crate::error::{Error, Result};

/// Learning hyperparameters shared by every agent kind.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Linear decay length; the harness defaults it to 10% of the run.
    pub epsilon_decay_steps: usize,
    /// Tabular step size.
    pub alpha: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Replay size required before the first gradient step.
    pub learning_starts: usize,
    /// Counted in train steps.
    pub target_sync_period: usize,
    /// Counted in stored transitions.
    pub train_every: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 10_000,
            alpha: 0.1,
            batch_size: 64,
            replay_capacity: 50_000,
            learning_starts: 1_000,
            target_sync_period: 500,
            train_every: 1,
            learning_rate: 1e-3,
            hidden: vec![64, 64],
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::parse(format!("agent.{key}"), msg));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma", "must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return bad("epsilon_start", "epsilons must lie in [0, 1]");
        }
        if self.epsilon_end > self.epsilon_start {
            return bad("epsilon_end", "must not exceed epsilon_start");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha", "must lie in [0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if self.replay_capacity < self.batch_size {
            return bad("replay_capacity", "must hold at least one batch");
        }
        if self.target_sync_period == 0 {
            return bad("target_sync_period", "must be positive");
        }
        if self.train_every == 0 {
            return bad("train_every", "must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden", "layer widths must be positive");
        }
        Ok(())
    }

    pub fn epsilon(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            decay_steps: self.epsilon_decay_steps,
        }
    }
}

/// Linear decay from `start` to `end` over `decay_steps`, then flat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: usize,
}

impl EpsilonSchedule {
    pub fn at(&self, step: usize) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        self.start + (self.end - self.start) * step as f64 / self.decay_steps as f64
    }
}

/// One decision-to-decision step. Rewards released during frozen steps in
/// between are folded into `reward`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S = InformationState> {
    pub before: S,
    pub action: ActionId,
    pub reward: f64,
    pub after: S,
    pub terminal: bool,
}

impl<S> Transition<S> {
    pub fn new(before: S, action: ActionId, reward: f64, after: S, terminal: bool) -> Result<Self> {
        if action.is_none() {
            return Err(Error::Invariant("transitions never carry the no-action".into()));
        }
        Ok(Self { before, action, reward, after, terminal })
    }
}

/// A learner acting on information states.
pub trait Agent: Send {
    fn name(&self) -> &'static str;

    fn action_count(&self) -> usize;

    /// Current action-value estimates for `info`.
    fn q_values(&self, info: &InformationState) -> Result<Vec<f64>>;

    /// Learns from one transition; returns the loss if a gradient step ran.
    fn observe(&mut self, transition: &Transition) -> Result<Option<f64>>;
}

/// Lowest index among the maximal values.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy choice: uniform with probability `epsilon`, otherwise the
/// greedy action with ties to the lowest index. Always consumes one uniform
/// draw so the stream position does not depend on `epsilon`.
pub fn select_action(agent: &dyn Agent, info: &InformationState, rng: &mut EnvRng, epsilon: f64) -> Result<ActionId> {
    let explore = rng.random::<f64>() < epsilon;
    if explore {
        return Ok(ActionId::new(rng.random_range(0..agent.action_count())));
    }
    Ok(ActionId::new(argmax(&agent.q_values(info)?)))
}
