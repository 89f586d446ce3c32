//! Delay wrappers that expose the information-state interface.
//!
//! A [`DelayedEnv`] sits between an agent and an undelayed [`Environment`].
//! Under observation delay, actions act immediately but the resulting
//! observation and reward travel through a channel; under action delay,
//! actions travel through the channel and observations are immediate. In
//! both cases the agent sees an [`InformationState`]: the most recent
//! observed state plus the actions whose effect it has not yet observed,
//! padded with [`ActionId::NONE`] to a fixed capacity.

mod channel;

pub use channel::{DelayChannel, InTransit};

use rand::Rng;

use crate::env::{rng_from_seed, ActionId, EnvRng, EnvSpec, Environment, Observation};
use crate::error::{Error, Result};

/// How many wall-clock steps each payload spends in transit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DelayProcess {
    Constant(usize),
    /// Uniform on `{0, ..., max}`, drawn independently per payload.
    Uniform { max: usize },
    /// Fixed cyclic schedule; used to replay hand-built delay sequences.
    Scripted(Vec<usize>),
}

impl DelayProcess {
    pub fn sample(&self, rng: &mut EnvRng, index: usize) -> usize {
        match self {
            DelayProcess::Constant(d) => *d,
            DelayProcess::Uniform { max } => rng.random_range(0..=*max),
            DelayProcess::Scripted(schedule) => schedule[index % schedule.len()],
        }
    }

    /// Largest delay the process can produce.
    pub fn max_delay(&self) -> usize {
        match self {
            DelayProcess::Constant(d) => *d,
            DelayProcess::Uniform { max } => *max,
            DelayProcess::Scripted(s) => s.iter().copied().max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DelayKind {
    Observation,
    Action,
}

impl std::str::FromStr for DelayKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "observation" | "obs" => Ok(DelayKind::Observation),
            "action" | "act" => Ok(DelayKind::Action),
            other => Err(Error::Config(format!("unknown delay channel {other:?}"))),
        }
    }
}

/// Last observed state, the step at which it was first observed, and the
/// action buffer (real actions first, then `NONE` padding).
#[derive(Debug, Clone, PartialEq)]
pub struct InformationState {
    pub last_observed: Observation,
    pub observed_at: usize,
    pub actions: Vec<ActionId>,
}

impl InformationState {
    pub fn new(last_observed: Observation, observed_at: usize, capacity: usize) -> Self {
        Self {
            last_observed,
            observed_at,
            actions: vec![ActionId::NONE; capacity],
        }
    }

    /// The contiguous prefix of real actions.
    pub fn pending(&self) -> &[ActionId] {
        let n = self.actions.iter().take_while(|a| !a.is_none()).count();
        &self.actions[..n]
    }

    pub fn capacity(&self) -> usize {
        self.actions.len()
    }

    fn set_pending(&mut self, pending: impl IntoIterator<Item = ActionId>) {
        let cap = self.actions.len();
        self.actions.clear();
        self.actions.extend(pending);
        assert!(self.actions.len() <= cap, "action buffer overflow");
        self.actions.resize(cap, ActionId::NONE);
    }

    /// Checks the buffer-shape invariant.
    pub fn is_well_formed(&self) -> bool {
        let n = self.pending().len();
        self.actions[n..].iter().all(|a| a.is_none())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayedStepResult {
    pub info: InformationState,
    /// Sum of every underlying reward released at this step.
    pub released_reward: f64,
    /// `(generation step, reward)` for each released reward.
    pub released: Vec<(usize, f64)>,
    pub terminal: bool,
    pub truncated: bool,
    pub frozen: bool,
}

#[derive(Debug, Clone)]
struct ObservationPayload {
    observation: Observation,
    reward: f64,
}

/// An environment wrapped with an observation or action delay channel.
pub struct DelayedEnv {
    env: Box<dyn Environment>,
    process: DelayProcess,
    kind: DelayKind,
    capacity: usize,
    delay_rng: EnvRng,
    delay_draws: usize,
    clock: usize,
    /// Underlying transitions taken this episode.
    env_steps: usize,
    /// Generation index of `info.last_observed` (observation delay).
    observed_generation: usize,
    info: InformationState,
    observations: DelayChannel<ObservationPayload>,
    actions: DelayChannel<ActionId>,
    /// Actions sent but not yet applied, oldest first (action delay).
    in_flight: Vec<(usize, ActionId)>,
    frozen: bool,
    done: bool,
}

impl DelayedEnv {
    /// Wraps `env`. `capacity` is the action-buffer length n+1; constant
    /// delays must not exceed `capacity - 1`. Delay samples are drawn from a
    /// stream seeded by `delay_seed`.
    pub fn wrap(
        env: Box<dyn Environment>,
        process: DelayProcess,
        kind: DelayKind,
        capacity: usize,
        delay_seed: u64,
    ) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("action buffer capacity must be at least 1".into()));
        }
        if let DelayProcess::Constant(d) = process {
            if d > capacity - 1 {
                return Err(Error::Config(format!(
                    "constant delay {d} exceeds buffer capacity {capacity} - 1"
                )));
            }
        }
        if let DelayProcess::Scripted(s) = &process {
            if s.is_empty() {
                return Err(Error::Config("scripted delay schedule is empty".into()));
            }
        }
        Ok(Self {
            env,
            process,
            kind,
            capacity,
            delay_rng: rng_from_seed(delay_seed),
            delay_draws: 0,
            clock: 0,
            env_steps: 0,
            observed_generation: 0,
            info: InformationState::new(Observation::Discrete(0), 0, capacity),
            observations: DelayChannel::new(),
            actions: DelayChannel::new(),
            in_flight: Vec::new(),
            frozen: false,
            done: true,
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        self.env.spec()
    }

    pub fn kind(&self) -> DelayKind {
        self.kind
    }

    pub fn process(&self) -> &DelayProcess {
        &self.process
    }

    /// Action-buffer length n+1.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clock(&self) -> usize {
        self.clock
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn info(&self) -> &InformationState {
        &self.info
    }

    pub fn inner(&self) -> &dyn Environment {
        self.env.as_ref()
    }

    /// Starts an episode. The initial observation is delivered undelayed.
    pub fn reset(&mut self, rng: &mut EnvRng) -> InformationState {
        let obs = self.env.reset(rng);
        self.clock = 0;
        self.env_steps = 0;
        self.observed_generation = 0;
        self.observations.clear();
        self.actions.clear();
        self.in_flight.clear();
        self.frozen = false;
        self.done = false;
        self.info = InformationState::new(obs, 0, self.capacity);
        self.info.clone()
    }

    fn next_delay(&mut self) -> usize {
        let d = self.process.sample(&mut self.delay_rng, self.delay_draws);
        self.delay_draws += 1;
        d
    }

    /// Advances one wall-clock step.
    ///
    /// While frozen only [`ActionId::NONE`] is accepted; otherwise the action
    /// must be a real action of the wrapped environment.
    pub fn step(&mut self, action: ActionId, rng: &mut EnvRng) -> Result<DelayedStepResult> {
        if self.done {
            return Err(Error::Usage("delayed step on a finished episode".into()));
        }
        match (self.frozen, action.is_none()) {
            (true, false) => {
                return Err(Error::Usage(format!("real action {action} while frozen")))
            }
            (false, true) => return Err(Error::Usage("no-action while not frozen".into())),
            _ => {}
        }
        if let Some(a) = action.index() {
            if a >= self.env.spec().action_count {
                return Err(Error::Usage(format!(
                    "action {a} outside [0, {})",
                    self.env.spec().action_count
                )));
            }
        }
        match self.kind {
            DelayKind::Observation => self.step_observation_delay(action, rng),
            DelayKind::Action => self.step_action_delay(action, rng),
        }
    }

    fn step_observation_delay(&mut self, action: ActionId, rng: &mut EnvRng) -> Result<DelayedStepResult> {
        let mut pending: Vec<ActionId> = self.info.pending().to_vec();
        let mut released = Vec::new();
        let mut terminal = false;
        let mut truncated = false;
        if !action.is_none() {
            let out = self.env.step(action, rng)?;
            self.env_steps += 1;
            pending.push(action);
            terminal = out.terminal;
            truncated = out.truncated;
            let payload = ObservationPayload {
                observation: out.observation,
                reward: out.reward,
            };
            if terminal || truncated {
                // episode end bypasses the channel and flushes everything
                self.clock += 1;
                for e in self.observations.flush() {
                    released.push((e.generated_at, e.payload.reward));
                }
                released.push((self.env_steps, payload.reward));
                self.observed_generation = self.env_steps;
                self.info.last_observed = payload.observation;
                self.info.observed_at = self.clock;
                self.info.set_pending(std::iter::empty());
                self.frozen = false;
                self.done = true;
                return Ok(self.result(released, terminal, truncated));
            }
            // generation counts underlying steps; release counts wall-clock
            // steps, which keep running while frozen
            let delay = self.next_delay();
            self.observations.send_until(payload, self.env_steps, self.clock + 1 + delay);
        }
        self.clock += 1;
        let mut newest: Option<(usize, Observation)> = None;
        for e in self.observations.drain_ready(self.clock) {
            released.push((e.generated_at, e.payload.reward));
            if e.generated_at > self.observed_generation
                && newest.as_ref().is_none_or(|(g, _)| e.generated_at > *g)
            {
                newest = Some((e.generated_at, e.payload.observation));
            }
        }
        if let Some((g, obs)) = newest {
            let resolved = g - self.observed_generation;
            pending.drain(..resolved);
            self.observed_generation = g;
            self.info.last_observed = obs;
            self.info.observed_at = self.clock;
        }
        self.frozen = pending.len() > self.capacity - 1;
        self.info.set_pending(pending);
        Ok(self.result(released, terminal, truncated))
    }

    fn step_action_delay(&mut self, action: ActionId, rng: &mut EnvRng) -> Result<DelayedStepResult> {
        let now = self.clock;
        if !action.is_none() {
            let delay = self.next_delay();
            self.actions.send(action, now, delay);
            self.in_flight.push((now, action));
        }
        let mut released = Vec::new();
        let mut terminal = false;
        let mut truncated = false;
        for e in self.actions.drain_ready(now) {
            if let Some(pos) = self.in_flight.iter().position(|(g, _)| *g == e.generated_at) {
                self.in_flight.remove(pos);
            }
            let out = self.env.step(e.payload, rng)?;
            self.env_steps += 1;
            released.push((now, out.reward));
            self.info.last_observed = out.observation;
            self.info.observed_at = now + 1;
            if out.terminal || out.truncated {
                terminal = out.terminal;
                truncated = out.truncated;
                break;
            }
        }
        self.clock += 1;
        if terminal || truncated {
            self.actions.clear();
            self.in_flight.clear();
            self.info.set_pending(std::iter::empty());
            self.frozen = false;
            self.done = true;
        } else {
            self.frozen = self.in_flight.len() > self.capacity - 1;
            let pending: Vec<ActionId> = self.in_flight.iter().map(|(_, a)| *a).collect();
            self.info.set_pending(pending);
        }
        Ok(self.result(released, terminal, truncated))
    }

    fn result(&self, released: Vec<(usize, f64)>, terminal: bool, truncated: bool) -> DelayedStepResult {
        DelayedStepResult {
            info: self.info.clone(),
            released_reward: released.iter().map(|(_, r)| r).sum(),
            released,
            terminal,
            truncated,
            frozen: self.frozen,
        }
    }

    /// Feature length: observation encoding plus `capacity` one-hot action blocks.
    pub fn feature_len(&self) -> usize {
        feature_len(self.env.spec(), self.capacity)
    }

    pub fn encode(&self, info: &InformationState) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.feature_len()];
        encode_information_state(self.env.spec(), info, &mut out)?;
        Ok(out)
    }
}

pub fn feature_len(spec: &EnvSpec, capacity: usize) -> usize {
    spec.encoding_len() + capacity * spec.action_count
}

/// Observation encoding followed by one one-hot block per buffer slot; a
/// `NONE` slot encodes as all zeros. The timestamp is not encoded.
pub fn encode_information_state(spec: &EnvSpec, info: &InformationState, out: &mut [f64]) -> Result<()> {
    let obs_len = spec.encoding_len();
    let width = spec.action_count;
    if out.len() != obs_len + info.capacity() * width {
        return Err(Error::Invariant(format!(
            "feature buffer has length {}, expected {}",
            out.len(),
            obs_len + info.capacity() * width
        )));
    }
    spec.encode_into(&info.last_observed, &mut out[..obs_len])?;
    let blocks = &mut out[obs_len..];
    blocks.fill(0.0);
    for (slot, a) in info.actions.iter().enumerate() {
        if let Some(i) = a.index() {
            if i >= width {
                return Err(Error::Invariant(format!("buffered action {i} out of range")));
            }
            blocks[slot * width + i] = 1.0;
        }
    }
    Ok(())
}
