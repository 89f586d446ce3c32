//! Undelayed environments and observation encoding.

mod acrobot;
mod cartpole;
mod mountain_car;
mod two_state;
mod wmaze;

pub use acrobot::Acrobot;
pub use cartpole::CartPole;
pub use mountain_car::MountainCar;
pub use two_state::TwoState;
pub use wmaze::{Cell, WMaze, WMazeMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Random stream type used by environments and delay processes.
pub type EnvRng = ChaCha8Rng;

/// Builds an [`EnvRng`] from a run-level seed.
pub fn rng_from_seed(seed: u64) -> EnvRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Observation {
    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Observation::Discrete(i) => Some(*i),
            Observation::Continuous(_) => None,
        }
    }
}

/// An action index, or the distinguished no-action sentinel emitted while a
/// delayed environment is frozen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(u32);

impl ActionId {
    pub const NONE: ActionId = ActionId(u32::MAX);

    pub fn new(index: usize) -> Self {
        assert!(index < u32::MAX as usize, "action index {index} out of range");
        ActionId(index as u32)
    }

    pub fn index(self) -> Option<usize> {
        if self.is_none() {
            None
        } else {
            Some(self.0 as usize)
        }
    }

    pub fn is_none(self) -> bool {
        self == Self::NONE
    }
}

impl std::fmt::Display for ActionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.index() {
            Some(i) => write!(f, "{i}"),
            None => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminal: bool,
    /// Horizon cutoff; never set together with `terminal`.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservationSpace {
    Discrete { states: usize },
    /// Per-dimension range used for scaling features into [-1, 1].
    Continuous { low: Vec<f64>, high: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: String,
    pub action_count: usize,
    pub observation: ObservationSpace,
    pub max_episode_steps: usize,
    pub optimal_return_hint: Option<f64>,
}

impl EnvSpec {
    /// Length of [`EnvSpec::encode`] output.
    pub fn encoding_len(&self) -> usize {
        match &self.observation {
            ObservationSpace::Discrete { states } => *states,
            ObservationSpace::Continuous { low, .. } => low.len(),
        }
    }

    pub fn validate(&self, obs: &Observation) -> Result<()> {
        match (&self.observation, obs) {
            (ObservationSpace::Discrete { states }, Observation::Discrete(i)) => {
                if i < states {
                    Ok(())
                } else {
                    Err(Error::Invariant(format!(
                        "discrete observation {i} out of range for {states} states"
                    )))
                }
            }
            (ObservationSpace::Continuous { low, .. }, Observation::Continuous(v)) => {
                if v.len() != low.len() {
                    Err(Error::Invariant(format!(
                        "observation has length {}, expected {}",
                        v.len(),
                        low.len()
                    )))
                } else if v.iter().any(|x| !x.is_finite()) {
                    Err(Error::Invariant("non-finite observation entry".into()))
                } else {
                    Ok(())
                }
            }
            _ => Err(Error::Invariant(format!(
                "observation kind does not match environment {}",
                self.name
            ))),
        }
    }

    /// One-hot for discrete observations; range-scaled and clamped to
    /// [-1, 1] for continuous ones.
    pub fn encode(&self, obs: &Observation) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.encoding_len()];
        self.encode_into(obs, &mut out)?;
        Ok(out)
    }

    /// Writes the encoding into `out`, which must be `encoding_len()` long.
    pub fn encode_into(&self, obs: &Observation, out: &mut [f64]) -> Result<()> {
        self.validate(obs)?;
        debug_assert_eq!(out.len(), self.encoding_len());
        match (&self.observation, obs) {
            (ObservationSpace::Discrete { .. }, Observation::Discrete(i)) => {
                out.fill(0.0);
                out[*i] = 1.0;
            }
            (ObservationSpace::Continuous { low, high }, Observation::Continuous(v)) => {
                for (((o, x), lo), hi) in out.iter_mut().zip(v).zip(low).zip(high) {
                    *o = (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0);
                }
            }
            _ => unreachable!("validated above"),
        }
        Ok(())
    }
}

/// An undelayed episodic environment.
///
/// Implementations are deterministic functions of the random stream and
/// the action sequence.
pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode and returns its first observation.
    fn reset(&mut self, rng: &mut EnvRng) -> Observation;

    /// Advances one step. Fails with a usage error once the episode is over
    /// or when `action` is not a real action of this environment.
    fn step(&mut self, action: ActionId, rng: &mut EnvRng) -> Result<StepResult>;

    fn box_clone(&self) -> Box<dyn Environment>;
}

impl Clone for Box<dyn Environment> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Builds a named environment with its default parameters.
///
/// `two-state` accepts an optional `:p` suffix, e.g. `two-state:0.8`.
pub fn make(name: &str) -> Result<Box<dyn Environment>> {
    let (base, arg) = match name.split_once(':') {
        Some((b, a)) => (b, Some(a)),
        None => (name, None),
    };
    match (base, arg) {
        ("two-state", arg) => {
            let p = match arg {
                Some(a) => a
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad two-state p {a:?}: {e}")))?,
                None => 0.8,
            };
            Ok(Box::new(TwoState::new(p)?))
        }
        ("wmaze", None) => Ok(Box::new(WMaze::standard())),
        ("wmaze-small", None) => Ok(Box::new(WMaze::small())),
        ("cartpole", None) => Ok(Box::new(CartPole::new())),
        ("mountaincar", None) => Ok(Box::new(MountainCar::new())),
        ("acrobot", None) => Ok(Box::new(Acrobot::new())),
        _ => Err(Error::Config(format!("unknown environment {name:?}"))),
    }
}

/// Shared step-count and termination bookkeeping.
#[derive(Debug, Clone, Default)]
pub(crate) struct EpisodeClock {
    steps: usize,
    done: bool,
}

impl EpisodeClock {
    pub(crate) fn reset(&mut self) {
        self.steps = 0;
        self.done = false;
    }

    pub(crate) fn check(&self, spec: &EnvSpec, action: ActionId) -> Result<usize> {
        if self.done {
            return Err(Error::Usage(format!(
                "{}: step called on a finished episode",
                spec.name
            )));
        }
        match action.index() {
            Some(a) if a < spec.action_count => Ok(a),
            _ => Err(Error::Usage(format!(
                "{}: action {action} outside [0, {})",
                spec.name, spec.action_count
            ))),
        }
    }

    /// Records a completed step and returns the `truncated` flag.
    pub(crate) fn finish(&mut self, spec: &EnvSpec, terminal: bool) -> bool {
        self.steps += 1;
        let truncated = !terminal && self.steps >= spec.max_episode_steps;
        self.done = terminal || truncated;
        truncated
    }
}
