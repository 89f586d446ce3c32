use rand::Rng;

use super::{ActionId, EnvRng, EnvSpec, Environment, EpisodeClock, Observation, ObservationSpace, StepResult};
use crate::error::{Error, Result};

/// Symmetric two-state MDP.
///
/// Action 0 aims for state 1 and action 1 aims for state 0; the aimed-for
/// state is reached with probability `p`, otherwise the other state is
/// entered. The reward is 1 when the aimed-for state is reached and 0
/// otherwise, i.e. a function of (action, next state).
#[derive(Debug, Clone)]
pub struct TwoState {
    p: f64,
    state: usize,
    spec: EnvSpec,
    clock: EpisodeClock,
}

impl TwoState {
    pub const HORIZON: usize = 200;

    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("two-state p must lie in [0, 1], got {p}")));
        }
        Ok(Self {
            p,
            state: 0,
            spec: EnvSpec {
                name: "two-state".into(),
                action_count: 2,
                observation: ObservationSpace::Discrete { states: 2 },
                max_episode_steps: Self::HORIZON,
                optimal_return_hint: Some(p * Self::HORIZON as f64),
            },
            clock: EpisodeClock::default(),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// The state action `a` aims for.
    pub fn target(action: usize) -> usize {
        1 - action
    }

    /// Transition probability `p_a(next | state)`.
    pub fn kernel(p: f64, state: usize, action: usize, next: usize) -> f64 {
        let _ = state;
        if next == Self::target(action) {
            p
        } else {
            1.0 - p
        }
    }

    /// Reward of reaching `next` under `action`.
    pub fn reward(action: usize, next: usize) -> f64 {
        if next == Self::target(action) {
            1.0
        } else {
            0.0
        }
    }

    /// Places the chain in `state` without starting a new episode.
    pub fn set_state(&mut self, state: usize) {
        assert!(state < 2);
        self.state = state;
    }
}

impl Environment for TwoState {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut EnvRng) -> Observation {
        self.clock.reset();
        self.state = rng.random_range(0..2);
        Observation::Discrete(self.state)
    }

    fn step(&mut self, action: ActionId, rng: &mut EnvRng) -> Result<StepResult> {
        let a = self.clock.check(&self.spec, action)?;
        let target = Self::target(a);
        let next = if rng.random::<f64>() < self.p { target } else { 1 - target };
        self.state = next;
        let truncated = self.clock.finish(&self.spec, false);
        Ok(StepResult {
            observation: Observation::Discrete(next),
            reward: Self::reward(a, next),
            terminal: false,
            truncated,
        })
    }

    fn box_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}
