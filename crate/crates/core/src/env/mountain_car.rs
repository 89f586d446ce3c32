use rand::Rng;

use super::{ActionId, EnvRng, EnvSpec, Environment, EpisodeClock, Observation, ObservationSpace, StepResult};
use crate::error::Result;

/// Under-powered car in a valley; -1 per step, 0 on the step reaching the goal.
#[derive(Debug, Clone)]
pub struct MountainCar {
    position: f64,
    velocity: f64,
    spec: EnvSpec,
    clock: EpisodeClock,
}

impl MountainCar {
    pub const MIN_POSITION: f64 = -1.2;
    pub const MAX_POSITION: f64 = 0.6;
    pub const MAX_SPEED: f64 = 0.07;
    pub const GOAL_POSITION: f64 = 0.5;
    pub const FORCE: f64 = 0.001;
    pub const GRAVITY: f64 = 0.0025;
    pub const HORIZON: usize = 200;

    pub fn new() -> Self {
        Self {
            position: -0.5,
            velocity: 0.0,
            spec: EnvSpec {
                name: "mountaincar".into(),
                action_count: 3,
                observation: ObservationSpace::Continuous {
                    low: vec![Self::MIN_POSITION, -Self::MAX_SPEED],
                    high: vec![Self::MAX_POSITION, Self::MAX_SPEED],
                },
                max_episode_steps: Self::HORIZON,
                optimal_return_hint: Some(-110.0),
            },
            clock: EpisodeClock::default(),
        }
    }

    pub fn dynamics(position: f64, velocity: f64, action: usize) -> (f64, f64) {
        let mut v = velocity + (action as f64 - 1.0) * Self::FORCE
            - (3.0 * position).cos() * Self::GRAVITY;
        v = v.clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
        let mut p = (position + v).clamp(Self::MIN_POSITION, Self::MAX_POSITION);
        if p == Self::MIN_POSITION && v < 0.0 {
            v = 0.0;
        }
        if p > Self::MAX_POSITION {
            p = Self::MAX_POSITION;
        }
        (p, v)
    }

    pub fn set_state(&mut self, position: f64, velocity: f64) {
        self.position = position;
        self.velocity = velocity;
    }
}

impl Default for MountainCar {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for MountainCar {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut EnvRng) -> Observation {
        self.clock.reset();
        self.position = rng.random_range(-0.6..-0.4);
        self.velocity = 0.0;
        Observation::Continuous(vec![self.position, self.velocity])
    }

    fn step(&mut self, action: ActionId, _rng: &mut EnvRng) -> Result<StepResult> {
        let a = self.clock.check(&self.spec, action)?;
        let (p, v) = Self::dynamics(self.position, self.velocity, a);
        self.position = p;
        self.velocity = v;
        let terminal = p >= Self::GOAL_POSITION && v >= 0.0;
        let truncated = self.clock.finish(&self.spec, terminal);
        Ok(StepResult {
            observation: Observation::Continuous(vec![p, v]),
            reward: if terminal { 0.0 } else { -1.0 },
            terminal,
            truncated,
        })
    }

    fn box_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}
