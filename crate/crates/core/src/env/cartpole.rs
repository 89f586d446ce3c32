use rand::Rng;

use super::{ActionId, EnvRng, EnvSpec, Environment, EpisodeClock, Observation, ObservationSpace, StepResult};
use crate::error::Result;

/// Cart-pole balancing with the classic Euler-integrated dynamics.
///
/// State is `[x, x_dot, theta, theta_dot]`; +1 reward on every step including
/// the failing one.
#[derive(Debug, Clone)]
pub struct CartPole {
    state: [f64; 4],
    spec: EnvSpec,
    clock: EpisodeClock,
}

impl CartPole {
    pub const GRAVITY: f64 = 9.8;
    pub const MASS_CART: f64 = 1.0;
    pub const MASS_POLE: f64 = 0.1;
    /// Half the pole length.
    pub const LENGTH: f64 = 0.5;
    pub const FORCE_MAG: f64 = 10.0;
    pub const TAU: f64 = 0.02;
    pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
    pub const X_THRESHOLD: f64 = 2.4;
    pub const HORIZON: usize = 200;

    pub fn new() -> Self {
        Self {
            state: [0.0; 4],
            spec: EnvSpec {
                name: "cartpole".into(),
                action_count: 2,
                observation: ObservationSpace::Continuous {
                    low: vec![-Self::X_THRESHOLD, -3.0, -Self::THETA_THRESHOLD, -3.5],
                    high: vec![Self::X_THRESHOLD, 3.0, Self::THETA_THRESHOLD, 3.5],
                },
                max_episode_steps: Self::HORIZON,
                optimal_return_hint: Some(200.0),
            },
            clock: EpisodeClock::default(),
        }
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }

    pub fn set_state(&mut self, state: [f64; 4]) {
        self.state = state;
    }

    /// One Euler step of the cart-pole equations of motion.
    pub fn dynamics(state: [f64; 4], action: usize) -> [f64; 4] {
        let [x, x_dot, theta, theta_dot] = state;
        let force = if action == 1 { Self::FORCE_MAG } else { -Self::FORCE_MAG };
        let total_mass = Self::MASS_CART + Self::MASS_POLE;
        let polemass_length = Self::MASS_POLE * Self::LENGTH;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + polemass_length * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (Self::GRAVITY * sin - cos * temp)
            / (Self::LENGTH * (4.0 / 3.0 - Self::MASS_POLE * cos * cos / total_mass));
        let x_acc = temp - polemass_length * theta_acc * cos / total_mass;
        [
            x + Self::TAU * x_dot,
            x_dot + Self::TAU * x_acc,
            theta + Self::TAU * theta_dot,
            theta_dot + Self::TAU * theta_acc,
        ]
    }

    pub fn failed(state: &[f64; 4]) -> bool {
        state[0].abs() > Self::X_THRESHOLD || state[2].abs() > Self::THETA_THRESHOLD
    }
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for CartPole {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut EnvRng) -> Observation {
        self.clock.reset();
        for v in &mut self.state {
            *v = rng.random_range(-0.05..=0.05);
        }
        Observation::Continuous(self.state.to_vec())
    }

    fn step(&mut self, action: ActionId, _rng: &mut EnvRng) -> Result<StepResult> {
        let a = self.clock.check(&self.spec, action)?;
        self.state = Self::dynamics(self.state, a);
        let terminal = Self::failed(&self.state);
        let truncated = self.clock.finish(&self.spec, terminal);
        Ok(StepResult {
            observation: Observation::Continuous(self.state.to_vec()),
            reward: 1.0,
            terminal,
            truncated,
        })
    }

    fn box_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::rng_from_seed;

    #[test]
    fn reset_range() {
        let mut env = CartPole::new();
        let obs = env.reset(&mut rng_from_seed(0));
        let Observation::Continuous(v) = obs else { panic!() };
        assert_eq!(v.len(), 4);
        assert!(v.iter().all(|x| x.abs() <= 0.05));
    }

    #[test]
    fn failing_step_pays_then_terminates() {
        let mut env = CartPole::new();
        let mut rng = rng_from_seed(0);
        env.reset(&mut rng);
        env.set_state([0.0, 0.0, 0.2, 2.0]);
        let r = env.step(ActionId::new(0), &mut rng).unwrap();
        assert_eq!(r.reward, 1.0);
        assert!(r.terminal);
        assert!(!r.truncated);
    }

    #[test]
    fn horizon_truncates() {
        let mut env = CartPole::new();
        let mut rng = rng_from_seed(0);
        env.reset(&mut rng);
        let mut last = None;
        for _ in 0..CartPole::HORIZON {
            env.set_state([0.0; 4]);
            last = Some(env.step(ActionId::new(0), &mut rng).unwrap());
        }
        let last = last.unwrap();
        assert!(last.truncated && !last.terminal);
    }
}
