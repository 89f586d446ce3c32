use std::f64::consts::PI;

use rand::Rng;

use super::{ActionId, EnvRng, EnvSpec, Environment, EpisodeClock, Observation, ObservationSpace, StepResult};
use crate::error::Result;

/// Two-link under-actuated pendulum ("book" dynamics, RK4 with dt = 0.2).
///
/// Observation is `[cos t1, sin t1, cos t2, sin t2, t1_dot, t2_dot]`; reward
/// is -1 per step and 0 on the step that lifts the tip above the bar.
#[derive(Debug, Clone)]
pub struct Acrobot {
    state: [f64; 4],
    spec: EnvSpec,
    clock: EpisodeClock,
}

impl Acrobot {
    pub const DT: f64 = 0.2;
    pub const LINK_LENGTH_1: f64 = 1.0;
    pub const LINK_MASS_1: f64 = 1.0;
    pub const LINK_MASS_2: f64 = 1.0;
    pub const LINK_COM_1: f64 = 0.5;
    pub const LINK_COM_2: f64 = 0.5;
    pub const LINK_MOI: f64 = 1.0;
    pub const GRAVITY: f64 = 9.8;
    pub const MAX_VEL_1: f64 = 4.0 * PI;
    pub const MAX_VEL_2: f64 = 9.0 * PI;
    pub const TORQUES: [f64; 3] = [-1.0, 0.0, 1.0];
    pub const HORIZON: usize = 500;

    pub fn new() -> Self {
        Self {
            state: [0.0; 4],
            spec: EnvSpec {
                name: "acrobot".into(),
                action_count: 3,
                observation: ObservationSpace::Continuous {
                    low: vec![-1.0, -1.0, -1.0, -1.0, -Self::MAX_VEL_1, -Self::MAX_VEL_2],
                    high: vec![1.0, 1.0, 1.0, 1.0, Self::MAX_VEL_1, Self::MAX_VEL_2],
                },
                max_episode_steps: Self::HORIZON,
                optimal_return_hint: Some(-100.0),
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

    /// Time derivative of `[t1, t2, t1_dot, t2_dot]` under `torque`.
    pub fn derivatives(s: [f64; 4], torque: f64) -> [f64; 4] {
        let (m1, m2) = (Self::LINK_MASS_1, Self::LINK_MASS_2);
        let l1 = Self::LINK_LENGTH_1;
        let (lc1, lc2) = (Self::LINK_COM_1, Self::LINK_COM_2);
        let (i1, i2) = (Self::LINK_MOI, Self::LINK_MOI);
        let g = Self::GRAVITY;
        let [theta1, theta2, dtheta1, dtheta2] = s;
        let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * theta2.cos()) + i1 + i2;
        let d2 = m2 * (lc2 * lc2 + l1 * lc2 * theta2.cos()) + i2;
        let phi2 = m2 * lc2 * g * (theta1 + theta2 - PI / 2.0).cos();
        let phi1 = -m2 * l1 * lc2 * dtheta2 * dtheta2 * theta2.sin()
            - 2.0 * m2 * l1 * lc2 * dtheta2 * dtheta1 * theta2.sin()
            + (m1 * lc1 + m2 * l1) * g * (theta1 - PI / 2.0).cos()
            + phi2;
        let ddtheta2 = (torque + d2 / d1 * phi1
            - m2 * l1 * lc2 * dtheta1 * dtheta1 * theta2.sin()
            - phi2)
            / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
        let ddtheta1 = -(d2 * ddtheta2 + phi1) / d1;
        [dtheta1, dtheta2, ddtheta1, ddtheta2]
    }

    /// One RK4 step of length [`Acrobot::DT`] followed by angle wrapping and
    /// velocity clipping.
    pub fn dynamics(s: [f64; 4], action: usize) -> [f64; 4] {
        let torque = Self::TORQUES[action];
        let h = Self::DT;
        let add = |a: [f64; 4], k: [f64; 4], w: f64| -> [f64; 4] {
            [a[0] + w * k[0], a[1] + w * k[1], a[2] + w * k[2], a[3] + w * k[3]]
        };
        let k1 = Self::derivatives(s, torque);
        let k2 = Self::derivatives(add(s, k1, h / 2.0), torque);
        let k3 = Self::derivatives(add(s, k2, h / 2.0), torque);
        let k4 = Self::derivatives(add(s, k3, h), torque);
        let mut n = [0.0; 4];
        for i in 0..4 {
            n[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        [
            wrap_angle(n[0]),
            wrap_angle(n[1]),
            n[2].clamp(-Self::MAX_VEL_1, Self::MAX_VEL_1),
            n[3].clamp(-Self::MAX_VEL_2, Self::MAX_VEL_2),
        ]
    }

    pub fn reached_goal(s: &[f64; 4]) -> bool {
        -s[0].cos() - (s[1] + s[0]).cos() > 1.0
    }

    fn observe(&self) -> Observation {
        let [t1, t2, d1, d2] = self.state;
        Observation::Continuous(vec![t1.cos(), t1.sin(), t2.cos(), t2.sin(), d1, d2])
    }
}

impl Default for Acrobot {
    fn default() -> Self {
        Self::new()
    }
}

fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut v = x;
    while v > PI {
        v -= two_pi;
    }
    while v < -PI {
        v += two_pi;
    }
    v
}

impl Environment for Acrobot {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut EnvRng) -> Observation {
        self.clock.reset();
        for v in &mut self.state {
            *v = rng.random_range(-0.1..=0.1);
        }
        self.observe()
    }

    fn step(&mut self, action: ActionId, _rng: &mut EnvRng) -> Result<StepResult> {
        let a = self.clock.check(&self.spec, action)?;
        self.state = Self::dynamics(self.state, a);
        let terminal = Self::reached_goal(&self.state);
        let truncated = self.clock.finish(&self.spec, terminal);
        Ok(StepResult {
            observation: self.observe(),
            reward: if terminal { 0.0 } else { -1.0 },
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
    fn wraps_angles() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-3.0 * PI / 2.0) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn resting_state_stays_down() {
        let s = Acrobot::dynamics([0.0; 4], 1);
        assert!(s.iter().all(|v| v.abs() < 1e-12));
        assert!(!Acrobot::reached_goal(&s));
    }

    #[test]
    fn goal_step_pays_zero() {
        let mut env = Acrobot::new();
        let mut rng = rng_from_seed(0);
        env.reset(&mut rng);
        env.set_state([PI, 0.0, 0.0, 0.0]);
        let r = env.step(ActionId::new(1), &mut rng).unwrap();
        assert!(r.terminal);
        assert_eq!(r.reward, 0.0);
    }

    #[test]
    fn observation_is_six_dim() {
        let mut env = Acrobot::new();
        let Observation::Continuous(v) = env.reset(&mut rng_from_seed(5)) else { panic!() };
        assert_eq!(v.len(), 6);
        env.spec().validate(&Observation::Continuous(v)).unwrap();
    }
}
