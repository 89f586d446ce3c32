//! Shared fixtures: a reward-recording environment, a queue-free reference
//! model of the delay wrapper, and the numerical checks reused by the
//! acceptance target.
#![allow(dead_code)]

use std::sync::{Arc, Mutex};

use drrl::delay::{DelayKind, DelayProcess, DelayedEnv, DelayedStepResult, InformationState};
use drrl::env::{self, rng_from_seed, ActionId, EnvRng, EnvSpec, Environment, Observation, StepResult};
use drrl::nn::Mlp;
use ndarray::{Array1, Array2};
use rand::Rng;

/// Passes everything through and records each underlying reward.
pub struct RecordingEnv {
    inner: Box<dyn Environment>,
    pub log: Arc<Mutex<Vec<f64>>>,
}

impl RecordingEnv {
    pub fn new(inner: Box<dyn Environment>) -> (Self, Arc<Mutex<Vec<f64>>>) {
        let log = Arc::new(Mutex::new(Vec::new()));
        (
            Self {
                inner,
                log: log.clone(),
            },
            log,
        )
    }
}

impl Environment for RecordingEnv {
    fn spec(&self) -> &EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self, rng: &mut EnvRng) -> Observation {
        self.log.lock().unwrap().clear();
        self.inner.reset(rng)
    }

    fn step(&mut self, action: ActionId, rng: &mut EnvRng) -> drrl::Result<StepResult> {
        let r = self.inner.step(action, rng)?;
        self.log.lock().unwrap().push(r.reward);
        Ok(r)
    }

    fn box_clone(&self) -> Box<dyn Environment> {
        Box::new(Self {
            inner: self.inner.clone(),
            log: self.log.clone(),
        })
    }
}

/// Picks a uniformly random real action, or NONE while frozen.
pub fn random_action(frozen: bool, actions: usize, rng: &mut EnvRng) -> ActionId {
    if frozen {
        ActionId::NONE
    } else {
        ActionId::new(rng.random_range(0..actions))
    }
}

/// Runs `episodes` random-policy episodes and checks that every underlying
/// reward is released exactly once, bit for bit. Returns the number of
/// rewards checked.
pub fn check_reward_conservation(
    env_name: &str,
    kind: DelayKind,
    process: DelayProcess,
    capacity: usize,
    episodes: usize,
    seed: u64,
) -> Result<usize, String> {
    let (rec, log) = RecordingEnv::new(env::make(env_name).map_err(|e| e.to_string())?);
    let mut denv =
        DelayedEnv::wrap(Box::new(rec), process, kind, capacity, seed).map_err(|e| e.to_string())?;
    let actions = denv.spec().action_count;
    let mut env_rng = rng_from_seed(seed ^ 0x5eed);
    let mut policy = rng_from_seed(seed.wrapping_add(1));
    let mut checked = 0;
    for ep in 0..episodes {
        denv.reset(&mut env_rng);
        let mut released: Vec<(usize, f64)> = Vec::new();
        loop {
            let a = random_action(denv.is_frozen(), actions, &mut policy);
            let r = denv.step(a, &mut env_rng).map_err(|e| e.to_string())?;
            let sum: f64 = r.released.iter().map(|(_, x)| x).sum();
            if sum.to_bits() != r.released_reward.to_bits() {
                return Err(format!("episode {ep}: released_reward is not the sum of releases"));
            }
            released.extend(r.released.iter().copied());
            if r.terminal || r.truncated {
                break;
            }
        }
        let generated = log.lock().unwrap().clone();
        match kind {
            DelayKind::Observation => {
                // tagged by generation: each generation 1..=n exactly once
                let mut by_gen = released.clone();
                by_gen.sort_by_key(|(g, _)| *g);
                let gens: Vec<usize> = by_gen.iter().map(|(g, _)| *g).collect();
                let want: Vec<usize> = (1..=generated.len()).collect();
                if gens != want {
                    return Err(format!("episode {ep}: generations released {gens:?}, expected 1..={}", generated.len()));
                }
                for ((g, r), x) in by_gen.iter().zip(&generated) {
                    if r.to_bits() != x.to_bits() {
                        return Err(format!("episode {ep}: generation {g} released {r}, generated {x}"));
                    }
                }
            }
            DelayKind::Action => {
                // rewards are released in the order the environment produced them
                let got: Vec<u64> = released.iter().map(|(_, r)| r.to_bits()).collect();
                let want: Vec<u64> = generated.iter().map(|r| r.to_bits()).collect();
                if got != want {
                    return Err(format!("episode {ep}: released sequence differs from generated sequence"));
                }
            }
        }
        let total_gen: f64 = generated.iter().sum();
        let total_rel: f64 = match kind {
            DelayKind::Observation => {
                let mut v = released.clone();
                v.sort_by_key(|(g, _)| *g);
                v.iter().map(|(_, r)| r).sum()
            }
            DelayKind::Action => released.iter().map(|(_, r)| r).sum(),
        };
        if total_gen.to_bits() != total_rel.to_bits() {
            return Err(format!("episode {ep}: totals {total_rel} vs {total_gen}"));
        }
        checked += generated.len();
    }
    Ok(checked)
}

/// Steps a raw environment and a zero-delay wrapper side by side with the
/// same random streams and actions; true iff rewards, observations and
/// episode flags agree bit for bit over `episodes` episodes.
pub fn zero_delay_matches_raw(env_name: &str, kind: DelayKind, seed: u64, episodes: usize) -> Result<bool, String> {
    let mut raw = env::make(env_name).map_err(|e| e.to_string())?;
    let mut denv = DelayedEnv::wrap(
        env::make(env_name).map_err(|e| e.to_string())?,
        DelayProcess::Constant(0),
        kind,
        1,
        seed,
    )
    .map_err(|e| e.to_string())?;
    let actions = raw.spec().action_count;
    let mut raw_rng = rng_from_seed(seed);
    let mut wrapped_rng = rng_from_seed(seed);
    let mut policy = rng_from_seed(seed ^ 0xabc);
    for _ in 0..episodes {
        let o1 = raw.reset(&mut raw_rng);
        let o2 = denv.reset(&mut wrapped_rng);
        if o1 != o2.last_observed {
            return Ok(false);
        }
        loop {
            let a = random_action(false, actions, &mut policy);
            let r1 = raw.step(a, &mut raw_rng).map_err(|e| e.to_string())?;
            let r2 = denv.step(a, &mut wrapped_rng).map_err(|e| e.to_string())?;
            if r2.frozen
                || r2.released.len() != 1
                || r1.reward.to_bits() != r2.released_reward.to_bits()
                || r1.observation != r2.info.last_observed
                || r1.terminal != r2.terminal
                || r1.truncated != r2.truncated
                || !r2.info.pending().is_empty()
            {
                return Ok(false);
            }
            if r1.terminal || r1.truncated {
                break;
            }
        }
    }
    Ok(true)
}

/// Everything the wrapper reports for one step, in a comparable form.
#[derive(Debug, Clone, PartialEq)]
pub struct StepView {
    pub released: Vec<(usize, f64)>,
    pub last_observed: Observation,
    pub observed_at: usize,
    pub actions: Vec<ActionId>,
    pub frozen: bool,
    pub terminal: bool,
    pub truncated: bool,
}

impl From<&DelayedStepResult> for StepView {
    fn from(r: &DelayedStepResult) -> Self {
        Self {
            released: r.released.clone(),
            last_observed: r.info.last_observed.clone(),
            observed_at: r.info.observed_at,
            actions: r.info.actions.clone(),
            frozen: r.frozen,
            terminal: r.terminal,
            truncated: r.truncated,
        }
    }
}

/// Brute-force model of the wrapper. It keeps the whole episode history and
/// recomputes what is visible at each wall-clock step from release times
/// alone: a payload sent at clock `c` with delay `d` becomes visible at
/// exactly `c + 1 + d` (observations) or `c + d` (actions).
pub struct ReferenceWrapper {
    env: Box<dyn Environment>,
    kind: DelayKind,
    capacity: usize,
    schedule: Vec<usize>,
    draws: usize,
    clock: usize,
    /// observation delay: (generation, release, observation, reward)
    observations: Vec<(usize, usize, Observation, f64)>,
    taken: Vec<ActionId>,
    observed_generation: usize,
    /// action delay: (sent at, release, action, applied)
    sent: Vec<(usize, usize, ActionId, bool)>,
    info: InformationState,
}

impl ReferenceWrapper {
    pub fn new(env: Box<dyn Environment>, kind: DelayKind, capacity: usize, schedule: Vec<usize>) -> Self {
        Self {
            env,
            kind,
            capacity,
            schedule,
            draws: 0,
            clock: 0,
            observations: Vec::new(),
            taken: Vec::new(),
            observed_generation: 0,
            sent: Vec::new(),
            info: InformationState::new(Observation::Discrete(0), 0, capacity),
        }
    }

    pub fn reset(&mut self, rng: &mut EnvRng) -> InformationState {
        let obs = self.env.reset(rng);
        self.clock = 0;
        self.observations.clear();
        self.taken.clear();
        self.observed_generation = 0;
        self.sent.clear();
        self.info = InformationState::new(obs, 0, self.capacity);
        self.info.clone()
    }

    fn draw(&mut self) -> usize {
        let d = self.schedule[self.draws % self.schedule.len()];
        self.draws += 1;
        d
    }

    fn padded(&self, pending: Vec<ActionId>) -> Vec<ActionId> {
        let mut v = pending;
        assert!(v.len() <= self.capacity);
        v.resize(self.capacity, ActionId::NONE);
        v
    }

    pub fn step(&mut self, action: ActionId, rng: &mut EnvRng) -> StepView {
        match self.kind {
            DelayKind::Observation => self.step_observation(action, rng),
            DelayKind::Action => self.step_action(action, rng),
        }
    }

    fn step_observation(&mut self, action: ActionId, rng: &mut EnvRng) -> StepView {
        let t = self.clock;
        if !action.is_none() {
            let out = self.env.step(action, rng).unwrap();
            self.taken.push(action);
            let generation = self.taken.len();
            if out.terminal || out.truncated {
                let mut released: Vec<(usize, f64)> = self
                    .observations
                    .iter()
                    .filter(|o| o.1 > t)
                    .map(|o| (o.0, o.3))
                    .collect();
                released.sort_by_key(|(g, _)| *g);
                released.push((generation, out.reward));
                self.clock = t + 1;
                self.info.last_observed = out.observation;
                self.info.observed_at = t + 1;
                self.info.actions = self.padded(Vec::new());
                return StepView {
                    released,
                    last_observed: self.info.last_observed.clone(),
                    observed_at: t + 1,
                    actions: self.info.actions.clone(),
                    frozen: false,
                    terminal: out.terminal,
                    truncated: out.truncated,
                };
            }
            let d = self.draw();
            self.observations.push((generation, t + 1 + d, out.observation, out.reward));
        }
        let now = t + 1;
        self.clock = now;
        let mut visible: Vec<&(usize, usize, Observation, f64)> =
            self.observations.iter().filter(|o| o.1 == now).collect();
        visible.sort_by_key(|o| o.0);
        let released: Vec<(usize, f64)> = visible.iter().map(|o| (o.0, o.3)).collect();
        if let Some(newest) = visible.iter().max_by_key(|o| o.0) {
            if newest.0 > self.observed_generation {
                self.observed_generation = newest.0;
                self.info.last_observed = newest.2.clone();
                self.info.observed_at = now;
            }
        }
        let pending = self.taken[self.observed_generation..].to_vec();
        let frozen = pending.len() > self.capacity - 1;
        self.info.actions = self.padded(pending);
        StepView {
            released,
            last_observed: self.info.last_observed.clone(),
            observed_at: self.info.observed_at,
            actions: self.info.actions.clone(),
            frozen,
            terminal: false,
            truncated: false,
        }
    }

    fn step_action(&mut self, action: ActionId, rng: &mut EnvRng) -> StepView {
        let t = self.clock;
        if !action.is_none() {
            let d = self.draw();
            self.sent.push((t, t + d, action, false));
        }
        let mut due: Vec<usize> = (0..self.sent.len()).filter(|&i| self.sent[i].1 == t).collect();
        due.sort_by_key(|&i| self.sent[i].0);
        let mut released = Vec::new();
        let (mut terminal, mut truncated) = (false, false);
        for i in due {
            self.sent[i].3 = true;
            let out = self.env.step(self.sent[i].2, rng).unwrap();
            released.push((t, out.reward));
            self.info.last_observed = out.observation;
            self.info.observed_at = t + 1;
            if out.terminal || out.truncated {
                terminal = out.terminal;
                truncated = out.truncated;
                break;
            }
        }
        self.clock = t + 1;
        let (pending, frozen) = if terminal || truncated {
            (Vec::new(), false)
        } else {
            let mut flying: Vec<&(usize, usize, ActionId, bool)> = self.sent.iter().filter(|s| !s.3).collect();
            flying.sort_by_key(|s| s.0);
            let pending: Vec<ActionId> = flying.iter().map(|s| s.2).collect();
            let frozen = pending.len() > self.capacity - 1;
            (pending, frozen)
        };
        self.info.actions = self.padded(pending);
        StepView {
            released,
            last_observed: self.info.last_observed.clone(),
            observed_at: self.info.observed_at,
            actions: self.info.actions.clone(),
            frozen,
            terminal,
            truncated,
        }
    }
}

/// Largest relative error between backpropagated and central-difference
/// gradients over every parameter of a random ReLU network.
pub fn gradient_check_max_relative_error(seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let depth = rng.random_range(1..4);
    let mut sizes = vec![rng.random_range(1..6)];
    for _ in 0..depth {
        sizes.push(rng.random_range(1..7));
    }
    sizes.push(rng.random_range(1..4));
    let mut net: Mlp<f64> = Mlp::new(&sizes, &mut rng);
    for layer in net.layers_mut() {
        layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    let batch = rng.random_range(1..5);
    let input = Array2::from_shape_simple_fn((batch, sizes[0]), || rng.random_range(-2.0..2.0));
    let out_dim = *sizes.last().unwrap();
    // loss = sum(c .* output), so d loss / d output = c
    let c = Array2::from_shape_simple_fn((batch, out_dim), || rng.random_range(-1.0..1.0));
    let loss = |net: &Mlp<f64>| -> f64 {
        let out = net.predict_batch(input.view()).unwrap();
        (&out * &c).sum()
    };
    let (_, cache) = net.forward_batch(input.view()).unwrap();
    let grads = net.backward(&cache, c.view()).unwrap();
    let h = 1e-5;
    let rel = |analytic: f64, numeric: f64| {
        (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
    };
    let mut worst: f64 = 0.0;
    for l in 0..net.layers().len() {
        let (rows, cols) = net.layers()[l].weights.dim();
        for i in 0..rows {
            for j in 0..cols {
                let orig = net.layers()[l].weights[[i, j]];
                net.layers_mut()[l].weights[[i, j]] = orig + h;
                let up = loss(&net);
                net.layers_mut()[l].weights[[i, j]] = orig - h;
                let down = loss(&net);
                net.layers_mut()[l].weights[[i, j]] = orig;
                worst = worst.max(rel(grads.layers[l].weights[[i, j]], (up - down) / (2.0 * h)));
            }
            let orig = net.layers()[l].bias[i];
            net.layers_mut()[l].bias[i] = orig + h;
            let up = loss(&net);
            net.layers_mut()[l].bias[i] = orig - h;
            let down = loss(&net);
            net.layers_mut()[l].bias[i] = orig;
            worst = worst.max(rel(grads.layers[l].bias[i], (up - down) / (2.0 * h)));
        }
    }
    worst
}

/// Closed-form gradient of `|W x + b - y|^2` for a single linear layer:
/// `2 (W x + b - y) x^T` for the weights, `2 (W x + b - y)` for the bias.
pub fn linear_squared_error_gradient(w: &Array2<f64>, b: &Array1<f64>, x: &Array1<f64>, y: &Array1<f64>) -> (Array2<f64>, Array1<f64>) {
    let residual = w.dot(x) + b - y;
    let gw = Array2::from_shape_fn(w.raw_dim(), |(i, j)| 2.0 * residual[i] * x[j]);
    (gw, residual * 2.0)
}
