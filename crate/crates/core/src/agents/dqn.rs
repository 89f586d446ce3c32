use ndarray::{Array2, ArrayView2};

use crate::delay::{encode_information_state, feature_len, InformationState};
use crate::env::{rng_from_seed, EnvRng, EnvSpec};
use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, Mlp};
use crate::scalar::Real;

use super::{Agent, AgentConfig, ReplayBuffer, Transition};

/// What the network sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DqnInput {
    /// Full information state: observation plus `capacity` action blocks.
    InformationState { capacity: usize },
    /// The last observation alone (the naive baseline).
    RawObservation,
}

/// DQN with replay and a periodically synced target network. With
/// [`DqnInput::InformationState`] this is the delay-resolved DQN.
#[derive(Debug, Clone)]
pub struct DqnAgent<T> {
    spec: EnvSpec,
    input: DqnInput,
    config: AgentConfig,
    online: Mlp<T>,
    target: Mlp<T>,
    optimizer: Adam<T>,
    replay: ReplayBuffer<Vec<T>>,
    rng: EnvRng,
    scratch: Vec<f64>,
    observed: usize,
    train_steps: usize,
}

impl<T: Real> DqnAgent<T> {
    pub fn new(spec: &EnvSpec, input: DqnInput, config: &AgentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let features = match input {
            DqnInput::InformationState { capacity } => feature_len(spec, capacity),
            DqnInput::RawObservation => spec.encoding_len(),
        };
        let mut rng = rng_from_seed(seed);
        let mut sizes = vec![features];
        sizes.extend(&config.hidden);
        sizes.push(spec.action_count);
        let online = Mlp::new(&sizes, &mut rng);
        let target = online.clone();
        let optimizer = Adam::new(
            &online,
            AdamConfig { learning_rate: config.learning_rate, ..AdamConfig::default() },
        );
        Ok(Self {
            spec: spec.clone(),
            input,
            config: config.clone(),
            online,
            target,
            optimizer,
            replay: ReplayBuffer::new(config.replay_capacity),
            rng,
            scratch: vec![0.0; features],
            observed: 0,
            train_steps: 0,
        })
    }

    pub fn input(&self) -> DqnInput {
        self.input
    }

    pub fn feature_len(&self) -> usize {
        self.scratch.len()
    }

    pub fn online(&self) -> &Mlp<T> {
        &self.online
    }

    pub fn target(&self) -> &Mlp<T> {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer<Vec<T>> {
        &self.replay
    }

    pub fn train_steps(&self) -> usize {
        self.train_steps
    }

    /// Network input for `info`.
    pub fn encode(&self, info: &InformationState) -> Result<Vec<T>> {
        let mut buf = vec![0.0; self.scratch.len()];
        self.encode_into(info, &mut buf)?;
        Ok(buf.into_iter().map(T::of).collect())
    }

    fn encode_into(&self, info: &InformationState, out: &mut [f64]) -> Result<()> {
        match self.input {
            DqnInput::InformationState { capacity } => {
                if info.capacity() != capacity {
                    return Err(Error::Usage(format!(
                        "information state has {} slots, agent expects {capacity}",
                        info.capacity()
                    )));
                }
                encode_information_state(&self.spec, info, out)
            }
            DqnInput::RawObservation => self.spec.encode_into(&info.last_observed, out),
        }
    }

    /// Stores an already encoded transition.
    pub fn push(&mut self, t: Transition<Vec<T>>) {
        self.replay.push(t);
    }

    /// One gradient step on a uniform minibatch. The loss is the mean
    /// squared TD error on the taken actions, with targets from the target
    /// network.
    pub fn train_step(&mut self) -> Result<f64> {
        let batch = self.replay.sample(self.config.batch_size, &mut self.rng)?;
        let (b, f) = (batch.len(), self.online.input_dim());
        let mut x = Array2::<T>::zeros((b, f));
        let mut x_next = Array2::<T>::zeros((b, f));
        for (i, t) in batch.iter().enumerate() {
            x.row_mut(i).assign(&ArrayView2::from_shape((1, f), &t.before).expect("stored width").row(0));
            x_next.row_mut(i).assign(&ArrayView2::from_shape((1, f), &t.after).expect("stored width").row(0));
        }
        let next_q = self.target.predict_batch(x_next.view())?;
        let gamma = T::of(self.config.gamma);
        let targets: Vec<T> = batch
            .iter()
            .zip(next_q.rows())
            .map(|(t, row)| {
                let best = row.iter().copied().fold(T::neg_infinity(), T::max);
                let boot = if t.terminal { T::zero() } else { gamma * best };
                T::of(t.reward) + boot
            })
            .collect();
        let (q, cache) = self.online.forward_batch(x.view())?;
        let mut grad = Array2::<T>::zeros(q.dim());
        let scale = T::of(2.0 / b as f64);
        let mut loss = 0.0;
        for (i, t) in batch.iter().enumerate() {
            let a = t.action.index().expect("stored transitions carry real actions");
            let err = q[(i, a)] - targets[i];
            loss += err.to_f64().unwrap_or(f64::NAN).powi(2);
            grad[(i, a)] = scale * err;
        }
        loss /= b as f64;
        if !loss.is_finite() {
            return Err(Error::Training(format!("non-finite loss after {} train steps", self.train_steps)));
        }
        let grads = self.online.backward(&cache, grad.view())?;
        self.optimizer.step(&mut self.online, &grads)?;
        self.train_steps += 1;
        if self.train_steps.is_multiple_of(self.config.target_sync_period) {
            self.target.copy_from(&self.online);
        }
        Ok(loss)
    }

    /// Overwrites the target network with the online one.
    pub fn sync_target(&mut self) {
        self.target.copy_from(&self.online);
    }
}

impl<T: Real> Agent for DqnAgent<T> {
    fn name(&self) -> &'static str {
        match self.input {
            DqnInput::InformationState { .. } => "drdqn",
            DqnInput::RawObservation => "naive-dqn",
        }
    }

    fn action_count(&self) -> usize {
        self.spec.action_count
    }

    fn q_values(&self, info: &InformationState) -> Result<Vec<f64>> {
        let x = self.encode(info)?;
        Ok(self.online.predict(&x)?.into_iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
    }

    fn observe(&mut self, t: &Transition) -> Result<Option<f64>> {
        let encoded = Transition::new(self.encode(&t.before)?, t.action, t.reward, self.encode(&t.after)?, t.terminal)?;
        self.replay.push(encoded);
        self.observed += 1;
        let ready = self.replay.len() >= self.config.batch_size.max(self.config.learning_starts);
        if ready && self.observed.is_multiple_of(self.config.train_every) {
            return self.train_step().map(Some);
        }
        Ok(None)
    }
}
