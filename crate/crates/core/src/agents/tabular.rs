use std::collections::HashMap;

use crate::delay::{DelayKind, DelayProcess, InformationState};
use crate::env::{ActionId, Observation};
use crate::error::{Error, Result};

use super::{Agent, AgentConfig, Transition};

/// Tabular key: observation index plus the real-action prefix (padding is
/// dropped since it carries no information).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InfoKey {
    pub observation: usize,
    pub prefix: Vec<u32>,
}

impl InfoKey {
    pub fn of(info: &InformationState) -> Result<Self> {
        Ok(Self {
            observation: discrete(&info.last_observed)?,
            prefix: info.pending().iter().map(|a| a.index().expect("real action") as u32).collect(),
        })
    }

    pub fn raw(observation: usize) -> Self {
        Self { observation, prefix: Vec::new() }
    }
}

fn discrete(obs: &Observation) -> Result<usize> {
    obs.as_discrete()
        .ok_or_else(|| Error::Config("tabular agents need a discrete observation space".into()))
}

/// Sparse Q-table; missing keys read as zeros.
#[derive(Debug, Clone)]
pub struct QTable {
    actions: usize,
    table: HashMap<InfoKey, Vec<f64>>,
    zeros: Vec<f64>,
}

impl QTable {
    pub fn new(actions: usize) -> Self {
        Self { actions, table: HashMap::new(), zeros: vec![0.0; actions] }
    }

    pub fn get(&self, key: &InfoKey) -> &[f64] {
        self.table.get(key).map_or(&self.zeros, |v| v.as_slice())
    }

    pub fn entry(&mut self, key: InfoKey) -> &mut Vec<f64> {
        let n = self.actions;
        self.table.entry(key).or_insert_with(|| vec![0.0; n])
    }

    /// Number of keys written so far.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &InfoKey> {
        self.table.keys()
    }

    fn max(&self, key: &InfoKey) -> f64 {
        self.get(key).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// One-step Q-learning on keys:
    /// `Q(k, a) += alpha * (r + gamma * max Q(k', .) * (1 - terminal) - Q(k, a))`.
    pub fn update_keys(&mut self, before: InfoKey, action: usize, reward: f64, after: &InfoKey, terminal: bool, alpha: f64, gamma: f64) {
        if alpha == 0.0 {
            return;
        }
        let bootstrap = if terminal { 0.0 } else { gamma * self.max(after) };
        let q = &mut self.entry(before)[action];
        *q += alpha * (reward + bootstrap - *q);
    }

    /// [`QTable::update_keys`] on a delay-resolved transition.
    pub fn update(&mut self, t: &Transition, alpha: f64, gamma: f64) -> Result<()> {
        let action = t.action.index().ok_or_else(|| Error::Invariant("no-action transition".into()))?;
        let after = InfoKey::of(&t.after)?;
        self.update_keys(InfoKey::of(&t.before)?, action, t.reward, &after, t.terminal, alpha, gamma);
        Ok(())
    }
}

/// Delay-resolved tabular Q-learning over information-state keys.
#[derive(Debug, Clone)]
pub struct TabularAgent {
    pub table: QTable,
    alpha: f64,
    gamma: f64,
}

impl TabularAgent {
    pub fn new(actions: usize, config: &AgentConfig) -> Self {
        Self { table: QTable::new(actions), alpha: config.alpha, gamma: config.gamma }
    }
}

impl Agent for TabularAgent {
    fn name(&self) -> &'static str {
        "tabular"
    }

    fn action_count(&self) -> usize {
        self.table.actions
    }

    fn q_values(&self, info: &InformationState) -> Result<Vec<f64>> {
        Ok(self.table.get(&InfoKey::of(info)?).to_vec())
    }

    fn observe(&mut self, t: &Transition) -> Result<Option<f64>> {
        self.table.update(t, self.alpha, self.gamma)?;
        Ok(None)
    }
}

/// Q-learning on raw observations, crediting the buffered action that was
/// actually applied (the oldest in `buffer`, which holds the pending actions
/// followed by the new one). Needs a constant action delay known in
/// advance. Returns false while the buffer is still filling and no action
/// has been applied yet.
#[allow(clippy::too_many_arguments)]
pub fn effective_action_update(
    table: &mut QTable,
    observation: usize,
    buffer: &[ActionId],
    reward: f64,
    next_observation: usize,
    terminal: bool,
    alpha: f64,
    gamma: f64,
    kind: DelayKind,
    known_delay: Option<usize>,
) -> Result<bool> {
    if kind != DelayKind::Action {
        return Err(Error::Config("effective-action learning applies to action delay only".into()));
    }
    let d = known_delay.ok_or_else(|| Error::Config("effective-action learning needs a known constant delay".into()))?;
    if buffer.len() < d + 1 {
        return Ok(false);
    }
    let applied = buffer[buffer.len() - d - 1]
        .index()
        .ok_or_else(|| Error::Invariant("no-action in the effective-action buffer".into()))?;
    table.update_keys(InfoKey::raw(observation), applied, reward, &InfoKey::raw(next_observation), terminal, alpha, gamma);
    Ok(true)
}

/// Baseline that ignores the action buffer when acting and learns with
/// [`effective_action_update`].
#[derive(Debug, Clone)]
pub struct EffectiveActionAgent {
    pub table: QTable,
    alpha: f64,
    gamma: f64,
    delay: usize,
}

impl EffectiveActionAgent {
    pub fn new(actions: usize, config: &AgentConfig, kind: DelayKind, process: &DelayProcess) -> Result<Self> {
        if kind != DelayKind::Action {
            return Err(Error::Config("effective-action agent requires delay.channel=action".into()));
        }
        let DelayProcess::Constant(delay) = *process else {
            return Err(Error::Config("effective-action agent requires a constant delay".into()));
        };
        Ok(Self { table: QTable::new(actions), alpha: config.alpha, gamma: config.gamma, delay })
    }
}

impl Agent for EffectiveActionAgent {
    fn name(&self) -> &'static str {
        "effective-action"
    }

    fn action_count(&self) -> usize {
        self.table.actions
    }

    fn q_values(&self, info: &InformationState) -> Result<Vec<f64>> {
        Ok(self.table.get(&InfoKey::raw(discrete(&info.last_observed)?)).to_vec())
    }

    fn observe(&mut self, t: &Transition) -> Result<Option<f64>> {
        let mut buffer = t.before.pending().to_vec();
        buffer.push(t.action);
        effective_action_update(
            &mut self.table,
            discrete(&t.before.last_observed)?,
            &buffer,
            t.reward,
            discrete(&t.after.last_observed)?,
            t.terminal,
            self.alpha,
            self.gamma,
            DelayKind::Action,
            Some(self.delay),
        )?;
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn info(obs: usize, pending: &[usize], cap: usize) -> InformationState {
        let mut i = InformationState::new(Observation::Discrete(obs), 0, cap);
        for (slot, &a) in i.actions.iter_mut().zip(pending) {
            *slot = ActionId::new(a);
        }
        i
    }

    #[test]
    fn terminal_update_arithmetic() {
        let mut q = QTable::new(2);
        let t = Transition::new(info(0, &[], 1), ActionId::new(1), 10.0, info(1, &[], 1), true).unwrap();
        q.update(&t, 0.5, 0.9).unwrap();
        assert_eq!(q.get(&InfoKey::raw(0)), &[0.0, 5.0]);
        let before = q.clone();
        q.update(&t, 0.0, 0.9).unwrap();
        assert_eq!(q.get(&InfoKey::raw(0)), before.get(&InfoKey::raw(0)));
    }

    #[test]
    fn keys_drop_padding() {
        let a = InfoKey::of(&info(3, &[1, 0], 4)).unwrap();
        let b = InfoKey::of(&info(3, &[1, 0], 6)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.prefix, vec![1, 0]);
        let cont = InformationState::new(Observation::Continuous(vec![0.0]), 0, 1);
        assert!(InfoKey::of(&cont).is_err());
    }

    #[test]
    fn missing_keys_read_zero() {
        assert_eq!(QTable::new(3).get(&InfoKey::raw(9)), &[0.0; 3]);
    }

    #[test]
    fn effective_action_zero_delay_is_plain_q_learning() {
        let mut eff = QTable::new(2);
        let mut plain = QTable::new(2);
        for (s, a, r, n) in [(0, 1, 1.0, 1), (1, 0, 0.0, 0), (0, 0, 2.0, 0)] {
            effective_action_update(&mut eff, s, &[ActionId::new(a)], r, n, false, 0.3, 0.9, DelayKind::Action, Some(0)).unwrap();
            plain.update_keys(InfoKey::raw(s), a, r, &InfoKey::raw(n), false, 0.3, 0.9);
        }
        for s in 0..2 {
            assert_eq!(eff.get(&InfoKey::raw(s)), plain.get(&InfoKey::raw(s)));
        }
    }

    #[test]
    fn effective_action_credits_oldest_buffered_action() {
        let mut q = QTable::new(2);
        let buf = [ActionId::new(1), ActionId::new(0), ActionId::new(0)];
        assert!(effective_action_update(&mut q, 0, &buf, 4.0, 0, true, 1.0, 0.9, DelayKind::Action, Some(2)).unwrap());
        assert_eq!(q.get(&InfoKey::raw(0)), &[0.0, 4.0]);
        assert!(!effective_action_update(&mut q, 0, &buf[..2], 4.0, 0, true, 1.0, 0.9, DelayKind::Action, Some(2)).unwrap());
    }

    #[test]
    fn effective_action_rejects_observation_delay() {
        let mut q = QTable::new(2);
        let r = effective_action_update(&mut q, 0, &[ActionId::new(0)], 0.0, 0, false, 0.1, 0.9, DelayKind::Observation, Some(0));
        assert!(matches!(r, Err(Error::Config(_))));
        let r = effective_action_update(&mut q, 0, &[ActionId::new(0)], 0.0, 0, false, 0.1, 0.9, DelayKind::Action, None);
        assert!(matches!(r, Err(Error::Config(_))));
        let cfg = AgentConfig::default();
        assert!(EffectiveActionAgent::new(2, &cfg, DelayKind::Action, &DelayProcess::Uniform { max: 3 }).is_err());
    }
}
