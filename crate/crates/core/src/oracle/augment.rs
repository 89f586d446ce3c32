use std::collections::VecDeque;

use crate::delay::DelayKind;
use crate::error::{Error, Result};
use crate::scalar::Exact;

use super::ExplicitMdp;

/// Index arithmetic for augmented states `(s, a_1, ..., a_d)`, `a_1` oldest.
/// Index is `s * A^d + sum a_i A^(d-i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentedLayout {
    pub base_states: usize,
    pub actions: usize,
    pub delay: usize,
}

impl AugmentedLayout {
    pub fn new(base_states: usize, actions: usize, delay: usize) -> Result<Self> {
        let size = actions
            .checked_pow(delay as u32)
            .and_then(|b| b.checked_mul(base_states))
            .filter(|&n| n <= 1 << 20)
            .ok_or_else(|| {
                Error::Config(format!(
                    "augmented state space {base_states} x {actions}^{delay} exceeds 2^20 states"
                ))
            })?;
        debug_assert!(size > 0 || base_states == 0);
        Ok(Self { base_states, actions, delay })
    }

    pub fn buffers(&self) -> usize {
        self.actions.pow(self.delay as u32)
    }

    pub fn len(&self) -> usize {
        self.base_states * self.buffers()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, state: usize, buffer: &[usize]) -> usize {
        debug_assert_eq!(buffer.len(), self.delay);
        buffer
            .iter()
            .fold(state, |acc, &a| acc * self.actions + a)
    }

    pub fn decode(&self, mut index: usize) -> (usize, Vec<usize>) {
        let mut buffer = vec![0; self.delay];
        for slot in buffer.iter_mut().rev() {
            *slot = index % self.actions;
            index /= self.actions;
        }
        (index, buffer)
    }
}

/// Builds the undelayed MDP over `S x A^d` equivalent to delaying `base`
/// by a constant `d` on the given channel. Taking `a` in `(s, a_1..a_d)`
/// moves the base state by `a_1`, yields `r(s, a_1)` and shifts the
/// buffer to `(a_2..a_d, a)`. The two channels are built by separate
/// routes so that comparing them is a meaningful check.
pub fn build_augmented_mdp<T: Exact>(
    base: &ExplicitMdp<T>,
    delay: usize,
    kind: DelayKind,
) -> Result<(ExplicitMdp<T>, AugmentedLayout)> {
    let layout = AugmentedLayout::new(base.states(), base.actions(), delay)?;
    if delay == 0 {
        return Ok((base.clone(), layout));
    }
    let aug = match kind {
        DelayKind::Observation => observation_route(base, &layout),
        DelayKind::Action => action_route(base, &layout),
    };
    Ok((aug, layout))
}

// Observation delay: the state is the last observed base state plus the
// actions taken since. The next observation resolves the oldest action.
fn observation_route<T: Exact>(base: &ExplicitMdp<T>, layout: &AugmentedLayout) -> ExplicitMdp<T> {
    let mut aug = ExplicitMdp::new(layout.len(), base.actions());
    let mut terminals = Vec::new();
    for i in 0..layout.len() {
        let (observed, since) = layout.decode(i);
        if base.is_terminal(observed) {
            terminals.push(i);
            continue;
        }
        let resolving = since[0];
        for a in 0..base.actions() {
            let mut next_since = since[1..].to_vec();
            next_since.push(a);
            for (next, p) in base.successors(observed, resolving) {
                aug.add_transition(i, a, layout.index(next, &next_since), p.clone());
            }
            aug.set_reward(i, a, base.reward(observed, resolving).clone());
        }
    }
    for i in terminals {
        aug.set_terminal(i);
    }
    aug
}

// Action delay: the state is the current base state plus the queue of
// in-flight actions. Each step enqueues the new action and applies the
// one at the head.
fn action_route<T: Exact>(base: &ExplicitMdp<T>, layout: &AugmentedLayout) -> ExplicitMdp<T> {
    let mut aug = ExplicitMdp::new(layout.len(), base.actions());
    for s in 0..base.states() {
        for code in 0..layout.buffers() {
            let (_, queue) = layout.decode(code);
            let i = layout.index(s, &queue);
            if base.is_terminal(s) {
                aug.set_terminal(i);
                continue;
            }
            for a in 0..base.actions() {
                let mut in_flight: VecDeque<usize> = queue.iter().copied().collect();
                in_flight.push_back(a);
                let applied = in_flight.pop_front().expect("queue holds d+1 actions");
                let remaining: Vec<usize> = in_flight.into_iter().collect();
                for next in 0..base.states() {
                    let p = base.transition(s, applied, next);
                    if p.is_zero() {
                        continue;
                    }
                    aug.add_transition(i, a, layout.index(next, &remaining), p.clone());
                }
                aug.set_reward(i, a, base.reward(s, applied).clone());
            }
        }
    }
    aug
}
