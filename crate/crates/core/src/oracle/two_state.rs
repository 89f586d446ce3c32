use crate::error::{Error, Result};
use crate::scalar::{Exact, Real};

use super::{AugmentedLayout, ExplicitMdp};

/// Per-step reward of the symmetric one-step-delayed policy that plays
/// action 0 with probability `q` in state 0 (and action 1 with
/// probability `q` in state 1): `(1 - q) + 2p(1 - p)(2q - 1)`.
pub fn two_state_delayed_objective<T: Real>(p: T, q: T) -> T {
    let two = T::of(2.0);
    (T::one() - q) + two * p * (T::one() - p) * (two * q - T::one())
}

/// Maximum of [`two_state_delayed_objective`] over `q` in `[0, 1]`. The
/// objective is affine in `q`, so the maximum sits at an endpoint.
pub fn two_state_delayed_optimum<T: Real>(p: T) -> Result<T> {
    if !(p >= T::of(0.5) && p <= T::one()) {
        return Err(Error::Domain(format!("p must lie in [0.5, 1], got {p}")));
    }
    Ok(two_state_delayed_objective(p, T::zero()).max(two_state_delayed_objective(p, T::one())))
}

/// Two-step probability of reaching state 1 from state 0 after action 0,
/// composed on the one-step-delayed augmented chain. The second action is
/// drawn from the symmetric policy with parameter `q`, conditioned on the
/// intermediate base state.
pub fn composed_two_step_probability<T: Exact>(aug: &ExplicitMdp<T>, layout: &AugmentedLayout, q: &T) -> T {
    debug_assert_eq!((layout.base_states, layout.actions, layout.delay), (2, 2, 1));
    let weight = |state: usize, action: usize| -> T {
        let stay = if state == 0 { q.clone() } else { T::one() - q.clone() };
        if action == 0 { stay } else { T::one() - stay }
    };
    let start = layout.index(0, &[0]);
    let mut total = T::zero();
    for mid in 0..2 {
        for a in 0..2 {
            let via = layout.index(mid, &[a]);
            let first = aug.transition(start, a, via).clone();
            if first.is_zero() {
                continue;
            }
            let second = (0..2).fold(T::zero(), |acc, b| {
                acc + aug.transition(via, 0, layout.index(1, &[b])).clone()
            });
            total = total + weight(mid, a) * first * second;
        }
    }
    total
}
