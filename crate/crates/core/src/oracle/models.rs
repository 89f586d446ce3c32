use crate::env::TwoState;
use crate::env::WMazeMap;
use crate::scalar::Exact;

use super::ExplicitMdp;

/// Explicit two-state chain. Rewards are expectations over the successor,
/// so `r(s, a) = p` for every pair.
pub fn two_state_mdp<T: Exact>(p: T) -> ExplicitMdp<T> {
    let mut mdp = ExplicitMdp::new(2, 2);
    for s in 0..2 {
        for a in 0..2 {
            let target = TwoState::target(a);
            let mut expected = T::zero();
            for next in 0..2 {
                let prob = if next == target { p.clone() } else { T::one() - p.clone() };
                if TwoState::reward(a, next) != 0.0 {
                    expected = expected + prob.clone();
                }
                mdp.set_transition(s, a, next, prob);
            }
            mdp.set_reward(s, a, expected);
        }
    }
    mdp
}

/// Deterministic W-Maze over every cell (walls included but unreachable);
/// goal cells are terminal.
pub fn wmaze_mdp<T: Exact>(map: &WMazeMap) -> ExplicitMdp<T> {
    let n = map.state_count();
    let mut mdp = ExplicitMdp::new(n, 4);
    for s in 0..n {
        for a in 0..4 {
            let next = map.successor(s, a);
            mdp.set_transition(s, a, next, T::one());
            mdp.set_reward(s, a, T::from_f64(map.reward(next)).expect("integer reward"));
        }
    }
    for g in map.goal_states() {
        mdp.set_terminal(g);
    }
    mdp
}
