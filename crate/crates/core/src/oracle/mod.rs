//! Exact dynamic programming over explicitly enumerated MDPs.

mod augment;
mod mdp;
mod models;
mod sdmdp;
mod solve;
mod two_state;

pub use augment::{build_augmented_mdp, AugmentedLayout};
pub use mdp::ExplicitMdp;
pub use models::{two_state_mdp, wmaze_mdp};
pub use sdmdp::{sdmdp_argmax_equivalence_check, sdmdp_policy_returns, SdmdpReport, MAX_BASE_STATES, MAX_POLICIES};
pub use solve::{
    average_reward, average_reward_stochastic, evaluate_policy, greedy_action, solve_linear, state_gains,
    value_iteration, ValueSolution,
};
pub use two_state::{composed_two_step_probability, two_state_delayed_objective, two_state_delayed_optimum};

use crate::env::WMazeMap;

/// Mean undiscounted return of the optimal policy from the start cells of
/// a deterministic W-Maze (shortest path to a goal).
pub fn wmaze_optimal_return(map: &WMazeMap) -> crate::Result<f64> {
    let mdp = wmaze_mdp::<f64>(map);
    let sol = value_iteration(&mdp, 0.999, 1e-9)?;
    let starts = map.start_states();
    let mut total = 0.0;
    for &s0 in &starts {
        let (mut s, mut ret, mut steps) = (s0, 0.0, 0);
        while !map.is_goal(s) {
            let next = map.successor(s, sol.policy[s]);
            ret += map.reward(next);
            s = next;
            steps += 1;
            if steps > map.state_count() {
                return Err(crate::Error::InvalidMdp(format!("no path to a goal from cell {s0}")));
            }
        }
        total += ret;
    }
    Ok(total / starts.len() as f64)
}
