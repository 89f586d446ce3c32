use crate::error::{Error, Result};
use crate::scalar::{Exact, Real};

use super::ExplicitMdp;

/// Optimal values, a greedy policy and the convergence trace of value
/// iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution<T> {
    pub values: Vec<T>,
    pub policy: Vec<usize>,
    /// Sup-norm Bellman residual `|TV - V|` of `values`.
    pub residual: T,
    /// `|V_{k+1} - V_k|` for every sweep performed.
    pub sweep_deltas: Vec<T>,
}

const MAX_SWEEPS: usize = 2_000_000;

fn row_tolerance<T: Real>() -> T {
    T::of(1e-12).max(T::epsilon() * T::of(16.0))
}

/// Greedy action with ties (within a few ulps of the best value) going
/// to the lowest index.
pub fn greedy_action<T: Real>(q: &[T]) -> usize {
    let best = q.iter().copied().fold(T::neg_infinity(), T::max);
    let slack = T::epsilon() * T::of(64.0) * best.abs().max(T::one());
    q.iter().position(|&v| v >= best - slack).unwrap_or(0)
}

struct Sparse<T> {
    rows: Vec<Vec<(usize, T)>>,
    rewards: Vec<T>,
}

impl<T: Real> Sparse<T> {
    fn new(mdp: &ExplicitMdp<T>) -> Self {
        let (n, m) = (mdp.states(), mdp.actions());
        let mut rows = Vec::with_capacity(n * m);
        let mut rewards = Vec::with_capacity(n * m);
        for s in 0..n {
            for a in 0..m {
                rows.push(mdp.successors(s, a).map(|(j, &p)| (j, p)).collect());
                rewards.push(*mdp.reward(s, a));
            }
        }
        Self { rows, rewards }
    }

    fn q(&self, mdp: &ExplicitMdp<T>, values: &[T], gamma: T, s: usize, out: &mut [T]) {
        for (a, q) in out.iter_mut().enumerate() {
            let k = s * mdp.actions() + a;
            let future = self.rows[k].iter().fold(T::zero(), |acc, &(j, p)| acc + p * values[j]);
            *q = self.rewards[k] + gamma * future;
        }
    }
}

/// Synchronous value iteration to a sup-norm Bellman residual of at most
/// `tolerance`. Terminal states are pinned at zero.
pub fn value_iteration<T: Real>(mdp: &ExplicitMdp<T>, gamma: T, tolerance: T) -> Result<ValueSolution<T>> {
    if !(gamma > T::zero() && gamma < T::one()) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(tolerance > T::zero()) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tolerance}")));
    }
    mdp.validate(&row_tolerance())?;
    let sparse = Sparse::new(mdp);
    let n = mdp.states();
    let mut values = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    let mut q = vec![T::zero(); mdp.actions()];
    let mut sweep_deltas = Vec::new();
    let sweep = |values: &[T], next: &mut [T], q: &mut [T]| -> T {
        let mut delta = T::zero();
        for s in 0..n {
            let v = if mdp.is_terminal(s) {
                T::zero()
            } else {
                sparse.q(mdp, values, gamma, s, q);
                q.iter().copied().fold(T::neg_infinity(), T::max)
            };
            delta = delta.max((v - values[s]).abs());
            next[s] = v;
        }
        delta
    };
    loop {
        let delta = sweep(&values, &mut next, &mut q);
        sweep_deltas.push(delta);
        std::mem::swap(&mut values, &mut next);
        if delta <= tolerance {
            break;
        }
        if sweep_deltas.len() >= MAX_SWEEPS || !delta.is_finite() {
            return Err(Error::Training(format!(
                "value iteration stalled at residual {delta} after {} sweeps",
                sweep_deltas.len()
            )));
        }
    }
    let residual = sweep(&values, &mut next, &mut q);
    let policy = (0..n)
        .map(|s| {
            sparse.q(mdp, &values, gamma, s, &mut q);
            if mdp.is_terminal(s) { 0 } else { greedy_action(&q) }
        })
        .collect();
    Ok(ValueSolution { values, policy, residual, sweep_deltas })
}

/// Solves `a x = b` by Gaussian elimination with largest-magnitude pivots.
pub fn solve_linear<T: Exact>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i][col]
                    .abs()
                    .partial_cmp(&a[j][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .filter(|&i| !a[i][col].is_zero())
            .ok_or_else(|| Error::InvalidMdp(format!("singular linear system at column {col}")))?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            if a[row][col].is_zero() {
                continue;
            }
            let factor = a[row][col].clone() / a[col][col].clone();
            for k in col..n {
                let delta = factor.clone() * a[col][k].clone();
                a[row][k] = a[row][k].clone() - delta;
            }
            let delta = factor * b[col].clone();
            b[row] = b[row].clone() - delta;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc = acc - a[row][k].clone() * x[k].clone();
        }
        x[row] = acc / a[row][row].clone();
    }
    Ok(x)
}

/// Discounted value of a deterministic policy by a direct linear solve.
pub fn evaluate_policy<T: Exact>(mdp: &ExplicitMdp<T>, policy: &[usize], gamma: T) -> Result<Vec<T>> {
    let n = mdp.states();
    check_policy(mdp, policy)?;
    let mut a = vec![vec![T::zero(); n]; n];
    let mut b = vec![T::zero(); n];
    for s in 0..n {
        a[s][s] = T::one();
        if mdp.is_terminal(s) {
            continue;
        }
        for (j, p) in mdp.successors(s, policy[s]) {
            a[s][j] = a[s][j].clone() - gamma.clone() * p.clone();
        }
        b[s] = mdp.reward(s, policy[s]).clone();
    }
    solve_linear(a, b)
}

fn check_policy<T: Exact>(mdp: &ExplicitMdp<T>, policy: &[usize]) -> Result<()> {
    if policy.len() != mdp.states() || policy.iter().any(|&a| a >= mdp.actions()) {
        return Err(Error::Usage(format!(
            "policy must assign one of {} actions to each of {} states",
            mdp.actions(),
            mdp.states()
        )));
    }
    Ok(())
}

/// Long-run average reward of a deterministic policy, averaged over a
/// uniform start state.
pub fn average_reward<T: Exact>(mdp: &ExplicitMdp<T>, policy: &[usize]) -> Result<T> {
    check_policy(mdp, policy)?;
    let dist: Vec<Vec<T>> = policy
        .iter()
        .map(|&a| (0..mdp.actions()).map(|b| if a == b { T::one() } else { T::zero() }).collect())
        .collect();
    average_reward_stochastic(mdp, &dist)
}

/// As [`average_reward`] for a stochastic policy `policy[s][a]`.
pub fn average_reward_stochastic<T: Exact>(mdp: &ExplicitMdp<T>, policy: &[Vec<T>]) -> Result<T> {
    let gains = state_gains(mdp, policy)?;
    let n = T::from_usize(gains.len()).expect("state count fits");
    Ok(gains.into_iter().fold(T::zero(), |acc, g| acc + g) / n)
}

/// Long-run average reward from every start state. Each closed class gets
/// its stationary distribution from a linear solve; transient states
/// inherit the absorption-weighted gains of the classes they drain into.
/// Multichain and periodic chains are handled exactly, which is the
/// Cesaro limit.
pub fn state_gains<T: Exact>(mdp: &ExplicitMdp<T>, policy: &[Vec<T>]) -> Result<Vec<T>> {
    let n = mdp.states();
    if policy.len() != n || policy.iter().any(|d| d.len() != mdp.actions()) {
        return Err(Error::Usage("policy shape does not match the MDP".into()));
    }
    let mut chain = vec![vec![T::zero(); n]; n];
    let mut reward = vec![T::zero(); n];
    for s in 0..n {
        for (a, w) in policy[s].iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            reward[s] = reward[s].clone() + w.clone() * mdp.reward(s, a).clone();
            for (j, p) in mdp.successors(s, a) {
                chain[s][j] = chain[s][j].clone() + w.clone() * p.clone();
            }
        }
    }
    let edges: Vec<Vec<usize>> = chain
        .iter()
        .map(|row| (0..n).filter(|&j| !row[j].is_zero()).collect())
        .collect();
    let reach: Vec<Vec<bool>> = (0..n).map(|s| reachable(&edges, s)).collect();
    let recurrent: Vec<bool> = (0..n).map(|i| (0..n).all(|j| !reach[i][j] || reach[j][i])).collect();

    let mut gain: Vec<Option<T>> = vec![None; n];
    for i in 0..n {
        if !recurrent[i] || gain[i].is_some() {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&j| reach[i][j]).collect();
        let m = class.len();
        // pi (P_C - I) = 0 with the last balance equation swapped for sum pi = 1.
        let mut a = vec![vec![T::zero(); m]; m];
        let mut b = vec![T::zero(); m];
        for (row, &j) in class.iter().enumerate().take(m - 1) {
            for (col, &k) in class.iter().enumerate() {
                a[row][col] = chain[k][j].clone() - if k == j { T::one() } else { T::zero() };
            }
        }
        a[m - 1] = vec![T::one(); m];
        b[m - 1] = T::one();
        let pi = solve_linear(a, b)?;
        let g = class
            .iter()
            .zip(&pi)
            .fold(T::zero(), |acc, (&j, w)| acc + w.clone() * reward[j].clone());
        for &j in &class {
            gain[j] = Some(g.clone());
        }
    }

    let transient: Vec<usize> = (0..n).filter(|&i| !recurrent[i]).collect();
    if !transient.is_empty() {
        let t = transient.len();
        let pos = |s: usize| transient.iter().position(|&x| x == s);
        let mut a = vec![vec![T::zero(); t]; t];
        let mut b = vec![T::zero(); t];
        for (row, &s) in transient.iter().enumerate() {
            a[row][row] = T::one();
            for &j in &edges[s] {
                match pos(j) {
                    Some(col) => a[row][col] = a[row][col].clone() - chain[s][j].clone(),
                    None => {
                        let g = gain[j].clone().expect("recurrent gain computed");
                        b[row] = b[row].clone() + chain[s][j].clone() * g;
                    }
                }
            }
        }
        for (&s, g) in transient.iter().zip(solve_linear(a, b)?) {
            gain[s] = Some(g);
        }
    }
    Ok(gain.into_iter().map(|g| g.expect("every state classified")).collect())
}

fn reachable(edges: &[Vec<usize>], from: usize) -> Vec<bool> {
    let mut seen = vec![false; edges.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(s) = stack.pop() {
        for &j in &edges[s] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::two_state_mdp;
    use crate::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn single_state_geometric_series() {
        let mdp = ExplicitMdp::<f64>::parse("1 1\n0 0 0 1\n0 0 1\n").unwrap();
        let sol = value_iteration(&mdp, 0.9, 1e-10).unwrap();
        assert!((sol.values[0] - 10.0).abs() < 1e-8);
        assert!(sol.residual <= 1e-10);
    }

    #[test]
    fn zero_reward_ties_to_action_zero() {
        let mdp = two_state_mdp(0.7f64).map(|_| 0.0);
        let mut mdp = mdp;
        for s in 0..2 {
            for a in 0..2 {
                mdp.set_transition(s, a, s, 1.0);
                mdp.set_transition(s, a, 1 - s, 0.0);
            }
        }
        let sol = value_iteration(&mdp, 0.9, 1e-12).unwrap();
        assert_eq!(sol.values, vec![0.0, 0.0]);
        assert_eq!(sol.policy, vec![0, 0]);
    }

    #[test]
    fn bad_inputs() {
        let mdp = two_state_mdp(0.7f64);
        assert!(matches!(value_iteration(&mdp, 1.0, 1e-9), Err(Error::Domain(_))));
        assert!(matches!(value_iteration(&mdp, 0.9, 0.0), Err(Error::Domain(_))));
        let mut broken = mdp.clone();
        broken.set_transition(0, 0, 0, 0.9);
        assert!(matches!(value_iteration(&broken, 0.9, 1e-9), Err(Error::InvalidMdp(_))));
    }

    #[test]
    fn linear_solver_exact() {
        let a = vec![vec![q(2, 1), q(1, 1)], vec![q(1, 1), q(3, 1)]];
        let x = solve_linear(a, vec![q(3, 1), q(5, 1)]).unwrap();
        assert_eq!(x, vec![q(4, 5), q(7, 5)]);
        assert!(solve_linear(vec![vec![q(0, 1)]], vec![q(1, 1)]).is_err());
    }

    #[test]
    fn policy_evaluation_matches_value_iteration() {
        let mdp = two_state_mdp(0.8f64);
        let sol = value_iteration(&mdp, 0.9, 1e-12).unwrap();
        let v = evaluate_policy(&mdp, &sol.policy, 0.9).unwrap();
        for (a, b) in v.iter().zip(&sol.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn multichain_gain_is_cesaro_limit() {
        // 0 -> {1 w.p. 1/2, 2 w.p. 1/2}; 1 and 2 absorbing with rewards 1 and 3.
        let mdp = ExplicitMdp::<Rational>::parse(
            "3 1\n0 0 1 1/2\n0 0 2 1/2\n1 0 1 1\n2 0 2 1\n1 0 1\n2 0 3\n",
        )
        .unwrap();
        let dist = vec![vec![q(1, 1)]; 3];
        assert_eq!(state_gains(&mdp, &dist).unwrap(), vec![q(2, 1), q(1, 1), q(3, 1)]);
        assert_eq!(average_reward(&mdp, &[0, 0, 0]).unwrap(), q(2, 1));
    }

    #[test]
    fn periodic_chain() {
        let mdp = ExplicitMdp::<Rational>::parse("2 1\n0 0 1 1\n1 0 0 1\n0 0 1\n").unwrap();
        assert_eq!(average_reward(&mdp, &[0, 0]).unwrap(), q(1, 2));
    }
}
