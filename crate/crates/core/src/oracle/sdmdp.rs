use crate::error::{Error, Result};
use crate::scalar::Exact;

use super::solve::solve_linear;
use super::ExplicitMdp;

pub const MAX_BASE_STATES: usize = 4;
pub const MAX_POLICIES: usize = 1 << 16;

/// Discounted returns of every deterministic policy over the information
/// states of a stochastic-delay MDP with observation delays in `{0, 1}`.
#[derive(Debug, Clone)]
pub struct SdmdpReport<T> {
    /// Return with the reward `r(s_t, a_t)` counted at step `t`.
    pub original: Vec<T>,
    /// Return with each reward counted when its observation is released.
    pub modified: Vec<T>,
    pub info_states: usize,
}

impl<T: Exact> SdmdpReport<T> {
    /// Indices of policies within `tolerance` (relative to the best) of the
    /// best value.
    pub fn argmax_set(values: &[T], tolerance: &T) -> Vec<usize> {
        let best = values.iter().cloned().reduce(|a, b| if b > a { b } else { a }).expect("non-empty");
        let slack = tolerance.clone() * if best.abs() > T::one() { best.abs() } else { T::one() };
        (0..values.len()).filter(|&i| best.clone() - values[i].clone() <= slack).collect()
    }

    pub fn argmax_sets_coincide(&self, tolerance: &T) -> bool {
        Self::argmax_set(&self.original, tolerance) == Self::argmax_set(&self.modified, tolerance)
    }
}

/// Enumerates all deterministic policies over information states
/// `(s, [])` and `(s_prev, [a_prev])` and evaluates both reward timings by
/// exact expectation over the delay. `delay[k]` is `P(D = k)`. The start
/// state is uniform and observed without delay.
pub fn sdmdp_policy_returns<T: Exact>(base: &ExplicitMdp<T>, delay: &[T], gamma: &T) -> Result<SdmdpReport<T>> {
    let (s_n, a_n) = (base.states(), base.actions());
    if s_n > MAX_BASE_STATES {
        return Err(Error::Config(format!(
            "exhaustive check is limited to {MAX_BASE_STATES} base states, got {s_n}"
        )));
    }
    if delay.is_empty() || delay.len() > 2 {
        return Err(Error::Config(format!(
            "delay support must lie in {{0, 1}}, got {} values",
            delay.len()
        )));
    }
    if delay.iter().any(|p| *p < T::zero()) || (delay.iter().cloned().fold(T::zero(), |a, b| a + b) - T::one()).abs() > T::from_f64(1e-12).unwrap() {
        return Err(Error::Config("delay distribution must be a probability vector".into()));
    }
    if !(*gamma > T::zero() && *gamma < T::one()) {
        return Err(Error::Domain("gamma must lie in (0, 1)".into()));
    }
    if (0..s_n).any(|s| base.is_terminal(s)) {
        return Err(Error::Config("exhaustive check needs a continuing MDP".into()));
    }
    base.validate(&T::from_f64(1e-12).unwrap())?;
    let info_states = s_n + s_n * a_n;
    let policies = (a_n as u128).checked_pow(info_states as u32).filter(|&n| n <= MAX_POLICIES as u128).ok_or_else(|| {
        Error::Config(format!(
            "{a_n}^{info_states} policies exceed the enumeration bound {MAX_POLICIES}"
        ))
    })? as usize;

    let p0 = delay[0].clone();
    let p1 = delay.get(1).cloned().unwrap_or_else(T::zero);
    let chain_len = s_n + s_n * s_n * a_n;
    let delayed = |s: usize, prev: usize, a: usize| s_n + (s * s_n + prev) * a_n + a;
    // (current state, pending (state, action) if the last observation is late)
    let decode = |x: usize| -> (usize, Option<(usize, usize)>) {
        if x < s_n {
            (x, None)
        } else {
            let y = x - s_n;
            (y / (s_n * a_n), Some(((y / a_n) % s_n, y % a_n)))
        }
    };
    let info_of = |x: usize| match decode(x) {
        (s, None) => s,
        (_, Some((prev, a))) => s_n + prev * a_n + a,
    };

    let start_weight = T::one() / T::from_usize(s_n).unwrap();
    let mut original = Vec::with_capacity(policies);
    let mut modified = Vec::with_capacity(policies);
    for code in 0..policies {
        let action = |info: usize| (code / a_n.pow(info as u32)) % a_n;
        let mut lhs = vec![vec![T::zero(); chain_len]; chain_len];
        let mut r_orig = vec![T::zero(); chain_len];
        let mut r_mod = vec![T::zero(); chain_len];
        for x in 0..chain_len {
            let (s, pending) = decode(x);
            let a = action(info_of(x));
            lhs[x][x] = T::one();
            for (next, p) in base.successors(s, a) {
                let now = gamma.clone() * p.clone();
                lhs[x][next] = lhs[x][next].clone() - now.clone() * p0.clone();
                let late = delayed(next, s, a);
                lhs[x][late] = lhs[x][late].clone() - now * p1.clone();
            }
            let r = base.reward(s, a).clone();
            r_orig[x] = r.clone();
            r_mod[x] = p0.clone() * r;
            if let Some((prev, pa)) = pending {
                r_mod[x] = r_mod[x].clone() + base.reward(prev, pa).clone();
            }
        }
        let v = solve_linear(lhs.clone(), r_orig)?;
        let w = solve_linear(lhs, r_mod)?;
        let start = |vals: &[T]| vals[..s_n].iter().fold(T::zero(), |acc, v| acc + v.clone()) * start_weight.clone();
        original.push(start(&v));
        modified.push(start(&w));
    }
    Ok(SdmdpReport { original, modified, info_states })
}

/// True iff the policies maximising the return under both reward timings
/// are the same set (ties within a relative `1e-9`).
pub fn sdmdp_argmax_equivalence_check<T: Exact>(base: &ExplicitMdp<T>, delay: &[T], gamma: &T) -> Result<bool> {
    let report = sdmdp_policy_returns(base, delay, gamma)?;
    Ok(report.argmax_sets_coincide(&T::from_f64(1e-9).unwrap()))
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
    fn undelayed_timings_coincide() {
        let base = two_state_mdp(q(4, 5));
        let report = sdmdp_policy_returns(&base, &[q(1, 1)], &q(9, 10)).unwrap();
        assert_eq!(report.original, report.modified);
        assert_eq!(report.info_states, 6);
        assert_eq!(report.original.len(), 64);
    }

    #[test]
    fn release_timing_scales_by_expected_discount() {
        let base = two_state_mdp(q(3, 5));
        let delay = [q(3, 10), q(7, 10)];
        let gamma = q(19, 20);
        let report = sdmdp_policy_returns(&base, &delay, &gamma).unwrap();
        let factor = delay[0].clone() + delay[1].clone() * gamma.clone();
        for (v, w) in report.original.iter().zip(&report.modified) {
            assert_eq!(w.clone(), v.clone() * factor.clone());
        }
    }

    #[test]
    fn refuses_large_inputs() {
        let big = ExplicitMdp::<f64>::parse("5 1\n0 0 0 1\n1 0 1 1\n2 0 2 1\n3 0 3 1\n4 0 4 1\n").unwrap();
        assert!(matches!(sdmdp_policy_returns(&big, &[1.0], &0.9), Err(Error::Config(_))));
        let base = two_state_mdp(0.8f64);
        assert!(sdmdp_policy_returns(&base, &[0.5, 0.25, 0.25], &0.9).is_err());
        assert!(sdmdp_policy_returns(&base, &[0.5, 0.4], &0.9).is_err());
    }
}
