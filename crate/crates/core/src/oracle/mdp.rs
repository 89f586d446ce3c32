use std::fmt::Display;

use crate::error::{Error, Result};
use crate::scalar::Exact;

/// Fully enumerated MDP: dense `S x A x S` transition table, `S x A` reward
/// table and optional terminal flags (terminal states are absorbing with
/// zero reward).
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitMdp<T> {
    states: usize,
    actions: usize,
    transitions: Vec<T>,
    rewards: Vec<T>,
    terminal: Vec<bool>,
}

impl<T: Exact> ExplicitMdp<T> {
    pub fn new(states: usize, actions: usize) -> Self {
        Self {
            states,
            actions,
            transitions: vec![T::zero(); states * actions * states],
            rewards: vec![T::zero(); states * actions],
            terminal: vec![false; states],
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    fn t_index(&self, s: usize, a: usize, next: usize) -> usize {
        (s * self.actions + a) * self.states + next
    }

    pub fn transition(&self, s: usize, a: usize, next: usize) -> &T {
        &self.transitions[self.t_index(s, a, next)]
    }

    pub fn set_transition(&mut self, s: usize, a: usize, next: usize, p: T) {
        let i = self.t_index(s, a, next);
        self.transitions[i] = p;
    }

    pub fn add_transition(&mut self, s: usize, a: usize, next: usize, p: T) {
        let i = self.t_index(s, a, next);
        let cur = self.transitions[i].clone();
        self.transitions[i] = cur + p;
    }

    /// Row `p(. | s, a)`.
    pub fn row(&self, s: usize, a: usize) -> &[T] {
        let start = self.t_index(s, a, 0);
        &self.transitions[start..start + self.states]
    }

    /// Non-zero successors of `(s, a)`.
    pub fn successors(&self, s: usize, a: usize) -> impl Iterator<Item = (usize, &T)> {
        self.row(s, a)
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
    }

    pub fn reward(&self, s: usize, a: usize) -> &T {
        &self.rewards[s * self.actions + a]
    }

    pub fn set_reward(&mut self, s: usize, a: usize, r: T) {
        self.rewards[s * self.actions + a] = r;
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    /// Marks `s` terminal and makes it an absorbing zero-reward state.
    pub fn set_terminal(&mut self, s: usize) {
        self.terminal[s] = true;
        for a in 0..self.actions {
            for n in 0..self.states {
                self.set_transition(s, a, n, if n == s { T::one() } else { T::zero() });
            }
            self.set_reward(s, a, T::zero());
        }
    }

    /// Every row must be a probability vector (entries in [0, 1], sum within
    /// `tolerance` of 1).
    pub fn validate(&self, tolerance: &T) -> Result<()> {
        if self.states == 0 || self.actions == 0 {
            return Err(Error::InvalidMdp("empty state or action set".into()));
        }
        for s in 0..self.states {
            for a in 0..self.actions {
                let mut sum = T::zero();
                for (n, p) in self.row(s, a).iter().enumerate() {
                    if *p < T::zero() || *p > T::one() {
                        return Err(Error::InvalidMdp(format!(
                            "p({n} | {s}, {a}) = {p:?} is not a probability"
                        )));
                    }
                    sum = sum + p.clone();
                }
                if (sum.clone() - T::one()).abs() > *tolerance {
                    return Err(Error::InvalidMdp(format!(
                        "row ({s}, {a}) sums to {sum:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Converts every entry with `f`, e.g. rational to f64.
    pub fn map<U: Exact>(&self, f: impl Fn(&T) -> U) -> ExplicitMdp<U> {
        ExplicitMdp {
            states: self.states,
            actions: self.actions,
            transitions: self.transitions.iter().map(&f).collect(),
            rewards: self.rewards.iter().map(&f).collect(),
            terminal: self.terminal.clone(),
        }
    }

    /// Parses the text format: a `states actions` header, then
    /// `s a s' prob` transition lines, `s a r` reward lines and optional
    /// `terminal s` lines. `#` starts a comment. Numbers may be decimals or
    /// `num/den` fractions; decimals are read exactly.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, header) = lines
            .next()
            .ok_or_else(|| Error::parse("line 1", "missing `states actions` header"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(format!("line {ln}"), e.to_string()))?;
        let [states, actions] = dims[..] else {
            return Err(Error::parse(format!("line {ln}"), "header must be `states actions`"));
        };
        let mut mdp = Self::new(states, actions);
        let mut terminals = Vec::new();
        for (ln, line) in lines {
            let key = format!("line {ln}");
            let toks: Vec<&str> = line.split_whitespace().collect();
            let idx = |t: &str, bound: usize, what: &str| -> Result<usize> {
                let v: usize = t
                    .parse()
                    .map_err(|_| Error::parse(key.clone(), format!("bad {what} {t:?}")))?;
                if v >= bound {
                    return Err(Error::parse(key.clone(), format!("{what} {v} out of range")));
                }
                Ok(v)
            };
            match toks[..] {
                ["terminal", s] => terminals.push(idx(s, states, "state")?),
                [s, a, n, p] => {
                    let (s, a, n) = (idx(s, states, "state")?, idx(a, actions, "action")?, idx(n, states, "state")?);
                    mdp.set_transition(s, a, n, parse_number(p).ok_or_else(|| Error::parse(key.clone(), format!("bad probability {p:?}")))?);
                }
                [s, a, r] => {
                    let (s, a) = (idx(s, states, "state")?, idx(a, actions, "action")?);
                    mdp.set_reward(s, a, parse_number(r).ok_or_else(|| Error::parse(key.clone(), format!("bad reward {r:?}")))?);
                }
                _ => return Err(Error::parse(key, format!("unrecognised line {line:?}"))),
            }
        }
        for s in terminals {
            mdp.set_terminal(s);
        }
        Ok(mdp)
    }
}

impl<T: Exact + Display> ExplicitMdp<T> {
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.states, self.actions);
        for s in 0..self.states {
            for a in 0..self.actions {
                for (n, p) in self.successors(s, a) {
                    out.push_str(&format!("{s} {a} {n} {p}\n"));
                }
            }
        }
        for s in 0..self.states {
            for a in 0..self.actions {
                out.push_str(&format!("{s} {a} {}\n", self.reward(s, a)));
            }
        }
        for s in (0..self.states).filter(|&s| self.terminal[s]) {
            out.push_str(&format!("terminal {s}\n"));
        }
        out
    }
}

/// Reads `num/den`, or a plain decimal as the exact fraction it spells.
fn parse_number<T: Exact>(tok: &str) -> Option<T> {
    if let Some((n, d)) = tok.split_once('/') {
        let n = T::from_i64(n.trim().parse().ok()?)?;
        let d = T::from_i64(d.trim().parse().ok()?)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (neg, body) = match tok.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, tok.strip_prefix('+').unwrap_or(tok)),
    };
    let decimal = body.split_once('.').map_or(Some((body, "")), Some);
    let exact = decimal.and_then(|(int, frac)| {
        if int.is_empty() && frac.is_empty() {
            return None;
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 18 {
            return None;
        }
        let digits: String = format!("{int}{frac}");
        let mantissa = T::from_i128(digits.parse::<i128>().ok()?)?;
        let scale = T::from_i128(10i128.pow(frac.len() as u32))?;
        Some(mantissa / scale)
    });
    let value = match exact {
        Some(v) => v,
        None => T::from_f64(body.parse::<f64>().ok()?)?,
    };
    Some(if neg { -value } else { value })
}
