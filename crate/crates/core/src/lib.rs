//! Delay-resolved reinforcement learning.
//!
//! Environments with constant or stochastic observation/action delays are
//! turned into undelayed problems over information states (last observed
//! state plus the buffer of pending actions). The crate provides the
//! environments, the delay wrappers, a small from-scratch neural network,
//! tabular and DQN agents, exact dynamic-programming oracles over augmented
//! MDPs, and a config-driven experiment harness.

pub mod agents;
pub mod delay;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod oracle;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Exact, Real};

use num_bigint::BigInt;
use num_rational::Ratio;

/// Arbitrary-precision rational used for exact oracle arithmetic.
pub type Rational = Ratio<BigInt>;

pub type Mlp64 = nn::Mlp<f64>;
pub type Mlp32 = nn::Mlp<f32>;
pub type Adam64 = nn::Adam<f64>;
pub type ExplicitMdp64 = oracle::ExplicitMdp<f64>;
pub type ExactMdp = oracle::ExplicitMdp<Rational>;
pub type DqnAgent64 = agents::DqnAgent<f64>;
