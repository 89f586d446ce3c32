use ndarray::{Array1, Array2, Zip};

use super::{Gradients, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adaptive-moment optimizer state, one moment pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    first: Vec<(Array2<T>, Array1<T>)>,
    second: Vec<(Array2<T>, Array1<T>)>,
    steps: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(net: &Mlp<T>, config: AdamConfig) -> Self {
        let zeros = || {
            net.layers()
                .iter()
                .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
                .collect::<Vec<_>>()
        };
        Self {
            config,
            first: zeros(),
            second: zeros(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn first_moments(&self) -> &[(Array2<T>, Array1<T>)] {
        &self.first
    }

    pub fn second_moments(&self) -> &[(Array2<T>, Array1<T>)] {
        &self.second
    }

    /// Applies one bias-corrected update. Non-finite gradients are refused
    /// and leave both the network and the optimizer untouched.
    pub fn step(&mut self, net: &mut Mlp<T>, grads: &Gradients<T>) -> Result<()> {
        if grads.layers.len() != self.first.len() {
            return Err(Error::Usage("gradient does not match optimizer shape".into()));
        }
        if !grads.is_finite() {
            return Err(Error::Training("non-finite gradient".into()));
        }
        self.steps += 1;
        let c = self.config;
        let b1 = T::of(c.beta1);
        let b2 = T::of(c.beta2);
        let one = T::one();
        let correction1 = one - T::of(c.beta1.powi(self.steps as i32));
        let correction2 = one - T::of(c.beta2.powi(self.steps as i32));
        let lr = T::of(c.learning_rate);
        let eps = T::of(c.epsilon);
        let update = |p: &mut T, g: &T, m: &mut T, v: &mut T| {
            *m = b1 * *m + (one - b1) * *g;
            *v = b2 * *v + (one - b2) * *g * *g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (((layer, g), (mw, mb)), (vw, vb)) in net
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(mw)
                .and(vw)
                .for_each(&update);
            Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(mb)
                .and(vb)
                .for_each(&update);
        }
        Ok(())
    }
}
