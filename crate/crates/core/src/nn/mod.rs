//! Feed-forward network with manual backpropagation and an Adam optimizer.
//!
//! Hidden layers use the rectifier, the output layer is linear. Everything is
//! generic over [`Real`] so the same code runs in f32 or f64; training uses
//! f64.

mod adam;
mod checkpoint;

pub use adam::{Adam, AdamConfig};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::env::EnvRng;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    /// `out x in`.
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Layer<T> {
    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Layer<T>>,
    version: u64,
}

/// Activations retained by [`Mlp::forward_batch`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// Input to each layer (the network input, then hidden activations).
    inputs: Vec<Array2<T>>,
    /// Pre-activation of each hidden layer.
    pre_activations: Vec<Array2<T>>,
    version: u64,
}

/// Gradients with the same shapes as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Layer<T>>,
    /// Gradient with respect to the batch input.
    pub input: Array2<T>,
}

impl<T: Real> Gradients<T> {
    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

impl<T: Real> Mlp<T> {
    /// Layer sizes `[input, hidden..., output]`, weights drawn uniformly from
    /// `±sqrt(6 / (in + out))`, biases zero.
    pub fn new(sizes: &[usize], rng: &mut EnvRng) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (inp, out) = (w[0], w[1]);
                let limit = (6.0 / (inp + out) as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_simple_fn((out, inp), || {
                        T::of(rng.random_range(-limit..limit))
                    }),
                    bias: Array1::zeros(out),
                }
            })
            .collect();
        Self { layers, version: 0 }
    }

    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Invariant("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::Invariant(format!("layer {i}: bias length mismatch")));
            }
            if !l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::Invariant(format!("layer {i}: non-finite parameter")));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Invariant(format!(
                    "layer {} outputs {} but layer {} expects {}",
                    i,
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers, version: 0 })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Bumped whenever parameters change; caches from older versions are rejected.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        self.version += 1;
        &mut self.layers
    }

    /// Overwrites parameters with those of `other` (same topology).
    pub fn copy_from(&mut self, other: &Mlp<T>) {
        assert_eq!(self.layers.len(), other.layers.len());
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            dst.weights.assign(&src.weights);
            dst.bias.assign(&src.bias);
        }
        self.version += 1;
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::Usage(format!(
                "input has {cols} features, network expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Outputs for a batch (`rows x input_dim`) without keeping activations.
    pub fn predict_batch(&self, input: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_input(input.ncols())?;
        let last = self.layers.len() - 1;
        let mut act = input.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = act.dot(&layer.weights.t());
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(relu);
            }
            act = z;
        }
        Ok(act)
    }

    pub fn predict(&self, input: &[T]) -> Result<Vec<T>> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Usage(e.to_string()))?;
        Ok(self.predict_batch(view)?.into_raw_vec_and_offset().0)
    }

    pub fn forward_batch(&self, input: ArrayView2<T>) -> Result<(Array2<T>, ForwardCache<T>)> {
        self.check_input(input.ncols())?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(last);
        let mut act = input.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = act.dot(&layer.weights.t());
            z += &layer.bias;
            inputs.push(act);
            if i < last {
                let h = z.mapv(relu);
                pre_activations.push(z);
                act = h;
            } else {
                act = z;
            }
        }
        Ok((
            act,
            ForwardCache {
                inputs,
                pre_activations,
                version: self.version,
            },
        ))
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[T]) -> Result<(Vec<T>, ForwardCache<T>)> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Usage(e.to_string()))?;
        let (out, cache) = self.forward_batch(view)?;
        Ok((out.into_raw_vec_and_offset().0, cache))
    }

    /// Gradients of a scalar loss whose gradient with respect to the batch
    /// output is `output_grad`. Parameter gradients are summed over the batch.
    pub fn backward(&self, cache: &ForwardCache<T>, output_grad: ArrayView2<T>) -> Result<Gradients<T>> {
        if cache.version != self.version || cache.inputs.len() != self.layers.len() {
            return Err(Error::Usage("forward cache does not belong to this network state".into()));
        }
        let batch = cache.inputs[0].nrows();
        if output_grad.dim() != (batch, self.output_dim()) {
            return Err(Error::Usage(format!(
                "output gradient has shape {:?}, expected {:?}",
                output_grad.dim(),
                (batch, self.output_dim())
            )));
        }
        let mut grads: Vec<Layer<T>> = Vec::with_capacity(self.layers.len());
        let mut delta = output_grad.to_owned();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let weights = delta.t().dot(&cache.inputs[i]);
            let bias = delta.sum_axis(Axis(0));
            let mut upstream = delta.dot(&layer.weights);
            if i > 0 {
                ndarray::Zip::from(&mut upstream)
                    .and(&cache.pre_activations[i - 1])
                    .for_each(|g, &z| {
                        if z <= T::zero() {
                            *g = T::zero();
                        }
                    });
            }
            grads.push(Layer { weights, bias });
            delta = upstream;
        }
        grads.reverse();
        Ok(Gradients {
            layers: grads,
            input: delta,
        })
    }
}

fn relu<T: Real>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        T::zero()
    }
}
