//! Fully connected networks with exact input and parameter derivatives.
//!
//! A network maps `R^d -> R` through hidden layers `a = act(W a + b)` and a
//! linear output layer. [`tape`] evaluates batches together with the input
//! gradient and the diagonal of the input Hessian, and back-propagates any
//! scalar loss built from those quantities to the parameters.

mod checkpoint;
pub mod tape;

use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lowdisc::samplers::rng;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use tape::{
    input_derivatives, loss_gradient, predict, BatchOutput, DerivativeBundle, LossParts, Order, Seeds, Tape,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    /// `(f, f', f'', f''')` at `z`.
    #[inline]
    pub fn derivatives(self, z: f64) -> (f64, f64, f64, f64) {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                let s = 1.0 - t * t;
                (t, s, -2.0 * t * s, (6.0 * t * t - 2.0) * s)
            }
            Activation::Sigmoid => {
                let y = 1.0 / (1.0 + (-z).exp());
                let s = y * (1.0 - y);
                (y, s, s * (1.0 - 2.0 * y), s * (1.0 - 6.0 * y + 6.0 * y * y))
            }
        }
    }

    #[inline]
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    /// Hidden layer widths; the scalar output layer is implicit and linear.
    pub widths: Vec<usize>,
    pub activation: Activation,
}

impl Architecture {
    pub fn new(input_dim: usize, widths: Vec<usize>, activation: Activation) -> Result<Self> {
        let arch = Self { input_dim, widths, activation };
        arch.validate()?;
        Ok(arch)
    }

    /// `depth` hidden layers of `width` neurons ("40 x 4" is width 40, depth 4).
    pub fn uniform(input_dim: usize, width: usize, depth: usize, activation: Activation) -> Result<Self> {
        Self::new(input_dim, vec![width; depth], activation)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("network input dimension must be positive"));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::invalid("hidden widths must be a non-empty list of positive integers"));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every affine layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut fan_in = self.input_dim;
        let mut out = Vec::with_capacity(self.widths.len() + 1);
        for &w in self.widths.iter().chain(std::iter::once(&1)) {
            out.push((fan_in, w));
            fan_in = w;
        }
        out
    }

    pub fn num_weights(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| o * i + o).sum()
    }
}

/// Network weights and biases followed by named trainable scalars, stored in
/// one flat vector so optimisers can treat them uniformly.
///
/// Layout: for each layer in order, the weight matrix `W` (`fan_out x fan_in`,
/// row-major) then the bias `b` (`fan_out`); after the last layer, one entry
/// per trainable scalar in `scalar_names` order.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParameters {
    arch: Architecture,
    offsets: Vec<usize>,
    values: Vec<f64>,
    scalar_names: Vec<String>,
}

impl NetworkParameters {
    pub fn zeros(arch: &Architecture) -> Self {
        let mut offsets = Vec::new();
        let mut at = 0;
        for (i, o) in arch.layer_shapes() {
            offsets.push(at);
            at += o * i + o;
        }
        Self {
            arch: arch.clone(),
            offsets,
            values: vec![0.0; at],
            scalar_names: Vec::new(),
        }
    }

    /// Zero-filled parameters with the same layout as `self`.
    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        }
    }

    pub fn from_flat(arch: &Architecture, values: Vec<f64>, scalar_names: Vec<String>) -> Result<Self> {
        let mut p = Self::zeros(arch);
        if values.len() != p.values.len() + scalar_names.len() {
            return Err(Error::invalid(format!(
                "expected {} parameter values, got {}",
                p.values.len() + scalar_names.len(),
                values.len()
            )));
        }
        p.values = values;
        p.scalar_names = scalar_names;
        Ok(p)
    }

    /// Appends a trainable scalar.
    pub fn with_scalar(mut self, name: &str, value: f64) -> Self {
        assert!(self.scalar_index(name).is_none(), "duplicate scalar `{name}`");
        self.scalar_names.push(name.to_string());
        self.values.push(value);
        self
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn num_layers(&self) -> usize {
        self.offsets.len()
    }

    pub fn layer(&self, l: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (fan_in, fan_out) = self.arch.layer_shapes()[l];
        let start = self.offsets[l];
        let w = &self.values[start..start + fan_in * fan_out];
        let b = &self.values[start + fan_in * fan_out..start + fan_in * fan_out + fan_out];
        (
            ArrayView2::from_shape((fan_out, fan_in), w).expect("layer layout"),
            ArrayView1::from(b),
        )
    }

    /// Mutable `(W, b)` slices of layer `l`.
    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (fan_in, fan_out) = self.arch.layer_shapes()[l];
        let start = self.offsets[l];
        let (w, rest) = self.values[start..].split_at_mut(fan_in * fan_out);
        (w, &mut rest[..fan_out])
    }

    pub fn num_network_values(&self) -> usize {
        self.values.len() - self.scalar_names.len()
    }

    pub fn scalar_names(&self) -> &[String] {
        &self.scalar_names
    }

    fn scalar_index(&self, name: &str) -> Option<usize> {
        self.scalar_names.iter().position(|n| n == name)
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalar_index(name).map(|i| self.values[self.num_network_values() + i])
    }

    pub fn scalars(&self) -> &[f64] {
        &self.values[self.num_network_values()..]
    }

    pub fn scalars_mut(&mut self) -> &mut [f64] {
        let n = self.num_network_values();
        &mut self.values[n..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Xavier-uniform weights (`|w| <= sqrt(6 / (fan_in + fan_out))`), zero biases.
pub fn init_xavier(arch: &Architecture, seed: u64) -> NetworkParameters {
    let mut params = NetworkParameters::zeros(arch);
    let mut rng = rng(seed);
    for (l, (fan_in, fan_out)) in arch.layer_shapes().into_iter().enumerate() {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let (w, _) = params.layer_mut(l);
        for v in w {
            *v = rng.random_range(-bound..=bound);
        }
    }
    params
}

/// Network output at a single point.
pub fn forward(params: &NetworkParameters, x: &[f64]) -> f64 {
    let act = params.arch.activation;
    let last = params.num_layers() - 1;
    let mut a = x.to_vec();
    for l in 0..=last {
        let (w, b) = params.layer(l);
        let mut z: Vec<f64> = w.rows().into_iter().zip(b).map(|(row, bi)| row.dot(&ArrayView1::from(&a[..])) + bi).collect();
        if l < last {
            z.iter_mut().for_each(|v| *v = act.value(*v));
        }
        a = z;
    }
    a[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xavier_support_and_determinism() {
        let arch = Architecture::uniform(2, 40, 4, Activation::Tanh).unwrap();
        let p = init_xavier(&arch, 100);
        assert_eq!(p, init_xavier(&arch, 100));
        assert_ne!(p, init_xavier(&arch, 101));
        for (l, (fan_in, fan_out)) in arch.layer_shapes().into_iter().enumerate() {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let (w, b) = p.layer(l);
            assert!(w.iter().all(|v| v.abs() <= bound));
            assert!(b.iter().all(|&v| v == 0.0));
        }
        assert_eq!(p.as_slice().len(), arch.num_weights());
    }

    #[test]
    fn zero_network_is_zero() {
        let arch = Architecture::uniform(3, 5, 2, Activation::Sigmoid).unwrap();
        let p = NetworkParameters::zeros(&arch);
        assert_eq!(forward(&p, &[0.3, -1.0, 2.0]), 0.0);
    }

    #[test]
    fn single_tanh_neuron() {
        let arch = Architecture::new(1, vec![1], Activation::Tanh).unwrap();
        let mut p = NetworkParameters::zeros(&arch);
        p.layer_mut(0).0[0] = 1.0;
        p.layer_mut(1).0[0] = 1.0;
        assert!((forward(&p, &[1.0]) - 0.761594155955765).abs() < 1e-12);
    }

    #[test]
    fn activation_derivatives_match_differences() {
        for act in [Activation::Tanh, Activation::Sigmoid] {
            for z in [-2.0, -0.3, 0.0, 0.7, 1.9] {
                let h = 1e-5;
                let (_, d1, d2, d3) = act.derivatives(z);
                let f = |z| act.derivatives(z);
                assert!(((f(z + h).0 - f(z - h).0) / (2.0 * h) - d1).abs() < 1e-8);
                assert!(((f(z + h).1 - f(z - h).1) / (2.0 * h) - d2).abs() < 1e-8);
                assert!(((f(z + h).2 - f(z - h).2) / (2.0 * h) - d3).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn scalars_live_after_the_network() {
        let arch = Architecture::uniform(2, 3, 1, Activation::Tanh).unwrap();
        let p = NetworkParameters::zeros(&arch).with_scalar("k", 0.1);
        assert_eq!(p.scalar("k"), Some(0.1));
        assert_eq!(p.scalars(), &[0.1]);
        assert_eq!(p.as_slice().len(), arch.num_weights() + 1);
        assert!(p.scalar("q").is_none());
    }

    #[test]
    fn rejects_bad_architectures() {
        assert!(Architecture::new(0, vec![3], Activation::Tanh).is_err());
        assert!(Architecture::new(2, vec![], Activation::Tanh).is_err());
        assert!(Architecture::new(2, vec![3, 0], Activation::Tanh).is_err());
    }
}
