//! Fully connected decoder with ReLU hidden layers and a 6-wide output
//! (lit RGB, shadowed RGB), with batched forward and reverse-mode backward.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Real;

pub const OUTPUTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    /// `ln(1 + e^z)`: strictly positive, never saturates to a dead gradient.
    #[default]
    Softplus,
    /// `max(z, 0)`.
    IdentityClamp,
}

impl OutputActivation {
    #[inline]
    fn apply<T: Real>(self, z: T) -> T {
        match self {
            OutputActivation::Softplus => softplus(z),
            OutputActivation::IdentityClamp => z.max(T::zero()),
        }
    }

    #[inline]
    fn derivative<T: Real>(self, z: T) -> T {
        match self {
            OutputActivation::Softplus => T::one() / (T::one() + (-z).exp()),
            OutputActivation::IdentityClamp => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Pre-activation that maps to `y`; `y` is floored at `1e-6`.
    pub fn inverse(self, y: f64) -> f64 {
        let y = y.max(1e-6);
        match self {
            OutputActivation::Softplus => y.exp_m1().ln(),
            OutputActivation::IdentityClamp => y,
        }
    }
}

#[inline]
pub fn softplus<T: Real>(z: T) -> T {
    // ln(1 + e^z) = max(z, 0) + ln(1 + e^-|z|)
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Layer<T>>,
    pub output: OutputActivation,
}

/// Gradient with the same shapes as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> MlpGrad<T> {
    pub fn add_assign(&mut self, o: &MlpGrad<T>) {
        for (a, b) in self.weights.iter_mut().zip(&o.weights).chain(self.biases.iter_mut().zip(&o.biases)) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + y;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().chain(&self.biases).flatten().all(|&v| v == T::zero())
    }
}

/// Activations kept from a batched forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub batch: usize,
    /// Pre-activation of every layer, `batch x outputs(l)`.
    pub pre: Vec<Vec<T>>,
    /// Post-activation of every hidden layer.
    pub hidden: Vec<Vec<T>>,
    /// Final activated outputs, `batch x 6`.
    pub out: Vec<T>,
}

impl<T: Real> Mlp<T> {
    /// `input -> hidden x width -> 6`, He-uniform weights and zero biases.
    pub fn new(input: usize, hidden_layers: usize, width: usize, output: OutputActivation, rng: &mut impl Rng) -> Self {
        let mut sizes = vec![input];
        sizes.extend(std::iter::repeat_n(width, hidden_layers));
        sizes.push(OUTPUTS);
        Self::with_sizes(&sizes, output, rng)
    }

    pub fn with_sizes(sizes: &[usize], output: OutputActivation, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2 && *sizes.last().unwrap() == OUTPUTS, "MLP must end in {OUTPUTS} outputs");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = (6.0 / w[0] as f64).sqrt();
                Layer {
                    inputs: w[0],
                    outputs: w[1],
                    weights: (0..w[0] * w[1]).map(|_| T::of(rng.random_range(-bound..bound))).collect(),
                    biases: vec![T::zero(); w[1]],
                }
            })
            .collect();
        Mlp { layers, output }
    }

    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Layer {
                inputs: w[0],
                outputs: w[1],
                weights: vec![T::zero(); w[0] * w[1]],
                biases: vec![T::zero(); w[1]],
            })
            .collect();
        Mlp { layers, output }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn zero_grad(&self) -> MlpGrad<T> {
        MlpGrad {
            weights: self.layers.iter().map(|l| vec![T::zero(); l.weights.len()]).collect(),
            biases: self.layers.iter().map(|l| vec![T::zero(); l.biases.len()]).collect(),
        }
    }

    /// Forward over `batch` row-major inputs.
    pub fn forward_batch(&self, input: &[T], batch: usize) -> ForwardCache<T> {
        assert_eq!(input.len(), batch * self.input_size(), "input length mismatch");
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut hidden: Vec<Vec<T>> = Vec::with_capacity(last);
        for (l, layer) in self.layers.iter().enumerate() {
            let x: &[T] = if l == 0 { input } else { &hidden[l - 1] };
            let mut z = vec![T::zero(); batch * layer.outputs];
            for row in z.chunks_exact_mut(layer.outputs) {
                row.copy_from_slice(&layer.biases);
            }
            // z += x . W^T
            T::gemm(batch, layer.inputs, layer.outputs, x, (layer.inputs, 1), &layer.weights, (1, layer.inputs), T::one(), &mut z, layer.outputs);
            if l < last {
                hidden.push(z.iter().map(|&v| v.max(T::zero())).collect());
            }
            pre.push(z);
        }
        let out = pre[last].iter().map(|&z| self.output.apply(z)).collect();
        ForwardCache { batch, pre, hidden, out }
    }

    /// Accumulates parameter gradients of `sum(upstream . out)` into `grad`
    /// and returns the gradient w.r.t. the inputs (`batch x input`).
    pub fn backward_batch(&self, input: &[T], cache: &ForwardCache<T>, upstream: &[T], grad: &mut MlpGrad<T>) -> Vec<T> {
        let batch = cache.batch;
        assert_eq!(upstream.len(), batch * OUTPUTS, "upstream length mismatch");
        let last = self.layers.len() - 1;
        let mut delta: Vec<T> = upstream
            .iter()
            .zip(&cache.pre[last])
            .map(|(&u, &z)| u * self.output.derivative(z))
            .collect();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let x: &[T] = if l == 0 { input } else { &cache.hidden[l - 1] };
            // dW += delta^T . x
            T::gemm(layer.outputs, batch, layer.inputs, &delta, (1, layer.outputs), x, (layer.inputs, 1), T::one(), &mut grad.weights[l], layer.inputs);
            for row in delta.chunks_exact(layer.outputs) {
                for (g, &d) in grad.biases[l].iter_mut().zip(row) {
                    *g = *g + d;
                }
            }
            // dx = delta . W
            let mut dx = vec![T::zero(); batch * layer.inputs];
            T::gemm(batch, layer.outputs, layer.inputs, &delta, (layer.outputs, 1), &layer.weights, (layer.inputs, 1), T::zero(), &mut dx, layer.inputs);
            if l == 0 {
                return dx;
            }
            for (d, &z) in dx.iter_mut().zip(&cache.pre[l - 1]) {
                if z <= T::zero() {
                    *d = T::zero();
                }
            }
            delta = dx;
        }
        unreachable!("network has at least one layer")
    }

    /// Single-input forward: `(rgb_lit, rgb_shadowed)`.
    pub fn forward(&self, xi: &[T]) -> ([T; 3], [T; 3]) {
        assert_eq!(xi.len(), self.input_size(), "MLP input length mismatch");
        // Row-by-row dot products: a one-row GEMM spends most of its time
        // packing operands, and renders call this once per shading point.
        let last = self.layers.len() - 1;
        let mut x = xi.to_vec();
        let mut y = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            y.clear();
            for (row, &b) in layer.weights.chunks_exact(layer.inputs).zip(&layer.biases) {
                let z = row.iter().zip(&x).fold(b, |s, (&w, &v)| s + w * v);
                y.push(if l < last { z.max(T::zero()) } else { self.output.apply(z) });
            }
            std::mem::swap(&mut x, &mut y);
        }
        ([x[0], x[1], x[2]], [x[3], x[4], x[5]])
    }

    /// Single-input backward: parameter gradients and input gradient.
    pub fn backward(&self, xi: &[T], upstream: &[T; OUTPUTS]) -> (MlpGrad<T>, Vec<T>) {
        let cache = self.forward_batch(xi, 1);
        let mut grad = self.zero_grad();
        let dx = self.backward_batch(xi, &cache, upstream, &mut grad);
        (grad, dx)
    }

    pub fn cast<U: Real>(&self) -> Mlp<U> {
        let conv = |v: &Vec<T>| v.iter().map(|x| U::of(x.f64())).collect();
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Layer { inputs: l.inputs, outputs: l.outputs, weights: conv(&l.weights), biases: conv(&l.biases) })
                .collect(),
            output: self.output,
        }
    }
}
