//! Fixed-architecture multilayer perceptron with hand-rolled reverse-mode gradients.
//!
//! Layers are dense affine transforms (`z = Wx + b`) followed by an element-wise
//! activation. Weights are row-major `(out_dim, in_dim)`. The backward pass
//! returns exact gradients of `<output, output_grad>` with respect to every
//! parameter and the input.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, WalkerError};
use crate::scalar::{real, Scalar};

/// Element-wise activation applied after the affine transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<F: Scalar>(self, z: F) -> F {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the post-activation output `y`.
    #[inline]
    fn grad_from_output<F: Scalar>(self, y: F) -> F {
        match self {
            Activation::Tanh => F::one() - y * y,
            Activation::Identity => F::one(),
        }
    }
}

/// One dense layer: `y = activation(Wx + b)`.
#[derive(Debug, Clone)]
pub struct Layer<F> {
    /// Row-major matrix with shape `(out_dim, in_dim)`.
    pub weights: Vec<F>,
    pub biases: Vec<F>,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl<F: Scalar> Layer<F> {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weights: vec![F::zero(); in_dim * out_dim],
            biases: vec![F::zero(); out_dim],
            in_dim,
            out_dim,
            activation,
        }
    }

    fn forward_into(&self, input: &[F], out: &mut Vec<F>) {
        debug_assert_eq!(input.len(), self.in_dim);
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut sum = self.biases[o];
            for (w, x) in row.iter().zip(input) {
                sum = sum + *w * *x;
            }
            out.push(self.activation.apply(sum));
        }
    }
}

/// Gradients mirroring one layer's parameter shapes.
#[derive(Debug, Clone)]
pub struct LayerGrads<F> {
    pub d_weights: Vec<F>,
    pub d_biases: Vec<F>,
}

/// Gradients mirroring a whole [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpGrads<F> {
    pub layers: Vec<LayerGrads<F>>,
}

impl<F: Scalar> MlpGrads<F> {
    pub fn zeros_like(net: &Mlp<F>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    d_weights: vec![F::zero(); l.weights.len()],
                    d_biases: vec![F::zero(); l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn reset(&mut self) {
        for l in &mut self.layers {
            l.d_weights.iter_mut().for_each(|g| *g = F::zero());
            l.d_biases.iter_mut().for_each(|g| *g = F::zero());
        }
    }

    /// Adds `other` into `self` element-wise.
    pub fn accumulate(&mut self, other: &MlpGrads<F>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (g, h) in a.d_weights.iter_mut().zip(&b.d_weights) {
                *g += *h;
            }
            for (g, h) in a.d_biases.iter_mut().zip(&b.d_biases) {
                *g += *h;
            }
        }
    }

    pub fn scale(&mut self, factor: F) {
        for l in &mut self.layers {
            l.d_weights.iter_mut().for_each(|g| *g *= factor);
            l.d_biases.iter_mut().for_each(|g| *g *= factor);
        }
    }

    /// Flat views over all gradient tensors, in layer order (weight, bias).
    pub fn tensors(&self) -> Vec<&[F]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &self.layers {
            out.push(l.d_weights.as_slice());
            out.push(l.d_biases.as_slice());
        }
        out
    }
}

/// Per-layer activations cached during a forward pass for reuse in backward.
#[derive(Debug, Clone, Default)]
pub struct MlpCache<F> {
    /// `activations[0]` is the input; `activations[i + 1]` is layer `i`'s output.
    pub activations: Vec<Vec<F>>,
}

/// A fixed multilayer perceptron: tanh hidden layers, identity output.
#[derive(Debug, Clone)]
pub struct Mlp<F> {
    pub layers: Vec<Layer<F>>,
}

impl<F: Scalar> Mlp<F> {
    /// Builds a zero-initialized net with the given hidden widths.
    pub fn new(in_dim: usize, hidden: &[usize], out_dim: usize) -> Self {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(in_dim);
        dims.extend_from_slice(hidden);
        dims.push(out_dim);
        let n_layers = dims.len() - 1;
        let layers = (0..n_layers)
            .map(|i| {
                let act = if i + 1 == n_layers {
                    Activation::Identity
                } else {
                    Activation::Tanh
                };
                Layer::zeros(dims[i], dims[i + 1], act)
            })
            .collect();
        Self { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    /// Orthogonal initialization: hidden layers scaled by `hidden_gain`,
    /// the output layer by `output_gain`. Biases stay zero.
    pub fn init_orthogonal<R: Rng>(&mut self, rng: &mut R, hidden_gain: f64, output_gain: f64) {
        let n = self.layers.len();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let gain = if i + 1 == n { output_gain } else { hidden_gain };
            layer.weights = orthogonal_matrix(layer.out_dim, layer.in_dim, real::<F>(gain), rng);
        }
    }

    /// Checks that consecutive layer shapes compose and every entry is finite.
    pub fn validate(&self) -> Result<()> {
        for pair in self.layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(WalkerError::contract(format!(
                    "layer shapes do not compose: out {} vs next in {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(WalkerError::contract(format!(
                    "non-finite parameter in layer {i}"
                )));
            }
        }
        Ok(())
    }

    /// Deterministic forward pass.
    pub fn forward(&self, input: &[F]) -> Result<Vec<F>> {
        self.check_input(input)?;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Forward pass that records per-layer activations for a later backward call.
    pub fn forward_cached(&self, input: &[F], cache: &mut MlpCache<F>) -> Result<()> {
        self.check_input(input)?;
        cache.activations.resize(self.layers.len() + 1, Vec::new());
        cache.activations[0].clear();
        cache.activations[0].extend_from_slice(input);
        for i in 0..self.layers.len() {
            let (head, tail) = cache.activations.split_at_mut(i + 1);
            self.layers[i].forward_into(&head[i], &mut tail[0]);
        }
        Ok(())
    }

    /// Output of the latest [`forward_cached`](Self::forward_cached) call.
    pub fn cached_output<'a>(&self, cache: &'a MlpCache<F>) -> &'a [F] {
        cache.activations.last().expect("cache populated")
    }

    /// Reverse-mode pass: accumulates parameter gradients of `<output, output_grad>`
    /// into `grads` and returns the input gradient.
    pub fn backward(
        &self,
        cache: &MlpCache<F>,
        output_grad: &[F],
        grads: &mut MlpGrads<F>,
    ) -> Result<Vec<F>> {
        if output_grad.len() != self.out_dim() {
            return Err(WalkerError::contract(format!(
                "output_grad length {} does not match out_dim {}",
                output_grad.len(),
                self.out_dim()
            )));
        }
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(WalkerError::contract(
                "backward called without a matching forward_cached".to_string(),
            ));
        }
        let mut upstream = output_grad.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[i];
            let output = &cache.activations[i + 1];
            let lg = &mut grads.layers[i];
            let mut d_input = vec![F::zero(); layer.in_dim];
            for o in 0..layer.out_dim {
                let dz = upstream[o] * layer.activation.grad_from_output(output[o]);
                lg.d_biases[o] += dz;
                let row = o * layer.in_dim;
                for (j, x) in input.iter().enumerate() {
                    lg.d_weights[row + j] += dz * *x;
                    d_input[j] += layer.weights[row + j] * dz;
                }
            }
            upstream = d_input;
        }
        Ok(upstream)
    }

    /// Named flat views over all parameter tensors, prefixed for serialization.
    pub fn tensors(&self, prefix: &str) -> Vec<(String, &[F])> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("{prefix}.layer{i}.weight"), l.weights.as_slice()));
            out.push((format!("{prefix}.layer{i}.bias"), l.biases.as_slice()));
        }
        out
    }

    /// Mutable counterpart of [`tensors`](Self::tensors).
    pub fn tensors_mut(&mut self, prefix: &str) -> Vec<(String, &mut [F])> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push((
                format!("{prefix}.layer{i}.weight"),
                l.weights.as_mut_slice(),
            ));
            out.push((format!("{prefix}.layer{i}.bias"), l.biases.as_mut_slice()));
        }
        out
    }

    /// Shapes of each tensor in [`tensors`](Self::tensors) order.
    pub fn tensor_shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &self.layers {
            out.push(vec![l.out_dim, l.in_dim]);
            out.push(vec![l.out_dim]);
        }
        out
    }

    fn check_input(&self, input: &[F]) -> Result<()> {
        if input.len() != self.in_dim() {
            return Err(WalkerError::contract(format!(
                "input length {} does not match first-layer in_dim {}",
                input.len(),
                self.in_dim()
            )));
        }
        Ok(())
    }
}

/// Random matrix with orthonormal rows (or columns when `rows > cols`),
/// scaled by `gain`. Row-major `(rows, cols)`.
fn orthogonal_matrix<F: Scalar, R: Rng>(rows: usize, cols: usize, gain: F, rng: &mut R) -> Vec<F> {
    let (n, m, transpose) = if rows <= cols {
        (rows, cols, false)
    } else {
        (cols, rows, true)
    };
    // Gram-Schmidt over the n vectors of length m.
    let mut basis: Vec<Vec<F>> = Vec::with_capacity(n);
    for _ in 0..n {
        loop {
            let mut v: Vec<F> = (0..m)
                .map(|_| real::<F>(rng.sample::<f64, _>(StandardNormal)))
                .collect();
            for b in &basis {
                let dot: F = v.iter().zip(b).map(|(a, c)| *a * *c).sum();
                for (x, c) in v.iter_mut().zip(b) {
                    *x -= dot * *c;
                }
            }
            let norm = v.iter().map(|x| *x * *x).sum::<F>().sqrt();
            if norm > real::<F>(1e-8) {
                v.iter_mut().for_each(|x| *x /= norm);
                basis.push(v);
                break;
            }
        }
    }
    let mut out = vec![F::zero(); rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let val = if transpose { basis[j][i] } else { basis[i][j] };
            out[i * cols + j] = gain * val;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_net(dims: (usize, &[usize], usize), seed: u64) -> Mlp<f64> {
        let mut net = Mlp::new(dims.0, dims.1, dims.2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        net.init_orthogonal(&mut rng, 2.0_f64.sqrt(), 0.01);
        net
    }

    #[test]
    fn zero_net_maps_any_input_to_zero() {
        let net: Mlp<f64> = Mlp::new(4, &[8], 3);
        let out = net.forward(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_linear_layer_passes_input_through() {
        let mut net: Mlp<f64> = Mlp::new(3, &[], 3);
        for i in 0..3 {
            net.layers[0].weights[i * 3 + i] = 1.0;
        }
        let x = [0.3, -1.2, 7.5];
        assert_eq!(net.forward(&x).unwrap(), x.to_vec());
    }

    /// Naive matrix-multiply oracle, written independently of `Layer::forward_into`.
    fn naive_forward(net: &Mlp<f64>, input: &[f64]) -> Vec<f64> {
        let mut cur = input.to_vec();
        for layer in &net.layers {
            let mut next = vec![0.0; layer.out_dim];
            for (o, slot) in next.iter_mut().enumerate() {
                let mut acc = 0.0;
                for i in 0..layer.in_dim {
                    acc += layer.weights[o * layer.in_dim + i] * cur[i];
                }
                acc += layer.biases[o];
                *slot = match layer.activation {
                    Activation::Tanh => acc.tanh(),
                    Activation::Identity => acc,
                };
            }
            cur = next;
        }
        cur
    }

    #[test]
    fn forward_matches_naive_oracle() {
        let net = random_net((5, &[7], 4), 7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x: Vec<f64> = (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let got = net.forward(&x).unwrap();
            let want = naive_forward(&net, &x);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "got {g}, want {w}");
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let net = random_net((6, &[9, 9], 2), 3);
        let x = vec![0.1, 0.2, -0.3, 0.4, -0.5, 0.6];
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_mismatch_is_a_contract_violation() {
        let net = random_net((4, &[4], 2), 1);
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(WalkerError::ContractViolation(_))
        ));
    }

    #[test]
    fn linear_bias_gradient_equals_output_grad() {
        let mut net: Mlp<f64> = Mlp::new(3, &[], 2);
        net.layers[0].weights.iter_mut().for_each(|w| *w = 0.5);
        let mut cache = MlpCache::default();
        net.forward_cached(&[1.0, 2.0, 3.0], &mut cache).unwrap();
        let mut grads = MlpGrads::zeros_like(&net);
        let g = [0.7, -0.2];
        net.backward(&cache, &g, &mut grads).unwrap();
        assert_eq!(grads.layers[0].d_biases, g.to_vec());
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let net = random_net((4, &[6, 6], 3), 5);
        let mut cache = MlpCache::default();
        net.forward_cached(&[0.5, -0.5, 0.25, 1.0], &mut cache).unwrap();
        let mut grads = MlpGrads::zeros_like(&net);
        let d_in = net.backward(&cache, &[0.0; 3], &mut grads).unwrap();
        assert!(d_in.iter().all(|&v| v == 0.0));
        for lg in &grads.layers {
            assert!(lg.d_weights.iter().all(|&v| v == 0.0));
            assert!(lg.d_biases.iter().all(|&v| v == 0.0));
        }
    }

    /// Central finite differences of `<output, g>` for every parameter and input.
    fn finite_difference_check(net: &mut Mlp<f64>, input: &[f64], g: &[f64]) {
        let step = 1e-5;
        let mut cache = MlpCache::default();
        net.forward_cached(input, &mut cache).unwrap();
        let mut grads = MlpGrads::zeros_like(net);
        let d_input = net.backward(&cache, g, &mut grads).unwrap();

        let scalar_out = |net: &Mlp<f64>, x: &[f64]| -> f64 {
            net.forward(x)
                .unwrap()
                .iter()
                .zip(g)
                .map(|(o, gi)| o * gi)
                .sum()
        };

        let check = |analytic: f64, numeric: f64| {
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            assert!(
                ((analytic - numeric) / denom).abs() < 1e-4,
                "analytic {analytic} vs numeric {numeric}"
            );
        };

        for li in 0..net.layers.len() {
            for wi in 0..net.layers[li].weights.len() {
                let orig = net.layers[li].weights[wi];
                net.layers[li].weights[wi] = orig + step;
                let plus = scalar_out(net, input);
                net.layers[li].weights[wi] = orig - step;
                let minus = scalar_out(net, input);
                net.layers[li].weights[wi] = orig;
                check(grads.layers[li].d_weights[wi], (plus - minus) / (2.0 * step));
            }
            for bi in 0..net.layers[li].biases.len() {
                let orig = net.layers[li].biases[bi];
                net.layers[li].biases[bi] = orig + step;
                let plus = scalar_out(net, input);
                net.layers[li].biases[bi] = orig - step;
                let minus = scalar_out(net, input);
                net.layers[li].biases[bi] = orig;
                check(grads.layers[li].d_biases[bi], (plus - minus) / (2.0 * step));
            }
        }
        let mut x = input.to_vec();
        for i in 0..x.len() {
            let orig = x[i];
            x[i] = orig + step;
            let plus = scalar_out(net, &x);
            x[i] = orig - step;
            let minus = scalar_out(net, &x);
            x[i] = orig;
            check(d_input[i], (plus - minus) / (2.0 * step));
        }
    }

    #[test]
    fn backward_matches_central_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for seed in 0..4u64 {
            let mut net = random_net((5, &[8, 6], 3), seed + 100);
            let x: Vec<f64> = (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let g: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            finite_difference_check(&mut net, &x, &g);
        }
    }

    #[test]
    fn composed_backward_equals_chained_per_layer_backward() {
        let net = random_net((4, &[5], 3), 9);
        let x = vec![0.3, -0.2, 0.9, -1.1];
        let g = vec![0.5, -1.0, 0.25];

        let mut cache = MlpCache::default();
        net.forward_cached(&x, &mut cache).unwrap();
        let mut grads = MlpGrads::zeros_like(&net);
        let d_in = net.backward(&cache, &g, &mut grads).unwrap();

        // Chain the two layers manually as independent single-layer nets.
        let first = Mlp { layers: vec![net.layers[0].clone()] };
        let second = Mlp { layers: vec![net.layers[1].clone()] };
        let mid = first.forward(&x).unwrap();

        let mut cache2 = MlpCache::default();
        second.forward_cached(&mid, &mut cache2).unwrap();
        let mut g2 = MlpGrads::zeros_like(&second);
        let d_mid = second.backward(&cache2, &g, &mut g2).unwrap();

        let mut cache1 = MlpCache::default();
        first.forward_cached(&x, &mut cache1).unwrap();
        let mut g1 = MlpGrads::zeros_like(&first);
        let d_in_chained = first.backward(&cache1, &d_mid, &mut g1).unwrap();

        for (a, b) in d_in.iter().zip(&d_in_chained) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in grads.layers[0].d_weights.iter().zip(&g1.layers[0].d_weights) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in grads.layers[1].d_weights.iter().zip(&g2.layers[0].d_weights) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_init_rows_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = orthogonal_matrix::<f64, _>(4, 8, 1.0, &mut rng);
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = (0..8).map(|k| w[i * 8 + k] * w[j * 8 + k]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10, "row {i}.{j} dot {dot}");
            }
        }
    }
}
