//! Minimal dense-network substrate: initialization, forward and backward
//! passes, activations, and the Adam optimizer. Deterministic under a seed.
//!
//! Parameters live in one flat `f64` buffer per network. Layer `k` occupies
//! `output * (input + 1)` values: the weight matrix in row-major `output x
//! input` order, then the bias. The flat layout lets one optimizer state
//! cover a whole network.

#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, dot, Mat};
use crate::rng::Seed;

/// Negative-side slope of the leaky rectifier; conventional value for
/// adversarial discriminators.
pub const LEAKY_SLOPE: f64 = 0.2;

/// Pointwise activation applied after each affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    LeakyRelu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => {
                if v > 0.0 {
                    v
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if v > 0.0 {
                    v
                } else {
                    LEAKY_SLOPE * v
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
            Activation::Tanh => v.tanh(),
            Activation::Identity => v,
        }
    }

    /// Derivative at a point, given both the pre-activation and the stored
    /// output. Rectifier kinks use the zero-side subgradient.
    #[inline]
    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if pre > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Sigmoid => post * (1.0 - post),
            Activation::Tanh => 1.0 - post * post,
            Activation::Identity => 1.0,
        }
    }

    /// True for activations whose derivative is discontinuous.
    pub fn has_kink(self) -> bool {
        matches!(self, Activation::Relu | Activation::LeakyRelu)
    }
}

/// One affine layer followed by an activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            input,
            output,
            activation,
        }
    }

    fn param_count(&self) -> usize {
        self.output * (self.input + 1)
    }
}

/// Chain of dense layers with a flat parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    specs: Vec<LayerSpec>,
    params: Vec<f64>,
}

/// Per-layer pre- and post-activation values recorded by a forward pass;
/// sufficient for an exact reverse pass.
#[derive(Debug, Clone)]
pub struct Tape {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl Tape {
    /// Output of the forward pass that produced this tape.
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("tape has at least one layer")
    }

    /// Pre-activation values of layer `k`.
    pub fn pre_activation(&self, k: usize) -> &[f64] {
        &self.pre[k]
    }
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::EmptySpec);
    }
    for spec in specs {
        if spec.input == 0 || spec.output == 0 {
            return Err(Error::ZeroDimension);
        }
    }
    for (k, pair) in specs.windows(2).enumerate() {
        if pair[0].output != pair[1].input {
            return Err(Error::LayerChainMismatch {
                layer: k,
                out: pair[0].output,
                next: k + 1,
                next_in: pair[1].input,
            });
        }
    }
    Ok(())
}

impl DenseNetwork {
    /// Initializes a network from the documented scheme: weights drawn
    /// uniformly with Kaiming fan-in scaling for rectifier layers (gain
    /// `sqrt(2)` for relu, `sqrt(2 / (1 + slope^2))` for leaky relu, bound
    /// `gain * sqrt(3 / fan_in)`) and Xavier scaling for
    /// sigmoid/tanh/identity layers (bound `sqrt(6 / (fan_in + fan_out))`);
    /// biases zero. Weights are drawn layer by layer in row-major order, so
    /// identical `(specs, seed)` yield bit-identical networks.
    pub fn init(specs: &[LayerSpec], seed: Seed) -> Result<Self> {
        validate_specs(specs)?;
        let mut rng = seed.rng();
        let total: usize = specs.iter().map(LayerSpec::param_count).sum();
        let mut params = Vec::with_capacity(total);
        for spec in specs {
            let fan_in = spec.input as f64;
            let fan_out = spec.output as f64;
            let bound = match spec.activation {
                Activation::Relu => (6.0 / fan_in).sqrt(),
                Activation::LeakyRelu => {
                    (6.0 / ((1.0 + LEAKY_SLOPE * LEAKY_SLOPE) * fan_in)).sqrt()
                }
                Activation::Sigmoid | Activation::Tanh | Activation::Identity => {
                    (6.0 / (fan_in + fan_out)).sqrt()
                }
            };
            for _ in 0..spec.output * spec.input {
                let u: f64 = rng.random();
                params.push((2.0 * u - 1.0) * bound);
            }
            params.extend(core::iter::repeat(0.0).take(spec.output));
        }
        Ok(Self {
            specs: specs.to_vec(),
            params,
        })
    }

    /// Wraps existing parameters; used by persistence and by tests that
    /// inject exact analytic networks. The caller owns any guarantee about
    /// output ranges.
    pub fn from_params(specs: &[LayerSpec], params: Vec<f64>) -> Result<Self> {
        validate_specs(specs)?;
        let total: usize = specs.iter().map(LayerSpec::param_count).sum();
        if params.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: params.len(),
            });
        }
        if !all_finite(&params) {
            return Err(Error::NonFinite {
                context: "network parameters",
            });
        }
        Ok(Self {
            specs: specs.to_vec(),
            params,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn input_dim(&self) -> usize {
        self.specs[0].input
    }

    pub fn output_dim(&self) -> usize {
        self.specs[self.specs.len() - 1].output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offset of layer `k` in the flat parameter buffer.
    pub fn layer_offset(&self, k: usize) -> usize {
        self.specs[..k].iter().map(LayerSpec::param_count).sum()
    }

    /// Weight matrix (row-major `output x input`) and bias of layer `k`.
    pub fn layer(&self, k: usize) -> (&[f64], &[f64]) {
        let spec = self.specs[k];
        let off = self.layer_offset(k);
        let w_len = spec.output * spec.input;
        (
            &self.params[off..off + w_len],
            &self.params[off + w_len..off + w_len + spec.output],
        )
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if !all_finite(x) {
            return Err(Error::NonFinite {
                context: "network input",
            });
        }
        Ok(())
    }

    /// Forward pass returning the output and a tape for the reverse pass.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Tape)> {
        self.check_input(x)?;
        let layers = self.specs.len();
        let mut pre_all: Vec<Vec<f64>> = Vec::with_capacity(layers);
        let mut post_all: Vec<Vec<f64>> = Vec::with_capacity(layers);
        let mut off = 0;
        for (k, spec) in self.specs.iter().enumerate() {
            let (inp, out) = (spec.input, spec.output);
            let w = &self.params[off..off + out * inp];
            let b = &self.params[off + out * inp..off + out * (inp + 1)];
            off += spec.param_count();
            let prev: &[f64] = if k == 0 { x } else { &post_all[k - 1] };
            let mut pre = Vec::with_capacity(out);
            for i in 0..out {
                pre.push(dot(&w[i * inp..(i + 1) * inp], prev) + b[i]);
            }
            let post: Vec<f64> = pre.iter().map(|&p| spec.activation.apply(p)).collect();
            pre_all.push(pre);
            post_all.push(post);
        }
        let output = post_all[layers - 1].clone();
        Ok((
            output,
            Tape {
                input: x.to_vec(),
                pre: pre_all,
                post: post_all,
            },
        ))
    }

    /// Forward pass without recording a tape; the scoring hot path.
    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut off = 0;
        for spec in &self.specs {
            let (inp, out) = (spec.input, spec.output);
            let w = &self.params[off..off + out * inp];
            let b = &self.params[off + out * inp..off + out * (inp + 1)];
            off += spec.param_count();
            let mut next = Vec::with_capacity(out);
            for i in 0..out {
                let pre = dot(&w[i * inp..(i + 1) * inp], &cur) + b[i];
                next.push(spec.activation.apply(pre));
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Forward pass over many inputs at once, one per row. Every output
    /// element is computed by the same expression as [`infer`](Self::infer),
    /// so row `r` of the result is bitwise identical to `infer` on row `r`;
    /// batching only changes the memory access pattern, streaming each
    /// weight row once per layer instead of once per input.
    pub fn infer_batch(&self, inputs: &Mat) -> Result<Mat> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: inputs.cols(),
            });
        }
        if !all_finite(inputs.data()) {
            return Err(Error::NonFinite {
                context: "network input",
            });
        }
        let rows = inputs.rows();
        let mut cur = inputs.clone();
        let mut off = 0;
        for spec in &self.specs {
            let (inp, out) = (spec.input, spec.output);
            let w = &self.params[off..off + out * inp];
            let b = &self.params[off + out * inp..off + out * (inp + 1)];
            off += spec.param_count();
            let mut next = Mat::zeros(rows, out);
            for i in 0..out {
                let w_row = &w[i * inp..(i + 1) * inp];
                for r in 0..rows {
                    let pre = dot(w_row, cur.row(r)) + b[i];
                    *next.at_mut(r, i) = spec.activation.apply(pre);
                }
            }
            cur = next;
        }
        Ok(cur)
    }

    fn check_tape(&self, tape: &Tape, out_grad: &[f64]) -> Result<()> {
        let ok = tape.pre.len() == self.specs.len()
            && tape.input.len() == self.input_dim()
            && tape
                .pre
                .iter()
                .zip(&self.specs)
                .all(|(p, s)| p.len() == s.output)
            && tape
                .post
                .iter()
                .zip(&self.specs)
                .all(|(p, s)| p.len() == s.output);
        if !ok {
            return Err(Error::TapeMismatch);
        }
        if out_grad.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                got: out_grad.len(),
            });
        }
        Ok(())
    }

    /// Exact reverse-mode gradients of the forward map. Returns gradients
    /// aligned with [`params`](Self::params) and the gradient with respect to
    /// the input.
    pub fn backward(&self, tape: &Tape, out_grad: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut grads = vec![0.0; self.params.len()];
        let input_grad = self.backward_into(tape, out_grad, &mut grads, 1.0)?;
        Ok((grads, input_grad))
    }

    /// Reverse pass that accumulates `scale * param_gradient` into `grads`
    /// and returns the unscaled input gradient. Batch training uses
    /// `scale = 1 / batch_size` to build mean gradients without a buffer per
    /// sample.
    pub fn backward_into(
        &self,
        tape: &Tape,
        out_grad: &[f64],
        grads: &mut [f64],
        scale: f64,
    ) -> Result<Vec<f64>> {
        self.check_tape(tape, out_grad)?;
        if grads.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: grads.len(),
            });
        }
        let mut g = out_grad.to_vec();
        for k in (0..self.specs.len()).rev() {
            let spec = self.specs[k];
            let (inp, out) = (spec.input, spec.output);
            let off = self.layer_offset(k);
            for i in 0..out {
                g[i] *= spec.activation.derivative(tape.pre[k][i], tape.post[k][i]);
            }
            let prev: &[f64] = if k == 0 { &tape.input } else { &tape.post[k - 1] };
            for i in 0..out {
                let di = g[i] * scale;
                let row = &mut grads[off + i * inp..off + (i + 1) * inp];
                for (wg, &pj) in row.iter_mut().zip(prev) {
                    *wg += di * pj;
                }
                grads[off + out * inp + i] += di;
            }
            let w = &self.params[off..off + out * inp];
            let mut gnext = vec![0.0; inp];
            for i in 0..out {
                let di = g[i];
                let row = &w[i * inp..(i + 1) * inp];
                for (gn, &wij) in gnext.iter_mut().zip(row) {
                    *gn += wij * di;
                }
            }
            g = gnext;
        }
        Ok(g)
    }

    /// Reverse pass computing only the input gradient; used when a frozen
    /// network sits between a loss and the network being trained.
    pub fn backward_input_only(&self, tape: &Tape, out_grad: &[f64]) -> Result<Vec<f64>> {
        self.check_tape(tape, out_grad)?;
        let mut g = out_grad.to_vec();
        for k in (0..self.specs.len()).rev() {
            let spec = self.specs[k];
            let (inp, out) = (spec.input, spec.output);
            let off = self.layer_offset(k);
            for i in 0..out {
                g[i] *= spec.activation.derivative(tape.pre[k][i], tape.post[k][i]);
            }
            let w = &self.params[off..off + out * inp];
            let mut gnext = vec![0.0; inp];
            for i in 0..out {
                let di = g[i];
                let row = &w[i * inp..(i + 1) * inp];
                for (gn, &wij) in gnext.iter_mut().zip(row) {
                    *gn += wij * di;
                }
            }
            g = gnext;
        }
        Ok(g)
    }
}

/// Adam optimizer state for one flat parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamState {
    /// Fresh state with zero moments and the standard constants
    /// `beta1 = 0.9`, `beta2 = 0.999`, `epsilon = 1e-8`.
    pub fn new(param_count: usize, learning_rate: f64) -> Self {
        Self {
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    /// One bias-corrected Adam update. Rejects non-finite gradients so a
    /// diverging loss surfaces as an error instead of poisoning parameters.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.first_moment.len(),
                got: grads.len(),
            });
        }
        if !all_finite(grads) {
            return Err(Error::NonFiniteGradient);
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            let m = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            let v = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    /// Central-difference gradient oracle: independently recomputes the loss
    /// at `p +- h` for every parameter. Written against the public forward
    /// pass only, so it stays valid whatever the reverse pass does.
    fn numeric_param_gradient(
        net: &DenseNetwork,
        x: &[f64],
        coeffs: &[f64],
        h: f64,
    ) -> Vec<f64> {
        let loss = |net: &DenseNetwork| -> f64 {
            let y = net.infer(x).unwrap();
            dot(&y, coeffs)
        };
        let mut grad = Vec::with_capacity(net.params().len());
        let mut probe = net.clone();
        for i in 0..net.params().len() {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + h;
            let plus = loss(&probe);
            probe.params_mut()[i] = orig - h;
            let minus = loss(&probe);
            probe.params_mut()[i] = orig;
            grad.push((plus - minus) / (2.0 * h));
        }
        grad
    }

    fn numeric_input_gradient(net: &DenseNetwork, x: &[f64], coeffs: &[f64], h: f64) -> Vec<f64> {
        let mut grad = Vec::with_capacity(x.len());
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            let orig = probe[i];
            probe[i] = orig + h;
            let plus = dot(&net.infer(&probe).unwrap(), coeffs);
            probe[i] = orig - h;
            let minus = dot(&net.infer(&probe).unwrap(), coeffs);
            probe[i] = orig;
            grad.push((plus - minus) / (2.0 * h));
        }
        grad
    }

    /// Relative error with an absolute floor on the normalizer: below the
    /// floor, central differences are dominated by roundoff of the loss and
    /// cannot certify relative accuracy, while a genuinely wrong gradient of
    /// that size still scores far above the tolerance.
    fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-4))
            .fold(0.0, f64::max)
    }

    /// True when a rectifier pre-activation sits close enough to its kink
    /// that an h-sized parameter perturbation could cross it, which would
    /// invalidate the central-difference oracle at that point.
    fn near_kink(net: &DenseNetwork, x: &[f64]) -> bool {
        let (_, tape) = net.forward(x).unwrap();
        net.specs().iter().enumerate().any(|(k, s)| {
            s.activation.has_kink() && tape.pre_activation(k).iter().any(|p| p.abs() < 5e-3)
        })
    }

    fn gradient_check(net: &DenseNetwork, x: &[f64], coeffs: &[f64]) -> (f64, f64) {
        // Near the cube root of machine epsilon, where central differences
        // balance truncation against roundoff.
        let h = 6e-6;
        let (_, tape) = net.forward(x).unwrap();
        let (param_grads, input_grad) = net.backward(&tape, coeffs).unwrap();
        let np = numeric_param_gradient(net, x, coeffs, h);
        let ni = numeric_input_gradient(net, x, coeffs, h);
        (max_rel_err(&param_grads, &np), max_rel_err(&input_grad, &ni))
    }

    #[test]
    fn gradients_match_central_differences_on_random_three_layer_net() {
        let specs = [
            LayerSpec::new(5, 7, Activation::Tanh),
            LayerSpec::new(7, 6, Activation::LeakyRelu),
            LayerSpec::new(6, 4, Activation::Sigmoid),
        ];
        let net = DenseNetwork::init(&specs, Seed(11)).unwrap();
        let mut rng = Seed(12).rng();
        let mut checked = 0;
        for _ in 0..20 {
            let x: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let coeffs: Vec<f64> = (0..4).map(|_| rng.random::<f64>() + 0.5).collect();
            if near_kink(&net, &x) {
                continue;
            }
            let (pe, ie) = gradient_check(&net, &x, &coeffs);
            assert!(pe < 1e-4, "param gradient relative error {pe}");
            assert!(ie < 1e-4, "input gradient relative error {ie}");
            checked += 1;
        }
        assert!(checked >= 10, "too many inputs rejected near kinks");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn gradients_match_central_differences_on_random_architectures(
            seed in 0u64..1000,
            layers in 1usize..=4,
            widths in proptest::collection::vec(1usize..=32, 5),
            acts in proptest::collection::vec(0usize..5, 4),
        ) {
            let all = [
                Activation::Relu,
                Activation::LeakyRelu,
                Activation::Sigmoid,
                Activation::Tanh,
                Activation::Identity,
            ];
            let mut specs = Vec::new();
            for k in 0..layers {
                specs.push(LayerSpec::new(widths[k], widths[k + 1], all[acts[k]]));
            }
            let net = DenseNetwork::init(&specs, Seed(seed)).unwrap();
            let mut rng = Seed(seed ^ 0xabcd).rng();
            // Resample inputs that land a rectifier pre-activation inside the
            // finite-difference crossing margin.
            let mut tried = 0;
            loop {
                let x: Vec<f64> =
                    (0..widths[0]).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let coeffs: Vec<f64> =
                    (0..specs[layers - 1].output).map(|_| rng.random::<f64>() + 0.5).collect();
                tried += 1;
                if near_kink(&net, &x) {
                    prop_assume!(tried < 50);
                    continue;
                }
                let (pe, ie) = gradient_check(&net, &x, &coeffs);
                prop_assert!(pe < 1e-4, "param gradient relative error {}", pe);
                prop_assert!(ie < 1e-4, "input gradient relative error {}", ie);
                break;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn infer_batch_rows_are_bitwise_identical_to_infer(
            seed in 0u64..1000,
            layers in 1usize..=4,
            widths in proptest::collection::vec(1usize..=32, 5),
            acts in proptest::collection::vec(0usize..5, 4),
            rows in 0usize..=9,
        ) {
            let all = [
                Activation::Relu,
                Activation::LeakyRelu,
                Activation::Sigmoid,
                Activation::Tanh,
                Activation::Identity,
            ];
            let mut specs = Vec::new();
            for k in 0..layers {
                specs.push(LayerSpec::new(widths[k], widths[k + 1], all[acts[k]]));
            }
            let net = DenseNetwork::init(&specs, Seed(seed)).unwrap();
            let mut rng = Seed(seed ^ 0x77).rng();
            let data: Vec<f64> =
                (0..rows * widths[0]).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
            let inputs = Mat::from_vec(rows, widths[0], data).unwrap();
            let batch = net.infer_batch(&inputs).unwrap();
            prop_assert_eq!(batch.rows(), rows);
            prop_assert_eq!(batch.cols(), net.output_dim());
            for r in 0..rows {
                let single = net.infer(inputs.row(r)).unwrap();
                prop_assert_eq!(batch.row(r), single.as_slice());
            }
        }
    }

    #[test]
    fn infer_batch_rejects_wrong_width_and_nonfinite_rows() {
        let specs = [LayerSpec::new(3, 2, Activation::Tanh)];
        let net = DenseNetwork::init(&specs, Seed(4)).unwrap();
        let narrow = Mat::from_vec(2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(
            net.infer_batch(&narrow),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
        let bad = Mat::from_vec(2, 3, vec![0.1, 0.2, 0.3, f64::NAN, 0.5, 0.6]).unwrap();
        assert!(matches!(net.infer_batch(&bad), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn forward_identity_layer_passes_input_through() {
        let specs = [LayerSpec::new(2, 2, Activation::Identity)];
        let mut net = DenseNetwork::init(&specs, Seed(0)).unwrap();
        net.params_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let (y, _) = net.forward(&[1.0, 2.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0]);
    }

    #[test]
    fn forward_zero_sigmoid_layer_outputs_half() {
        let specs = [LayerSpec::new(3, 2, Activation::Sigmoid)];
        let mut net = DenseNetwork::init(&specs, Seed(0)).unwrap();
        for p in net.params_mut() {
            *p = 0.0;
        }
        let (y, _) = net.forward(&[0.3, -4.0, 2.5]).unwrap();
        assert_eq!(y, vec![0.5, 0.5]);
    }

    #[test]
    fn forward_relu_clamps_negative_components() {
        let specs = [LayerSpec::new(2, 2, Activation::Relu)];
        let mut net = DenseNetwork::init(&specs, Seed(0)).unwrap();
        net.params_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let (y, _) = net.forward(&[-1.0, 2.0]).unwrap();
        assert_eq!(y, vec![0.0, 2.0]);
    }

    #[test]
    fn init_shapes_follow_spec() {
        let specs = [LayerSpec::new(2, 3, Activation::Relu)];
        let net = DenseNetwork::init(&specs, Seed(5)).unwrap();
        let (w, b) = net.layer(0);
        assert_eq!(w.len(), 6);
        assert_eq!(b.len(), 3);
        assert!(b.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let specs = [
            LayerSpec::new(4, 8, Activation::Relu),
            LayerSpec::new(8, 2, Activation::Sigmoid),
        ];
        let a = DenseNetwork::init(&specs, Seed(1)).unwrap();
        let b = DenseNetwork::init(&specs, Seed(1)).unwrap();
        let c = DenseNetwork::init(&specs, Seed(2)).unwrap();
        assert_eq!(a.params(), b.params());
        assert!(a.params().iter().zip(c.params()).any(|(x, y)| x != y));
    }

    #[test]
    fn init_rejects_bad_specs() {
        assert_eq!(DenseNetwork::init(&[], Seed(0)), Err(Error::EmptySpec));
        assert_eq!(
            DenseNetwork::init(&[LayerSpec::new(0, 2, Activation::Relu)], Seed(0)),
            Err(Error::ZeroDimension)
        );
        let mismatched = [
            LayerSpec::new(2, 3, Activation::Relu),
            LayerSpec::new(4, 1, Activation::Relu),
        ];
        assert!(matches!(
            DenseNetwork::init(&mismatched, Seed(0)),
            Err(Error::LayerChainMismatch { .. })
        ));
    }

    #[test]
    fn forward_rejects_bad_input() {
        let specs = [LayerSpec::new(2, 2, Activation::Identity)];
        let net = DenseNetwork::init(&specs, Seed(0)).unwrap();
        assert!(matches!(
            net.forward(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            net.forward(&[f64::NAN, 0.0]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn linear_net_weight_gradient_is_outer_product() {
        let specs = [LayerSpec::new(3, 2, Activation::Identity)];
        let net = DenseNetwork::init(&specs, Seed(3)).unwrap();
        let x = [0.5, -1.0, 2.0];
        let c = [2.0, -3.0];
        let (_, tape) = net.forward(&x).unwrap();
        let (grads, _) = net.backward(&tape, &c).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert!((grads[i * 3 + j] - c[i] * x[j]).abs() < 1e-12);
            }
            assert!((grads[6 + i] - c[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let specs = [
            LayerSpec::new(3, 5, Activation::Tanh),
            LayerSpec::new(5, 2, Activation::Sigmoid),
        ];
        let net = DenseNetwork::init(&specs, Seed(5)).unwrap();
        let (_, tape) = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        let (grads, input_grad) = net.backward(&tape, &[0.0, 0.0]).unwrap();
        assert!(grads.iter().all(|&g| g == 0.0));
        assert!(input_grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_rejects_foreign_tape() {
        let a = DenseNetwork::init(&[LayerSpec::new(2, 3, Activation::Tanh)], Seed(0)).unwrap();
        let b = DenseNetwork::init(&[LayerSpec::new(2, 4, Activation::Tanh)], Seed(0)).unwrap();
        let (_, tape) = a.forward(&[0.1, 0.2]).unwrap();
        assert!(matches!(
            b.backward(&tape, &[0.0; 4]),
            Err(Error::TapeMismatch)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn chained_forward_equals_manual_composition(seed in 0u64..500) {
            let specs = [
                LayerSpec::new(3, 4, Activation::Tanh),
                LayerSpec::new(4, 2, Activation::Sigmoid),
            ];
            let whole = DenseNetwork::init(&specs, Seed(seed)).unwrap();
            let first =
                DenseNetwork::from_params(&specs[..1], whole.params()[..16].to_vec()).unwrap();
            let second =
                DenseNetwork::from_params(&specs[1..], whole.params()[16..].to_vec()).unwrap();
            let mut rng = Seed(seed ^ 0x9999).rng();
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let direct = whole.infer(&x).unwrap();
            let composed = second.infer(&first.infer(&x).unwrap()).unwrap();
            prop_assert_eq!(direct, composed);
        }
    }

    #[test]
    fn adam_zero_gradient_leaves_params_unchanged() {
        let mut params = vec![1.0, -2.0, 3.0];
        let mut state = AdamState::new(3, 0.002);
        state.step(&mut params, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(params, vec![1.0, -2.0, 3.0]);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn adam_first_step_has_learning_rate_magnitude() {
        let mut params = vec![0.0];
        let mut state = AdamState::new(1, 0.002);
        state.step(&mut params, &[0.37]).unwrap();
        // Bias correction makes the first update a near-unit sign step.
        assert!((params[0].abs() - 0.002).abs() < 1e-9, "step {}", params[0]);
        assert!(params[0] < 0.0);
    }

    #[test]
    fn adam_converges_on_scalar_quadratic() {
        let mut w = vec![0.0];
        let mut state = AdamState::new(1, 0.1);
        for _ in 0..200 {
            let grad = 2.0 * (w[0] - 3.0);
            state.step(&mut w, &[grad]).unwrap();
        }
        assert!((w[0] - 3.0).abs() < 0.1, "w = {}", w[0]);
        assert_eq!(state.step_count(), 200);
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut params = vec![0.0];
        let mut state = AdamState::new(1, 0.1);
        assert_eq!(
            state.step(&mut params, &[f64::INFINITY]),
            Err(Error::NonFiniteGradient)
        );
    }
}
