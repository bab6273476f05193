//! Minimal dense network with analytic gradients.
//!
//! Layers are affine maps followed by an elementwise activation. Forward
//! passes operate on whole row batches (one row per frame) so that frame
//! mappers amortize into matrix products. Gradients are exact derivatives
//! of the forward map and are validated against central finite differences
//! in the test suite.

pub mod checkpoint;
mod optim;

pub use optim::{ema_update, sgd_step, OptimizerState};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation *output*. For relu the
    /// subgradient at 0 is taken as 0.
    #[inline]
    fn deriv_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One dense layer: `act(W x + b)` with `W` stored row-major `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    fn forward_batch(&self, input: &Matrix) -> Matrix {
        let n = input.rows();
        let (d_in, d_out) = (self.in_dim(), self.out_dim());
        debug_assert_eq!(input.cols(), d_in);
        let mut out = Matrix::zeros(n, d_out);
        for r in 0..n {
            let x = input.row(r);
            let y = out.row_mut(r);
            for o in 0..d_out {
                let w = self.weights.row(o);
                let mut acc = self.bias[o];
                for i in 0..d_in {
                    acc += w[i] * x[i];
                }
                y[o] = self.activation.apply(acc);
            }
        }
        out
    }

    /// Accumulates parameter gradients into `grads` and returns the input
    /// gradient. `output` must be this layer's forward result for `input`.
    fn backward_batch(
        &self,
        input: &Matrix,
        output: &Matrix,
        out_grad: &Matrix,
        grads: &mut LayerGrads,
    ) -> Matrix {
        let n = input.rows();
        let (d_in, d_out) = (self.in_dim(), self.out_dim());
        let mut in_grad = Matrix::zeros(n, d_in);
        for r in 0..n {
            let x = input.row(r);
            let y = output.row(r);
            let gy = out_grad.row(r);
            let gx = in_grad.row_mut(r);
            for o in 0..d_out {
                let delta = gy[o] * self.activation.deriv_from_output(y[o]);
                if delta == 0.0 {
                    continue;
                }
                grads.bias[o] += delta;
                let gw = grads.weights.row_mut(o);
                let w = self.weights.row(o);
                for i in 0..d_in {
                    gw[i] += delta * x[i];
                    gx[i] += delta * w[i];
                }
            }
        }
        in_grad
    }
}

/// A stack of dense layers with chained dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

/// Per-batch activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    outputs: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.outputs.last().expect("cache holds at least one layer")
    }
}

impl DenseNet {
    /// Builds a network with the given layer dimensions and activations.
    /// Weights are drawn uniformly from ±sqrt(6/(in+out)), biases start at
    /// zero. The draw order (layers in order, each weight matrix row-major)
    /// is fixed so that a seed fully determines the parameters.
    pub fn new(dims: &[usize], activations: &[Activation], rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "need at least one layer");
        assert_eq!(dims.len() - 1, activations.len());
        let mut layers = Vec::with_capacity(activations.len());
        for (k, &act) in activations.iter().enumerate() {
            let (d_in, d_out) = (dims[k], dims[k + 1]);
            let bound = (6.0 / (d_in + d_out) as f64).sqrt();
            let mut w = Matrix::zeros(d_out, d_in);
            for v in w.data_mut() {
                *v = rng.random_range(-bound..bound);
            }
            layers.push(Layer {
                weights: w,
                bias: vec![0.0; d_out],
                activation: act,
            });
        }
        DenseNet { layers }
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Checkpoint("network has no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Dimension {
                    expected: pair[0].out_dim(),
                    got: pair[1].in_dim(),
                });
            }
        }
        Ok(DenseNet { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: input.cols(),
            });
        }
        if !input.is_finite() {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    /// Forward pass without a cache, for inference.
    pub fn infer(&self, input: &Matrix) -> Result<Matrix> {
        self.check_input(input)?;
        let mut cur = self.layers[0].forward_batch(input);
        for layer in &self.layers[1..] {
            cur = layer.forward_batch(&cur);
        }
        Ok(cur)
    }

    /// Forward pass keeping the activations needed by [`DenseNet::backward`].
    /// Takes ownership of the input batch; it becomes part of the cache.
    pub fn forward(&self, input: Matrix) -> Result<ForwardCache> {
        self.check_input(&input)?;
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut cur = self.layers[0].forward_batch(&input);
        for layer in &self.layers[1..] {
            let next = layer.forward_batch(&cur);
            outputs.push(cur);
            cur = next;
        }
        outputs.push(cur);
        Ok(ForwardCache { input, outputs })
    }

    /// Accumulates exact parameter gradients into `grads` and returns the
    /// gradient with respect to the cached input batch.
    pub fn backward(&self, cache: &ForwardCache, out_grad: &Matrix, grads: &mut NetGrads) -> Matrix {
        assert_eq!(grads.layers.len(), self.layers.len(), "stale gradient buffer");
        let mut gy = out_grad.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = if k == 0 {
                &cache.input
            } else {
                &cache.outputs[k - 1]
            };
            gy = layer.backward_batch(input, &cache.outputs[k], &gy, &mut grads.layers[k]);
        }
        gy
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.data().len() + l.bias.len())
            .sum()
    }

    /// Flat parameter view in checkpoint order: per layer, weights
    /// row-major, then bias.
    pub fn iter_params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| {
            l.weights
                .data()
                .iter()
                .copied()
                .chain(l.bias.iter().copied())
        })
    }

    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for l in &mut self.layers {
            for v in l.weights.data_mut() {
                f(v);
            }
            for v in &mut l.bias {
                f(v);
            }
        }
    }

    pub fn get_param(&self, idx: usize) -> f64 {
        self.iter_params().nth(idx).expect("parameter index in range")
    }

    pub fn set_param(&mut self, idx: usize, value: f64) {
        let mut k = 0;
        self.for_each_param_mut(|v| {
            if k == idx {
                *v = value;
            }
            k += 1;
        });
        assert!(idx < k, "parameter index out of range");
    }
}

/// Gradient buffer shaped like a [`DenseNet`].
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NetGrads {
    pub layers: Vec<LayerGrads>,
}

impl NetGrads {
    pub fn zeros_like(net: &DenseNet) -> Self {
        NetGrads {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &NetGrads, scale: f64) {
        assert_eq!(self.layers.len(), other.layers.len());
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.data_mut().iter_mut().zip(b.weights.data()) {
                *x += scale * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += scale * y;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| {
            l.weights
                .data()
                .iter()
                .copied()
                .chain(l.bias.iter().copied())
        })
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, streams};

    fn single_row(values: &[f64]) -> Matrix {
        Matrix::from_row(values)
    }

    /// Central finite differences over all parameters of `net` for the
    /// scalar loss `loss(net)`; independent of the analytic backward path.
    fn fd_param_grads(net: &DenseNet, loss: &mut impl FnMut(&DenseNet) -> f64, h: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(net.param_count());
        for idx in 0..net.param_count() {
            let orig = net.get_param(idx);
            let mut plus = net.clone();
            plus.set_param(idx, orig + h);
            let mut minus = net.clone();
            minus.set_param(idx, orig - h);
            out.push((loss(&plus) - loss(&minus)) / (2.0 * h));
        }
        out
    }

    fn assert_grads_close(analytic: &[f64], numeric: &[f64], rel: f64, abs_floor: f64) {
        assert_eq!(analytic.len(), numeric.len());
        for (k, (a, n)) in analytic.iter().zip(numeric).enumerate() {
            let tol = abs_floor + rel * a.abs().max(n.abs());
            assert!(
                (a - n).abs() <= tol,
                "param {k}: analytic {a} vs numeric {n}"
            );
        }
    }

    fn zeroed(dims: &[usize], acts: &[Activation]) -> DenseNet {
        let mut rng = stream_rng(0, streams::MODEL_INIT);
        let mut net = DenseNet::new(dims, acts, &mut rng);
        net.for_each_param_mut(|v| *v = 0.0);
        net
    }

    #[test]
    fn zero_net_sigmoid_outputs_half() {
        let net = zeroed(&[3, 4, 2], &[Activation::Relu, Activation::Sigmoid]);
        let out = net.infer(&single_row(&[0.3, -1.0, 2.0])).unwrap();
        for &v in out.row(0) {
            assert_eq!(v, 0.5);
        }
    }

    #[test]
    fn two_layer_hand_evaluation() {
        // 1 -> 1 -> 1: hidden relu w=2 b=0, output sigmoid w=1 b=0.
        let mut net = zeroed(&[1, 1, 1], &[Activation::Relu, Activation::Sigmoid]);
        net.set_param(0, 2.0);
        net.set_param(2, 1.0);
        let out = net.infer(&single_row(&[1.0])).unwrap();
        assert!((out.row(0)[0] - 0.880797).abs() < 1e-6);
    }

    #[test]
    fn relu_clamps_negative_preactivation() {
        let mut net = zeroed(&[1, 1], &[Activation::Relu]);
        net.set_param(0, 1.0);
        let out = net.infer(&single_row(&[-3.0])).unwrap();
        assert_eq!(out.row(0)[0], 0.0);
    }

    #[test]
    fn sigmoid_gradient_at_zero_is_quarter() {
        let mut net = zeroed(&[1, 1], &[Activation::Sigmoid]);
        net.set_param(0, 1.0); // w=1, b=0; input 0 gives pre-activation 0
        let cache = net.forward(single_row(&[0.0])).unwrap();
        let mut grads = NetGrads::zeros_like(&net);
        let in_grad = net.backward(&cache, &single_row(&[1.0]), &mut grads);
        assert_eq!(in_grad.row(0)[0], 0.25);
    }

    #[test]
    fn zero_output_gradient_gives_zero_param_grads() {
        let mut rng = stream_rng(3, streams::MODEL_INIT);
        let net = DenseNet::new(
            &[4, 5, 2],
            &[Activation::Relu, Activation::Sigmoid],
            &mut rng,
        );
        let cache = net.forward(single_row(&[0.1, -0.4, 0.8, 0.2])).unwrap();
        let mut grads = NetGrads::zeros_like(&net);
        net.backward(&cache, &Matrix::zeros(1, 2), &mut grads);
        assert!(grads.iter().all(|g| g == 0.0));
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        // Random nets up to 3 layers, widths <= 16, scalar losses through a
        // sum of sigmoid outputs.
        let shapes: [(&[usize], &[Activation]); 3] = [
            (&[3, 8, 1], &[Activation::Relu, Activation::Sigmoid]),
            (
                &[5, 16, 7, 2],
                &[Activation::Relu, Activation::Sigmoid, Activation::Sigmoid],
            ),
            (
                &[2, 4, 4, 1],
                &[Activation::Identity, Activation::Relu, Activation::Sigmoid],
            ),
        ];
        for (case, (dims, acts)) in shapes.iter().enumerate() {
            let mut rng = stream_rng(100 + case as u64, streams::MODEL_INIT);
            let net = DenseNet::new(dims, acts, &mut rng);
            let input: Vec<f64> = (0..dims[0]).map(|i| 0.3 * (i as f64) - 0.4).collect();
            let mut loss = |n: &DenseNet| -> f64 {
                n.infer(&single_row(&input)).unwrap().row(0).iter().sum()
            };

            let cache = net.forward(single_row(&input)).unwrap();
            let ones = Matrix::from_vec(1, net.output_dim(), vec![1.0; net.output_dim()]);
            let mut grads = NetGrads::zeros_like(&net);
            net.backward(&cache, &ones, &mut grads);

            let analytic: Vec<f64> = grads.iter().collect();
            let numeric = fd_param_grads(&net, &mut loss, 1e-5);
            assert_grads_close(&analytic, &numeric, 1e-4, 1e-7);
        }
    }

    #[test]
    fn init_is_deterministic_in_seed() {
        let make = || {
            let mut rng = stream_rng(42, streams::MODEL_INIT);
            DenseNet::new(
                &[6, 8, 1],
                &[Activation::Relu, Activation::Sigmoid],
                &mut rng,
            )
        };
        let a = make();
        let b = make();
        let xs: Vec<f64> = a.iter_params().collect();
        let ys: Vec<f64> = b.iter_params().collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn rejects_mismatched_input() {
        let net = zeroed(&[3, 2], &[Activation::Identity]);
        assert!(matches!(
            net.infer(&single_row(&[1.0, 2.0])),
            Err(Error::Dimension { expected: 3, got: 2 })
        ));
        assert!(matches!(
            net.infer(&single_row(&[1.0, f64::NAN, 0.0])),
            Err(Error::NonFinite(_))
        ));
    }
}
