//! SGD with momentum and inverse-time learning-rate decay, plus the EMA
//! parameter average used for teacher models.

use serde::{Deserialize, Serialize};

use super::{DenseNet, NetGrads};
use crate::error::{Error, Result};

/// Optimizer state for one network.
///
/// The effective learning rate at step `n` is `lr0 / (1 + decay * n)`,
/// which is constant for `decay = 0` and strictly decreasing otherwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate0: f64,
    pub decay: f64,
    pub momentum: f64,
    pub iteration: u64,
    #[serde(skip)]
    velocity: Option<NetGrads>,
}

impl OptimizerState {
    pub fn new(learning_rate0: f64, decay: f64, momentum: f64) -> Self {
        assert!(learning_rate0 > 0.0, "learning rate must be positive");
        assert!(decay >= 0.0, "decay must be nonnegative");
        assert!((0.0..1.0).contains(&momentum), "momentum must be in [0,1)");
        OptimizerState {
            learning_rate0,
            decay,
            momentum,
            iteration: 0,
            velocity: None,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate0 / (1.0 + self.decay * self.iteration as f64)
    }
}

/// One SGD-with-momentum step: `v <- momentum*v + g`, `theta <- theta - lr(n)*v`.
///
/// Non-finite gradients abort the step; parameters and state are left
/// untouched in that case.
pub fn sgd_step(net: &mut DenseNet, grads: &NetGrads, state: &mut OptimizerState) -> Result<()> {
    if grads.layers.len() != net.layers().len() {
        return Err(Error::Training("gradient/network layer count mismatch".into()));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradients; step aborted".into()));
    }
    let lr = state.learning_rate();
    let momentum = state.momentum;
    let velocity = state
        .velocity
        .get_or_insert_with(|| NetGrads::zeros_like(net));

    for (k, layer) in net.layers.iter_mut().enumerate() {
        let v = &mut velocity.layers[k];
        let g = &grads.layers[k];
        for ((w, vw), gw) in layer
            .weights
            .data_mut()
            .iter_mut()
            .zip(v.weights.data_mut())
            .zip(g.weights.data())
        {
            *vw = momentum * *vw + gw;
            *w -= lr * *vw;
        }
        for ((b, vb), gb) in layer.bias.iter_mut().zip(&mut v.bias).zip(&g.bias) {
            *vb = momentum * *vb + gb;
            *b -= lr * *vb;
        }
    }
    state.iteration += 1;
    Ok(())
}

/// Elementwise EMA update `theta_t <- alpha*theta_t + (1-alpha)*theta_s`.
pub fn ema_update(teacher: &mut DenseNet, student: &DenseNet, alpha: f64) -> Result<()> {
    assert!((0.0..=1.0).contains(&alpha), "alpha must be in [0,1]");
    if teacher.param_count() != student.param_count() {
        return Err(Error::Dimension {
            expected: teacher.param_count(),
            got: student.param_count(),
        });
    }
    let mut src = student.iter_params();
    teacher.for_each_param_mut(|t| {
        let s = src.next().expect("equal parameter counts");
        *t = alpha * *t + (1.0 - alpha) * s;
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::Matrix;
    use crate::nnet::{Activation, Layer};

    fn scalar_net(w: f64) -> DenseNet {
        DenseNet::from_layers(vec![Layer {
            weights: Matrix::from_vec(1, 1, vec![w]),
            bias: vec![0.0],
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    fn scalar_grads(g: f64) -> NetGrads {
        let net = scalar_net(0.0);
        let mut grads = NetGrads::zeros_like(&net);
        grads.layers[0].weights.data_mut()[0] = g;
        grads
    }

    #[test]
    fn plain_gradient_step() {
        let mut net = scalar_net(1.0);
        let mut st = OptimizerState::new(0.1, 0.0, 0.0);
        sgd_step(&mut net, &scalar_grads(1.0), &mut st).unwrap();
        assert_eq!(net.get_param(0), 0.9);
        assert_eq!(st.iteration, 1);
    }

    #[test]
    fn learning_rate_decays_inverse_time() {
        let mut st = OptimizerState::new(0.1, 0.01, 0.0);
        st.iteration = 100;
        assert!((st.learning_rate() - 0.05).abs() < 1e-15);

        // Strictly decreasing with decay > 0, constant at decay = 0.
        let mut prev = f64::INFINITY;
        for n in 0..10 {
            let mut s = OptimizerState::new(0.1, 0.01, 0.0);
            s.iteration = n;
            assert!(s.learning_rate() < prev);
            prev = s.learning_rate();
        }
        let mut flat = OptimizerState::new(0.1, 0.0, 0.0);
        flat.iteration = 1000;
        assert_eq!(flat.learning_rate(), 0.1);
    }

    #[test]
    fn momentum_unrolls_as_expected() {
        // momentum 0.9, fixed lr 0.1, g=1 twice: theta 0 -> -0.1 -> -0.29.
        let mut net = scalar_net(0.0);
        let mut st = OptimizerState::new(0.1, 0.0, 0.9);
        sgd_step(&mut net, &scalar_grads(1.0), &mut st).unwrap();
        assert!((net.get_param(0) + 0.1).abs() < 1e-15);
        sgd_step(&mut net, &scalar_grads(1.0), &mut st).unwrap();
        assert!((net.get_param(0) + 0.29).abs() < 1e-15);
    }

    #[test]
    fn nonfinite_gradient_aborts_step() {
        let mut net = scalar_net(1.0);
        let mut st = OptimizerState::new(0.1, 0.0, 0.0);
        let res = sgd_step(&mut net, &scalar_grads(f64::NAN), &mut st);
        assert!(matches!(res, Err(Error::NonFinite(_))));
        assert_eq!(net.get_param(0), 1.0);
        assert_eq!(st.iteration, 0);
    }

    #[test]
    fn ema_midpoint_and_degenerate_cases() {
        let student = scalar_net(0.0);

        let mut teacher = scalar_net(1.0);
        ema_update(&mut teacher, &student, 0.5).unwrap();
        assert_eq!(teacher.get_param(0), 0.5);

        let mut teacher = scalar_net(1.0);
        ema_update(&mut teacher, &student, 0.0).unwrap();
        assert_eq!(teacher.get_param(0), 0.0);

        let mut teacher = scalar_net(1.0);
        ema_update(&mut teacher, &student, 1.0).unwrap();
        assert_eq!(teacher.get_param(0), 1.0);
    }

    #[test]
    fn ema_converges_geometrically_to_constant_student() {
        let student = scalar_net(2.0);
        let mut teacher = scalar_net(0.0);
        let alpha = 0.5;
        let mut gap = 2.0;
        for _ in 0..20 {
            ema_update(&mut teacher, &student, alpha).unwrap();
            let new_gap = (teacher.get_param(0) - 2.0).abs();
            assert!((new_gap - alpha * gap).abs() < 1e-12);
            gap = new_gap;
        }
        assert!(gap < 1e-5);
    }
}
