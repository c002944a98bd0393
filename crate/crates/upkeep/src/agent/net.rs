//! Small two-head feedforward function approximator with hand-rolled
//! forward/backward passes and an Adam optimizer, all in f64 so training is
//! bit-reproducible for a fixed seed.
//!
//! Layout: input -> tanh(hidden) -> tanh(hidden) -> {action logits, value}.
//! Parameters live in one flat vector so the optimizer and the
//! finite-difference checks can treat the network as a plain function
//! `R^n -> R`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Network dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub input: usize,
    pub hidden: usize,
    pub actions: usize,
}

impl NetShape {
    pub fn parameter_count(&self) -> usize {
        let NetShape {
            input,
            hidden,
            actions,
        } = *self;
        hidden * input + hidden            // first layer
            + hidden * hidden + hidden     // second layer
            + actions * hidden + actions   // policy head
            + hidden + 1 // value head
    }
}

/// Trained weights of the two-head network, flat and versioned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParameters {
    pub shape: NetShape,
    pub theta: Vec<f64>,
}

impl PolicyParameters {
    /// Seeded initialization: Xavier-uniform hidden layers, a damped policy
    /// head (near-uniform initial policy) and a damped value head.
    pub fn init(shape: NetShape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = Vec::with_capacity(shape.parameter_count());
        let mut layer = |fan_in: usize, fan_out: usize, gain: f64, theta: &mut Vec<f64>| {
            let bound = gain * (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_out * fan_in {
                theta.push(bound * (2.0 * rng.random::<f64>() - 1.0));
            }
            for _ in 0..fan_out {
                theta.push(0.0);
            }
        };
        layer(shape.input, shape.hidden, 1.0, &mut theta);
        layer(shape.hidden, shape.hidden, 1.0, &mut theta);
        layer(shape.hidden, shape.actions, 0.01, &mut theta);
        layer(shape.hidden, 1, 0.1, &mut theta);
        debug_assert_eq!(theta.len(), shape.parameter_count());
        Self { shape, theta }
    }
}

/// Offsets of each block inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    w4: usize,
    b4: usize,
}

fn offsets(shape: &NetShape) -> Offsets {
    let w1 = 0;
    let b1 = w1 + shape.hidden * shape.input;
    let w2 = b1 + shape.hidden;
    let b2 = w2 + shape.hidden * shape.hidden;
    let w3 = b2 + shape.hidden;
    let b3 = w3 + shape.actions * shape.hidden;
    let w4 = b3 + shape.actions;
    let b4 = w4 + shape.hidden;
    Offsets {
        w1,
        b1,
        w2,
        b2,
        w3,
        b3,
        w4,
        b4,
    }
}

/// Activations cached by a forward pass, needed for backprop.
#[derive(Debug, Clone)]
pub struct Forward {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub logits: Vec<f64>,
    pub value: f64,
}

pub fn forward(params: &PolicyParameters, x: &[f64]) -> Forward {
    let shape = &params.shape;
    debug_assert_eq!(x.len(), shape.input);
    let o = offsets(shape);
    let t = &params.theta;

    let mut h1 = vec![0.0; shape.hidden];
    for (j, h) in h1.iter_mut().enumerate() {
        let mut z = t[o.b1 + j];
        let row = o.w1 + j * shape.input;
        for (i, &xi) in x.iter().enumerate() {
            z += t[row + i] * xi;
        }
        *h = z.tanh();
    }
    let mut h2 = vec![0.0; shape.hidden];
    for (j, h) in h2.iter_mut().enumerate() {
        let mut z = t[o.b2 + j];
        let row = o.w2 + j * shape.hidden;
        for (i, &hi) in h1.iter().enumerate() {
            z += t[row + i] * hi;
        }
        *h = z.tanh();
    }
    let mut logits = vec![0.0; shape.actions];
    for (a, l) in logits.iter_mut().enumerate() {
        let mut z = t[o.b3 + a];
        let row = o.w3 + a * shape.hidden;
        for (i, &hi) in h2.iter().enumerate() {
            z += t[row + i] * hi;
        }
        *l = z;
    }
    let mut value = t[o.b4];
    for (i, &hi) in h2.iter().enumerate() {
        value += t[o.w4 + i] * hi;
    }
    Forward {
        h1,
        h2,
        logits,
        value,
    }
}

/// Accumulates `d loss / d theta` into `grad` given upstream gradients on
/// the logits and the value output.
pub fn backward(
    params: &PolicyParameters,
    x: &[f64],
    fwd: &Forward,
    dlogits: &[f64],
    dvalue: f64,
    grad: &mut [f64],
) {
    let shape = &params.shape;
    let o = offsets(shape);
    let t = &params.theta;
    let mut dh2 = vec![0.0; shape.hidden];

    // Value head.
    for (i, &hi) in fwd.h2.iter().enumerate() {
        grad[o.w4 + i] += dvalue * hi;
        dh2[i] += dvalue * t[o.w4 + i];
    }
    grad[o.b4] += dvalue;

    // Policy head.
    for (a, &dl) in dlogits.iter().enumerate() {
        if dl == 0.0 {
            continue;
        }
        let row = o.w3 + a * shape.hidden;
        for (i, &hi) in fwd.h2.iter().enumerate() {
            grad[row + i] += dl * hi;
            dh2[i] += dl * t[row + i];
        }
        grad[o.b3 + a] += dl;
    }

    // Second hidden layer.
    let mut dh1 = vec![0.0; shape.hidden];
    for (j, &d) in dh2.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let dz = d * (1.0 - fwd.h2[j] * fwd.h2[j]);
        let row = o.w2 + j * shape.hidden;
        for (i, &hi) in fwd.h1.iter().enumerate() {
            grad[row + i] += dz * hi;
            dh1[i] += dz * t[row + i];
        }
        grad[o.b2 + j] += dz;
    }

    // First hidden layer.
    for (j, &d) in dh1.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let dz = d * (1.0 - fwd.h1[j] * fwd.h1[j]);
        let row = o.w1 + j * shape.input;
        for (i, &xi) in x.iter().enumerate() {
            grad[row + i] += dz * xi;
        }
        grad[o.b1 + j] += dz;
    }
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|l| l - log_sum).collect()
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(learning_rate: f64, n_params: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// One descent step on `theta` along `grad`.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape() -> NetShape {
        NetShape {
            input: 9,
            hidden: 16,
            actions: 2,
        }
    }

    #[test]
    fn parameter_count_matches_layout() {
        let s = shape();
        let p = PolicyParameters::init(s, 0);
        assert_eq!(p.theta.len(), s.parameter_count());
    }

    #[test]
    fn forward_is_deterministic() {
        let p = PolicyParameters::init(shape(), 7);
        let x = [0.1, -0.4, 0.9, 0.0, 0.5, 0.2, -0.3, 0.8, 1.0];
        let a = forward(&p, &x);
        let b = forward(&p, &x);
        assert_eq!(a.logits, b.logits);
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn log_softmax_normalizes() {
        let ls = log_softmax(&[1.0, 2.0, 3.0]);
        let total: f64 = ls.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    /// Central-difference check of the raw backprop on a synthetic scalar
    /// loss `sum(logits * c) + value * cv`.
    #[test]
    fn backward_matches_finite_differences()  {
        let p = PolicyParameters::init(shape(), 3);
        let x = [0.3, -0.2, 0.7, 0.1, -0.9, 0.4, 0.0, 0.6, -0.5];
        let c = [0.7, -1.3];
        let cv = 0.9;

        let loss = |params: &PolicyParameters| -> f64 {
            let f = forward(params, &x);
            f.logits[0] * c[0] + f.logits[1] * c[1] + f.value * cv
        };
        let fwd = forward(&p, &x);
        let mut grad = vec![0.0; p.theta.len()];
        backward(&p, &x, &fwd, &c, cv, &mut grad);

        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..64 {
            let i = rng.random_range(0..p.theta.len());
            let mut plus = p.clone();
            let mut minus = p.clone();
            let h = 1e-6 * (1.0 + plus.theta[i].abs());
            plus.theta[i] += h;
            minus.theta[i] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let denom = fd.abs().max(grad[i].abs()).max(1e-8);
            assert!(
                (fd - grad[i]).abs() / denom < 1e-4,
                "param {i}: analytic {} vs fd {fd}",
                grad[i]
            );
        }
    }

    #[test]
    fn adam_reduces_a_quadratic() {
        let mut theta = vec![5.0, -3.0];
        let mut adam = Adam::new(0.1, 2);
        for _ in 0..2000 {
            let grad: Vec<f64> = theta.iter().map(|t| 2.0 * t).collect();
            adam.step(&mut theta, &grad);
        }
        assert!(theta.iter().all(|t| t.abs() < 1e-2), "{theta:?}");
    }
}
