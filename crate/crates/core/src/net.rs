//! Bias-free fully connected maps `f(z) = W_d φ(W_{d−1} … φ(W_1 z)…)` from
//! a space to itself, with exact gradients and input Jacobians.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::linalg::{LinalgError, Mat};

pub const LEAKY_RELU_SLOPE: f64 = 0.01;
pub const SELU_ALPHA: f64 = 1.6732632423543772;
pub const SELU_SCALE: f64 = 1.0507009873554805;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("input has dimension {got}, network expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("layer {layer} produced a non-finite activation")]
    NonFinite { layer: usize },
    #[error("layer shapes do not chain: {0}")]
    BadShape(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("unknown nonlinearity {0:?}")]
    UnknownNonlin(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlin {
    Relu,
    LeakyRelu(f64),
    Selu,
    /// `z · sigmoid(z)`
    Swish,
    /// `cos z − z`
    Cosid,
    /// `z + sin(10 z) / 5`
    Sinusoid,
    Sigmoid,
    /// `e^{2z}`
    Exp2,
    /// Odd power `sign(z)·|z|^m`
    Power(f64),
    Identity,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Nonlin {
    pub const ALL_NAMES: [&'static str; 10] = [
        "relu",
        "leaky_relu",
        "selu",
        "swish",
        "cosid",
        "sinusoid",
        "sigmoid",
        "exp2",
        "power",
        "identity",
    ];

    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Nonlin::Relu => z.max(0.0),
            Nonlin::LeakyRelu(s) => {
                if z > 0.0 {
                    z
                } else {
                    s * z
                }
            }
            Nonlin::Selu => {
                if z > 0.0 {
                    SELU_SCALE * z
                } else {
                    SELU_SCALE * SELU_ALPHA * z.exp_m1()
                }
            }
            Nonlin::Swish => z * sigmoid(z),
            Nonlin::Cosid => z.cos() - z,
            Nonlin::Sinusoid => z + (10.0 * z).sin() / 5.0,
            Nonlin::Sigmoid => sigmoid(z),
            Nonlin::Exp2 => (2.0 * z).exp(),
            Nonlin::Power(m) => z.signum() * z.abs().powf(m),
            Nonlin::Identity => z,
        }
    }

    /// φ′(z). Piecewise-linear units take the left derivative at 0.
    #[inline]
    pub fn deriv(self, z: f64) -> f64 {
        match self {
            Nonlin::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Nonlin::LeakyRelu(s) => {
                if z > 0.0 {
                    1.0
                } else {
                    s
                }
            }
            Nonlin::Selu => {
                if z > 0.0 {
                    SELU_SCALE
                } else {
                    SELU_SCALE * SELU_ALPHA * z.exp()
                }
            }
            Nonlin::Swish => {
                let s = sigmoid(z);
                s + z * s * (1.0 - s)
            }
            Nonlin::Cosid => -z.sin() - 1.0,
            Nonlin::Sinusoid => 1.0 + 2.0 * (10.0 * z).cos(),
            Nonlin::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Nonlin::Exp2 => 2.0 * (2.0 * z).exp(),
            Nonlin::Power(m) => m * z.abs().powf(m - 1.0),
            Nonlin::Identity => 1.0,
        }
    }

    /// φ(z)/φ′(z), the integrand of the gradient-flow energy relation.
    ///
    /// Closed forms avoid cancellation where they exist.
    pub fn flow_ratio(self, z: f64) -> f64 {
        match self {
            Nonlin::Sigmoid => 1.0 + z.exp(),
            Nonlin::Exp2 => 0.5,
            Nonlin::Identity => z,
            Nonlin::Power(m) => z / m,
            _ => self.eval(z) / self.deriv(z),
        }
    }

    /// φ′(z)·z/φ(z), the top Jacobian eigenvalue of a trained single-example
    /// rank-1 network with pre-activation `z`.
    pub fn gain(self, z: f64) -> f64 {
        match self {
            Nonlin::Sigmoid => (1.0 - sigmoid(z)) * z,
            Nonlin::Exp2 => 2.0 * z,
            Nonlin::Identity => 1.0,
            Nonlin::Power(m) => m,
            _ => self.deriv(z) * z / self.eval(z),
        }
    }

    /// Differentiable everywhere (no kinks).
    pub fn is_smooth(self) -> bool {
        match self {
            Nonlin::Relu | Nonlin::LeakyRelu(_) => false,
            Nonlin::Power(m) => m >= 1.0,
            _ => true,
        }
    }

    /// True when `φ/φ′` stays finite on `[lo, hi]`, checked on a fine grid.
    pub fn ratio_finite_on(self, lo: f64, hi: f64) -> bool {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let steps = 2000;
        (0..=steps).all(|i| {
            let z = lo + (hi - lo) * i as f64 / steps as f64;
            let d = self.deriv(z);
            d != 0.0 && d.is_finite() && self.flow_ratio(z).is_finite()
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Nonlin::Relu => "relu",
            Nonlin::LeakyRelu(_) => "leaky_relu",
            Nonlin::Selu => "selu",
            Nonlin::Swish => "swish",
            Nonlin::Cosid => "cosid",
            Nonlin::Sinusoid => "sinusoid",
            Nonlin::Sigmoid => "sigmoid",
            Nonlin::Exp2 => "exp2",
            Nonlin::Power(_) => "power",
            Nonlin::Identity => "identity",
        }
    }

    /// Stable one-byte tag used by checkpoints.
    pub fn id_byte(self) -> u8 {
        match self {
            Nonlin::Relu => 0,
            Nonlin::LeakyRelu(_) => 1,
            Nonlin::Selu => 2,
            Nonlin::Swish => 3,
            Nonlin::Cosid => 4,
            Nonlin::Sinusoid => 5,
            Nonlin::Sigmoid => 6,
            Nonlin::Exp2 => 7,
            Nonlin::Power(_) => 8,
            Nonlin::Identity => 9,
        }
    }

    pub fn param(self) -> f64 {
        match self {
            Nonlin::LeakyRelu(s) => s,
            Nonlin::Power(m) => m,
            _ => 0.0,
        }
    }

    pub fn from_id(id: u8, param: f64) -> Option<Self> {
        Some(match id {
            0 => Nonlin::Relu,
            1 => Nonlin::LeakyRelu(param),
            2 => Nonlin::Selu,
            3 => Nonlin::Swish,
            4 => Nonlin::Cosid,
            5 => Nonlin::Sinusoid,
            6 => Nonlin::Sigmoid,
            7 => Nonlin::Exp2,
            8 => Nonlin::Power(param),
            9 => Nonlin::Identity,
            _ => return None,
        })
    }
}

impl fmt::Display for Nonlin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlin::Power(m) => write!(f, "power:{m}"),
            Nonlin::LeakyRelu(s) if *s != LEAKY_RELU_SLOPE => write!(f, "leaky_relu:{s}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Nonlin {
    type Err = NetError;

    /// Parses `sigmoid`, `power:2`, `leaky_relu`, `leaky_relu:0.2`, …
    fn from_str(s: &str) -> Result<Self, NetError> {
        let s = s.trim().to_ascii_lowercase();
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (
                n.to_string(),
                Some(
                    p.parse::<f64>()
                        .map_err(|_| NetError::UnknownNonlin(s.clone()))?,
                ),
            ),
            None => (s.clone(), None),
        };
        let nl = match name.as_str() {
            "relu" => Nonlin::Relu,
            "leaky_relu" | "leakyrelu" => Nonlin::LeakyRelu(param.unwrap_or(LEAKY_RELU_SLOPE)),
            "selu" => Nonlin::Selu,
            "swish" => Nonlin::Swish,
            "cosid" => Nonlin::Cosid,
            "sinusoid" | "sin" => Nonlin::Sinusoid,
            "sigmoid" => Nonlin::Sigmoid,
            "exp2" => Nonlin::Exp2,
            "power" => Nonlin::Power(param.ok_or_else(|| NetError::UnknownNonlin(s.clone()))?),
            "identity" | "linear" => Nonlin::Identity,
            _ => return Err(NetError::UnknownNonlin(s)),
        };
        Ok(nl)
    }
}

/// A bias-free fully connected map from `R^{k_0}` to itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    dims: Vec<usize>,
    weights: Vec<Mat>,
    nonlin: Nonlin,
}

/// Everything one forward pass computes, kept for Jacobians and backprop.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Pre-activations of the hidden layers, `W_i h_{i−1}` for `i < d`.
    pub preacts: Vec<Vec<f64>>,
    pub output: Vec<f64>,
    /// Number of hidden pre-activations sitting exactly on a kink.
    pub kinks: usize,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    /// `∂L/∂W_i`, one per layer.
    pub grads: Vec<Mat>,
    /// `½ Σ ‖target − f(input)‖²`.
    pub loss: f64,
}

impl Net {
    /// Wraps layer matrices `W_1 … W_d` (input to output).
    pub fn new(weights: Vec<Mat>, nonlin: Nonlin) -> Result<Self, NetError> {
        let first = weights
            .first()
            .ok_or_else(|| NetError::BadShape("no layers".into()))?;
        let mut dims = vec![first.cols()];
        for (i, w) in weights.iter().enumerate() {
            if w.cols() != *dims.last().unwrap() {
                return Err(NetError::BadShape(format!(
                    "layer {} has {} inputs, previous layer has {} outputs",
                    i + 1,
                    w.cols(),
                    dims.last().unwrap()
                )));
            }
            dims.push(w.rows());
        }
        if dims[0] != *dims.last().unwrap() {
            return Err(NetError::BadShape(format!(
                "output dim {} differs from input dim {}",
                dims.last().unwrap(),
                dims[0]
            )));
        }
        Ok(Self {
            dims,
            weights,
            nonlin,
        })
    }

    /// All-zero weights with widths `k_0 … k_d`.
    pub fn zeros(dims: &[usize], nonlin: Nonlin) -> Result<Self, NetError> {
        if dims.len() < 2 {
            return Err(NetError::BadShape("need at least two dims".into()));
        }
        let weights = dims.windows(2).map(|w| Mat::zeros(w[1], w[0])).collect();
        Self::new(weights, nonlin)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of weight layers `d`.
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn weights(&self) -> &[Mat] {
        &self.weights
    }

    /// Mutable access to the layers. Shapes must not change.
    pub fn weights_mut(&mut self) -> &mut [Mat] {
        &mut self.weights
    }

    pub fn nonlin(&self) -> Nonlin {
        self.nonlin
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.rows() * w.cols()).sum()
    }

    fn check_input(&self, z: &[f64]) -> Result<(), NetError> {
        if z.len() != self.dims[0] {
            return Err(NetError::DimMismatch {
                expected: self.dims[0],
                got: z.len(),
            });
        }
        Ok(())
    }

    /// Forward pass retaining every hidden pre-activation.
    pub fn forward(&self, z: &[f64]) -> Result<Forward, NetError> {
        self.check_input(z)?;
        let d = self.weights.len();
        let mut preacts = Vec::with_capacity(d - 1);
        let mut h = z.to_vec();
        let mut kinks = 0;
        let smooth = self.nonlin.is_smooth();
        for (i, w) in self.weights.iter().enumerate() {
            let mut pre = vec![0.0; w.rows()];
            w.matvec_into(&h, &mut pre);
            if pre.iter().any(|v| !v.is_finite()) {
                return Err(NetError::NonFinite { layer: i + 1 });
            }
            if i + 1 == d {
                return Ok(Forward {
                    preacts,
                    output: pre,
                    kinks,
                });
            }
            if !smooth {
                kinks += pre.iter().filter(|v| **v == 0.0).count();
            }
            h = pre.iter().map(|v| self.nonlin.eval(*v)).collect();
            if h.iter().any(|v| !v.is_finite()) {
                return Err(NetError::NonFinite { layer: i + 1 });
            }
            preacts.push(pre);
        }
        unreachable!("network has at least one layer")
    }

    /// `f(z)` only.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>, NetError> {
        self.forward(z).map(|f| f.output)
    }

    /// Exact input Jacobian `W_d · diag(φ′) · … · diag(φ′) · W_1` at `z`.
    pub fn jacobian(&self, z: &[f64]) -> Result<Mat, NetError> {
        let fwd = self.forward(z)?;
        Ok(self.jacobian_from(&fwd))
    }

    /// Jacobian from a retained forward pass.
    pub fn jacobian_from(&self, fwd: &Forward) -> Mat {
        let mut m = self.weights[0].clone();
        for (i, w) in self.weights.iter().enumerate().skip(1) {
            let slopes: Vec<f64> = fwd.preacts[i - 1]
                .iter()
                .map(|v| self.nonlin.deriv(*v))
                .collect();
            m.scale_rows(&slopes);
            m = w.matmul(&m).expect("layer shapes chain");
        }
        m
    }

    /// Loss `½ Σ ‖target − f(input)‖²` over the batch and its gradient with
    /// respect to every layer, by reverse accumulation over the whole batch.
    pub fn loss_grads(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> Result<Gradients, NetError> {
        if inputs.is_empty() {
            return Err(NetError::EmptyBatch);
        }
        if inputs.len() != targets.len() {
            return Err(NetError::BadShape(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        for (x, t) in inputs.iter().zip(targets) {
            self.check_input(x)?;
            self.check_input(t)?;
        }
        let n = inputs.len();
        let d = self.weights.len();
        let k0 = self.dims[0];

        // Batch matrices hold one example per row.
        let mut acts: Vec<Mat> = Vec::with_capacity(d);
        let mut pres: Vec<Mat> = Vec::with_capacity(d - 1);
        let mut h0 = Mat::zeros(n, k0);
        for (r, x) in inputs.iter().enumerate() {
            h0.row_mut(r).copy_from_slice(x);
        }
        acts.push(h0);
        let mut out = Mat::zeros(0, 0);
        for (i, w) in self.weights.iter().enumerate() {
            let z = acts[i].matmul(&w.transpose())?;
            if !z.is_finite() {
                return Err(NetError::NonFinite { layer: i + 1 });
            }
            if i + 1 == d {
                out = z;
                break;
            }
            let mut h = z.clone();
            h.data_mut()
                .iter_mut()
                .for_each(|v| *v = self.nonlin.eval(*v));
            if !h.is_finite() {
                return Err(NetError::NonFinite { layer: i + 1 });
            }
            pres.push(z);
            acts.push(h);
        }

        // delta = ∂L/∂(pre-activation), starting at the linear output layer.
        let mut delta = out;
        let mut loss = 0.0;
        for (r, t) in targets.iter().enumerate() {
            for (o, tv) in delta.row_mut(r).iter_mut().zip(t.iter()) {
                *o -= tv;
                loss += *o * *o;
            }
        }
        loss *= 0.5;

        let mut grads = vec![Mat::zeros(0, 0); d];
        for i in (0..d).rev() {
            grads[i] = delta.transpose().matmul(&acts[i])?;
            if i > 0 {
                let mut back = delta.matmul(&self.weights[i])?;
                for (b, z) in back.data_mut().iter_mut().zip(pres[i - 1].data()) {
                    *b *= self.nonlin.deriv(*z);
                }
                delta = back;
            }
        }
        Ok(Gradients { grads, loss })
    }

    /// Loss only, without gradients.
    pub fn loss(&self, inputs: &[&[f64]], targets: &[&[f64]]) -> Result<f64, NetError> {
        let mut loss = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            let y = self.apply(x)?;
            for (a, b) in y.iter().zip(t.iter()) {
                loss += (a - b) * (a - b);
            }
        }
        Ok(0.5 * loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_net(dims: &[usize], nonlin: Nonlin, seed: u64, scale: f64) -> Net {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = dims
            .windows(2)
            .map(|w| {
                let data = (0..w[0] * w[1])
                    .map(|_| rng.random_range(-scale..scale))
                    .collect();
                Mat::from_vec(w[1], w[0], data).unwrap()
            })
            .collect();
        Net::new(weights, nonlin).unwrap()
    }

    #[test]
    fn identity_layers_give_identity_map() {
        let net = Net::new(vec![Mat::identity(3), Mat::identity(3)], Nonlin::Identity).unwrap();
        let z = [0.3, -1.2, 4.0];
        assert_eq!(net.apply(&z).unwrap(), z.to_vec());
        assert_eq!(net.jacobian(&z).unwrap(), Mat::identity(3));
    }

    #[test]
    fn rank_one_forward_matches_scalar_structure() {
        // W_1 = v xᵀ, W_2 = x uᵀ with ‖x‖ = 1: f(x) = x · uᵀφ(v).
        let x = [0.6, 0.0, 0.8];
        let u = [0.4, -0.3];
        let v = [1.1, 0.2];
        let net = Net::new(vec![Mat::outer(&v, &x), Mat::outer(&x, &u)], Nonlin::Sigmoid).unwrap();
        let c: f64 = u.iter().zip(&v).map(|(a, b)| a * Nonlin::Sigmoid.eval(*b)).sum();
        let y = net.apply(&x).unwrap();
        for (yi, xi) in y.iter().zip(&x) {
            assert!((yi - xi * c).abs() < 1e-15);
        }
        // J = x (uᵀ(φ′(v) ⊙ v)) xᵀ
        let lam: f64 = u
            .iter()
            .zip(&v)
            .map(|(a, b)| a * Nonlin::Sigmoid.deriv(*b) * b)
            .sum();
        let mut expect = Mat::outer(&x, &x);
        expect.scale(lam);
        assert!(net.jacobian(&x).unwrap().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn forward_matches_naive_recomputation_bitwise() {
        let net = random_net(&[4, 6, 5, 4], Nonlin::Cosid, 7, 0.8);
        let z = [0.1, -0.7, 0.35, 0.9];
        let mut h = z.to_vec();
        for (i, w) in net.weights().iter().enumerate() {
            let mut next = vec![0.0; w.rows()];
            for r in 0..w.rows() {
                let mut acc = 0.0;
                for c in 0..w.cols() {
                    acc += w[(r, c)] * h[c];
                }
                next[r] = if i + 1 < net.depth() {
                    acc.cos() - acc
                } else {
                    acc
                };
            }
            h = next;
        }
        let y = net.apply(&z).unwrap();
        for (a, b) in y.iter().zip(&h) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(
            net.apply(&z).unwrap(),
            y,
            "forward must be deterministic"
        );
    }

    #[test]
    fn zero_residual_gives_zero_gradients() {
        let net = Net::new(vec![Mat::identity(2), Mat::identity(2)], Nonlin::Identity).unwrap();
        let x = [0.2, 0.5];
        let g = net.loss_grads(&[&x], &[&x]).unwrap();
        assert_eq!(g.loss, 0.0);
        assert!(g.grads.iter().all(|m| m.data().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn one_hidden_gradients_match_closed_form_updates() {
        // A ← A + γ (x − Aφ(Bx)) φ(Bx)ᵀ ; B ← B + γ diag(φ′(Bx)) Aᵀ (x − Aφ(Bx)) xᵀ
        let x = [0.48, 0.6, 0.64];
        let a0 = [0.9, 1.3, -0.2, 0.5];
        let b0 = [0.3, -0.4, 1.0, 0.7];
        let b = Mat::outer(&b0, &x);
        let a = Mat::outer(&x, &a0);
        let phi = Nonlin::Sigmoid;
        let net = Net::new(vec![b.clone(), a.clone()], phi).unwrap();
        let g = net.loss_grads(&[&x], &[&x]).unwrap();

        let bx = b.matvec(&x).unwrap();
        let h: Vec<f64> = bx.iter().map(|v| phi.eval(*v)).collect();
        let ah = a.matvec(&h).unwrap();
        let resid: Vec<f64> = x.iter().zip(&ah).map(|(p, q)| p - q).collect();
        let neg_grad_a = Mat::outer(&resid, &h);
        let at_r = a.tmatvec(&resid).unwrap();
        let s: Vec<f64> = at_r
            .iter()
            .zip(&bx)
            .map(|(p, z)| p * phi.deriv(*z))
            .collect();
        let neg_grad_b = Mat::outer(&s, &x);
        for (got, want) in g.grads[1].data().iter().zip(neg_grad_a.data()) {
            assert!((got + want).abs() < 1e-12);
        }
        for (got, want) in g.grads[0].data().iter().zip(neg_grad_b.data()) {
            assert!((got + want).abs() < 1e-12);
        }
    }

    #[test]
    fn errors_are_reported() {
        let net = random_net(&[3, 4, 3], Nonlin::Sigmoid, 1, 1.0);
        assert!(matches!(
            net.apply(&[1.0, 2.0]),
            Err(NetError::DimMismatch { expected: 3, got: 2 })
        ));
        assert!(matches!(net.loss_grads(&[], &[]), Err(NetError::EmptyBatch)));
        let blow = Net::new(
            vec![Mat::filled(2, 2, 400.0), Mat::identity(2)],
            Nonlin::Exp2,
        )
        .unwrap();
        assert!(matches!(
            blow.apply(&[1.0, 1.0]),
            Err(NetError::NonFinite { layer: 1 })
        ));
        assert!(Net::new(vec![Mat::zeros(3, 2)], Nonlin::Relu).is_err());
    }

    #[test]
    fn relu_kinks_are_flagged() {
        let net = Net::new(vec![Mat::identity(2), Mat::identity(2)], Nonlin::Relu).unwrap();
        let fwd = net.forward(&[0.0, 1.0]).unwrap();
        assert_eq!(fwd.kinks, 1);
        assert_eq!(net.jacobian_from(&fwd), Mat::diag(&[0.0, 1.0]));
    }

    #[test]
    fn nonlin_names_roundtrip() {
        for nl in [
            Nonlin::Relu,
            Nonlin::LeakyRelu(LEAKY_RELU_SLOPE),
            Nonlin::Selu,
            Nonlin::Swish,
            Nonlin::Cosid,
            Nonlin::Sinusoid,
            Nonlin::Sigmoid,
            Nonlin::Exp2,
            Nonlin::Power(2.5),
            Nonlin::Identity,
        ] {
            assert_eq!(nl.to_string().parse::<Nonlin>().unwrap(), nl);
            assert_eq!(Nonlin::from_id(nl.id_byte(), nl.param()), Some(nl));
        }
        assert!("tanhh".parse::<Nonlin>().is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for nl in [
            Nonlin::Selu,
            Nonlin::Swish,
            Nonlin::Cosid,
            Nonlin::Sinusoid,
            Nonlin::Sigmoid,
            Nonlin::Exp2,
            Nonlin::Power(3.0),
        ] {
            for z in [-1.3, -0.2, 0.4, 1.7] {
                let h = 1e-6;
                let fd = (nl.eval(z + h) - nl.eval(z - h)) / (2.0 * h);
                assert!((fd - nl.deriv(z)).abs() < 1e-7 * (1.0 + fd.abs()), "{nl} at {z}");
            }
        }
    }

    fn fd_rel_err(got: f64, fd: f64) -> f64 {
        (got - fd).abs() / fd.abs().max(1.0)
    }

    #[test]
    fn jacobian_and_gradients_match_finite_differences() {
        let nls = [Nonlin::Sigmoid, Nonlin::Swish, Nonlin::Cosid, Nonlin::Selu];
        let h = 1e-6;
        for case in 0..12u64 {
            let nl = nls[case as usize % nls.len()];
            let net = random_net(&[3, 5, 4, 3], nl, 100 + case, 0.9);
            let mut rng = ChaCha8Rng::seed_from_u64(case);
            let z: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();

            let j = net.jacobian(&z).unwrap();
            for c in 0..3 {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[c] += h;
                zm[c] -= h;
                let (fp, fm) = (net.apply(&zp).unwrap(), net.apply(&zm).unwrap());
                for r in 0..3 {
                    let fd = (fp[r] - fm[r]) / (2.0 * h);
                    assert!(fd_rel_err(j[(r, c)], fd) < 1e-6, "jacobian case {case}");
                }
            }

            let g = net.loss_grads(&[&z], &[&t]).unwrap();
            assert!((g.loss - net.loss(&[&z], &[&t]).unwrap()).abs() < 1e-14);
            for l in 0..net.depth() {
                for e in 0..net.weights()[l].data().len() {
                    let mut np = net.clone();
                    np.weights_mut()[l].data_mut()[e] += h;
                    let mut nm = net.clone();
                    nm.weights_mut()[l].data_mut()[e] -= h;
                    let fd = (np.loss(&[&z], &[&t]).unwrap() - nm.loss(&[&z], &[&t]).unwrap())
                        / (2.0 * h);
                    assert!(
                        fd_rel_err(g.grads[l].data()[e], fd) < 1e-6,
                        "grad case {case} layer {l}"
                    );
                }
            }
        }
    }

    #[test]
    fn batched_gradient_is_sum_of_single_gradients() {
        let net = random_net(&[2, 6, 2], Nonlin::Sigmoid, 3, 1.0);
        let xs = [[0.1, 0.9], [-0.4, 0.3], [0.7, -0.2]];
        let ts = [[0.9, 0.1], [0.3, -0.4], [-0.2, 0.7]];
        let ins: Vec<&[f64]> = xs.iter().map(|x| &x[..]).collect();
        let tg: Vec<&[f64]> = ts.iter().map(|x| &x[..]).collect();
        let all = net.loss_grads(&ins, &tg).unwrap();
        let mut sum = vec![Mat::zeros(6, 2), Mat::zeros(2, 6)];
        let mut loss = 0.0;
        for (x, t) in ins.iter().zip(&tg) {
            let g = net.loss_grads(&[x], &[t]).unwrap();
            loss += g.loss;
            for (s, gi) in sum.iter_mut().zip(&g.grads) {
                s.add_scaled(1.0, gi).unwrap();
            }
        }
        assert!((loss - all.loss).abs() < 1e-14);
        for (s, a) in sum.iter().zip(&all.grads) {
            assert!(s.max_abs_diff(a) < 1e-14);
        }
    }
}
