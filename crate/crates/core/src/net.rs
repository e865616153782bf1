//! Fully connected generator network with hand-written reverse mode.
//!
//! The generator maps latent codes (rows of a [`Tensor2`]) to points in data
//! space. Hidden layers use the configured activation; the output layer is
//! linear. [`GeneratorNet::forward_with_tape`] records the intermediates that
//! [`GeneratorNet::backward`] consumes, and [`adam_step`] applies an update.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor2;

static STAMPS: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    STAMPS.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation value.
    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out x in`
    pub weight: Tensor2,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorNet {
    dims: Vec<usize>,
    layers: Vec<Layer>,
    activation: Activation,
    /// Changes whenever parameters change; tapes remember the stamp they were recorded under.
    #[serde(skip, default = "fresh_stamp")]
    stamp: u64,
}

impl PartialEq for GeneratorNet {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.layers == other.layers && self.activation == other.activation
    }
}

impl GeneratorNet {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new(dims: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        Self::check_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect();
                Layer {
                    weight: Tensor2::from_vec(fan_out, fan_in, data).expect("sized above"),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self {
            dims: dims.to_vec(),
            layers,
            activation,
            stamp: fresh_stamp(),
        })
    }

    pub fn from_layers(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("a network needs at least one layer".into()));
        }
        let mut dims = vec![layers[0].weight.cols()];
        for (k, layer) in layers.iter().enumerate() {
            let expected_in = dims[k];
            if layer.weight.cols() != expected_in || layer.bias.len() != layer.weight.rows() {
                return Err(Error::shape(
                    "GeneratorNet::from_layers",
                    format!("layer {k} with {expected_in} inputs and matching bias"),
                    format!(
                        "{}x{} weight, {} biases",
                        layer.weight.rows(),
                        layer.weight.cols(),
                        layer.bias.len()
                    ),
                ));
            }
            if !layer.weight.is_finite() || layer.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::NonFinite("GeneratorNet::from_layers"));
            }
            dims.push(layer.weight.rows());
        }
        Self::check_dims(&dims)?;
        Ok(Self {
            dims,
            layers,
            activation,
            stamp: fresh_stamp(),
        })
    }

    fn check_dims(dims: &[usize]) -> Result<()> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!(
                "layer dims must list at least input and output, all positive; got {dims:?}"
            )));
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two dims")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    /// Weights then bias of each layer, layer by layer.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape(
                "GeneratorNet::set_params_flat",
                self.param_count(),
                params.len(),
            ));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("GeneratorNet::set_params_flat"));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weight.data().len());
            l.weight.data_mut().copy_from_slice(w);
            let (b, tail) = tail.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = tail;
        }
        self.stamp = fresh_stamp();
        Ok(())
    }

    fn check_input(&self, z: &Tensor2) -> Result<()> {
        if z.cols() != self.latent_dim() {
            return Err(Error::shape(
                "GeneratorNet::forward",
                format!("{} latent columns", self.latent_dim()),
                format!("{} columns", z.cols()),
            ));
        }
        Ok(())
    }

    /// Affine map of layer `k` applied to a batch.
    fn affine(&self, k: usize, x: &Tensor2) -> Tensor2 {
        let layer = &self.layers[k];
        let mut y = x.matmul_nt(&layer.weight).expect("dims checked at construction");
        for r in 0..y.rows() {
            for (v, b) in y.row_mut(r).iter_mut().zip(&layer.bias) {
                *v += b;
            }
        }
        y
    }

    pub fn forward(&self, z: &Tensor2) -> Result<Tensor2> {
        self.check_input(z)?;
        let last = self.layers.len() - 1;
        let mut x = z.clone();
        for k in 0..self.layers.len() {
            let pre = self.affine(k, &x);
            x = if k == last {
                pre
            } else {
                pre.map(|v| self.activation.apply(v))
            };
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("GeneratorNet::forward"));
        }
        Ok(x)
    }

    pub fn forward_with_tape(&self, z: &Tensor2) -> Result<(Tensor2, GradientTape)> {
        self.check_input(z)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(last);
        let mut x = z.clone();
        for k in 0..self.layers.len() {
            let pre = self.affine(k, &x);
            inputs.push(x);
            x = if k == last {
                pre
            } else {
                let act = pre.map(|v| self.activation.apply(v));
                pre_activations.push(pre);
                act
            };
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("GeneratorNet::forward_with_tape"));
        }
        let tape = GradientTape {
            stamp: Some(self.stamp),
            inputs,
            pre_activations,
        };
        Ok((x, tape))
    }

    /// Gradients of a scalar loss with respect to every parameter, given
    /// `d loss / d output` for the batch recorded on `tape`.
    pub fn backward(&self, tape: &GradientTape, output_grad: &Tensor2) -> Result<NetGradients> {
        if tape.stamp != Some(self.stamp) || tape.inputs.len() != self.layers.len() {
            return Err(Error::StaleTape);
        }
        let batch = tape.inputs[0].rows();
        if output_grad.shape() != (batch, self.output_dim()) {
            return Err(Error::shape(
                "GeneratorNet::backward",
                format!("{batch}x{}", self.output_dim()),
                format!("{}x{}", output_grad.rows(), output_grad.cols()),
            ));
        }
        let last = self.layers.len() - 1;
        let mut weights = vec![Tensor2::zeros(0, 0); self.layers.len()];
        let mut biases = vec![Vec::new(); self.layers.len()];
        let mut grad = output_grad.clone();
        for k in (0..self.layers.len()).rev() {
            if k != last {
                let pre = &tape.pre_activations[k];
                for (g, &p) in grad.data_mut().iter_mut().zip(pre.data()) {
                    *g *= self.activation.derivative(p);
                }
            }
            weights[k] = grad.matmul_tn(&tape.inputs[k])?;
            let mut db = vec![0.0; grad.cols()];
            for row in grad.iter_rows() {
                for (acc, g) in db.iter_mut().zip(row) {
                    *acc += g;
                }
            }
            biases[k] = db;
            if k > 0 {
                grad = grad.matmul(&self.layers[k].weight)?;
            }
        }
        let grads = NetGradients { weights, biases };
        if grads.flat().iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("GeneratorNet::backward"));
        }
        Ok(grads)
    }
}

/// Forward intermediates for one batch, tied to the parameter state that produced them.
#[derive(Debug, Clone, Default)]
pub struct GradientTape {
    stamp: Option<u64>,
    inputs: Vec<Tensor2>,
    pre_activations: Vec<Tensor2>,
}

impl GradientTape {
    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, Tensor2::rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetGradients {
    pub weights: Vec<Tensor2>,
    pub biases: Vec<Vec<f64>>,
}

impl NetGradients {
    /// Same ordering as [`GeneratorNet::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.flat().iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update over flat parameter and gradient slices.
pub fn adam_update(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::shape(
            "adam_update",
            format!("{} params, grads and moments", params.len()),
            format!("{} grads, {} moments", grads.len(), state.m.len()),
        ));
    }
    state.t += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
    Ok(())
}

pub fn adam_step(
    net: &mut GeneratorNet,
    grads: &NetGradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let mut params = net.params_flat();
    adam_update(&mut params, &grads.flat(), state, lr)?;
    net.set_params_flat(&params)
}
