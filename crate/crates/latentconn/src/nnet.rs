//! Minimal dense-network engine: forward/backward passes over a fixed MLP
//! topology, Glorot initialization, Adadelta updates, and a finite-difference
//! gradient checker. Everything is double precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Rectifier,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Rectifier => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative as a function of the pre-activation value.
    #[inline]
    pub fn derivative(self, pre: f64) -> f64 {
        match self {
            // Subgradient 0 at the kink.
            Activation::Rectifier => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(pre);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Dot product with four independent accumulators; the fixed summation
/// order is part of the determinism contract.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let chunks = a.len() / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for k in 0..chunks {
        let i = 4 * k;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    ((s0 + s1) + (s2 + s3)) + tail
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

/// Affine layer with a pointwise nonlinearity. Weights are row-major
/// `out_dim x in_dim`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Validation("layer dimensions must be nonzero".into()));
        }
        Ok(DenseLayer {
            in_dim,
            out_dim,
            weights: vec![0.0; out_dim * in_dim],
            biases: vec![0.0; out_dim],
            activation,
        })
    }

    /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
    pub fn glorot(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut Rng64,
    ) -> Result<Self> {
        let mut layer = DenseLayer::zeros(in_dim, out_dim, activation)?;
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        for w in layer.weights.iter_mut() {
            *w = rng.next_range(-bound, bound);
        }
        Ok(layer)
    }

    pub fn glorot_bound(in_dim: usize, out_dim: usize) -> f64 {
        (6.0 / (in_dim + out_dim) as f64).sqrt()
    }

    /// Forward pass returning (pre-activation, output).
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if input.len() != self.in_dim {
            return Err(Error::Shape(format!(
                "layer expects input of {} values, got {}",
                self.in_dim,
                input.len()
            )));
        }
        let mut pre = Vec::with_capacity(self.out_dim);
        for i in 0..self.out_dim {
            let row = &self.weights[i * self.in_dim..(i + 1) * self.in_dim];
            pre.push(self.biases[i] + dot(row, input));
        }
        let out = pre.iter().map(|&p| self.activation.apply(p)).collect();
        Ok((pre, out))
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

/// Per-layer gradients, shape-matched to a [`DenseLayer`].
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerGrads {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        LayerGrads {
            weights: vec![0.0; layer.weights.len()],
            biases: vec![0.0; layer.biases.len()],
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        for b in &mut self.biases {
            *b *= factor;
        }
    }

    pub fn add(&mut self, other: &LayerGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|v| v.is_finite())
    }
}

/// Gradients for a whole [`Network`], layer by layer.
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub layers: Vec<LayerGrads>,
}

impl GradientSet {
    pub fn zeros_like(net: &Network) -> Self {
        GradientSet {
            layers: net.layers.iter().map(LayerGrads::zeros_like).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.scale(factor);
        }
    }

    pub fn add(&mut self, other: &GradientSet) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add(b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.is_finite())
    }
}

/// Sequence of dense layers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
}

/// Per-layer pre-activations and outputs cached by a forward pass,
/// consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    pub pres: Vec<Vec<f64>>,
    pub outs: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.outs.last().expect("cache from a non-empty network")
    }
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Shape(format!(
                    "layer output {} does not feed layer input {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        Ok(Network { layers })
    }

    /// Structural consistency of deserialized parameters (buffer lengths
    /// against the declared dimensions).
    pub fn validate_shapes(&self) -> Result<()> {
        for (idx, layer) in self.layers.iter().enumerate() {
            if layer.in_dim == 0
                || layer.out_dim == 0
                || layer.weights.len() != layer.out_dim * layer.in_dim
                || layer.biases.len() != layer.out_dim
            {
                return Err(Error::Shape(format!(
                    "layer {idx} buffers do not match its declared {}x{} shape",
                    layer.out_dim, layer.in_dim
                )));
            }
            if layer.weights.iter().chain(&layer.biases).any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!(
                    "layer {idx} holds non-finite parameters"
                )));
            }
        }
        for pair in self.layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Shape(format!(
                    "layer output {} does not feed layer input {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        Ok(())
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut current = input.to_vec();
        for layer in &self.layers {
            let (_, out) = layer.forward(&current)?;
            current = out;
        }
        Ok(current)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        let mut pres = Vec::with_capacity(self.layers.len());
        let mut outs = Vec::with_capacity(self.layers.len());
        let mut current = input.to_vec();
        for layer in &self.layers {
            let (pre, out) = layer.forward(&current)?;
            pres.push(pre);
            outs.push(out.clone());
            current = out;
        }
        Ok(ForwardCache { input: input.to_vec(), pres, outs })
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        if cache.pres.len() != self.layers.len() || cache.input.len() != self.in_dim() {
            return Err(Error::Usage(
                "forward cache does not belong to this network/input".into(),
            ));
        }
        Ok(())
    }

    /// Reverse-mode gradients given dLoss/dOutput. Returns the parameter
    /// gradients and dLoss/dInput.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
    ) -> Result<(GradientSet, Vec<f64>)> {
        let mut grads = GradientSet::zeros_like(self);
        let input_grad = self.backward_into(cache, output_grad, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Like [`Network::backward`] but accumulates into an existing gradient
    /// set (the mini-batch accumulator), avoiding per-sample allocation.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
        grads: &mut GradientSet,
    ) -> Result<Vec<f64>> {
        self.check_cache(cache)?;
        if output_grad.len() != self.out_dim() {
            return Err(Error::Shape(format!(
                "upstream gradient has {} values, expected {}",
                output_grad.len(),
                self.out_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let pre = &cache.pres[last];
        let act = self.layers[last].activation;
        let delta: Vec<f64> = output_grad
            .iter()
            .zip(pre)
            .map(|(&g, &p)| g * act.derivative(p))
            .collect();
        self.backprop_from_delta(cache, delta, grads)
    }

    /// Like [`Network::backward_into`] but the upstream gradient is taken
    /// with respect to the last layer's pre-activation (used for fused
    /// sigmoid/cross-entropy derivatives).
    pub fn backward_from_pre_into(
        &self,
        cache: &ForwardCache,
        pre_grad: &[f64],
        grads: &mut GradientSet,
    ) -> Result<Vec<f64>> {
        self.check_cache(cache)?;
        if pre_grad.len() != self.out_dim() {
            return Err(Error::Shape(format!(
                "upstream gradient has {} values, expected {}",
                pre_grad.len(),
                self.out_dim()
            )));
        }
        self.backprop_from_delta(cache, pre_grad.to_vec(), grads)
    }

    fn backprop_from_delta(
        &self,
        cache: &ForwardCache,
        mut delta: Vec<f64>,
        grads: &mut GradientSet,
    ) -> Result<Vec<f64>> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::Shape("gradient set does not match network".into()));
        }
        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            let input: &[f64] = if idx == 0 {
                &cache.input
            } else {
                &cache.outs[idx - 1]
            };
            let lg = &mut grads.layers[idx];
            for (i, &d) in delta.iter().enumerate() {
                lg.biases[i] += d;
                let row = &mut lg.weights[i * layer.in_dim..(i + 1) * layer.in_dim];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            // dLoss/dInput of this layer
            let mut input_grad = vec![0.0; layer.in_dim];
            for (i, &d) in delta.iter().enumerate() {
                let row = &layer.weights[i * layer.in_dim..(i + 1) * layer.in_dim];
                for (acc, w) in input_grad.iter_mut().zip(row) {
                    *acc += w * d;
                }
            }
            if idx == 0 {
                return Ok(input_grad);
            }
            let prev_pre = &cache.pres[idx - 1];
            let prev_act = self.layers[idx - 1].activation;
            delta = input_grad
                .iter()
                .zip(prev_pre)
                .map(|(&g, &p)| g * prev_act.derivative(p))
                .collect();
        }
        unreachable!("network has at least one layer");
    }
}

/// Build a rectifier MLP with a chosen output activation,
/// Glorot weights and zero biases, deterministic in the rng stream.
pub fn init_params(
    dims: &[usize],
    hidden_activation: Activation,
    output_activation: Activation,
    rng: &mut Rng64,
) -> Result<Network> {
    if dims.len() < 2 {
        return Err(Error::Validation("need at least input and output dims".into()));
    }
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (k, pair) in dims.windows(2).enumerate() {
        let act = if k + 2 == dims.len() {
            output_activation
        } else {
            hidden_activation
        };
        layers.push(DenseLayer::glorot(pair[0], pair[1], act, rng)?);
    }
    Network::new(layers)
}

// ---------------------------------------------------------------------------
// Adadelta
// ---------------------------------------------------------------------------

/// Adadelta hyper-parameters (reference defaults: rho 0.95, eps 1e-6, rate 1).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Adadelta {
    pub rho: f64,
    pub eps: f64,
    pub learning_rate: f64,
}

impl Default for Adadelta {
    fn default() -> Self {
        Adadelta { rho: 0.95, eps: 1e-6, learning_rate: 1.0 }
    }
}

impl Adadelta {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.rho && self.rho < 1.0) {
            return Err(Error::Validation(format!("rho {} outside (0,1)", self.rho)));
        }
        if self.eps <= 0.0 {
            return Err(Error::Validation(format!("eps {} must be positive", self.eps)));
        }
        Ok(())
    }
}

/// Per-parameter accumulators E[g^2] and E[dx^2] for one network.
#[derive(Debug, Clone)]
pub struct AdadeltaState {
    pub sq_grad: GradientSet,
    pub sq_update: GradientSet,
}

impl AdadeltaState {
    pub fn zeros_like(net: &Network) -> Self {
        AdadeltaState {
            sq_grad: GradientSet::zeros_like(net),
            sq_update: GradientSet::zeros_like(net),
        }
    }
}

/// One Adadelta update over a parameter slice:
/// E[g^2] <- rho E[g^2] + (1-rho) g^2,
/// dx = -(sqrt(E[dx^2]+eps)/sqrt(E[g^2]+eps)) g,
/// E[dx^2] <- rho E[dx^2] + (1-rho) dx^2,
/// p += lr * dx.
pub fn adadelta_update_slice(
    opt: &Adadelta,
    params: &mut [f64],
    grads: &[f64],
    sq_grad: &mut [f64],
    sq_update: &mut [f64],
) {
    for k in 0..params.len() {
        let g = grads[k];
        sq_grad[k] = opt.rho * sq_grad[k] + (1.0 - opt.rho) * g * g;
        let dx = -((sq_update[k] + opt.eps).sqrt() / (sq_grad[k] + opt.eps).sqrt()) * g;
        sq_update[k] = opt.rho * sq_update[k] + (1.0 - opt.rho) * dx * dx;
        params[k] += opt.learning_rate * dx;
    }
}

/// Adadelta step over a whole network.
pub fn adadelta_step(
    opt: &Adadelta,
    net: &mut Network,
    grads: &GradientSet,
    state: &mut AdadeltaState,
) -> Result<()> {
    opt.validate()?;
    if grads.layers.len() != net.layers.len() {
        return Err(Error::Shape("gradient set does not match network".into()));
    }
    for (idx, layer) in net.layers.iter_mut().enumerate() {
        let lg = &grads.layers[idx];
        if lg.weights.len() != layer.weights.len() || lg.biases.len() != layer.biases.len() {
            return Err(Error::Shape(format!("gradient shapes differ at layer {idx}")));
        }
        adadelta_update_slice(
            opt,
            &mut layer.weights,
            &lg.weights,
            &mut state.sq_grad.layers[idx].weights,
            &mut state.sq_update.layers[idx].weights,
        );
        adadelta_update_slice(
            opt,
            &mut layer.biases,
            &lg.biases,
            &mut state.sq_grad.layers[idx].biases,
            &mut state.sq_update.layers[idx].biases,
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// Scalar loss over a network output, with its gradient, for [`grad_check`].
pub trait LossFn {
    fn loss(&self, output: &[f64]) -> f64;
    fn output_gradient(&self, output: &[f64]) -> Vec<f64>;
}

/// Half squared error against a fixed target.
pub struct SquaredError {
    pub target: Vec<f64>,
}

impl LossFn for SquaredError {
    fn loss(&self, output: &[f64]) -> f64 {
        output
            .iter()
            .zip(&self.target)
            .map(|(o, t)| {
                let d = o - t;
                0.5 * d * d
            })
            .sum()
    }

    fn output_gradient(&self, output: &[f64]) -> Vec<f64> {
        output.iter().zip(&self.target).map(|(o, t)| o - t).collect()
    }
}

/// Max over parameters of |analytic - central difference| / max(1, |central|).
pub fn grad_check(net: &Network, loss: &dyn LossFn, input: &[f64], h: f64) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::Validation(format!("step size {h} must be positive")));
    }
    let cache = net.forward_cached(input)?;
    let base_loss = loss.loss(cache.output());
    if !base_loss.is_finite() {
        return Err(Error::Numeric("loss is not finite".into()));
    }
    let out_grad = loss.output_gradient(cache.output());
    let (analytic, _) = net.backward(&cache, &out_grad)?;

    let mut worst: f64 = 0.0;
    let mut perturbed = net.clone();
    for li in 0..net.layers.len() {
        for wi in 0..net.layers[li].weights.len() {
            let orig = net.layers[li].weights[wi];
            perturbed.layers[li].weights[wi] = orig + h;
            let plus = loss.loss(&perturbed.forward(input)?);
            perturbed.layers[li].weights[wi] = orig - h;
            let minus = loss.loss(&perturbed.forward(input)?);
            perturbed.layers[li].weights[wi] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric("perturbed loss is not finite".into()));
            }
            let numeric = (plus - minus) / (2.0 * h);
            let err = (analytic.layers[li].weights[wi] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(err);
        }
        for bi in 0..net.layers[li].biases.len() {
            let orig = net.layers[li].biases[bi];
            perturbed.layers[li].biases[bi] = orig + h;
            let plus = loss.loss(&perturbed.forward(input)?);
            perturbed.layers[li].biases[bi] = orig - h;
            let minus = loss.loss(&perturbed.forward(input)?);
            perturbed.layers[li].biases[bi] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric("perturbed loss is not finite".into()));
            }
            let numeric = (plus - minus) / (2.0 * h);
            let err = (analytic.layers[li].biases[bi] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
