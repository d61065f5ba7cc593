//! Least-mean-p-power spectral graph neural networks.
//!
//! A layer performs one robust adaptive update with a trainable spectral filter:
//!
//! ```text
//! eps_l   = D_S (y - x_l)
//! x_{l+1} = act( x_l + mu * U diag(theta_l) U^T (|eps_l|^(p-1) * sign(eps_l)) + b_l )
//! ```
//!
//! `p = 1` gives the Sign-GNN layer and `p = 2` the LMS-GNN layer. The filters
//! `theta_l` and biases `b_l` are trained online by gradient descent on
//! `J = sum_i |(D_S (y - x_L))_i|^p / |S|`, with gradients derived by hand.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::adaptive::sign;
use crate::error::{check_len, Error, Result};
use crate::spectral::{GftBasis, SamplingMask, SpectralFilter};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_DELTA_GRAD: f64 = 1e-6;
pub const DEFAULT_PRETRAIN_EPOCHS: usize = 50;

const CHECKPOINT_MAGIC: &str = "lmpgnn-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// `|eps|^(p-1) * sign(eps)` elementwise.
///
/// `p = 1` and `p = 2` take dedicated paths that never evaluate a power.
pub fn lp_error_transform(eps: &DVector<f64>, p: f64) -> DVector<f64> {
    lp_transform_counted(eps, p).0
}

/// As [`lp_error_transform`], also returning how many `powf` calls were made.
fn lp_transform_counted(eps: &DVector<f64>, p: f64) -> (DVector<f64>, usize) {
    if p == 1.0 {
        (eps.map(sign), 0)
    } else if p == 2.0 {
        (eps.clone(), 0)
    } else {
        let mut pows = 0;
        let out = eps.map(|e| {
            if e == 0.0 {
                0.0
            } else {
                pows += 1;
                e.abs().powf(p - 1.0) * sign(e)
            }
        });
        (out, pows)
    }
}

/// Smoothed derivative of the error transform: `(p-1) (|eps| + delta)^(p-2)`.
fn lp_transform_derivative(e: f64, p: f64, delta: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else if p == 1.0 {
        0.0
    } else {
        (p - 1.0) * (e.abs() + delta).powf(p - 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Activation {
    #[default]
    Identity,
    LeakyRelu(f64),
    Tanh,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Identity => f.write_str("identity"),
            Activation::LeakyRelu(s) => write!(f, "leaky_relu({s})"),
            Activation::Tanh => f.write_str("tanh"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    /// Accepts `identity`, `tanh`, `leaky_relu` (slope 0.01) or `leaky_relu(<slope>)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "identity" => return Ok(Activation::Identity),
            "tanh" => return Ok(Activation::Tanh),
            "leaky_relu" => return Ok(Activation::LeakyRelu(0.01)),
            _ => {}
        }
        if let Some(inner) = s.strip_prefix("leaky_relu(").and_then(|r| r.strip_suffix(')')) {
            let slope: f64 = inner
                .trim()
                .parse()
                .map_err(|_| Error::param(format!("bad leaky_relu slope `{inner}`")))?;
            if slope.is_finite() {
                return Ok(Activation::LeakyRelu(slope));
            }
        }
        Err(Error::param(format!(
            "unknown activation `{s}` (expected identity, tanh, leaky_relu or leaky_relu(<slope>))"
        )))
    }
}

impl TryFrom<String> for Activation {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Activation> for String {
    fn from(a: Activation) -> String {
        a.to_string()
    }
}

impl Serialize for Activation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Activation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One LMP-GNN layer. `theta` is the diagonal spectral filter (the sum of
/// the per-layer filter bank collapsed into one diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct LmpGnnLayer {
    pub theta: DVector<f64>,
    pub bias: DVector<f64>,
    pub step_size: f64,
    pub p: f64,
    pub activation: Activation,
}

/// Intermediate values of one layer, kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCache {
    pub input: DVector<f64>,
    pub eps: DVector<f64>,
    /// `U^T (|eps|^(p-1) * sign(eps))`.
    pub spectral_update: DVector<f64>,
    pub pre_activation: DVector<f64>,
}

impl LmpGnnLayer {
    pub fn new(theta: DVector<f64>, step_size: f64, p: f64, activation: Activation) -> Self {
        let n = theta.len();
        Self {
            theta,
            bias: DVector::zeros(n),
            step_size,
            p,
            activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1.0..=2.0).contains(&self.p) {
            return Err(Error::param(format!("p must lie in [1, 2], got {}", self.p)));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::param(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        check_len("layer bias", self.theta.len(), self.bias.len())?;
        if self.theta.iter().chain(self.bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::param("layer parameters must be finite"));
        }
        Ok(())
    }

    fn check_dims(&self, x: &DVector<f64>, eps: &DVector<f64>, basis: &GftBasis) -> Result<()> {
        let n = basis.n();
        check_len("layer theta", n, self.theta.len())?;
        check_len("layer bias", n, self.bias.len())?;
        check_len("layer input", n, x.len())?;
        check_len("layer error", n, eps.len())
    }

    /// `act(x + mu U diag(theta) U^T h + b)` given the transformed error `h`.
    fn finish(
        &self,
        x: &DVector<f64>,
        h: &DVector<f64>,
        basis: &GftBasis,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let u = basis.eigenvectors();
        let spectral = u.tr_mul(h);
        let filtered = u * spectral.component_mul(&self.theta);
        let z = x + filtered * self.step_size + &self.bias;
        let out = z.map(|v| self.activation.apply(v));
        (spectral, z, out)
    }

    /// Forward pass of one layer for a given error signal.
    pub fn forward(&self, x: &DVector<f64>, eps: &DVector<f64>, basis: &GftBasis) -> Result<DVector<f64>> {
        self.check_dims(x, eps, basis)?;
        let h = lp_error_transform(eps, self.p);
        Ok(self.finish(x, &h, basis).2)
    }

    /// Sign-GNN layer: the error enters only through its sign. Ignores `self.p`.
    pub fn forward_sign(&self, x: &DVector<f64>, eps: &DVector<f64>, basis: &GftBasis) -> Result<DVector<f64>> {
        self.check_dims(x, eps, basis)?;
        let h = eps.map(sign);
        Ok(self.finish(x, &h, basis).2)
    }

    /// LMS-GNN layer: the raw error drives the update. Ignores `self.p`.
    pub fn forward_lms(&self, x: &DVector<f64>, eps: &DVector<f64>, basis: &GftBasis) -> Result<DVector<f64>> {
        self.check_dims(x, eps, basis)?;
        Ok(self.finish(x, eps, basis).2)
    }
}

/// Free-function form of [`LmpGnnLayer::forward`].
pub fn layer_forward(
    layer: &LmpGnnLayer,
    x_l: &DVector<f64>,
    eps: &DVector<f64>,
    basis: &GftBasis,
) -> Result<DVector<f64>> {
    layer.forward(x_l, eps, basis)
}

/// Observation the training loss compares the network output with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossTarget {
    /// The observation fed into the same forward pass.
    #[default]
    Current,
    /// The following observation, i.e. the one the output is a prediction of.
    Next,
}

/// Hyperparameters shared by every layer of a network.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnConfig {
    pub layers: usize,
    pub p: f64,
    pub step_size: f64,
    pub learning_rate: f64,
    pub delta_grad: f64,
    pub activation: Activation,
    /// Treat each layer's error as a constant during backpropagation.
    pub stop_gradient: bool,
    pub loss_target: LossTarget,
}

impl GnnConfig {
    pub fn new(layers: usize, p: f64, step_size: f64) -> Self {
        Self {
            layers,
            p,
            step_size,
            learning_rate: DEFAULT_LEARNING_RATE,
            delta_grad: DEFAULT_DELTA_GRAD,
            activation: Activation::Identity,
            stop_gradient: false,
            loss_target: LossTarget::Current,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::param("network needs at least one layer"));
        }
        if !(1.0..=2.0).contains(&self.p) {
            return Err(Error::param(format!("p must lie in [1, 2], got {}", self.p)));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::param(format!("mu must be positive, got {}", self.step_size)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(format!(
                "eta must be nonnegative, got {}",
                self.learning_rate
            )));
        }
        if !(self.delta_grad > 0.0) {
            return Err(Error::param(format!(
                "delta_grad must be positive, got {}",
                self.delta_grad
            )));
        }
        Ok(())
    }
}

/// Cached intermediates of a full forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub layers: Vec<LayerCache>,
    /// Number of `powf` evaluations spent on error transforms.
    pub pow_evaluations: usize,
}

/// Gradients of the training loss with respect to every layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub theta: Vec<DVector<f64>>,
    pub bias: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmpGnnNetwork {
    layers: Vec<LmpGnnLayer>,
    basis: Arc<GftBasis>,
    pub learning_rate: f64,
    pub delta_grad: f64,
    pub stop_gradient: bool,
    pub loss_target: LossTarget,
}

impl LmpGnnNetwork {
    /// Every layer starts with `theta = init_filter` and zero bias.
    pub fn new(basis: Arc<GftBasis>, config: &GnnConfig, init_filter: &SpectralFilter) -> Result<Self> {
        config.validate()?;
        check_len("initial filter", basis.n(), init_filter.len())?;
        let theta = DVector::from_column_slice(init_filter.response());
        let layers = (0..config.layers)
            .map(|_| LmpGnnLayer::new(theta.clone(), config.step_size, config.p, config.activation))
            .collect();
        Ok(Self {
            layers,
            basis,
            learning_rate: config.learning_rate,
            delta_grad: config.delta_grad,
            stop_gradient: config.stop_gradient,
            loss_target: config.loss_target,
        })
    }

    /// Assembles a network from explicit layers.
    pub fn from_layers(
        basis: Arc<GftBasis>,
        layers: Vec<LmpGnnLayer>,
        learning_rate: f64,
        delta_grad: f64,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::param("network needs at least one layer"));
        }
        for layer in &layers {
            layer.validate()?;
            check_len("layer theta", basis.n(), layer.theta.len())?;
        }
        Ok(Self {
            layers,
            basis,
            learning_rate,
            delta_grad,
            stop_gradient: false,
            loss_target: LossTarget::Current,
        })
    }

    pub fn layers(&self) -> &[LmpGnnLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LmpGnnLayer] {
        &mut self.layers
    }

    pub fn basis(&self) -> &GftBasis {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn forward(
        &self,
        x_hat: &DVector<f64>,
        y: &DVector<f64>,
        mask: &SamplingMask,
    ) -> Result<(DVector<f64>, ForwardCache)> {
        let n = self.n();
        check_len("estimate", n, x_hat.len())?;
        check_len("observation", n, y.len())?;
        check_len("mask", n, mask.n())?;
        let mut x = x_hat.clone();
        let mut cache = ForwardCache {
            layers: Vec::with_capacity(self.layers.len()),
            pow_evaluations: 0,
        };
        for (l, layer) in self.layers.iter().enumerate() {
            let eps = mask.apply(&(y - &x))?;
            let (h, pows) = lp_transform_counted(&eps, layer.p);
            cache.pow_evaluations += pows;
            let (spectral_update, pre_activation, out) = layer.finish(&x, &h, &self.basis);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::LayerDivergence { layer: l });
            }
            cache.layers.push(LayerCache {
                input: x,
                eps,
                spectral_update,
                pre_activation,
            });
            x = out;
        }
        Ok((x, cache))
    }

    /// `sum_i |(D_S (y - prediction))_i|^p / |S|` with `p` of the last layer.
    pub fn loss(&self, prediction: &DVector<f64>, y: &DVector<f64>, mask: &SamplingMask) -> Result<f64> {
        let count = mask.observed_count();
        if count == 0 {
            return Ok(0.0);
        }
        let p = self.output_p();
        let e = mask.apply(&(y - prediction))?;
        Ok(e.iter().map(|v| v.abs().powf(p)).sum::<f64>() / count as f64)
    }

    fn output_p(&self) -> f64 {
        self.layers.last().map_or(2.0, |l| l.p)
    }

    /// Forward pass, loss and backpropagated parameter gradients.
    pub fn gradients(
        &self,
        x_hat: &DVector<f64>,
        y: &DVector<f64>,
        mask: &SamplingMask,
    ) -> Result<(f64, Gradients, DVector<f64>)> {
        self.gradients_against(x_hat, y, mask, y, mask)
    }

    /// Like [`gradients`](Self::gradients), but the loss compares the output of
    /// the forward pass on `(x_hat, y)` with a separate `target` observation.
    pub fn gradients_against(
        &self,
        x_hat: &DVector<f64>,
        y: &DVector<f64>,
        mask: &SamplingMask,
        target: &DVector<f64>,
        target_mask: &SamplingMask,
    ) -> Result<(f64, Gradients, DVector<f64>)> {
        let (prediction, cache) = self.forward(x_hat, y, mask)?;
        check_len("target", self.n(), target.len())?;
        let loss = self.loss(&prediction, target, target_mask)?;
        let count = target_mask.observed_count();
        let p = self.output_p();

        // dJ/dx_L
        let e = target_mask.apply(&(target - &prediction))?;
        let g = if count == 0 {
            DVector::zeros(self.n())
        } else {
            let scale = p / count as f64;
            e.map(|v| {
                if v == 0.0 {
                    0.0
                } else {
                    -scale * v.abs().powf(p - 1.0) * sign(v)
                }
            })
        };
        Ok((loss, self.backward(&cache, mask, g), prediction))
    }

    fn backward(&self, cache: &ForwardCache, mask: &SamplingMask, mut g: DVector<f64>) -> Gradients {
        let u = self.basis.eigenvectors();
        let d = mask.as_diagonal();
        let n_layers = self.layers.len();
        let mut grad_theta = vec![DVector::zeros(0); n_layers];
        let mut grad_bias = vec![DVector::zeros(0); n_layers];
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let c = &cache.layers[l];
            let gz = g.zip_map(&c.pre_activation, |gi, zi| gi * layer.activation.derivative(zi));
            let w = u.tr_mul(&gz);
            grad_theta[l] = w.component_mul(&c.spectral_update) * layer.step_size;
            let mut g_prev = gz.clone();
            if !self.stop_gradient && layer.p != 1.0 {
                let back = u * w.component_mul(&layer.theta);
                for i in 0..g_prev.len() {
                    if d[i] != 0.0 {
                        let dh = lp_transform_derivative(c.eps[i], layer.p, self.delta_grad);
                        g_prev[i] -= layer.step_size * dh * back[i];
                    }
                }
            }
            grad_bias[l] = gz;
            g = g_prev;
        }
        Gradients {
            theta: grad_theta,
            bias: grad_bias,
        }
    }

    fn descend(&mut self, grads: &Gradients) -> Result<()> {
        let eta = self.learning_rate;
        let mut updated = self.layers.clone();
        for (l, layer) in updated.iter_mut().enumerate() {
            layer.theta -= &grads.theta[l] * eta;
            layer.bias -= &grads.bias[l] * eta;
            if layer.theta.iter().chain(layer.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::LayerDivergence { layer: l });
            }
        }
        self.layers = updated;
        Ok(())
    }

    /// Forward pass on `(x_hat, y)`, one gradient step on every theta and bias,
    /// and returns the prediction made by the pre-update parameters.
    pub fn online_update(
        &mut self,
        x_hat: &DVector<f64>,
        y: &DVector<f64>,
        mask: &SamplingMask,
    ) -> Result<DVector<f64>> {
        if self.learning_rate == 0.0 {
            return Ok(self.forward(x_hat, y, mask)?.0);
        }
        let (_, grads, prediction) = self.gradients(x_hat, y, mask)?;
        self.descend(&grads)?;
        Ok(prediction)
    }

    /// One gradient step on the next-step loss: the forward pass on
    /// `(x_prev, y_prev)` is scored against the later observation `y`.
    pub fn predictive_update(
        &mut self,
        x_prev: &DVector<f64>,
        y_prev: &DVector<f64>,
        mask_prev: &SamplingMask,
        y: &DVector<f64>,
        mask: &SamplingMask,
    ) -> Result<()> {
        if self.learning_rate == 0.0 {
            return Ok(());
        }
        let (_, grads, _) = self.gradients_against(x_prev, y_prev, mask_prev, y, mask)?;
        self.descend(&grads)
    }

    /// Writes the trained parameters as a versioned text checkpoint.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let first = &self.layers[0];
        writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}")?;
        writeln!(out, "n {}", self.n())?;
        writeln!(out, "layers {}", self.layers.len())?;
        writeln!(out, "p {}", first.p)?;
        for (l, layer) in self.layers.iter().enumerate() {
            writeln!(out, "layer {l} mu {} activation {}", layer.step_size, layer.activation)?;
            write_vector(&mut out, "theta", &layer.theta)?;
            write_vector(&mut out, "bias", &layer.bias)?;
        }
        Ok(())
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_checkpoint(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Restores parameters from a checkpoint; `basis` must have the stored node count.
    pub fn read_checkpoint<R: BufRead>(basis: Arc<GftBasis>, input: R, origin: &Path) -> Result<Self> {
        let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(s) if s.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
            match lines.next() {
                Some((no, Ok(s))) => Ok((no, s.split_whitespace().map(str::to_owned).collect())),
                Some((_, Err(e))) => Err(Error::io(origin, e)),
                None => Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: 0,
                    message: format!("unexpected end of checkpoint, expected {what}"),
                }),
            }
        };
        let perr = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let num = |line: usize, s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| perr(line, format!("bad number `{s}`")))
        };

        let (no, head) = next("header")?;
        if head.len() != 2 || head[0] != CHECKPOINT_MAGIC {
            return Err(perr(no, "not an lmpgnn checkpoint".into()));
        }
        if head[1] != CHECKPOINT_VERSION.to_string() {
            return Err(perr(no, format!("unsupported checkpoint version {}", head[1])));
        }
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (no, tok) = next(key)?;
            if tok.len() != 2 || tok[0] != key {
                return Err(perr(no, format!("expected `{key} <value>`")));
            }
            Ok((no, tok[1].clone()))
        };
        let (no, n) = field("n")?;
        let n: usize = n.parse().map_err(|_| perr(no, "bad node count".into()))?;
        if n != basis.n() {
            return Err(perr(no, format!("checkpoint has {n} nodes, basis has {}", basis.n())));
        }
        let (no, n_layers) = field("layers")?;
        let n_layers: usize = n_layers.parse().map_err(|_| perr(no, "bad layer count".into()))?;
        let (no, p) = field("p")?;
        let p = num(no, &p)?;

        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (no, tok) = next("layer header")?;
            if tok.len() != 6
                || tok[0] != "layer"
                || tok[1] != l.to_string()
                || tok[2] != "mu"
                || tok[4] != "activation"
            {
                return Err(perr(no, format!("expected `layer {l} mu <mu> activation <name>`")));
            }
            let mu = num(no, &tok[3])?;
            let activation: Activation = tok[5].parse().map_err(|e: Error| perr(no, e.to_string()))?;
            let mut vector = |key: &str| -> Result<DVector<f64>> {
                let (no, tok) = next(key)?;
                if tok.first().map(String::as_str) != Some(key) || tok.len() != n + 1 {
                    return Err(perr(no, format!("expected `{key}` followed by {n} values")));
                }
                let vals = tok[1..].iter().map(|s| num(no, s)).collect::<Result<Vec<_>>>()?;
                Ok(DVector::from_vec(vals))
            };
            let theta = vector("theta")?;
            let bias = vector("bias")?;
            layers.push(LmpGnnLayer {
                theta,
                bias,
                step_size: mu,
                p,
                activation,
            });
        }
        Self::from_layers(basis, layers, DEFAULT_LEARNING_RATE, DEFAULT_DELTA_GRAD)
    }

    pub fn load_checkpoint(basis: Arc<GftBasis>, path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(basis, std::io::BufReader::new(file), path)
    }
}

fn write_vector<W: Write>(out: &mut W, key: &str, v: &DVector<f64>) -> std::io::Result<()> {
    write!(out, "{key}")?;
    for x in v.iter() {
        // `{:?}` prints the shortest representation that round-trips exactly.
        write!(out, " {x:?}")?;
    }
    writeln!(out)
}

/// Free-function form of [`LmpGnnNetwork::forward`].
pub fn network_forward(
    net: &LmpGnnNetwork,
    x_hat: &DVector<f64>,
    y: &DVector<f64>,
    mask: &SamplingMask,
) -> Result<(DVector<f64>, ForwardCache)> {
    net.forward(x_hat, y, mask)
}

/// Pretraining schedule over the leading timesteps of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainSchedule {
    pub train_steps: usize,
    pub epochs: usize,
}

/// Online prediction with optional pretraining.
///
/// Each pretraining epoch streams the first `train_steps` observations starting
/// from `initial_estimate`, updating the parameters as it goes. The online phase
/// then streams every observation from `initial_estimate` again, and for each
/// timestep `t >= train_steps` records the prediction held before `y[t]` is
/// ingested. The result has `observations.len() - train_steps` entries.
///
/// With [`LossTarget::Current`] each step is trained by
/// [`LmpGnnNetwork::online_update`]; with [`LossTarget::Next`] the step that
/// produced the prediction for `t` is trained against `y[t]` before `y[t]` is
/// ingested.
pub fn run_online_gnn(
    net: &mut LmpGnnNetwork,
    observations: &[(DVector<f64>, SamplingMask)],
    schedule: TrainSchedule,
    initial_estimate: &DVector<f64>,
) -> Result<Vec<DVector<f64>>> {
    if schedule.train_steps > observations.len() {
        return Err(Error::param(format!(
            "training prefix {} exceeds stream length {}",
            schedule.train_steps,
            observations.len()
        )));
    }
    for _ in 0..schedule.epochs {
        stream(net, &observations[..schedule.train_steps], initial_estimate, None)?;
    }
    let mut predictions = Vec::with_capacity(observations.len() - schedule.train_steps);
    stream(
        net,
        observations,
        initial_estimate,
        Some((schedule.train_steps, &mut predictions)),
    )?;
    Ok(predictions)
}

fn stream(
    net: &mut LmpGnnNetwork,
    observations: &[(DVector<f64>, SamplingMask)],
    initial_estimate: &DVector<f64>,
    mut record: Option<(usize, &mut Vec<DVector<f64>>)>,
) -> Result<()> {
    let as_divergence = |t: usize| {
        move |e: Error| {
            if e.is_numerical() {
                Error::Divergence { timestep: t }
            } else {
                e
            }
        }
    };
    let mut x = initial_estimate.clone();
    let mut previous: Option<DVector<f64>> = None;
    for (t, (y, mask)) in observations.iter().enumerate() {
        if let Some((from, out)) = record.as_mut() {
            if t >= *from {
                out.push(x.clone());
            }
        }
        x = match net.loss_target {
            LossTarget::Current => net.online_update(&x, y, mask).map_err(as_divergence(t))?,
            LossTarget::Next => {
                if let Some(x_prev) = previous.take() {
                    let (y_prev, mask_prev) = &observations[t - 1];
                    net.predictive_update(&x_prev, y_prev, mask_prev, y, mask)
                        .map_err(as_divergence(t))?;
                }
                let next = net.forward(&x, y, mask).map_err(as_divergence(t))?.0;
                previous = Some(x);
                next
            }
        };
    }
    Ok(())
}
