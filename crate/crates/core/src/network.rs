//! Fully connected classifier with a representation tap (penultimate layer
//! output) and a logit tap (final layer output).
//!
//! Weights are stored `in_dim × out_dim`, so a batch propagates as
//! `Z = A·W + b`. The source and target streams share one `Network`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// RNG sub-stream reserved for weight initialization.
const INIT_STREAM: u64 = 0x1a17;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::InvalidSpec(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }

    /// ReLU hidden layers and an identity logit layer through `dims`,
    /// e.g. `[2, 64, 64, 2]`.
    pub fn mlp(dims: &[usize]) -> Vec<LayerSpec> {
        let n = dims.len().saturating_sub(1);
        (0..n)
            .map(|i| {
                let act = if i + 1 == n {
                    Activation::Identity
                } else {
                    Activation::Relu
                };
                LayerSpec::new(dims[i], dims[i + 1], act)
            })
            .collect()
    }
}

pub fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    let Some(last) = specs.last() else {
        return Err(Error::InvalidSpec("no layers".into()));
    };
    for (i, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::InvalidSpec(format!(
                "layer {i} has a zero dimension"
            )));
        }
    }
    for (i, pair) in specs.windows(2).enumerate() {
        if pair[0].out_dim != pair[1].in_dim {
            return Err(Error::InvalidSpec(format!(
                "layer {i} outputs {} but layer {} expects {}",
                pair[0].out_dim,
                i + 1,
                pair[1].in_dim
            )));
        }
    }
    if last.activation != Activation::Identity {
        return Err(Error::InvalidSpec(
            "final (logit) layer must use the identity activation".into(),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Glorot-uniform weights, zero biases.
pub fn init_network(specs: &[LayerSpec], seed: u64) -> Result<Network> {
    validate_specs(specs)?;
    let mut rng = Rng::with_stream(seed, INIT_STREAM);
    let layers = specs
        .iter()
        .map(|&spec| {
            let bound = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
            let data = (0..spec.in_dim * spec.out_dim)
                .map(|_| rng.uniform(-bound, bound))
                .collect();
            Layer {
                spec,
                weights: Matrix::new(spec.in_dim, spec.out_dim, data).expect("sized above"),
                bias: vec![0.0; spec.out_dim],
            }
        })
        .collect();
    Ok(Network { layers })
}

impl Network {
    /// Assembles a network from explicit parameters.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        validate_specs(&specs)?;
        for (i, l) in layers.iter().enumerate() {
            if l.weights.shape() != (l.spec.in_dim, l.spec.out_dim)
                || l.bias.len() != l.spec.out_dim
            {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} parameters do not match its spec"
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    /// Index into [`ForwardTrace::activations`] of the representation tap.
    pub fn rep_tap(&self) -> usize {
        self.layers.len() - 1
    }

    /// Index into [`ForwardTrace::activations`] of the logit tap.
    pub fn logit_tap(&self) -> usize {
        self.layers.len()
    }

    pub fn rep_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.in_dim
    }

    pub fn forward(&self, batch: &Matrix) -> Result<ForwardTrace> {
        if batch.cols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "batch has {} features, network expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(batch.clone());
        for layer in &self.layers {
            let input = activations.last().expect("non-empty");
            let mut z = input.matmul(&layer.weights);
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            let act = layer.spec.activation;
            let a = match act {
                Activation::Identity => z.clone(),
                Activation::Relu => z.map(|v| act.apply(v)),
            };
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(ForwardTrace {
            pre_activations,
            activations,
            rep_tap: self.rep_tap(),
        })
    }

    /// Logits for `batch`.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        let mut trace = self.forward(batch)?;
        Ok(trace.activations.pop().expect("non-empty"))
    }

    /// Exact parameter gradients given upstream gradients at the taps of one
    /// or more traces. Contributions from every trace are summed.
    pub fn backward(&self, taps: &[TapGrads<'_>]) -> Result<ParamGrads> {
        let mut grads = ParamGrads::zeros(self);
        let last = self.layers.len();
        for tap in taps {
            let trace = tap.trace;
            if trace.activations.len() != last + 1 {
                return Err(Error::ShapeMismatch(
                    "trace from a different network".into(),
                ));
            }
            let n = trace.activations[0].rows();
            for (name, g, cols) in [
                ("logit", tap.logits, self.num_classes()),
                ("rep", tap.rep, self.rep_dim()),
            ] {
                if let Some(g) = g {
                    if g.shape() != (n, cols) {
                        return Err(Error::ShapeMismatch(format!(
                            "{name} gradient is {}x{}, expected {n}x{cols}",
                            g.rows(),
                            g.cols()
                        )));
                    }
                }
            }
            if tap.logits.is_none() && tap.rep.is_none() {
                continue;
            }

            let mut upstream = match tap.logits {
                Some(g) => g.clone(),
                None => Matrix::zeros(n, self.num_classes()),
            };
            for l in (0..last).rev() {
                if l + 1 == trace.rep_tap {
                    if let Some(g) = tap.rep {
                        upstream.add_assign(g);
                    }
                }
                let layer = &self.layers[l];
                let delta = match layer.spec.activation {
                    Activation::Identity => upstream,
                    Activation::Relu => {
                        let mut d = upstream;
                        for (v, z) in d
                            .as_mut_slice()
                            .iter_mut()
                            .zip(trace.pre_activations[l].as_slice())
                        {
                            if *z <= 0.0 {
                                *v = 0.0;
                            }
                        }
                        d
                    }
                };
                grads.weights[l].add_assign(&trace.activations[l].t_matmul(&delta));
                for (b, s) in grads.biases[l].iter_mut().zip(delta.column_sums()) {
                    *b += s;
                }
                if l == 0 {
                    break;
                }
                upstream = delta.matmul_t(&layer.weights);
            }
        }
        Ok(grads)
    }

    /// Mutable access to one layer's parameters.
    pub fn layer_mut(&mut self, index: usize) -> &mut Layer {
        &mut self.layers[index]
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }
}

/// Everything `backward` needs from one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    /// `pre_activations[l]` is layer `l`'s affine output.
    pub pre_activations: Vec<Matrix>,
    /// `activations[0]` is the input batch; `activations[l + 1]` is layer `l`'s output.
    pub activations: Vec<Matrix>,
    rep_tap: usize,
}

impl ForwardTrace {
    pub fn rep(&self) -> &Matrix {
        &self.activations[self.rep_tap]
    }

    pub fn logits(&self) -> &Matrix {
        self.activations.last().expect("non-empty")
    }
}

/// Upstream gradients for one trace.
#[derive(Clone, Copy, Debug)]
pub struct TapGrads<'a> {
    pub trace: &'a ForwardTrace,
    pub rep: Option<&'a Matrix>,
    pub logits: Option<&'a Matrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn zeros(net: &Network) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.spec.in_dim, l.spec.out_dim))
                .collect(),
            biases: net
                .layers
                .iter()
                .map(|l| vec![0.0; l.spec.out_dim])
                .collect(),
        }
    }

    fn matches(&self, net: &Network) -> bool {
        self.weights.len() == net.layers.len()
            && self.biases.len() == net.layers.len()
            && net.layers.iter().enumerate().all(|(i, l)| {
                self.weights[i].shape() == l.weights.shape() && self.biases[i].len() == l.bias.len()
            })
    }

    /// Flattened view, layer by layer, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

/// Momentum buffers, one per parameter.
pub type SgdState = ParamGrads;

/// `v ← μ·v − lr·(g + λ·p)`, `p ← p + v`. Weight decay skips biases.
pub fn sgd_step(
    net: &mut Network,
    grads: &ParamGrads,
    config: &SgdConfig,
    state: &mut SgdState,
) -> Result<()> {
    if !grads.matches(net) || !state.matches(net) {
        return Err(Error::ShapeMismatch(
            "gradients or optimizer state do not match the network".into(),
        ));
    }
    let SgdConfig {
        lr,
        momentum,
        weight_decay,
    } = *config;
    for (l, layer) in net.layers.iter_mut().enumerate() {
        let params = layer.weights.as_mut_slice();
        let vel = state.weights[l].as_mut_slice();
        for ((p, v), g) in params.iter_mut().zip(vel).zip(grads.weights[l].as_slice()) {
            *v = momentum * *v - lr * (g + weight_decay * *p);
            *p += *v;
        }
        for ((p, v), g) in layer
            .bias
            .iter_mut()
            .zip(state.biases[l].iter_mut())
            .zip(&grads.biases[l])
        {
            *v = momentum * *v - lr * g;
            *p += *v;
        }
    }
    Ok(())
}
