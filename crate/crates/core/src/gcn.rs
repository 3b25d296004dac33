//! The graph convolutional network, written out by hand.
//!
//! One layer computes H' = ReLU(Â H W) where Â is the normalized
//! adjacency from [`crate::encode`]. After the last layer the node
//! embeddings are mean-pooled into a single vector, and a dense layer with
//! a sigmoid produces the probability that the contract is vulnerable.
//! Backpropagation is derived directly from that composition, layer by
//! layer, and checked against finite differences in the test suite. The
//! optimizer keeps per-parameter first and second moment estimates with
//! bias correction, one shared timestep per graph update.

use crate::encode::EncodedGraph;
use crate::matrix::Matrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Architecture and initialization parameters. The classification
/// threshold rides along so a checkpoint is self-contained for inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_hidden_layers: usize,
    pub hidden_width: usize,
    pub input_width: usize,
    pub seed: u64,
    pub classification_threshold: f64,
}

impl Default for ModelConfig {
    fn default() -> ModelConfig {
        ModelConfig {
            num_hidden_layers: 2,
            hidden_width: 64,
            input_width: 256,
            seed: 42,
            classification_threshold: 0.5,
        }
    }
}

/// The trainable state: one weight matrix per layer plus the dense readout.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    pub layers: Vec<Matrix>,
    pub readout_weights: Vec<f64>,
    pub readout_bias: f64,
    pub config: ModelConfig,
}

/// Everything the forward pass computes, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// H⁰ = X through H^L, one per layer boundary.
    pub activations: Vec<Matrix>,
    /// Zˡ = Â Hˡ Wˡ before the ReLU, one per layer.
    pub pre_activations: Vec<Matrix>,
    /// Column mean of H^L: the graph embedding, 1 x hidden_width.
    pub pooled: Matrix,
    pub logit: f64,
    pub probability: f64,
}

/// Gradients of the loss with respect to every parameter, plus the loss
/// itself (the training loop wants both from one backward pass).
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Matrix>,
    pub readout_weights: Vec<f64>,
    pub readout_bias: f64,
    pub loss: f64,
}

/// Training hyperparameters. Moment decay and epsilon follow the standard
/// adaptive-moment defaults; nothing here depends on the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub classification_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-3,
            epochs: 200,
            seed: 42,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            classification_threshold: 0.5,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GcnError {
    #[error("{context}: expected width {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training diverged: non-finite loss at epoch {epoch} on graph {graph}")]
    DivergedLoss { epoch: usize, graph: usize },
    #[error("graph {index} has no label")]
    MissingLabel { index: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl ModelConfig {
    fn validate(&self) -> Result<(), GcnError> {
        if !(1..=6).contains(&self.num_hidden_layers) {
            return Err(GcnError::InvalidConfig(format!(
                "num_hidden_layers must be 1..=6, got {}",
                self.num_hidden_layers
            )));
        }
        if self.hidden_width == 0 || self.input_width == 0 {
            return Err(GcnError::InvalidConfig("zero layer width".into()));
        }
        if !(self.classification_threshold > 0.0 && self.classification_threshold < 1.0) {
            return Err(GcnError::InvalidConfig(format!(
                "classification_threshold must lie in (0,1), got {}",
                self.classification_threshold
            )));
        }
        Ok(())
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), GcnError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(GcnError::InvalidConfig(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(GcnError::InvalidConfig(format!(
                    "{name} must lie in [0,1), got {beta}"
                )));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(GcnError::InvalidConfig("epsilon must be positive".into()));
        }
        if !(self.classification_threshold > 0.0 && self.classification_threshold < 1.0) {
            return Err(GcnError::InvalidConfig(format!(
                "classification_threshold must lie in (0,1), got {}",
                self.classification_threshold
            )));
        }
        Ok(())
    }
}

/// Uniform init scaled by fan-in plus fan-out.
fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..bound))
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Binary cross-entropy evaluated from the logit, in the form
/// max(z,0) - z*y + ln(1+exp(-|z|)) that never takes ln of 0.
pub fn bce_from_logit(logit: f64, label: u8) -> f64 {
    logit.max(0.0) - logit * f64::from(label) + (-logit.abs()).exp().ln_1p()
}

impl GcnModel {
    /// Fresh model with seeded uniform init; readout bias starts at zero.
    pub fn new(config: ModelConfig) -> Result<GcnModel, GcnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut layers = Vec::with_capacity(config.num_hidden_layers);
        let mut in_width = config.input_width;
        for _ in 0..config.num_hidden_layers {
            layers.push(glorot(in_width, config.hidden_width, &mut rng));
            in_width = config.hidden_width;
        }
        let readout_bound = (6.0 / (config.hidden_width + 1) as f64).sqrt();
        let readout_weights = (0..config.hidden_width)
            .map(|_| rng.random_range(-readout_bound..readout_bound))
            .collect();
        Ok(GcnModel {
            layers,
            readout_weights,
            readout_bias: 0.0,
            config,
        })
    }

    /// Serialize to the checkpoint JSON schema.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CheckpointRepr {
            config: self.config.clone(),
            layers: self.layers.clone(),
            readout: ReadoutRepr {
                weights: self.readout_weights.clone(),
                bias: self.readout_bias,
            },
        })
        .expect("checkpoint serialization cannot fail")
    }

    /// Load a checkpoint, verifying that layer shapes chain correctly.
    pub fn from_json(text: &str) -> Result<GcnModel, GcnError> {
        let repr: CheckpointRepr = serde_json::from_str(text)
            .map_err(|e| GcnError::InvalidConfig(format!("unparseable checkpoint: {e}")))?;
        repr.config.validate()?;
        if repr.layers.len() != repr.config.num_hidden_layers {
            return Err(GcnError::InvalidConfig(format!(
                "checkpoint has {} layers, config says {}",
                repr.layers.len(),
                repr.config.num_hidden_layers
            )));
        }
        let mut in_width = repr.config.input_width;
        for (l, w) in repr.layers.iter().enumerate() {
            if w.rows() != in_width || w.cols() != repr.config.hidden_width {
                return Err(GcnError::InvalidConfig(format!(
                    "layer {l} is {}x{}, expected {}x{}",
                    w.rows(),
                    w.cols(),
                    in_width,
                    repr.config.hidden_width
                )));
            }
            in_width = w.cols();
        }
        if repr.readout.weights.len() != repr.config.hidden_width {
            return Err(GcnError::InvalidConfig(format!(
                "readout has {} weights, expected {}",
                repr.readout.weights.len(),
                repr.config.hidden_width
            )));
        }
        let finite = repr.layers.iter().all(|w| w.data().iter().all(|v| v.is_finite()))
            && repr.readout.weights.iter().all(|v| v.is_finite())
            && repr.readout.bias.is_finite();
        if !finite {
            return Err(GcnError::InvalidConfig(
                "checkpoint contains non-finite parameters".into(),
            ));
        }
        Ok(GcnModel {
            layers: repr.layers,
            readout_weights: repr.readout.weights,
            readout_bias: repr.readout.bias,
            config: repr.config,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ReadoutRepr {
    weights: Vec<f64>,
    bias: f64,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRepr {
    config: ModelConfig,
    layers: Vec<Matrix>,
    readout: ReadoutRepr,
}

/// Run the network on one graph, keeping all intermediates.
pub fn forward(model: &GcnModel, g: &EncodedGraph) -> Result<ForwardTrace, GcnError> {
    if g.features.cols() != model.config.input_width {
        return Err(GcnError::ShapeMismatch {
            context: "graph feature width does not match model input",
            expected: model.config.input_width,
            found: g.features.cols(),
        });
    }
    let mut activations = vec![g.features.clone()];
    let mut pre_activations = Vec::with_capacity(model.layers.len());
    for w in &model.layers {
        let h = activations.last().expect("seeded with H0");
        let z = g.a_hat.matmul(h).matmul(w);
        activations.push(z.map(|v| v.max(0.0)));
        pre_activations.push(z);
    }
    let pooled = activations.last().expect("at least one layer").column_mean();
    let logit = pooled
        .data()
        .iter()
        .zip(&model.readout_weights)
        .map(|(&p, &w)| p * w)
        .sum::<f64>()
        + model.readout_bias;
    Ok(ForwardTrace {
        activations,
        pre_activations,
        pooled,
        logit,
        probability: sigmoid(logit),
    })
}

/// Classify one graph: the predicted label (1 at or above the threshold)
/// and the underlying probability.
pub fn predict(model: &GcnModel, g: &EncodedGraph) -> Result<(u8, f64), GcnError> {
    let trace = forward(model, g)?;
    let label = u8::from(trace.probability >= model.config.classification_threshold);
    Ok((label, trace.probability))
}

/// Analytic gradients of the cross-entropy loss for one labeled graph.
///
/// The logit gradient is p - y. It flows back through the readout, is
/// spread uniformly over nodes by the mean pool, and then through each
/// layer: with G = upstream ⊙ ReLU'(Z), the weight gradient is (Â H)ᵀ G
/// and the upstream for the layer below is Âᵀ G Wᵀ.
pub fn backward(model: &GcnModel, g: &EncodedGraph, label: u8) -> Result<Gradients, GcnError> {
    let trace = forward(model, g)?;
    let n = g.n as f64;
    let dlogit = trace.probability - f64::from(label);

    let readout_weights: Vec<f64> = trace.pooled.data().iter().map(|&p| dlogit * p).collect();
    let readout_bias = dlogit;

    // d pooled = dlogit * r; column_mean spreads it over rows with a 1/n.
    let last_h = trace.activations.last().expect("nonempty");
    let mut upstream = Matrix::from_fn(last_h.rows(), last_h.cols(), |_, j| {
        dlogit * model.readout_weights[j] / n
    });

    let mut layer_grads = vec![Matrix::zeros(0, 0); model.layers.len()];
    for l in (0..model.layers.len()).rev() {
        let gated = upstream.zip_map(&trace.pre_activations[l], |u, z| if z > 0.0 { u } else { 0.0 });
        let propagated = g.a_hat.matmul(&trace.activations[l]);
        layer_grads[l] = propagated.transpose().matmul(&gated);
        if l > 0 {
            upstream = g
                .a_hat
                .transpose()
                .matmul(&gated)
                .matmul(&model.layers[l].transpose());
        }
    }

    Ok(Gradients {
        layers: layer_grads,
        readout_weights,
        readout_bias,
        loss: bce_from_logit(trace.logit, label),
    })
}

/// First/second moment estimates for every parameter, with one shared
/// timestep advanced per graph update.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_layers: Vec<Matrix>,
    v_layers: Vec<Matrix>,
    m_readout: Vec<f64>,
    v_readout: Vec<f64>,
    m_bias: f64,
    v_bias: f64,
    t: u64,
}

impl AdamState {
    pub fn new(model: &GcnModel) -> AdamState {
        AdamState {
            m_layers: model
                .layers
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            v_layers: model
                .layers
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            m_readout: vec![0.0; model.readout_weights.len()],
            v_readout: vec![0.0; model.readout_weights.len()],
            m_bias: 0.0,
            v_bias: 0.0,
            t: 0,
        }
    }

    /// Apply one bias-corrected moment update to every parameter.
    pub fn step(&mut self, model: &mut GcnModel, grads: &Gradients, cfg: &TrainConfig) {
        self.t += 1;
        let correction1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let correction2 = 1.0 - cfg.beta2.powi(self.t as i32);
        let update = |param: &mut f64, grad: f64, m: &mut f64, v: &mut f64| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * grad;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * grad * grad;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *param -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        };
        for (l, w) in model.layers.iter_mut().enumerate() {
            let (ms, vs) = (self.m_layers[l].data_mut(), self.v_layers[l].data_mut());
            for (((param, &grad), m), v) in w
                .data_mut()
                .iter_mut()
                .zip(grads.layers[l].data())
                .zip(ms)
                .zip(vs)
            {
                update(param, grad, m, v);
            }
        }
        for (((param, &grad), m), v) in model
            .readout_weights
            .iter_mut()
            .zip(&grads.readout_weights)
            .zip(&mut self.m_readout)
            .zip(&mut self.v_readout)
        {
            update(param, grad, m, v);
        }
        update(
            &mut model.readout_bias,
            grads.readout_bias,
            &mut self.m_bias,
            &mut self.v_bias,
        );
    }
}

/// Train on labeled graphs with per-graph updates, shuffling the visit
/// order each epoch with a seeded generator. Returns the trained model and
/// the mean loss per epoch. Fully deterministic given the seed.
pub fn train(
    mut model: GcnModel,
    dataset: &[EncodedGraph],
    cfg: &TrainConfig,
) -> Result<(GcnModel, Vec<f64>), GcnError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(GcnError::EmptyDataset);
    }
    for (index, g) in dataset.iter().enumerate() {
        if g.label.is_none() {
            return Err(GcnError::MissingLabel { index });
        }
        if g.features.cols() != model.config.input_width {
            return Err(GcnError::ShapeMismatch {
                context: "graph feature width does not match model input",
                expected: model.config.input_width,
                found: g.features.cols(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(&model);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &idx in &order {
            let g = &dataset[idx];
            let grads = backward(&model, g, g.label.expect("checked above"))?;
            if !grads.loss.is_finite() {
                return Err(GcnError::DivergedLoss { epoch, graph: idx });
            }
            adam.step(&mut model, &grads, cfg);
            epoch_loss += grads.loss;
        }
        history.push(epoch_loss / dataset.len() as f64);
    }
    model.config.classification_threshold = cfg.classification_threshold;
    Ok((model, history))
}
