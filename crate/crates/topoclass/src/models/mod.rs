//! Two-layer GCN and GAT classifiers over identity node features, and the
//! full-batch transductive training loop.
//!
//! Identity features make the first layer's transformed messages H·W equal
//! W itself, so node i's pre-aggregation message is just row i of the
//! weight matrix and the N×N identity is never materialized. A literal
//! all-zero feature mode exists to demonstrate why zero features carry no
//! learning signal.

mod gat;
mod gcn;

pub use gat::{
    gat_attention_coefficients, gat_layer_forward, gat_layer_forward_from_messages,
    GatLayerParams, MergeMode,
};
pub use gcn::{gcn_layer_forward, gcn_layer_forward_from_messages, GcnLayerParams};

use std::rc::Rc;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, CsrStructure, Graph, NormalizationKind, NormalizedAdjacency};
use crate::labels::{argmax_lowest, LabelAssignment};
use crate::tensor::{nll_loss, AdamState, NodeId, Param, Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Relu,
    Elu,
    None,
}

impl Activation {
    pub fn apply(&self, t: &Tensor) -> Tensor {
        match self {
            Activation::Relu => t.relu(),
            Activation::Elu => t.elu(),
            Activation::None => t.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Gcn,
    Gat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    IdentityFeatures,
    ZeroFeatures,
}

/// Architecture description. Both models are two layers deep; the hidden
/// width is the GCN hidden size or the GAT per-head dimension.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hidden_width: usize,
    pub layer_count: usize,
    pub head_count: usize,
    pub input_mode: InputMode,
    pub leaky_slope: f64,
}

impl ModelSpec {
    /// GCN defaults: hidden width 16, relu after the first layer.
    pub fn gcn() -> Self {
        Self {
            kind: ModelKind::Gcn,
            hidden_width: 16,
            layer_count: 2,
            head_count: 1,
            input_mode: InputMode::IdentityFeatures,
            leaky_slope: 0.2,
        }
    }

    /// GAT defaults: 8 heads × 8 dims concatenated, elu, then a single
    /// averaged output head.
    pub fn gat() -> Self {
        Self {
            kind: ModelKind::Gat,
            hidden_width: 8,
            layer_count: 2,
            head_count: 8,
            input_mode: InputMode::IdentityFeatures,
            leaky_slope: 0.2,
        }
    }
}

/// Training protocol shared by both models.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            lr: 0.01,
            repetitions: 10,
            seed: 42,
        }
    }
}

fn glorot(rng: &mut ChaCha8Rng, dims: Vec<usize>, fan_in: usize, fan_out: usize) -> Param {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new(-limit, limit);
    let len: usize = dims.iter().product();
    Param::new((0..len).map(|_| dist.sample(rng)).collect(), dims)
}

pub struct GcnModel {
    adj: Rc<NormalizedAdjacency>,
    input_mode: InputMode,
    hidden_width: usize,
    w1: Param,
    w2: Param,
}

pub struct GatModel {
    csr: Rc<CsrStructure>,
    input_mode: InputMode,
    hidden_width: usize,
    leaky_slope: f64,
    head_w1: Vec<Param>,
    head_a1: Vec<Param>,
    w2: Param,
    a2: Param,
}

pub enum ModelInstance {
    Gcn(GcnModel),
    Gat(GatModel),
}

/// Builds a seeded two-layer model bound to the given graph.
pub fn build_model(
    spec: &ModelSpec,
    g: &Graph,
    num_classes: usize,
    seed: u64,
) -> Result<ModelInstance> {
    assert_eq!(spec.layer_count, 2, "both architectures are two layers deep");
    assert!(spec.hidden_width >= 1);
    let n = g.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match spec.kind {
        ModelKind::Gcn => {
            let adj = Rc::new(normalize_adjacency(g, NormalizationKind::Symmetric, true)?);
            let w1 = glorot(&mut rng, vec![n, spec.hidden_width], n, spec.hidden_width);
            let w2 = glorot(
                &mut rng,
                vec![spec.hidden_width, num_classes],
                spec.hidden_width,
                num_classes,
            );
            Ok(ModelInstance::Gcn(GcnModel {
                adj,
                input_mode: spec.input_mode,
                hidden_width: spec.hidden_width,
                w1,
                w2,
            }))
        }
        ModelKind::Gat => {
            assert!(spec.head_count >= 1);
            let csr = Rc::new(g.adjacency_with_self_loops());
            let f = spec.hidden_width;
            let mut head_w1 = Vec::with_capacity(spec.head_count);
            let mut head_a1 = Vec::with_capacity(spec.head_count);
            for _ in 0..spec.head_count {
                head_w1.push(glorot(&mut rng, vec![n, f], n, f));
                head_a1.push(glorot(&mut rng, vec![2 * f], 2 * f, 1));
            }
            let concat_width = f * spec.head_count;
            let w2 = glorot(
                &mut rng,
                vec![concat_width, num_classes],
                concat_width,
                num_classes,
            );
            let a2 = glorot(&mut rng, vec![2 * num_classes], 2 * num_classes, 1);
            Ok(ModelInstance::Gat(GatModel {
                csr,
                input_mode: spec.input_mode,
                hidden_width: f,
                leaky_slope: spec.leaky_slope,
                head_w1,
                head_a1,
                w2,
                a2,
            }))
        }
    }
}

impl ModelInstance {
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            ModelInstance::Gcn(m) => vec![&mut m.w1, &mut m.w2],
            ModelInstance::Gat(m) => m
                .head_w1
                .iter_mut()
                .chain(m.head_a1.iter_mut())
                .chain([&mut m.w2, &mut m.a2])
                .collect(),
        }
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        match self {
            ModelInstance::Gcn(m) => vec![m.w1.len(), m.w2.len()],
            ModelInstance::Gat(m) => m
                .head_w1
                .iter()
                .chain(m.head_a1.iter())
                .chain([&m.w2, &m.a2])
                .map(|p| p.len())
                .collect(),
        }
    }

    pub fn param_dims(&self) -> Vec<Vec<usize>> {
        match self {
            ModelInstance::Gcn(m) => vec![m.w1.dims.clone(), m.w2.dims.clone()],
            ModelInstance::Gat(m) => m
                .head_w1
                .iter()
                .chain(m.head_a1.iter())
                .chain([&m.w2, &m.a2])
                .map(|p| p.dims.clone())
                .collect(),
        }
    }

    /// One forward pass to row-wise log-probabilities. Returns the leaf ids
    /// of every parameter in `params_mut` order so gradients can be read
    /// back after `backward`.
    pub fn forward(&self, tape: &Tape) -> Result<(Tensor, Vec<NodeId>)> {
        match self {
            ModelInstance::Gcn(m) => {
                let w1 = m.w1.leaf(tape)?;
                let w2 = m.w2.leaf(tape)?;
                let leaf_ids = vec![w1.node_id().unwrap(), w2.node_id().unwrap()];
                let messages = match m.input_mode {
                    InputMode::IdentityFeatures => w1,
                    InputMode::ZeroFeatures => {
                        Tensor::zeros(vec![m.adj.num_nodes, m.hidden_width])
                    }
                };
                let h1 = gcn_layer_forward_from_messages(&m.adj, &messages, None, Activation::Relu)?;
                let h2 = gcn_layer_forward_from_messages(
                    &m.adj,
                    &h1.matmul(&w2)?,
                    None,
                    Activation::None,
                )?;
                Ok((h2.log_softmax_rows()?, leaf_ids))
            }
            ModelInstance::Gat(m) => {
                let mut leaf_ids = Vec::with_capacity(2 * m.head_w1.len() + 2);
                let mut w_leaves = Vec::with_capacity(m.head_w1.len());
                let mut a_leaves = Vec::with_capacity(m.head_a1.len());
                for p in &m.head_w1 {
                    w_leaves.push(p.leaf(tape)?);
                }
                for p in &m.head_a1 {
                    a_leaves.push(p.leaf(tape)?);
                }
                let w2 = m.w2.leaf(tape)?;
                let a2 = m.a2.leaf(tape)?;
                leaf_ids.extend(w_leaves.iter().map(|t| t.node_id().unwrap()));
                leaf_ids.extend(a_leaves.iter().map(|t| t.node_id().unwrap()));
                leaf_ids.push(w2.node_id().unwrap());
                leaf_ids.push(a2.node_id().unwrap());

                let messages: Vec<Tensor> = match m.input_mode {
                    InputMode::IdentityFeatures => w_leaves,
                    InputMode::ZeroFeatures => (0..m.head_w1.len())
                        .map(|_| Tensor::zeros(vec![m.csr.num_nodes, m.hidden_width]))
                        .collect(),
                };
                let layer1 = GatLayerParams {
                    head_weights: Vec::new(),
                    head_attention: a_leaves,
                    merge: MergeMode::Concatenate,
                    leaky_slope: m.leaky_slope,
                    activation: Activation::Elu,
                };
                let h1 = gat_layer_forward_from_messages(&m.csr, &messages, &layer1)?;
                let layer2 = GatLayerParams {
                    head_weights: vec![w2],
                    head_attention: vec![a2],
                    merge: MergeMode::Average,
                    leaky_slope: m.leaky_slope,
                    activation: Activation::None,
                };
                let h2 = gat_layer_forward(&m.csr, &h1, &layer2)?;
                Ok((h2.log_softmax_rows()?, leaf_ids))
            }
        }
    }
}

/// Outcome of one training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub predictions: Vec<usize>,
    pub loss_history: Vec<f64>,
    /// Measured accuracy over the training mask, recorded so the
    /// perfect-training assumption behind derived test accuracies can be
    /// audited.
    pub train_accuracy: f64,
}

/// Full-batch transductive training: every epoch runs a forward pass over
/// the whole graph, takes the negative log-likelihood over the training
/// mask, backpropagates, and applies one Adam step.
pub fn train_and_predict(
    model: &mut ModelInstance,
    labels: &LabelAssignment,
    train_mask: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if train_mask.is_empty() {
        return Err(Error::NoTrainingNodes);
    }
    let mut adam = AdamState::new(cfg.lr, &model.param_sizes());
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let tape = Tape::new();
        let (log_probs, leaf_ids) = model.forward(&tape)?;
        let loss = nll_loss(&log_probs, labels.ground_truth(), train_mask)?;
        let loss_value = loss.scalar();
        if !loss_value.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                loss: loss_value,
            });
        }
        loss_history.push(loss_value);
        let store = loss.backward()?;
        let grads: Vec<Option<&[f64]>> = leaf_ids.iter().map(|&id| store.by_id(id)).collect();
        adam.step(&mut model.params_mut(), &grads)?;
    }

    let tape = Tape::new();
    let (log_probs, _) = model.forward(&tape)?;
    let c = labels.num_classes();
    let predictions: Vec<usize> = (0..labels.num_nodes())
        .map(|i| argmax_lowest(&log_probs.values()[i * c..(i + 1) * c]))
        .collect();
    let train_correct = train_mask
        .iter()
        .filter(|&&i| predictions[i] == labels.class_of(i))
        .count();
    Ok(TrainOutcome {
        predictions,
        loss_history,
        train_accuracy: train_correct as f64 / train_mask.len() as f64,
    })
}
