//! Graph attention layer. Per head, with messages m_j = W^T h_j:
//!
//!   e_ij = LeakyReLU(a · [m_i ‖ m_j])        (logits over j ∈ N(i))
//!   α_ij = softmax_j(e_ij)
//!   h'_i = σ(Σ_j α_ij m_j)
//!
//! The attention vector a ∈ ℝ^{2F} splits into a receiver half applied to
//! m_i and a sender half applied to m_j, so the per-edge logit is
//! s_i + t_j with s = M·a_recv and t = M·a_send — the usual factorization
//! that avoids materializing concatenated edge features.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::graph::CsrStructure;
use crate::tensor::{edge_pair_scores, segment_softmax, weighted_neighbor_sum, Tensor};

use super::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeMode {
    Concatenate,
    Average,
}

/// One attention layer's tensors for a single forward pass.
#[derive(Debug, Clone)]
pub struct GatLayerParams {
    /// Per-head weight, each `[f_in, f_head]`.
    pub head_weights: Vec<Tensor>,
    /// Per-head attention vector, each `[2·f_head]`.
    pub head_attention: Vec<Tensor>,
    pub merge: MergeMode,
    pub leaky_slope: f64,
    pub activation: Activation,
}

impl GatLayerParams {
    /// Heads are counted by attention vectors: `head_weights` may stay empty
    /// when the caller supplies precomputed messages.
    pub fn head_count(&self) -> usize {
        self.head_attention.len()
    }
}

/// Normalized attention coefficients of one head as an `[nnz]` edge tensor.
pub fn gat_attention_coefficients(
    csr: &Rc<CsrStructure>,
    messages: &Tensor,
    attention: &Tensor,
    leaky_slope: f64,
) -> Result<Tensor> {
    let f = messages.dims()[1];
    let receiver = attention.slice1d(0, f)?;
    let sender = attention.slice1d(f, 2 * f)?;
    let s = messages.matvec(&receiver)?;
    let t = messages.matvec(&sender)?;
    let logits = edge_pair_scores(&s, &t, csr)?.leaky_relu(leaky_slope);
    segment_softmax(&logits, csr)
}

fn gat_head(
    csr: &Rc<CsrStructure>,
    messages: &Tensor,
    attention: &Tensor,
    leaky_slope: f64,
) -> Result<Tensor> {
    let alpha = gat_attention_coefficients(csr, messages, attention, leaky_slope)?;
    weighted_neighbor_sum(&alpha, messages, csr)
}

pub fn gat_layer_forward(
    csr: &Rc<CsrStructure>,
    h: &Tensor,
    params: &GatLayerParams,
) -> Result<Tensor> {
    assert_eq!(params.head_weights.len(), params.head_attention.len());
    let messages: Vec<Tensor> = params
        .head_weights
        .iter()
        .map(|w| h.matmul(w))
        .collect::<Result<_>>()?;
    gat_layer_forward_from_messages(csr, &messages, params)
}

/// The attention half of the layer, for callers that already hold each
/// head's transformed messages H·W_k.
pub fn gat_layer_forward_from_messages(
    csr: &Rc<CsrStructure>,
    messages: &[Tensor],
    params: &GatLayerParams,
) -> Result<Tensor> {
    assert_eq!(messages.len(), params.head_count());
    assert!(params.head_count() >= 1);
    for i in 0..csr.num_nodes {
        if csr.row(i).is_empty() {
            return Err(Error::EmptyNeighborhood(i));
        }
    }
    let mut heads = Vec::with_capacity(messages.len());
    for (m, a) in messages.iter().zip(&params.head_attention) {
        heads.push(gat_head(csr, m, a, params.leaky_slope)?);
    }
    match params.merge {
        // Concatenation applies the nonlinearity per head; averaging applies
        // it after the mean.
        MergeMode::Concatenate => {
            let activated: Vec<Tensor> = heads.iter().map(|h| params.activation.apply(h)).collect();
            Tensor::concat_cols(&activated)
        }
        MergeMode::Average => {
            let mut acc = heads[0].clone();
            for h in &heads[1..] {
                acc = acc.add(h)?;
            }
            Ok(params.activation.apply(&acc.scale(1.0 / heads.len() as f64)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lone_self_loop_gets_full_attention() {
        let g = Graph::from_relabeled_pairs(1, &[]).unwrap();
        let csr = Rc::new(g.adjacency_with_self_loops());
        let m = Tensor::constant(vec![3.0, -1.0], vec![1, 2]).unwrap();
        let a = Tensor::constant(vec![0.3, -0.7, 1.1, 0.2], vec![4]).unwrap();
        let alpha = gat_attention_coefficients(&csr, &m, &a, 0.2).unwrap();
        assert_abs_diff_eq!(alpha.values()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_messages_split_attention_evenly() {
        let g = Graph::from_undirected_edges(2, &[(0, 1)]).unwrap();
        let csr = Rc::new(g.adjacency_with_self_loops());
        let m = Tensor::constant(vec![1.5, 1.5], vec![2, 1]).unwrap();
        let a = Tensor::constant(vec![0.4, -0.9], vec![2]).unwrap();
        let alpha = gat_attention_coefficients(&csr, &m, &a, 0.2).unwrap();
        for &v in alpha.values() {
            assert_abs_diff_eq!(v, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_empty_neighborhood() {
        // A CSR without self-loops leaves the isolated node 2 with no row.
        let g = Graph::from_relabeled_pairs(3, &[(0, 1)]).unwrap();
        let csr = Rc::new(CsrStructure {
            num_nodes: 3,
            offsets: vec![0, 1, 2, 2],
            cols: vec![1, 0],
        });
        drop(g);
        let m = Tensor::constant(vec![0.0, 0.0, 0.0], vec![3, 1]).unwrap();
        let a = Tensor::constant(vec![0.0, 0.0], vec![2]).unwrap();
        let params = GatLayerParams {
            head_weights: vec![Tensor::constant(vec![1.0], vec![1, 1]).unwrap()],
            head_attention: vec![a],
            merge: MergeMode::Concatenate,
            leaky_slope: 0.2,
            activation: Activation::None,
        };
        let err = gat_layer_forward_from_messages(&csr, &[m], &params).unwrap_err();
        assert!(matches!(err, Error::EmptyNeighborhood(2)));
    }

    #[test]
    fn concatenate_widens_by_head_count() {
        let g = Graph::from_undirected_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let csr = Rc::new(g.adjacency_with_self_loops());
        let h = Tensor::constant(vec![1.0, 0.0, 0.5, -0.5, 0.0, 1.0], vec![3, 2]).unwrap();
        let heads = 4;
        let params = GatLayerParams {
            head_weights: (0..heads)
                .map(|k| {
                    Tensor::constant(vec![0.1 * k as f64, 0.2, -0.3, 0.4 + 0.1 * k as f64], vec![2, 2])
                        .unwrap()
                })
                .collect(),
            head_attention: (0..heads)
                .map(|_| Tensor::constant(vec![0.5, -0.25, 0.75, 0.1], vec![4]).unwrap())
                .collect(),
            merge: MergeMode::Concatenate,
            leaky_slope: 0.2,
            activation: Activation::Elu,
        };
        let out = gat_layer_forward(&csr, &h, &params).unwrap();
        assert_eq!(out.dims(), &[3, 8]);
    }
}
