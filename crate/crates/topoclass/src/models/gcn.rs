//! Graph convolution layer: H' = σ(Â H W) over a degree-normalized
//! adjacency, per-node h'_i = σ(Σ_{j∈N(i)} W^T h_j / (√deg(i)·√deg(j))).

use std::rc::Rc;

use crate::error::Result;
use crate::graph::NormalizedAdjacency;
use crate::tensor::{spmm, Tensor};

use super::Activation;

/// One graph-convolution layer's tensors for a single forward pass.
#[derive(Debug, Clone)]
pub struct GcnLayerParams {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
    pub activation: Activation,
}

pub fn gcn_layer_forward(
    adj: &Rc<NormalizedAdjacency>,
    h: &Tensor,
    params: &GcnLayerParams,
) -> Result<Tensor> {
    let messages = h.matmul(&params.weight)?;
    gcn_layer_forward_from_messages(adj, &messages, params.bias.as_ref(), params.activation)
}

/// The aggregation half of the layer, for callers that already hold the
/// transformed messages H·W (identity features make that the weight itself).
pub fn gcn_layer_forward_from_messages(
    adj: &Rc<NormalizedAdjacency>,
    messages: &Tensor,
    bias: Option<&Tensor>,
    activation: Activation,
) -> Result<Tensor> {
    let mut out = spmm(adj, messages)?;
    if let Some(b) = bias {
        out = out.add_bias(b)?;
    }
    Ok(activation.apply(&out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, Graph, NormalizationKind};
    use approx::assert_abs_diff_eq;

    fn layer(weight: Tensor) -> GcnLayerParams {
        GcnLayerParams {
            weight,
            bias: None,
            activation: Activation::None,
        }
    }

    #[test]
    fn single_node_with_self_loop_and_identity_weight_is_identity() {
        let g = Graph::from_relabeled_pairs(1, &[]).unwrap();
        let adj = Rc::new(normalize_adjacency(&g, NormalizationKind::Symmetric, true).unwrap());
        let w = Tensor::constant(vec![1.0], vec![1, 1]).unwrap();
        let h = Tensor::constant(vec![-2.5], vec![1, 1]).unwrap();
        let out = gcn_layer_forward(&adj, &h, &layer(w)).unwrap();
        assert_abs_diff_eq!(out.values()[0], -2.5, epsilon = 1e-12);
    }

    #[test]
    fn two_node_edge_averages_under_symmetric_normalization() {
        // Self-loops give both nodes degree 2; every Â entry is 0.5, so with
        // W = I and h = [[2],[4]] each node lands on 3.
        let g = Graph::from_undirected_edges(2, &[(0, 1)]).unwrap();
        let adj = Rc::new(normalize_adjacency(&g, NormalizationKind::Symmetric, true).unwrap());
        let w = Tensor::constant(vec![1.0], vec![1, 1]).unwrap();
        let h = Tensor::constant(vec![2.0, 4.0], vec![2, 1]).unwrap();
        let out = gcn_layer_forward(&adj, &h, &layer(w)).unwrap();
        assert_abs_diff_eq!(out.values()[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.values()[1], 3.0, epsilon = 1e-12);
    }
}
