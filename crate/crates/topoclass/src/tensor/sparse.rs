//! Sparse-structure operations: constant-matrix × dense products and the
//! per-edge primitives attention layers are assembled from.
//!
//! The sparse operand is always a constant — gradients flow only through the
//! dense tensors (and, for attention, through the per-edge coefficients).
//! Edge tensors have shape `[nnz]` and follow the CSR entry order of the
//! structure they were built against.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::graph::{CsrStructure, NormalizedAdjacency};

use super::{joint_tape, make_result, Tensor};

/// Sparse × dense product: `out = S · H` with S a constant normalized
/// adjacency and H a `[n, f]` tensor.
pub fn spmm(adj: &Rc<NormalizedAdjacency>, h: &Tensor) -> Result<Tensor> {
    if h.dims().len() != 2 || h.dims()[0] != adj.num_nodes {
        return Err(Error::ShapeMismatch {
            op: "spmm",
            lhs: vec![adj.num_nodes, adj.num_nodes],
            rhs: h.dims().to_vec(),
        });
    }
    let (n, f) = (adj.num_nodes, h.dims()[1]);
    let hv = h.values();
    let mut out = vec![0.0; n * f];
    for i in 0..n {
        let (cols, vals) = adj.row(i);
        let orow = &mut out[i * f..(i + 1) * f];
        for (&j, &v) in cols.iter().zip(vals) {
            let hrow = &hv[j * f..(j + 1) * f];
            for (o, &x) in orow.iter_mut().zip(hrow) {
                *o += v * x;
            }
        }
    }
    let parent = h.node_id();
    let adj = Rc::clone(adj);
    Ok(make_result(
        out,
        vec![n, f],
        joint_tape(&[h]),
        move |grad, store| {
            if let Some(id) = parent {
                // dH = Sᵀ · dOut, accumulated entry by entry.
                store.accumulate(id, n * f, |slot| {
                    for i in 0..n {
                        let (cols, vals) = adj.row(i);
                        let grow = &grad[i * f..(i + 1) * f];
                        for (&j, &v) in cols.iter().zip(vals) {
                            let srow = &mut slot[j * f..(j + 1) * f];
                            for (s, &g) in srow.iter_mut().zip(grow) {
                                *s += v * g;
                            }
                        }
                    }
                });
            }
        },
    ))
}

/// Per-edge logits from per-node receiver and sender scores:
/// entry k of the result is `s[i] + t[j]` for the k-th CSR entry (i, j).
pub fn edge_pair_scores(s: &Tensor, t: &Tensor, csr: &Rc<CsrStructure>) -> Result<Tensor> {
    let n = csr.num_nodes;
    if s.dims() != [n] || t.dims() != [n] {
        return Err(Error::ShapeMismatch {
            op: "edge_pair_scores",
            lhs: s.dims().to_vec(),
            rhs: t.dims().to_vec(),
        });
    }
    let mut out = Vec::with_capacity(csr.nnz());
    for i in 0..n {
        for &j in csr.row(i) {
            out.push(s.values()[i] + t.values()[j]);
        }
    }
    let (s_id, t_id) = (s.node_id(), t.node_id());
    let csr = Rc::clone(csr);
    let nnz = out.len();
    Ok(make_result(
        out,
        vec![nnz],
        joint_tape(&[s, t]),
        move |grad, store| {
            if let Some(id) = s_id {
                store.accumulate(id, n, |slot| {
                    for i in 0..n {
                        let range = csr.offsets[i]..csr.offsets[i + 1];
                        slot[i] += grad[range].iter().sum::<f64>();
                    }
                });
            }
            if let Some(id) = t_id {
                store.accumulate(id, n, |slot| {
                    for (k, &j) in csr.cols.iter().enumerate() {
                        slot[j] += grad[k];
                    }
                });
            }
        },
    ))
}

/// Softmax over each CSR row segment of an `[nnz]` edge tensor, with
/// per-segment max subtraction.
pub fn segment_softmax(e: &Tensor, csr: &Rc<CsrStructure>) -> Result<Tensor> {
    if e.dims() != [csr.nnz()] {
        return Err(Error::ShapeMismatch {
            op: "segment_softmax",
            lhs: e.dims().to_vec(),
            rhs: vec![csr.nnz()],
        });
    }
    let n = csr.num_nodes;
    let mut out = vec![0.0; e.len()];
    for i in 0..n {
        let range = csr.offsets[i]..csr.offsets[i + 1];
        if range.is_empty() {
            continue;
        }
        let seg = &e.values()[range.clone()];
        let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (k, &x) in range.clone().zip(seg) {
            let w = (x - max).exp();
            out[k] = w;
            sum += w;
        }
        for k in range {
            out[k] /= sum;
        }
    }
    let alpha = Rc::new(out.clone());
    let parent = e.node_id();
    let csr = Rc::clone(csr);
    let nnz = e.len();
    Ok(make_result(
        out,
        vec![nnz],
        joint_tape(&[e]),
        move |grad, store| {
            if let Some(id) = parent {
                store.accumulate(id, nnz, |slot| {
                    for i in 0..n {
                        let range = csr.offsets[i]..csr.offsets[i + 1];
                        let dot: f64 = range.clone().map(|k| grad[k] * alpha[k]).sum();
                        for k in range {
                            slot[k] += alpha[k] * (grad[k] - dot);
                        }
                    }
                });
            }
        },
    ))
}

/// Coefficient-weighted neighborhood aggregation:
/// `out[i] = Σ_{k in row i} w[k] · m[col(k)]` with both `w` and `m` tracked.
pub fn weighted_neighbor_sum(w: &Tensor, m: &Tensor, csr: &Rc<CsrStructure>) -> Result<Tensor> {
    let n = csr.num_nodes;
    if w.dims() != [csr.nnz()] || m.dims().len() != 2 || m.dims()[0] != n {
        return Err(Error::ShapeMismatch {
            op: "weighted_neighbor_sum",
            lhs: w.dims().to_vec(),
            rhs: m.dims().to_vec(),
        });
    }
    let f = m.dims()[1];
    let mv = m.values();
    let mut out = vec![0.0; n * f];
    for i in 0..n {
        let orow = &mut out[i * f..(i + 1) * f];
        for k in csr.offsets[i]..csr.offsets[i + 1] {
            let j = csr.cols[k];
            let c = w.values()[k];
            let mrow = &mv[j * f..(j + 1) * f];
            for (o, &x) in orow.iter_mut().zip(mrow) {
                *o += c * x;
            }
        }
    }
    let (w_id, m_id) = (w.node_id(), m.node_id());
    let (w_vals, m_vals) = (Rc::clone(&w.values), Rc::clone(&m.values));
    let csr = Rc::clone(csr);
    let nnz = w.len();
    Ok(make_result(
        out,
        vec![n, f],
        joint_tape(&[w, m]),
        move |grad, store| {
            if let Some(id) = w_id {
                store.accumulate(id, nnz, |slot| {
                    for i in 0..n {
                        let grow = &grad[i * f..(i + 1) * f];
                        for k in csr.offsets[i]..csr.offsets[i + 1] {
                            let j = csr.cols[k];
                            let mrow = &m_vals[j * f..(j + 1) * f];
                            slot[k] += grow.iter().zip(mrow).map(|(&g, &x)| g * x).sum::<f64>();
                        }
                    }
                });
            }
            if let Some(id) = m_id {
                store.accumulate(id, n * f, |slot| {
                    for i in 0..n {
                        let grow = &grad[i * f..(i + 1) * f];
                        for k in csr.offsets[i]..csr.offsets[i + 1] {
                            let j = csr.cols[k];
                            let c = w_vals[k];
                            let srow = &mut slot[j * f..(j + 1) * f];
                            for (s, &g) in srow.iter_mut().zip(grow) {
                                *s += c * g;
                            }
                        }
                    }
                });
            }
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, Graph, NormalizationKind};
    use approx::assert_abs_diff_eq;

    fn path3() -> Graph {
        Graph::from_undirected_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn spmm_row_normalized_path_averages_neighbors() {
        // Row-normalized path 0–1–2 without self-loops on h=[[1],[3],[5]]:
        // node 0 sees {3}, node 1 sees {1,5}, node 2 sees {3}.
        let adj = Rc::new(normalize_adjacency(&path3(), NormalizationKind::Row, false).unwrap());
        let h = Tensor::constant(vec![1.0, 3.0, 5.0], vec![3, 1]).unwrap();
        let out = spmm(&adj, &h).unwrap();
        for &v in out.values() {
            assert_abs_diff_eq!(v, 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn spmm_backward_applies_transpose() {
        use crate::tensor::Tape;
        let adj = Rc::new(normalize_adjacency(&path3(), NormalizationKind::Row, false).unwrap());
        let tape = Tape::new();
        let h = tape.leaf(vec![1.0, 3.0, 5.0], vec![3, 1]).unwrap();
        let grads = spmm(&adj, &h).unwrap().sum().backward().unwrap();
        // dH = Sᵀ·1: column sums of the row-normalized matrix.
        let g = grads.grad(&h).unwrap();
        assert_abs_diff_eq!(g[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[2], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn segment_softmax_rows_sum_to_one() {
        let csr = Rc::new(path3().adjacency_with_self_loops());
        let e = Tensor::constant((0..csr.nnz()).map(|k| k as f64 * 0.7 - 1.0).collect(), vec![csr.nnz()])
            .unwrap();
        let a = segment_softmax(&e, &csr).unwrap();
        for i in 0..3 {
            let s: f64 = a.values()[csr.offsets[i]..csr.offsets[i + 1]].iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn singleton_segment_gets_weight_one() {
        let g = Graph::from_relabeled_pairs(1, &[]).unwrap();
        let csr = Rc::new(g.adjacency_with_self_loops());
        let e = Tensor::constant(vec![-3.7], vec![1]).unwrap();
        let a = segment_softmax(&e, &csr).unwrap();
        assert_abs_diff_eq!(a.values()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn weighted_sum_with_uniform_weights_averages() {
        let csr = Rc::new(path3().adjacency_with_self_loops());
        // node 1 has 3 entries {0,1,2}; give every entry of each row 1/len.
        let mut w = vec![0.0; csr.nnz()];
        for i in 0..3 {
            let range = csr.offsets[i]..csr.offsets[i + 1];
            let len = range.len() as f64;
            for k in range {
                w[k] = 1.0 / len;
            }
        }
        let w = Tensor::constant(w, vec![csr.nnz()]).unwrap();
        let m = Tensor::constant(vec![0.0, 3.0, 9.0], vec![3, 1]).unwrap();
        let out = weighted_neighbor_sum(&w, &m, &csr).unwrap();
        assert_abs_diff_eq!(out.values()[0], 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(out.values()[1], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.values()[2], 6.0, epsilon = 1e-12);
    }
}
