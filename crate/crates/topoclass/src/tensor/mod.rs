//! Dense tensors with reverse-mode gradient tracking.
//!
//! A [`Tape`] records every differentiable operation of one forward pass;
//! [`Tensor::backward`] replays the records in reverse and accumulates
//! gradients into a [`GradStore`] keyed by node id. The graph is rebuilt on
//! every forward pass (define-by-run), so gradients start from zero each
//! epoch by construction.
//!
//! Values are `f64` row-major. Shapes are 1-D `[n]` or 2-D `[rows, cols]`;
//! nothing here broadcasts beyond a row-wise bias add.

mod adam;
mod sparse;

pub use adam::AdamState;
pub use sparse::{edge_pair_scores, segment_softmax, spmm, weighted_neighbor_sum};

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};

pub type NodeId = usize;

type BackwardFn = Box<dyn Fn(&[f64], &mut GradStore)>;

struct Node {
    backward: Option<BackwardFn>,
}

/// Records one forward pass worth of operations.
#[derive(Clone, Default)]
pub struct Tape {
    nodes: Rc<RefCell<Vec<Node>>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A gradient-tracked input tensor (a parameter for this pass).
    pub fn leaf(&self, values: Vec<f64>, dims: Vec<usize>) -> Result<Tensor> {
        check_values(&values, &dims, "leaf")?;
        let id = self.push(None);
        Ok(Tensor {
            values: Rc::new(values),
            dims,
            tracked: Some((self.clone(), id)),
        })
    }

    fn push(&self, backward: Option<BackwardFn>) -> NodeId {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { backward });
        nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn same_tape(&self, other: &Tape) -> bool {
        Rc::ptr_eq(&self.nodes, &other.nodes)
    }
}

/// Gradients of one backward pass, indexed by tape node id.
pub struct GradStore {
    grads: Vec<Option<Vec<f64>>>,
}

impl GradStore {
    fn new(len: usize) -> Self {
        Self {
            grads: (0..len).map(|_| None).collect(),
        }
    }

    fn accumulate(&mut self, id: NodeId, len: usize, contribution: impl FnOnce(&mut [f64])) {
        let slot = self.grads[id].get_or_insert_with(|| vec![0.0; len]);
        contribution(slot);
    }

    pub fn by_id(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id).and_then(|g| g.as_deref())
    }

    /// Gradient of the backward root with respect to `t`, if `t` was tracked
    /// and reached.
    pub fn grad(&self, t: &Tensor) -> Option<&[f64]> {
        t.node_id().and_then(|id| self.by_id(id))
    }
}

/// Dense numeric array, optionally recorded on a tape.
#[derive(Clone)]
pub struct Tensor {
    values: Rc<Vec<f64>>,
    dims: Vec<usize>,
    tracked: Option<(Tape, NodeId)>,
}

fn check_values(values: &[f64], dims: &[usize], context: &'static str) -> Result<()> {
    let expected: usize = dims.iter().product();
    if values.len() != expected {
        return Err(Error::ShapeMismatch {
            op: context,
            lhs: vec![values.len()],
            rhs: dims.to_vec(),
        });
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { context });
    }
    Ok(())
}

impl Tensor {
    /// An untracked constant.
    pub fn constant(values: Vec<f64>, dims: Vec<usize>) -> Result<Self> {
        check_values(&values, &dims, "constant")?;
        Ok(Self {
            values: Rc::new(values),
            dims,
            tracked: None,
        })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            values: Rc::new(vec![0.0; len]),
            dims,
            tracked: None,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_tracked(&self) -> bool {
        self.tracked.is_some()
    }

    pub fn node_id(&self) -> Option<NodeId> {
        self.tracked.as_ref().map(|(_, id)| *id)
    }

    fn rows(&self) -> usize {
        self.dims[0]
    }

    fn cols(&self) -> usize {
        self.dims[1]
    }

    pub fn scalar(&self) -> f64 {
        debug_assert_eq!(self.len(), 1);
        self.values[0]
    }

    /// Reverse-mode accumulation from this scalar through the recorded graph.
    pub fn backward(&self) -> Result<GradStore> {
        if self.len() != 1 {
            return Err(Error::NonScalarBackward(self.dims.clone()));
        }
        let (tape, root) = self.tracked.as_ref().ok_or(Error::UntrackedBackward)?;
        let nodes = tape.nodes.borrow();
        let mut store = GradStore::new(nodes.len());
        store.grads[*root] = Some(vec![1.0]);
        for id in (0..=*root).rev() {
            // Node ids are assigned in creation order, so parents always
            // precede children and a single reverse sweep is topological.
            let Some(grad) = store.grads[id].take() else {
                continue;
            };
            if let Some(backward) = nodes[id].backward.as_ref() {
                backward(&grad, &mut store);
            }
            store.grads[id] = Some(grad);
        }
        Ok(store)
    }
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("dims", &self.dims)
            .field("tracked", &self.is_tracked())
            .field("values", &self.values)
            .finish()
    }
}

/// Tape handle shared by a set of operands, if any is tracked. All tracked
/// operands must live on the same tape.
fn joint_tape(operands: &[&Tensor]) -> Option<Tape> {
    let mut found: Option<Tape> = None;
    for t in operands {
        if let Some((tape, _)) = &t.tracked {
            match &found {
                None => found = Some(tape.clone()),
                Some(prev) => assert!(prev.same_tape(tape), "operands recorded on different tapes"),
            }
        }
    }
    found
}

fn make_result(
    values: Vec<f64>,
    dims: Vec<usize>,
    tape: Option<Tape>,
    backward: impl Fn(&[f64], &mut GradStore) + 'static,
) -> Tensor {
    debug_assert_eq!(values.len(), dims.iter().product::<usize>());
    debug_assert!(values.iter().all(|v| v.is_finite()), "non-finite op output");
    let tracked = tape.map(|t| {
        let id = t.push(Some(Box::new(backward)));
        (t, id)
    });
    Tensor {
        values: Rc::new(values),
        dims,
        tracked,
    }
}

fn elementwise(
    input: &Tensor,
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64 + 'static,
) -> Tensor {
    let out: Vec<f64> = input.values.iter().map(|&x| f(x)).collect();
    let saved = Rc::clone(&input.values);
    let parent = input.node_id();
    make_result(
        out,
        input.dims.clone(),
        joint_tape(&[input]),
        move |grad, store| {
            if let Some(id) = parent {
                store.accumulate(id, saved.len(), |slot| {
                    for ((s, &g), &x) in slot.iter_mut().zip(grad).zip(saved.iter()) {
                        *s += g * df(x);
                    }
                });
            }
        },
    )
}

impl Tensor {
    pub fn relu(&self) -> Tensor {
        elementwise(self, |x| x.max(0.0), |x| if x > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn leaky_relu(&self, slope: f64) -> Tensor {
        elementwise(
            self,
            move |x| if x > 0.0 { x } else { slope * x },
            move |x| if x > 0.0 { 1.0 } else { slope },
        )
    }

    pub fn elu(&self) -> Tensor {
        elementwise(
            self,
            |x| if x > 0.0 { x } else { x.exp() - 1.0 },
            |x| if x > 0.0 { 1.0 } else { x.exp() },
        )
    }

    pub fn scale(&self, c: f64) -> Tensor {
        elementwise(self, move |x| c * x, move |_| c)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        elementwise(self, move |x| x + c, |_| 1.0)
    }

    pub fn add(&self, rhs: &Tensor) -> Result<Tensor> {
        binary_same_shape(self, rhs, "add", |a, b| a + b, |_, _| (1.0, 1.0))
    }

    pub fn sub(&self, rhs: &Tensor) -> Result<Tensor> {
        binary_same_shape(self, rhs, "sub", |a, b| a - b, |_, _| (1.0, -1.0))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, rhs: &Tensor) -> Result<Tensor> {
        binary_same_shape(self, rhs, "mul", |a, b| a * b, |a, b| (b, a))
    }

    pub fn sum(&self) -> Tensor {
        let total: f64 = self.values.iter().sum();
        let parent = self.node_id();
        let len = self.len();
        make_result(vec![total], vec![1], joint_tape(&[self]), move |grad, store| {
            if let Some(id) = parent {
                let g = grad[0];
                store.accumulate(id, len, |slot| slot.iter_mut().for_each(|s| *s += g));
            }
        })
    }

    /// Matrix product of two 2-D tensors.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.dims.len() != 2 || rhs.dims.len() != 2 || self.cols() != rhs.rows() {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.dims.clone(),
                rhs: rhs.dims.clone(),
            });
        }
        let (n, k, m) = (self.rows(), self.cols(), rhs.cols());
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for p in 0..k {
                let a = self.values[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let brow = &rhs.values[p * m..(p + 1) * m];
                let orow = &mut out[i * m..(i + 1) * m];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        let (a_vals, b_vals) = (Rc::clone(&self.values), Rc::clone(&rhs.values));
        let (a_id, b_id) = (self.node_id(), rhs.node_id());
        Ok(make_result(
            out,
            vec![n, m],
            joint_tape(&[self, rhs]),
            move |grad, store| {
                if let Some(id) = a_id {
                    // dA = dC · Bᵀ
                    store.accumulate(id, n * k, |slot| {
                        for i in 0..n {
                            for p in 0..k {
                                let mut acc = 0.0;
                                for j in 0..m {
                                    acc += grad[i * m + j] * b_vals[p * m + j];
                                }
                                slot[i * k + p] += acc;
                            }
                        }
                    });
                }
                if let Some(id) = b_id {
                    // dB = Aᵀ · dC
                    store.accumulate(id, k * m, |slot| {
                        for i in 0..n {
                            for p in 0..k {
                                let a = a_vals[i * k + p];
                                if a == 0.0 {
                                    continue;
                                }
                                for j in 0..m {
                                    slot[p * m + j] += a * grad[i * m + j];
                                }
                            }
                        }
                    });
                }
            },
        ))
    }

    /// Matrix-vector product: `[n, k] x [k] -> [n]`.
    pub fn matvec(&self, v: &Tensor) -> Result<Tensor> {
        if self.dims.len() != 2 || v.dims.len() != 1 || self.cols() != v.dims[0] {
            return Err(Error::ShapeMismatch {
                op: "matvec",
                lhs: self.dims.clone(),
                rhs: v.dims.clone(),
            });
        }
        let (n, k) = (self.rows(), self.cols());
        let out: Vec<f64> = (0..n)
            .map(|i| {
                self.values[i * k..(i + 1) * k]
                    .iter()
                    .zip(v.values.iter())
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect();
        let (m_vals, v_vals) = (Rc::clone(&self.values), Rc::clone(&v.values));
        let (m_id, v_id) = (self.node_id(), v.node_id());
        Ok(make_result(
            out,
            vec![n],
            joint_tape(&[self, v]),
            move |grad, store| {
                if let Some(id) = m_id {
                    store.accumulate(id, n * k, |slot| {
                        for i in 0..n {
                            for p in 0..k {
                                slot[i * k + p] += grad[i] * v_vals[p];
                            }
                        }
                    });
                }
                if let Some(id) = v_id {
                    store.accumulate(id, k, |slot| {
                        for i in 0..n {
                            for p in 0..k {
                                slot[p] += grad[i] * m_vals[i * k + p];
                            }
                        }
                    });
                }
            },
        ))
    }

    /// Adds a `[cols]` bias vector to every row of a 2-D tensor.
    pub fn add_bias(&self, bias: &Tensor) -> Result<Tensor> {
        if self.dims.len() != 2 || bias.dims.len() != 1 || self.cols() != bias.dims[0] {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                lhs: self.dims.clone(),
                rhs: bias.dims.clone(),
            });
        }
        let (n, m) = (self.rows(), self.cols());
        let mut out = self.values.as_slice().to_vec();
        for i in 0..n {
            for j in 0..m {
                out[i * m + j] += bias.values[j];
            }
        }
        let (m_id, b_id) = (self.node_id(), bias.node_id());
        Ok(make_result(
            out,
            self.dims.clone(),
            joint_tape(&[self, bias]),
            move |grad, store| {
                if let Some(id) = m_id {
                    store.accumulate(id, n * m, |slot| {
                        for (s, &g) in slot.iter_mut().zip(grad) {
                            *s += g;
                        }
                    });
                }
                if let Some(id) = b_id {
                    store.accumulate(id, m, |slot| {
                        for i in 0..n {
                            for j in 0..m {
                                slot[j] += grad[i * m + j];
                            }
                        }
                    });
                }
            },
        ))
    }

    /// Contiguous sub-vector of a 1-D tensor.
    pub fn slice1d(&self, start: usize, end: usize) -> Result<Tensor> {
        if self.dims.len() != 1 || end > self.dims[0] || start > end {
            return Err(Error::ShapeMismatch {
                op: "slice1d",
                lhs: self.dims.clone(),
                rhs: vec![start, end],
            });
        }
        let out = self.values[start..end].to_vec();
        let parent = self.node_id();
        let full_len = self.len();
        Ok(make_result(
            out,
            vec![end - start],
            joint_tape(&[self]),
            move |grad, store| {
                if let Some(id) = parent {
                    store.accumulate(id, full_len, |slot| {
                        for (offset, &g) in grad.iter().enumerate() {
                            slot[start + offset] += g;
                        }
                    });
                }
            },
        ))
    }

    /// Numerically stable row-wise log-softmax of a 2-D tensor:
    /// each row x becomes x − max(x) − log Σ exp(x − max(x)).
    pub fn log_softmax_rows(&self) -> Result<Tensor> {
        if self.dims.len() != 2 {
            return Err(Error::ShapeMismatch {
                op: "log_softmax_rows",
                lhs: self.dims.clone(),
                rhs: vec![],
            });
        }
        let (n, m) = (self.rows(), self.cols());
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let row = &self.values[i * m..(i + 1) * m];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_sum = row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
            for j in 0..m {
                out[i * m + j] = row[j] - max - log_sum;
            }
        }
        let log_probs = Rc::new(out.clone());
        let parent = self.node_id();
        Ok(make_result(
            out,
            self.dims.clone(),
            joint_tape(&[self]),
            move |grad, store| {
                if let Some(id) = parent {
                    store.accumulate(id, n * m, |slot| {
                        for i in 0..n {
                            let row_grad_sum: f64 = grad[i * m..(i + 1) * m].iter().sum();
                            for j in 0..m {
                                let p = log_probs[i * m + j].exp();
                                slot[i * m + j] += grad[i * m + j] - p * row_grad_sum;
                            }
                        }
                    });
                }
            },
        ))
    }

    /// Concatenates 2-D tensors with equal row counts along columns.
    pub fn concat_cols(parts: &[Tensor]) -> Result<Tensor> {
        assert!(!parts.is_empty(), "concat_cols needs at least one part");
        let n = parts[0].rows();
        for p in parts {
            if p.dims.len() != 2 || p.rows() != n {
                return Err(Error::ShapeMismatch {
                    op: "concat_cols",
                    lhs: parts[0].dims.clone(),
                    rhs: p.dims.clone(),
                });
            }
        }
        let widths: Vec<usize> = parts.iter().map(|p| p.cols()).collect();
        let total: usize = widths.iter().sum();
        let mut out = vec![0.0; n * total];
        let mut col = 0;
        for (p, &w) in parts.iter().zip(&widths) {
            for i in 0..n {
                out[i * total + col..i * total + col + w]
                    .copy_from_slice(&p.values[i * w..(i + 1) * w]);
            }
            col += w;
        }
        let ids: Vec<Option<NodeId>> = parts.iter().map(|p| p.node_id()).collect();
        let refs: Vec<&Tensor> = parts.iter().collect();
        let tape = joint_tape(&refs);
        Ok(make_result(out, vec![n, total], tape, move |grad, store| {
            let mut col = 0;
            for (maybe_id, &w) in ids.iter().zip(&widths) {
                if let Some(id) = *maybe_id {
                    store.accumulate(id, n * w, |slot| {
                        for i in 0..n {
                            for j in 0..w {
                                slot[i * w + j] += grad[i * total + col + j];
                            }
                        }
                    });
                }
                col += w;
            }
        }))
    }
}

fn binary_same_shape(
    lhs: &Tensor,
    rhs: &Tensor,
    op: &'static str,
    f: impl Fn(f64, f64) -> f64,
    df: impl Fn(f64, f64) -> (f64, f64) + 'static,
) -> Result<Tensor> {
    if lhs.dims != rhs.dims {
        return Err(Error::ShapeMismatch {
            op,
            lhs: lhs.dims.clone(),
            rhs: rhs.dims.clone(),
        });
    }
    let out: Vec<f64> = lhs
        .values
        .iter()
        .zip(rhs.values.iter())
        .map(|(&a, &b)| f(a, b))
        .collect();
    let (a_vals, b_vals) = (Rc::clone(&lhs.values), Rc::clone(&rhs.values));
    let (a_id, b_id) = (lhs.node_id(), rhs.node_id());
    let len = out.len();
    Ok(make_result(
        out,
        lhs.dims.clone(),
        joint_tape(&[lhs, rhs]),
        move |grad, store| {
            if let Some(id) = a_id {
                store.accumulate(id, len, |slot| {
                    for i in 0..len {
                        slot[i] += grad[i] * df(a_vals[i], b_vals[i]).0;
                    }
                });
            }
            if let Some(id) = b_id {
                store.accumulate(id, len, |slot| {
                    for i in 0..len {
                        slot[i] += grad[i] * df(a_vals[i], b_vals[i]).1;
                    }
                });
            }
        },
    ))
}

/// Masked negative log-likelihood: −(1/|mask|) Σ_{i∈mask} log_probs[i, t_i].
pub fn nll_loss(log_probs: &Tensor, targets: &[usize], mask: &[usize]) -> Result<Tensor> {
    if log_probs.dims.len() != 2 || targets.len() != log_probs.rows() {
        return Err(Error::ShapeMismatch {
            op: "nll_loss",
            lhs: log_probs.dims.clone(),
            rhs: vec![targets.len()],
        });
    }
    if mask.is_empty() {
        return Err(Error::NoTrainingNodes);
    }
    let (n, c) = (log_probs.rows(), log_probs.cols());
    for &i in mask {
        if i >= n {
            return Err(Error::NodeOutOfRange {
                index: i,
                num_nodes: n,
            });
        }
        if targets[i] >= c {
            return Err(Error::ClassOutOfRange {
                index: targets[i],
                num_classes: c,
            });
        }
    }
    let inv = 1.0 / mask.len() as f64;
    let loss = -inv
        * mask
            .iter()
            .map(|&i| log_probs.values[i * c + targets[i]])
            .sum::<f64>();
    let picks: Vec<usize> = mask.iter().map(|&i| i * c + targets[i]).collect();
    let parent = log_probs.node_id();
    let len = log_probs.len();
    Ok(make_result(
        vec![loss],
        vec![1],
        joint_tape(&[log_probs]),
        move |grad, store| {
            if let Some(id) = parent {
                let g = grad[0] * inv;
                store.accumulate(id, len, |slot| {
                    for &p in &picks {
                        slot[p] -= g;
                    }
                });
            }
        },
    ))
}

/// A trainable parameter: plain storage that becomes a tape leaf each pass.
#[derive(Debug, Clone)]
pub struct Param {
    pub values: Vec<f64>,
    pub dims: Vec<usize>,
}

impl Param {
    pub fn new(values: Vec<f64>, dims: Vec<usize>) -> Self {
        debug_assert_eq!(values.len(), dims.iter().product::<usize>());
        Self { values, dims }
    }

    pub fn leaf(&self, tape: &Tape) -> Result<Tensor> {
        tape.leaf(self.values.clone(), self.dims.clone())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
