//! Semi-supervised classification by harmonic functions: labeled nodes are
//! clamped to one-hot rows and every unlabeled node's row is repeatedly
//! replaced by the mean of its neighbors' rows,
//!
//!   h(i) = (1/d_i) Σ_{j ∈ N(i)} h(j)
//!
//! extended vector-valued over the classes. Updates are Jacobi-style (all
//! nodes read the previous iterate), so results do not depend on node order.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::labels::{argmax_lowest, LabelAssignment};

const CONVERGENCE_RESIDUAL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    LowestClassIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IsolatedNodePolicy {
    MajorityTrainingLabel,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct HarmonicConfig {
    pub max_iterations: usize,
    pub tie_break: TieBreak,
    pub isolated_node_policy: IsolatedNodePolicy,
}

impl Default for HarmonicConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tie_break: TieBreak::LowestClassIndex,
            isolated_node_policy: IsolatedNodePolicy::MajorityTrainingLabel,
        }
    }
}

/// Result of a harmonic propagation run.
#[derive(Debug, Clone)]
pub struct HarmonicSolution {
    scores: Vec<f64>,
    num_classes: usize,
    pub predictions: Vec<usize>,
    /// Max absolute score change per iteration, in iteration order.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// Some component with edges contains no training node; its rows kept
    /// the uniform initialization and resolved to class 0 by tie-break.
    pub unreached_component: bool,
}

impl HarmonicSolution {
    pub fn score_row(&self, node: usize) -> &[f64] {
        &self.scores[node * self.num_classes..(node + 1) * self.num_classes]
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
}

pub fn harmonic_classify(
    g: &Graph,
    labels: &LabelAssignment,
    train_mask: &[usize],
    cfg: &HarmonicConfig,
) -> Result<HarmonicSolution> {
    if train_mask.is_empty() {
        return Err(Error::NoTrainingNodes);
    }
    let n = g.num_nodes();
    let c = labels.num_classes();
    assert_eq!(labels.num_nodes(), n, "labels must cover all nodes");
    assert!(cfg.max_iterations >= 1);

    let mut clamped = vec![false; n];
    for &i in train_mask {
        if i >= n {
            return Err(Error::NodeOutOfRange {
                index: i,
                num_nodes: n,
            });
        }
        clamped[i] = true;
    }

    let mut scores = vec![1.0 / c as f64; n * c];
    for &i in train_mask {
        let row = &mut scores[i * c..(i + 1) * c];
        row.fill(0.0);
        row[labels.class_of(i)] = 1.0;
    }

    let mut next = scores.clone();
    let mut residual_history = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iterations {
        let mut residual: f64 = 0.0;
        for i in 0..n {
            let out = &mut next[i * c..(i + 1) * c];
            if clamped[i] || g.degree(i) == 0 {
                out.copy_from_slice(&scores[i * c..(i + 1) * c]);
                continue;
            }
            out.fill(0.0);
            for &j in g.neighbors(i) {
                let jrow = &scores[j * c..(j + 1) * c];
                for (o, &v) in out.iter_mut().zip(jrow) {
                    *o += v;
                }
            }
            let inv = 1.0 / g.degree(i) as f64;
            for (k, o) in out.iter_mut().enumerate() {
                *o *= inv;
                residual = residual.max((*o - scores[i * c + k]).abs());
            }
        }
        std::mem::swap(&mut scores, &mut next);
        residual_history.push(residual);
        if residual < CONVERGENCE_RESIDUAL {
            converged = true;
            break;
        }
    }

    // Isolated unlabeled nodes take the majority training label so the
    // prediction rule stays a plain argmax.
    let majority = majority_training_label(labels, train_mask, c);
    for i in 0..n {
        if !clamped[i] && g.degree(i) == 0 {
            let row = &mut scores[i * c..(i + 1) * c];
            row.fill(0.0);
            row[majority] = 1.0;
        }
    }

    let component = g.component_ids();
    let num_components = component.iter().copied().max().map_or(0, |m| m + 1);
    let mut component_has_train = vec![false; num_components];
    for &i in train_mask {
        component_has_train[component[i]] = true;
    }
    let unreached_component = (0..n).any(|i| g.degree(i) > 0 && !component_has_train[component[i]]);

    let predictions = (0..n)
        .map(|i| argmax_lowest(&scores[i * c..(i + 1) * c]))
        .collect();
    Ok(HarmonicSolution {
        scores,
        num_classes: c,
        predictions,
        residual_history,
        converged,
        unreached_component,
    })
}

fn majority_training_label(labels: &LabelAssignment, train_mask: &[usize], c: usize) -> usize {
    let mut counts = vec![0usize; c];
    for &i in train_mask {
        counts[labels.class_of(i)] += 1;
    }
    let mut best = 0;
    for (k, &n) in counts.iter().enumerate().skip(1) {
        if n > counts[best] {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn path(n: usize) -> Graph {
        let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::from_undirected_edges(n, &edges).unwrap()
    }

    fn two_class_labels(gt: Vec<usize>) -> LabelAssignment {
        LabelAssignment::new(gt, 2, None).unwrap()
    }

    #[test]
    fn symmetric_path_ties_to_the_lower_class() {
        let g = path(3);
        let labels = two_class_labels(vec![0, 0, 1]);
        let sol = harmonic_classify(&g, &labels, &[0, 2], &HarmonicConfig::default()).unwrap();
        let mid = sol.score_row(1);
        assert_abs_diff_eq!(mid[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(mid[1], 0.5, epsilon = 1e-9);
        assert_eq!(sol.predictions[1], 0);
    }

    #[test]
    fn four_node_path_matches_the_exact_solve() {
        // Clamp ends of 0–1–2–3: h_A(1) = 2/3, h_A(2) = 1/3 from
        // h1 = (1 + h2)/2, h2 = h1/2.
        let g = path(4);
        let labels = two_class_labels(vec![0, 0, 1, 1]);
        let sol = harmonic_classify(&g, &labels, &[0, 3], &HarmonicConfig::default()).unwrap();
        assert_abs_diff_eq!(sol.score_row(1)[0], 2.0 / 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.score_row(2)[0], 1.0 / 3.0, epsilon = 1e-6);
        assert_eq!(sol.predictions, vec![0, 0, 1, 1]);
        assert!(sol.converged);
    }

    #[test]
    fn rejects_empty_train_mask() {
        let g = path(3);
        let labels = two_class_labels(vec![0, 0, 1]);
        let err = harmonic_classify(&g, &labels, &[], &HarmonicConfig::default()).unwrap_err();
        assert_eq!(err.to_string(), "no training nodes");
    }

    #[test]
    fn labeled_rows_stay_clamped_one_hot() {
        let g = path(4);
        let labels = two_class_labels(vec![0, 0, 1, 1]);
        let sol = harmonic_classify(&g, &labels, &[0, 3], &HarmonicConfig::default()).unwrap();
        assert_eq!(sol.score_row(0), &[1.0, 0.0]);
        assert_eq!(sol.score_row(3), &[0.0, 1.0]);
    }

    #[test]
    fn isolated_unlabeled_node_takes_majority_training_label() {
        // Nodes 0-1-2 connected, node 3 isolated; majority label is 1.
        let g = Graph::from_relabeled_pairs(4, &[(0, 1), (1, 2)]).unwrap();
        let labels = two_class_labels(vec![1, 1, 0, 0]);
        let sol = harmonic_classify(&g, &labels, &[0, 1, 2], &HarmonicConfig::default()).unwrap();
        assert_eq!(sol.predictions[3], 1);
        assert!(!sol.unreached_component);
    }

    #[test]
    fn component_without_training_nodes_sets_warning_and_class_zero() {
        let g = Graph::from_relabeled_pairs(5, &[(0, 1), (2, 3), (3, 4)]).unwrap();
        let labels = two_class_labels(vec![0, 1, 0, 1, 0]);
        let sol = harmonic_classify(&g, &labels, &[0, 1], &HarmonicConfig::default()).unwrap();
        assert!(sol.unreached_component);
        // Unreached rows keep the uniform initialization.
        assert_abs_diff_eq!(sol.score_row(2)[0], 0.5, epsilon = 1e-12);
        assert_eq!(sol.predictions[2], 0);
        assert_eq!(sol.predictions[4], 0);
    }

    #[test]
    fn unlabeled_reachable_rows_sum_to_one() {
        let g = Graph::from_undirected_edges(
            6,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (1, 4)],
        )
        .unwrap();
        let labels = two_class_labels(vec![0, 0, 0, 1, 1, 1]);
        let sol = harmonic_classify(&g, &labels, &[0, 3], &HarmonicConfig::default()).unwrap();
        for i in 0..6 {
            let s: f64 = sol.score_row(i).iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn honors_the_iteration_budget() {
        let g = path(50);
        let mut gt = vec![0; 50];
        gt[49] = 1;
        let labels = two_class_labels(gt);
        let cfg = HarmonicConfig {
            max_iterations: 3,
            ..Default::default()
        };
        let sol = harmonic_classify(&g, &labels, &[0, 49], &cfg).unwrap();
        assert_eq!(sol.residual_history.len(), 3);
        assert!(!sol.converged);
    }
}
