//! Per-node class assignments.

use crate::error::{Error, Result};

/// Ground-truth class indices for every node of a graph.
///
/// Class indices are contiguous in `[0, num_classes)` and every class has at
/// least one member. `class_names`, when present, maps each index back to the
/// original label string.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelAssignment {
    ground_truth: Vec<usize>,
    num_classes: usize,
    class_names: Option<Vec<String>>,
}

impl LabelAssignment {
    pub fn new(
        ground_truth: Vec<usize>,
        num_classes: usize,
        class_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let mut seen = vec![false; num_classes];
        for &c in &ground_truth {
            if c >= num_classes {
                return Err(Error::ClassOutOfRange {
                    index: c,
                    num_classes,
                });
            }
            seen[c] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::UninhabitedClass(missing));
        }
        if let Some(names) = &class_names {
            if names.len() != num_classes {
                return Err(Error::BadClassNames);
            }
            let mut sorted: Vec<&String> = names.iter().collect();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != num_classes {
                return Err(Error::BadClassNames);
            }
        }
        Ok(Self {
            ground_truth,
            num_classes,
            class_names,
        })
    }

    /// Encodes raw label tokens to contiguous indices in first-appearance order.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut ground_truth = Vec::with_capacity(tokens.len());
        for t in tokens {
            let idx = match names.iter().position(|n| *n == t) {
                Some(i) => i,
                None => {
                    names.push(t);
                    names.len() - 1
                }
            };
            ground_truth.push(idx);
        }
        let num_classes = names.len();
        Self::new(ground_truth, num_classes, Some(names))
    }

    pub fn num_nodes(&self) -> usize {
        self.ground_truth.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_of(&self, node: usize) -> usize {
        self.ground_truth[node]
    }

    pub fn ground_truth(&self) -> &[usize] {
        &self.ground_truth
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    /// Fraction of nodes whose prediction matches the ground truth.
    pub fn accuracy(&self, predictions: &[usize]) -> f64 {
        assert_eq!(predictions.len(), self.ground_truth.len());
        let correct = predictions
            .iter()
            .zip(&self.ground_truth)
            .filter(|(p, t)| p == t)
            .count();
        correct as f64 / self.ground_truth.len() as f64
    }
}

/// Argmax with ties resolved to the lowest class index, the prediction rule
/// shared by every classifier here.
pub fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod argmax_tests {
    use super::argmax_lowest;

    #[test]
    fn ties_resolve_to_the_lowest_index() {
        assert_eq!(argmax_lowest(&[0.5, 0.5]), 0);
        assert_eq!(argmax_lowest(&[0.1, 0.7, 0.7]), 1);
        assert_eq!(argmax_lowest(&[2.0]), 0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_appearance_encoding() {
        let labels = LabelAssignment::from_tokens(
            ["5", "5", "9"].iter().map(|s| s.to_string()).collect(),
        )
        .unwrap();
        assert_eq!(labels.num_classes(), 2);
        assert_eq!(labels.ground_truth(), &[0, 0, 1]);
        assert_eq!(labels.class_names().unwrap(), &["5", "9"]);
    }

    #[test]
    fn rejects_uninhabited_class() {
        let err = LabelAssignment::new(vec![0, 0], 2, None).unwrap_err();
        assert!(matches!(err, Error::UninhabitedClass(1)));
    }

    #[test]
    fn rejects_out_of_range_class() {
        let err = LabelAssignment::new(vec![0, 3], 2, None).unwrap_err();
        assert!(matches!(err, Error::ClassOutOfRange { index: 3, .. }));
    }

    #[test]
    fn rejects_duplicate_class_names() {
        let names = Some(vec!["a".to_string(), "a".to_string()]);
        let err = LabelAssignment::new(vec![0, 1], 2, names).unwrap_err();
        assert!(matches!(err, Error::BadClassNames));
    }
}
