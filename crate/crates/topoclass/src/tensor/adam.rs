//! Adam optimizer with bias correction.

use crate::error::{Error, Result};

use super::Param;

/// Per-parameter first/second moment estimates plus hyperparameters.
///
/// Defaults beyond the learning rate are the original-Adam constants
/// (β1 = 0.9, β2 = 0.999, ε = 1e-8).
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, param_sizes: &[usize]) -> Self {
        Self::with_hyperparameters(lr, 0.9, 0.999, 1e-8, param_sizes)
    }

    pub fn with_hyperparameters(
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        param_sizes: &[usize],
    ) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            first: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over all parameters. `grads[p]` must align with
    /// `params[p]` elementwise; a `None` gradient leaves that parameter
    /// untouched (its moments still decay toward zero).
    pub fn step(&mut self, params: &mut [&mut Param], grads: &[Option<&[f64]>]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                lhs: vec![params.len()],
                rhs: vec![self.first.len(), grads.len()],
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            let zero = vec![0.0; param.len()];
            let g = match grad {
                Some(g) => {
                    if g.len() != param.len() {
                        return Err(Error::ShapeMismatch {
                            op: "adam_step",
                            lhs: vec![g.len()],
                            rhs: vec![param.len()],
                        });
                    }
                    g
                }
                None => &zero,
            };
            for i in 0..param.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                param.values[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn first_step_matches_hand_computation() {
        // From w = 0 with gradient g: m̂ = g, v̂ = g², so Δw = lr·g/(|g| + ε).
        let lr = 0.01;
        let g = 0.5;
        let mut p = Param::new(vec![0.0], vec![1]);
        let mut adam = AdamState::new(lr, &[1]);
        adam.step(&mut [&mut p], &[Some(&[g])]).unwrap();
        let expected = -lr * g / (g + 1e-8);
        assert_abs_diff_eq!(p.values[0], expected, epsilon = 1e-15);
        assert!(p.values[0].abs() <= lr + 1e-9);
    }

    #[test]
    fn quadratic_converges_in_500_steps() {
        // Minimize (w − 3)²: gradient 2(w − 3), lr 0.01.
        let mut p = Param::new(vec![0.0], vec![1]);
        let mut adam = AdamState::new(0.01, &[1]);
        for _ in 0..500 {
            let g = 2.0 * (p.values[0] - 3.0);
            adam.step(&mut [&mut p], &[Some(&[g])]).unwrap();
        }
        assert!((p.values[0] - 3.0).abs() < 0.05, "w = {}", p.values[0]);
    }

    #[test]
    fn rejects_mismatched_gradient_length() {
        let mut p = Param::new(vec![0.0, 0.0], vec![2]);
        let mut adam = AdamState::new(0.01, &[2]);
        let err = adam.step(&mut [&mut p], &[Some(&[1.0])]).unwrap_err();
        assert!(matches!(err, crate::error::Error::ShapeMismatch { .. }));
    }
}
