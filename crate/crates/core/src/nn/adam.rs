use serde::{Deserialize, Serialize};

use super::check_len;
use crate::error::NnError;

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        check_len(self.m.len(), params.len())?;
        check_len(self.m.len(), grads.len())?;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut adam = Adam::new(3, 1e-3);
        let mut p = vec![1.0, -2.0, 0.5];
        adam.update(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn constant_gradient_moves_by_learning_rate() {
        let lr = 1e-3;
        let mut adam = Adam::new(1, lr);
        let mut p = vec![0.0];
        let mut last = 0.0;
        for _ in 0..2000 {
            let before = p[0];
            adam.update(&mut p, &[0.37]).unwrap();
            last = before - p[0];
        }
        // m_hat = g and v_hat = g^2 exactly, so the step is lr * g / (|g| + eps).
        let expect = lr * 0.37 / (0.37 + 1e-8);
        assert!((last - expect).abs() < 1e-12, "{last} vs {expect}");
    }

    #[test]
    fn opposite_gradients_move_symmetrically() {
        let mut adam = Adam::new(2, 1e-2);
        let mut p = vec![0.0, 0.0];
        for k in 0..10 {
            let g = 0.1 * (k as f64 + 1.0);
            adam.update(&mut p, &[g, -g]).unwrap();
        }
        assert_eq!(p[0], -p[1]);
    }

    #[test]
    fn shape_checked() {
        let mut adam = Adam::new(2, 1e-3);
        assert!(adam.update(&mut [0.0; 3], &[0.0; 3]).is_err());
    }
}
