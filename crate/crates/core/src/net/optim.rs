use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmspropConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub eps: f64,
}

impl Default for RmspropConfig {
    fn default() -> Self {
        RmspropConfig {
            learning_rate: 1e-3,
            decay: 0.9,
            eps: 1e-8,
        }
    }
}

/// Running mean of squared gradients, one entry per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RmspropState {
    pub g: DVector<f64>,
    pub config: RmspropConfig,
}

impl RmspropState {
    pub fn new(len: usize, config: RmspropConfig) -> Self {
        RmspropState {
            g: DVector::zeros(len),
            config,
        }
    }

    /// `G <- (1 - decay) g^2 + decay G`, `theta <- theta - lr g / sqrt(G + eps)`.
    pub fn update(&mut self, params: &mut DVector<f64>, grads: &DVector<f64>) -> Result<()> {
        check_dim("rmsprop params", self.g.len(), params.len())?;
        check_dim("rmsprop grads", self.g.len(), grads.len())?;
        let RmspropConfig {
            learning_rate,
            decay,
            eps,
        } = self.config;
        for i in 0..params.len() {
            let gi = grads[i];
            self.g[i] = (1.0 - decay) * gi * gi + decay * self.g[i];
            params[i] -= learning_rate * gi / (self.g[i] + eps).sqrt();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = RmspropState::new(2, RmspropConfig::default());
        let mut p = DVector::from_vec(vec![1.0, -2.0]);
        s.update(&mut p, &DVector::zeros(2)).unwrap();
        assert_eq!(p, DVector::from_vec(vec![1.0, -2.0]));
    }

    #[test]
    fn single_step_arithmetic() {
        let mut s = RmspropState::new(1, RmspropConfig::default());
        let mut p = DVector::from_vec(vec![1.0]);
        s.update(&mut p, &DVector::from_vec(vec![1.0])).unwrap();
        assert!((s.g[0] - 0.1).abs() < 1e-15);
        assert!((p[0] - (1.0 - 0.001 / (0.1f64 + 1e-8).sqrt())).abs() < 1e-15);
        assert!((p[0] - 0.9968377).abs() < 1e-7);
    }

    #[test]
    fn repeated_gradient_steps_converge_monotonically() {
        let mut s = RmspropState::new(1, RmspropConfig::default());
        let g = DVector::from_vec(vec![0.3]);
        let mut p = DVector::from_vec(vec![0.0]);
        let mut last_step = f64::INFINITY;
        for _ in 0..1000 {
            let before = p[0];
            s.update(&mut p, &g).unwrap();
            let step = before - p[0];
            assert!(step <= last_step * (1.0 + 1e-12));
            last_step = step;
        }
        let limit = 0.001 * 0.3 / (0.09f64 + 1e-8).sqrt();
        assert!((last_step - limit).abs() < 1e-9);
    }
}
