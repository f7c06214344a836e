//! Nesterov-momentum SGD in lookahead form:
//!
//! ```text
//! v ← μ·v − η·∇f(θ + μ·v)
//! θ ← θ + v
//! ```
//!
//! The caller evaluates the gradient at [`Nesterov::lookahead`] and hands it
//! to [`Nesterov::apply`].

use crate::error::{check_dim, Error, Result};
use crate::model::SequenceModel;

/// One update on flat slices. `grads` must already be evaluated at
/// `params + momentum * velocity`.
pub fn nesterov_step(params: &mut [f64], velocity: &mut [f64], grads: &[f64], lr: f64, momentum: f64) -> Result<()> {
    check_dim("nesterov velocity", params.len(), velocity.len())?;
    check_dim("nesterov grads", params.len(), grads.len())?;
    for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(grads) {
        *v = momentum * *v - lr * g;
        *p += *v;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Nesterov<M> {
    velocity: M,
    learning_rate: f64,
    momentum: f64,
    clip: Option<f64>,
}

impl<M: SequenceModel> Nesterov<M> {
    pub fn new(model: &M, learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate >= 0.0) || !learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learning rate {learning_rate} must be >= 0"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidConfig(format!("momentum {momentum} must lie in [0, 1)")));
        }
        Ok(Nesterov {
            velocity: model.zeros_like(),
            learning_rate,
            momentum,
            clip: None,
        })
    }

    /// Rescale gradients whose global L2 norm exceeds `max_norm`.
    pub fn with_clip(mut self, max_norm: Option<f64>) -> Self {
        self.clip = max_norm;
        self
    }

    pub fn velocity(&self) -> &M {
        &self.velocity
    }

    /// `θ + μ·v`
    pub fn lookahead(&self, params: &M) -> M {
        let mut ahead = params.clone();
        if self.momentum == 0.0 {
            return ahead;
        }
        for (p, v) in ahead.blocks_mut().into_iter().zip(self.velocity.blocks()) {
            for (x, dv) in p.values.iter_mut().zip(v.values) {
                *x += self.momentum * dv;
            }
        }
        ahead
    }

    pub fn apply(&mut self, params: &mut M, grads: &M) -> Result<()> {
        let scale = match self.clip {
            Some(max) => {
                let norm = grads
                    .blocks()
                    .iter()
                    .flat_map(|b| b.values.iter())
                    .map(|g| g * g)
                    .sum::<f64>()
                    .sqrt();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        let lr = self.learning_rate * scale;
        for ((p, v), g) in params
            .blocks_mut()
            .into_iter()
            .zip(self.velocity.blocks_mut())
            .zip(grads.blocks())
        {
            nesterov_step(p.values, v.values, g.values, lr, self.momentum)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_momentum_is_plain_sgd() {
        let mut p = vec![1.0, -2.0];
        let mut v = vec![0.0, 0.0];
        nesterov_step(&mut p, &mut v, &[0.5, 1.0], 0.1, 0.0).unwrap();
        assert_eq!(p, vec![1.0 - 0.05, -2.0 - 0.1]);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![0.3, 0.7];
        let mut v = vec![0.0, 0.0];
        nesterov_step(&mut p, &mut v, &[0.0, 0.0], 0.1, 0.9).unwrap();
        assert_eq!(p, vec![0.3, 0.7]);
    }

    #[test]
    fn quadratic_bowl_trajectory() {
        // f(w) = ½w², so ∇f(w) = w. Scalar oracle written out by hand:
        // step 1: look = 1,            v = -0.1,          w = 0.9
        // step 2: look = 0.81,         v = -0.171,        w = 0.729
        // step 3: look = 0.5751,       v = -0.21141,      w = 0.51759
        let expected = [0.9, 0.729, 0.51759];
        let (lr, mu) = (0.1, 0.9);
        let mut w = [1.0];
        let mut v = [0.0];
        for e in expected {
            let look = w[0] + mu * v[0];
            nesterov_step(&mut w, &mut v, &[look], lr, mu).unwrap();
            assert!((w[0] - e).abs() < 1e-12, "{} vs {e}", w[0]);
        }
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let m = crate::baselines::SrnParams::zeros(2, 1, 1);
        assert!(Nesterov::new(&m, 0.1, 1.0).is_err());
        assert!(Nesterov::new(&m, -0.1, 0.5).is_err());
        assert!(Nesterov::new(&m, 0.1, 0.95).is_ok());
    }
}
