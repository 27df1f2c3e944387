//! First-order parameter updates for [`FeedForwardModel`].

use serde::{Deserialize, Serialize};

use crate::nn::{FeedForwardModel, GradientTape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    /// Per-parameter step sizes from running averages of squared gradients
    /// and squared updates; `rho` is the decay, `eps` the damping term.
    Adadelta { rho: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adadelta() -> Self {
        OptimizerKind::Adadelta { rho: 0.9, eps: 1e-6 }
    }
}

/// Optimizer state for one model.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    sq_grad: Option<GradientTape>,
    sq_update: Option<GradientTape>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            sq_grad: None,
            sq_update: None,
        }
    }

    /// Moves against the gradient.
    pub fn descend(&mut self, model: &mut FeedForwardModel, grad: &GradientTape) {
        self.step(model, grad, -1.0);
    }

    /// Moves along the gradient.
    pub fn ascend(&mut self, model: &mut FeedForwardModel, grad: &GradientTape) {
        self.step(model, grad, 1.0);
    }

    fn step(&mut self, model: &mut FeedForwardModel, grad: &GradientTape, direction: f64) {
        match self.kind {
            OptimizerKind::Sgd => model.add_scaled(grad, direction * self.learning_rate),
            OptimizerKind::Adadelta { rho, eps } => {
                let sq_grad = self
                    .sq_grad
                    .get_or_insert_with(|| GradientTape::zeros_like(model));
                let sq_update = self
                    .sq_update
                    .get_or_insert_with(|| GradientTape::zeros_like(model));
                let mut update = grad.clone();
                let rule = |g: &mut f64, sg: &mut f64, su: &mut f64| {
                    *sg = rho * *sg + (1.0 - rho) * *g * *g;
                    let delta = ((*su + eps).sqrt() / (*sg + eps).sqrt()) * *g;
                    *su = rho * *su + (1.0 - rho) * delta * delta;
                    *g = delta;
                };
                for k in 0..update.weights.len() {
                    ndarray::Zip::from(&mut update.weights[k])
                        .and(&mut sq_grad.weights[k])
                        .and(&mut sq_update.weights[k])
                        .for_each(|g, sg, su| rule(g, sg, su));
                    ndarray::Zip::from(&mut update.biases[k])
                        .and(&mut sq_grad.biases[k])
                        .and(&mut sq_update.biases[k])
                        .for_each(|g, sg, su| rule(g, sg, su));
                }
                model.add_scaled(&update, direction * self.learning_rate);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer};
    use ndarray::array;

    fn scalar(w: f64) -> FeedForwardModel {
        FeedForwardModel::from_layers(
            vec![Layer::new(array![[w]], array![0.0], Activation::Identity).unwrap()],
            None,
        )
        .unwrap()
    }

    fn tape(g: f64) -> GradientTape {
        GradientTape {
            weights: vec![array![[g]]],
            biases: vec![array![0.0]],
        }
    }

    #[test]
    fn sgd_step() {
        let mut m = scalar(1.0);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.5);
        opt.descend(&mut m, &tape(2.0));
        assert_eq!(m.layers()[0].weights[[0, 0]], 0.0);
        opt.ascend(&mut m, &tape(2.0));
        assert_eq!(m.layers()[0].weights[[0, 0]], 1.0);
    }

    #[test]
    fn adadelta_first_step_matches_hand_computation() {
        let mut m = scalar(1.0);
        let mut opt = Optimizer::new(OptimizerKind::adadelta(), 1.0);
        opt.descend(&mut m, &tape(2.0));
        // E[g²] = 0.1·4 = 0.4; Δ = √(1e-6)/√(0.4 + 1e-6) · 2
        let delta = (1e-6f64).sqrt() / (0.4f64 + 1e-6).sqrt() * 2.0;
        assert!((m.layers()[0].weights[[0, 0]] - (1.0 - delta)).abs() < 1e-15);
    }

    #[test]
    fn adadelta_minimizes_quadratic() {
        // f(w) = (w − 3)², starting at 0
        let mut m = scalar(0.0);
        let mut opt = Optimizer::new(OptimizerKind::adadelta(), 1.0);
        for _ in 0..20_000 {
            let w = m.layers()[0].weights[[0, 0]];
            opt.descend(&mut m, &tape(2.0 * (w - 3.0)));
        }
        assert!((m.layers()[0].weights[[0, 0]] - 3.0).abs() < 1e-2);
    }
}
