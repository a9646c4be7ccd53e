//! Adam optimizer with bias correction and decoupled weight decay.

use super::{Matrix, Parameter};
use crate::error::TrainError;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

/// Moment state is keyed by position in the parameter list, so the same
/// optimizer must always be stepped with the same parameters in the same
/// order.
pub struct Adam {
    cfg: AdamConfig,
    step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &[Parameter]) -> Result<(), TrainError> {
        if self.m.is_empty() {
            for p in params {
                let (r, c) = p.value().shape();
                self.m.push(Matrix::zeros((r, c)));
                self.v.push(Matrix::zeros((r, c)));
            }
        }
        assert_eq!(self.m.len(), params.len(), "parameter list changed size");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        for (i, p) in params.iter().enumerate() {
            let g = p.grad().clone();
            if g.iter().any(|v| !v.is_finite()) {
                return Err(TrainError::NonFiniteGradient(p.name().to_string()));
            }
            let mut data = p.data().clone();
            if self.cfg.weight_decay != 0.0 {
                // decoupled decay, applied before the Adam update
                data.mapv_inplace(|w| w - self.cfg.lr * self.cfg.weight_decay * w);
            }
            self.m[i] = &self.m[i] * self.cfg.beta1 + &g * (1.0 - self.cfg.beta1);
            self.v[i] = &self.v[i] * self.cfg.beta2 + &(&g * &g) * (1.0 - self.cfg.beta2);
            for ((w, &m), &v) in data.iter_mut().zip(self.m[i].iter()).zip(self.v[i].iter()) {
                let mh = m / bc1;
                let vh = v / bc2;
                *w -= self.cfg.lr * mh / (vh.sqrt() + self.cfg.eps);
            }
            p.set_data(data);
        }
        Ok(())
    }
}

/// Reset the gradient accumulators of every parameter.
pub fn zero_grad(params: &[Parameter]) {
    for p in params {
        p.zero_grad();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_signed_lr() {
        // with bias correction the first update is -lr * g / (|g| + eps)
        let p = Parameter::new("w", Matrix::from_elem((1, 2), 1.0));
        {
            let mut g = Matrix::zeros((1, 2));
            g[[0, 0]] = 0.5;
            g[[0, 1]] = -2.0;
            // seed the gradient accumulator directly
            p.value().zero_grad();
            let loss = p
                .value()
                .hadamard(&super::super::Value::constant(g))
                .sum();
            loss.backward();
        }
        let mut adam = Adam::new(AdamConfig::with_lr(0.1));
        adam.step(std::slice::from_ref(&p)).unwrap();
        let d = p.data();
        assert!((d[[0, 0]] - (1.0 - 0.1)).abs() < 1e-6);
        assert!((d[[0, 1]] - (1.0 + 0.1)).abs() < 1e-6);
    }

    #[test]
    fn zero_grad_means_no_motion() {
        let p = Parameter::new("w", Matrix::from_elem((2, 2), 0.7));
        let before = p.data().clone();
        let mut adam = Adam::new(AdamConfig::with_lr(0.05));
        adam.step(std::slice::from_ref(&p)).unwrap();
        assert_eq!(*p.data(), before);
    }

    #[test]
    fn quadratic_bowl_converges() {
        // minimize |x|^2 from (1, 1)
        let p = Parameter::new("x", Matrix::from_elem((1, 2), 1.0));
        let mut adam = Adam::new(AdamConfig::with_lr(0.05));
        for _ in 0..500 {
            p.zero_grad();
            let loss = p.value().hadamard(p.value()).sum();
            loss.backward();
            adam.step(std::slice::from_ref(&p)).unwrap();
        }
        let norm = p.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-3, "|x| = {norm} after 500 steps");
    }

    #[test]
    fn non_finite_gradient_is_reported_by_name() {
        let p = Parameter::new("theta", Matrix::from_elem((1, 1), 1.0));
        let inf = super::super::Value::constant(Matrix::from_elem((1, 1), f64::INFINITY));
        p.value().hadamard(&inf).sum().backward();
        let mut adam = Adam::new(AdamConfig::default());
        let err = adam.step(std::slice::from_ref(&p)).unwrap_err();
        assert!(err.to_string().contains("theta"));
    }
}
