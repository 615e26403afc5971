use super::{Matrix, ParameterSet};
use crate::error::{Error, Result};

pub trait Optimizer {
    /// Applies one update from the current gradients and bumps the step
    /// counter. Gradients are left untouched.
    fn step(&mut self, params: &mut ParameterSet);
}

fn state_for(params: &ParameterSet) -> Vec<Matrix> {
    params
        .iter()
        .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
        .collect()
}

/// Stochastic gradient descent with heavy-ball momentum
/// (`v = μ·v + g; θ -= lr·v`).
#[derive(Debug, Clone)]
pub struct Sgd {
    lr: f64,
    momentum: f64,
    velocity: Vec<Matrix>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {lr} must be > 0")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidArgument(format!("momentum {momentum} not in [0, 1)")));
        }
        Ok(Sgd {
            lr,
            momentum,
            velocity: Vec::new(),
        })
    }
}

impl Optimizer for Sgd {
    fn step(&mut self, params: &mut ParameterSet) {
        if self.velocity.is_empty() {
            self.velocity = state_for(params);
        }
        for (p, v) in params.iter_mut().zip(&mut self.velocity) {
            for ((w, &g), vel) in p
                .value
                .as_mut_slice()
                .iter_mut()
                .zip(p.grad.as_slice())
                .zip(v.as_mut_slice())
            {
                *vel = self.momentum * *vel + g;
                *w -= self.lr * *vel;
            }
        }
        params.bump_step();
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {lr} must be > 0")));
        }
        for (name, b) in [("beta1", beta1), ("beta2", beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} = {b} not in (0, 1)")));
            }
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!("eps {eps} must be > 0")));
        }
        Ok(Adam {
            lr,
            beta1,
            beta2,
            eps,
            m: Vec::new(),
            v: Vec::new(),
        })
    }
}

impl Optimizer for Adam {
    fn step(&mut self, params: &mut ParameterSet) {
        if self.m.is_empty() {
            self.m = state_for(params);
            self.v = state_for(params);
        }
        let t = (params.step() + 1) as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            for (((w, &g), m), v) in p
                .value
                .as_mut_slice()
                .iter_mut()
                .zip(p.grad.as_slice())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        params.bump_step();
    }
}
