use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// A trainable tensor with its gradient accumulator and Adam state.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    value: Tensor,
    grad: Tensor,
    m: Tensor,
    v: Tensor,
    step: u64,
}

impl Parameter {
    pub fn new(value: Tensor) -> Self {
        let shape = value.shape().to_vec();
        Self {
            grad: Tensor::zeros(&shape),
            m: Tensor::zeros(&shape),
            v: Tensor::zeros(&shape),
            value,
            step: 0,
        }
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut Tensor {
        &mut self.value
    }

    pub fn grad(&self) -> &Tensor {
        &self.grad
    }

    pub fn first_moment(&self) -> &Tensor {
        &self.m
    }

    pub fn second_moment(&self) -> &Tensor {
        &self.v
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn accumulate(&mut self, g: &Tensor) -> Result<()> {
        if g.len() != self.grad.len() {
            return Err(Error::ShapeMismatch {
                op: "accumulate",
                lhs: self.grad.shape().to_vec(),
                rhs: g.shape().to_vec(),
            });
        }
        self.grad.add_assign(g);
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam step from the parameter's accumulated gradient.
    pub fn update(&self, p: &mut Parameter) -> Result<()> {
        if !p.grad.all_finite() {
            return Err(Error::NonFinite("adam gradient"));
        }
        p.step += 1;
        let t = p.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let g = p.grad.data();
        let m = p.m.data_mut();
        for (mi, gi) in m.iter_mut().zip(g) {
            *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
        }
        let v = p.v.data_mut();
        for (vi, gi) in v.iter_mut().zip(g) {
            *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
        }
        let (m, v) = (p.m.data(), p.v.data());
        for ((w, mi), vi) in p.value.data_mut().iter_mut().zip(m).zip(v) {
            let mhat = mi / bc1;
            let vhat = vi / bc2;
            *w -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Uniform fan-in initialization on [−√(6/fan_in), √(6/fan_in)].
pub fn seeded_init(shape: &[usize], fan_in: usize, seed: u64) -> Result<Tensor> {
    if fan_in == 0 {
        return Err(Error::InvalidArgument("fan_in must be >= 1".into()));
    }
    let bound = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let mut rng = StreamRng::new(seed, 0);
    let data = (0..n).map(|_| rng.uniform_range(-bound, bound)).collect();
    Tensor::new(shape.to_vec(), data)
}
