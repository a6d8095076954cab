//! Dense layers shared by the codec and the surrogate agent.
//!
//! Each network has a tape path (training, input gradients) and a plain path
//! (inference, coach). Both call the same tensor kernels in the same order,
//! so their outputs are bit-identical.

use crate::autodiff::{seeded_init, Gradients, Parameter, Tape, Tensor, Var};
use crate::error::Result;
use crate::rng::stream_key;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: &Tensor) -> Tensor {
        match self {
            Activation::Identity => x.clone(),
            Activation::Relu => x.relu(),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => x.sigmoid(),
        }
    }

    pub fn apply_tape(self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }
}

/// x·W + b with W stored in×out.
pub fn affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let xw = x.matmul(w)?;
    let bb = b.broadcast_to(xw.rows(), xw.cols())?;
    xw.add(&bb)
}

pub fn affine_tape(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    let (r, c) = tape.value(xw).dims2();
    let bb = tape.broadcast(b, r, c)?;
    tape.add(xw, bb)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            weight: Parameter::new(seeded_init(&[inputs, outputs], inputs, seed)?),
            bias: Parameter::new(Tensor::zeros(&[1, outputs])),
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.value().rows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.value().cols()
    }
}

/// Tape handles of one registered network.
pub struct MlpVars {
    layers: Vec<(Var, Var)>,
}

impl MlpVars {
    /// (weight, bias) handles per layer.
    pub fn layer_vars(&self) -> &[(Var, Var)] {
        &self.layers
    }
}

/// Fully connected network: hidden layers share one activation, the output
/// layer is affine.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    hidden: Activation,
}

impl Mlp {
    /// `widths` = [input, hidden..., output].
    pub fn new(widths: &[usize], hidden: Activation, seed: u64) -> Result<Self> {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::new(w[0], w[1], stream_key(&[seed, i as u64])))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers, hidden })
    }

    pub fn from_layers(layers: Vec<Dense>, hidden: Activation) -> Self {
        Self { layers, hidden }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Dense::outputs).unwrap_or(0)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = affine(&h, layer.weight.value(), layer.bias.value())?;
            if i < last {
                h = self.hidden.apply(&h);
            }
        }
        Ok(h)
    }

    /// Records the weights on the tape, as parameters or as constants.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> MlpVars {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let w = tape.leaf(l.weight.value().clone(), trainable);
                let b = tape.leaf(l.bias.value().clone(), trainable);
                (w, b)
            })
            .collect();
        MlpVars { layers }
    }

    pub fn forward_tape(&self, tape: &mut Tape, vars: &MlpVars, x: Var) -> Result<Var> {
        let mut h = x;
        let last = vars.layers.len() - 1;
        for (i, &(w, b)) in vars.layers.iter().enumerate() {
            h = affine_tape(tape, h, w, b)?;
            if i < last {
                h = self.hidden.apply_tape(tape, h)?;
            }
        }
        Ok(h)
    }

    pub fn accumulate_grads(&mut self, grads: &Gradients, vars: &MlpVars) -> Result<()> {
        for (layer, &(w, b)) in self.layers.iter_mut().zip(&vars.layers) {
            if let Some(g) = grads.get(w) {
                layer.weight.accumulate(g)?;
            }
            if let Some(g) = grads.get(b) {
                layer.bias.accumulate(g)?;
            }
        }
        Ok(())
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn parameters(&self) -> impl Iterator<Item = &Parameter> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().map(|p| p.value().len()).sum()
    }

    /// Flattened parameter values in declaration order (W₀, b₀, W₁, b₁, ...).
    pub fn flat_parameters(&self) -> Vec<f64> {
        self.parameters()
            .flat_map(|p| p.value().data().iter().copied())
            .collect()
    }

    pub fn set_flat_parameters(&mut self, values: &[f64]) -> Result<()> {
        let n = self.parameter_count();
        if values.len() != n {
            return Err(crate::error::Error::DimensionMismatch {
                expected: n,
                actual: values.len(),
            });
        }
        let mut offset = 0;
        for p in self.parameters_mut() {
            let len = p.value().len();
            p.value_mut().data_mut().copy_from_slice(&values[offset..offset + len]);
            offset += len;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tape_and_plain_paths_agree_bitwise() {
        let mlp = Mlp::new(&[5, 7, 3], Activation::Tanh, 42).unwrap();
        let x = Tensor::matrix(2, 5, (0..10).map(|v| (v as f64 * 0.37).sin()).collect()).unwrap();
        let plain = mlp.forward(&x).unwrap();
        let mut tape = Tape::new();
        let vars = mlp.register(&mut tape, true);
        let xv = tape.constant(x);
        let out = mlp.forward_tape(&mut tape, &vars, xv).unwrap();
        assert_eq!(tape.value(out), &plain);
    }

    #[test]
    fn flat_parameter_roundtrip() {
        let mut mlp = Mlp::new(&[3, 4, 2], Activation::Relu, 1).unwrap();
        let flat = mlp.flat_parameters();
        assert_eq!(flat.len(), 3 * 4 + 4 + 4 * 2 + 2);
        let doubled: Vec<f64> = flat.iter().map(|v| v * 2.0).collect();
        mlp.set_flat_parameters(&doubled).unwrap();
        assert_eq!(mlp.flat_parameters(), doubled);
        assert!(mlp.set_flat_parameters(&flat[1..]).is_err());
    }
}
