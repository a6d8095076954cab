//! Frozen surrogate driving agent `â = A(y, m)`.
//!
//! The agent is a fixed differentiable map from (image, state) to actions.
//! Its weights are plain tensors, never [`Parameter`](crate::autodiff::Parameter)s,
//! so a codec training loop cannot update them: on a tape they are recorded
//! as constants and only the image input receives an adjoint.
//!
//! Input layout is `[y − 0.5 | m]`. The three raw outputs pass through
//! `tanh` (steer) and the logistic map (throttle, brake).

use sha2::{Digest, Sha256};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::nn::{Activation, Dense, Mlp, MlpVars};
use crate::types::{ActionVector, ImageDims, ImageTensor, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    /// Seeded random dense network.
    Dense,
    /// Hand-set filters reading lane position and obstacle color.
    Structured,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub kind: AgentKind,
    pub image: ImageDims,
    pub state_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub seed: u64,
}

impl AgentSpec {
    pub fn dense(image: ImageDims, hidden_dims: Vec<usize>, seed: u64) -> Self {
        Self {
            kind: AgentKind::Dense,
            image,
            state_dim: StateVector::DIM,
            hidden_dims,
            seed,
        }
    }

    pub fn structured(image: ImageDims) -> Self {
        Self {
            kind: AgentKind::Structured,
            image,
            state_dim: StateVector::DIM,
            hidden_dims: vec![4],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateAgent {
    spec: AgentSpec,
    trunk: Mlp,
}

/// Tape handles for one agent registration.
pub struct AgentVars(MlpVars);

pub fn build_surrogate_agent(spec: AgentSpec) -> Result<SurrogateAgent> {
    if spec.image.is_empty() || spec.state_dim == 0 {
        return Err(Error::InvalidArgument("agent dims must be positive".into()));
    }
    if spec.state_dim != StateVector::DIM {
        return Err(Error::DimensionMismatch {
            expected: StateVector::DIM,
            actual: spec.state_dim,
        });
    }
    let trunk = match spec.kind {
        AgentKind::Dense => {
            if spec.hidden_dims.contains(&0) {
                return Err(Error::InvalidArgument("hidden width must be > 0".into()));
            }
            let mut widths = vec![spec.image.len() + spec.state_dim];
            widths.extend(&spec.hidden_dims);
            widths.push(ActionVector::DIM);
            Mlp::new(&widths, Activation::Tanh, spec.seed)?
        }
        AgentKind::Structured => structured_trunk(spec.image)?,
    };
    Ok(SurrogateAgent { spec, trunk })
}

impl SurrogateAgent {
    pub fn spec(&self) -> &AgentSpec {
        &self.spec
    }

    pub fn image_dims(&self) -> ImageDims {
        self.spec.image
    }

    pub fn first_layer_weights(&self) -> &Tensor {
        self.trunk.layers()[0].weight.value()
    }

    /// SHA-256 over all weights, little-endian, in declaration order.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for v in self.trunk.flat_parameters() {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn check_batch(&self, y: &Tensor, m: &Tensor) -> Result<()> {
        if y.cols() != self.spec.image.len() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.image.len(),
                actual: y.cols(),
            });
        }
        if m.cols() != self.spec.state_dim || m.rows() != y.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.state_dim,
                actual: m.cols(),
            });
        }
        Ok(())
    }

    /// Batched plain forward: y is B×l, m is B×6, result B×3.
    pub fn act_batch(&self, y: &Tensor, m: &Tensor) -> Result<Tensor> {
        self.check_batch(y, m)?;
        let input = y.offset(-0.5).concat_cols(m)?;
        let raw = self.trunk.forward(&input)?;
        let steer = raw.slice_cols(0, 1)?.tanh();
        let rest = raw.slice_cols(1, 3)?.sigmoid();
        steer.concat_cols(&rest)
    }

    /// Records the weights on the tape as constants.
    pub fn register(&self, tape: &mut Tape) -> AgentVars {
        AgentVars(self.trunk.register(tape, false))
    }

    /// Tape forward; adjoints flow to `y` (and `m` if it is a parameter) only.
    pub fn act_tape(&self, tape: &mut Tape, vars: &AgentVars, y: Var, m: Var) -> Result<Var> {
        self.check_batch(tape.value(y), tape.value(m))?;
        let centered = tape.offset(y, -0.5)?;
        let input = tape.concat(centered, m)?;
        let raw = self.trunk.forward_tape(tape, &vars.0, input)?;
        let s = tape.slice(raw, 0, 1)?;
        let s = tape.tanh(s)?;
        let r = tape.slice(raw, 1, 3)?;
        let r = tape.sigmoid(r)?;
        tape.concat(s, r)
    }
}

pub fn image_batch(images: &[&ImageTensor]) -> Result<Tensor> {
    let l = images.first().map(|i| i.len()).unwrap_or(0);
    let mut data = Vec::with_capacity(images.len() * l);
    for img in images {
        if img.len() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                actual: img.len(),
            });
        }
        data.extend_from_slice(img.data());
    }
    Tensor::matrix(images.len(), l, data)
}

pub fn state_batch(states: &[&StateVector]) -> Tensor {
    let data = states.iter().flat_map(|s| s.to_array()).collect();
    Tensor::matrix(states.len(), StateVector::DIM, data).expect("state batch shape")
}

pub fn actions_from_batch(t: &Tensor) -> Vec<ActionVector> {
    t.data()
        .chunks(ActionVector::DIM)
        .map(|c| ActionVector::new(c[0], c[1], c[2]))
        .collect()
}

fn check_image(agent: &SurrogateAgent, y: &ImageTensor) -> Result<()> {
    if y.dims() != agent.spec.image {
        return Err(Error::DimensionMismatch {
            expected: agent.spec.image.len(),
            actual: y.len(),
        });
    }
    Ok(())
}

/// â = A(y, m) for a single example.
pub fn agent_act(agent: &SurrogateAgent, y: &ImageTensor, m: &StateVector) -> Result<ActionVector> {
    check_image(agent, y)?;
    m.validate()?;
    let out = agent.act_batch(&image_batch(&[y])?, &state_batch(&[m]))?;
    Ok(actions_from_batch(&out)[0])
}

/// Coach actions on the lossless image. Evaluated off-tape, so nothing
/// computed from them can carry a gradient back into `x` or the agent.
pub fn coach_act(agent: &SurrogateAgent, x: &ImageTensor, m: &StateVector) -> Result<ActionVector> {
    agent_act(agent, x, m)
}

/// Lane-offset, obstacle, speed and goal features feeding fixed output gains.
fn structured_trunk(image: ImageDims) -> Result<Mlp> {
    let (c, h, w) = (image.channels, image.height, image.width);
    let l = image.len();
    let inputs = l + StateVector::DIM;
    let hidden = 4;
    let mut w1 = vec![0.0; inputs * hidden];
    let lower = h / 2;
    let lower_px = ((h - lower) * w * c) as f64;
    let half_w = w as f64 / 2.0;
    for ch in 0..c {
        for y in lower..h {
            for x in 0..w {
                let idx = (ch * h + y) * w + x;
                // brightness centroid: bright lane paint pulls steering toward itself
                let pos = (x as f64 + 0.5 - half_w) / half_w;
                w1[idx * hidden] = 300.0 * pos / lower_px;
                // red excess in the central corridor flags obstacles ahead
                if x >= w / 4 && x < 3 * w / 4 {
                    let sign = if ch == 0 { 1.0 } else { -0.5 };
                    w1[idx * hidden + 1] = 150.0 * sign / (lower_px / 2.0);
                }
            }
        }
    }
    w1[l * hidden + 2] = 1.0; // speed
    w1[(l + 4) * hidden + 3] = 1.0; // goal_dx
    let mut layer1 = Dense::new(inputs, hidden, 0)?;
    layer1.weight.value_mut().data_mut().copy_from_slice(&w1);

    let w2 = vec![
        // steer throttle brake
        1.2, 0.0, 0.0, // lane offset
        0.0, -3.0, 4.0, // obstacle
        0.0, -2.0, 1.0, // speed
        0.8, 0.0, 0.0, // goal_dx
    ];
    let mut layer2 = Dense::new(hidden, 3, 0)?;
    layer2.weight.value_mut().data_mut().copy_from_slice(&w2);
    layer2.bias.value_mut().data_mut().copy_from_slice(&[0.0, 1.0, -2.0]);
    Ok(Mlp::from_layers(vec![layer1, layer2], Activation::Tanh))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::finite_difference_check;
    use crate::rng::StreamRng;

    const SMALL: ImageDims = ImageDims::new(3, 4, 8);

    fn random_image(dims: ImageDims, seed: u64) -> ImageTensor {
        let mut rng = StreamRng::new(seed, 0);
        let data = (0..dims.len()).map(|_| rng.uniform()).collect();
        ImageTensor::new(dims.channels, dims.height, dims.width, data).unwrap()
    }

    fn random_state(seed: u64) -> StateVector {
        let mut rng = StreamRng::new(seed, 1);
        StateVector::from_array(std::array::from_fn(|_| rng.uniform_range(-1.0, 1.0)))
    }

    #[test]
    fn seeded_construction() {
        let a = build_surrogate_agent(AgentSpec::dense(SMALL, vec![8], 1)).unwrap();
        let b = build_surrogate_agent(AgentSpec::dense(SMALL, vec![8], 1)).unwrap();
        let c = build_surrogate_agent(AgentSpec::dense(SMALL, vec![8], 2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.checksum(), b.checksum());
        assert_ne!(a.first_layer_weights(), c.first_layer_weights());
    }

    #[test]
    fn default_geometry_builds() {
        let agent = build_surrogate_agent(AgentSpec::dense(ImageDims::new(3, 32, 64), vec![256, 64], 7)).unwrap();
        let x = ImageTensor::filled(3, 32, 64, 0.3).unwrap();
        assert!(agent_act(&agent, &x, &StateVector::zero()).unwrap().in_range());
    }

    #[test]
    fn zero_input_fixture() {
        // frozen from the seed-7 agent on a zero image and zero state
        let agent = build_surrogate_agent(AgentSpec::dense(SMALL, vec![16, 8], 7)).unwrap();
        let x = ImageTensor::filled(3, 4, 8, 0.0).unwrap();
        let a = agent_act(&agent, &x, &StateVector::zero()).unwrap();
        let again = agent_act(&agent, &x, &StateVector::zero()).unwrap();
        assert_eq!(a, again);
        let expected = FIXTURE_SEED7;
        for (got, want) in a.to_array().iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{a:?}");
        }
    }

    const FIXTURE_SEED7: [f64; 3] = [0.9484906677803222, 0.5853530681694726, 0.3020773351638074];

    #[test]
    fn action_ranges_hold_for_random_inputs() {
        let agent = build_surrogate_agent(AgentSpec::dense(SMALL, vec![16], 3)).unwrap();
        for i in 0..10_000u64 {
            let x = random_image(SMALL, i);
            let mut m = random_state(i);
            m.speed *= 50.0;
            let a = agent_act(&agent, &x, &m).unwrap();
            assert!(a.in_range(), "{a:?}");
        }
    }

    #[test]
    fn coach_matches_agent() {
        let agent = build_surrogate_agent(AgentSpec::dense(SMALL, vec![16], 3)).unwrap();
        let x = random_image(SMALL, 5);
        let m = random_state(5);
        assert_eq!(coach_act(&agent, &x, &m).unwrap(), agent_act(&agent, &x, &m).unwrap());
    }

    #[test]
    fn tape_path_matches_plain_and_freezes_weights() {
        let agent = build_surrogate_agent(AgentSpec::dense(SMALL, vec![16, 8], 3)).unwrap();
        let x = random_image(SMALL, 6);
        let m = random_state(6);
        let mut tape = Tape::new();
        let vars = agent.register(&mut tape);
        let y = tape.param(image_batch(&[&x]).unwrap());
        let mv = tape.constant(state_batch(&[&m]));
        let out = agent.act_tape(&mut tape, &vars, y, mv).unwrap();
        let plain = agent
            .act_batch(&image_batch(&[&x]).unwrap(), &state_batch(&[&m]))
            .unwrap();
        assert_eq!(tape.value(out), &plain);

        let s = tape.sum(out).unwrap();
        let g = tape.backward(s).unwrap();
        assert!(g.get(y).is_some());
        for i in 0..vars.0.layer_vars().len() {
            let (w, b) = vars.0.layer_vars()[i];
            assert!(g.get(w).is_none() && g.get(b).is_none());
        }
    }

    #[test]
    fn coach_output_carries_no_gradient() {
        let agent = build_surrogate_agent(AgentSpec::dense(SMALL, vec![8], 3)).unwrap();
        let x = random_image(SMALL, 8);
        let m = random_state(8);
        let mut tape = Tape::new();
        let xv = tape.param(image_batch(&[&x]).unwrap());
        let a = coach_act(&agent, &x, &m).unwrap();
        let av = tape.constant(Tensor::row(a.to_array().to_vec()));
        let loss = tape.sum(av).unwrap();
        let g = tape.backward(loss).unwrap();
        assert!(g.get(xv).is_none());
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let agent = build_surrogate_agent(AgentSpec::dense(SMALL, vec![16, 8], 11)).unwrap();
        let x = random_image(SMALL, 9);
        let m = random_state(9);
        let mb = state_batch(&[&m]);
        // weighted sum keeps all three outputs in play
        let weights = [0.7, -1.3, 0.4];
        let eval = |xs: &[f64]| -> Result<f64> {
            let y = Tensor::matrix(1, SMALL.len(), xs.to_vec())?;
            let a = agent.act_batch(&y, &mb)?;
            Ok(a.data().iter().zip(weights).map(|(v, w)| v * w).sum())
        };
        let mut tape = Tape::new();
        let vars = agent.register(&mut tape);
        let y = tape.param(image_batch(&[&x]).unwrap());
        let mv = tape.constant(mb.clone());
        let out = agent.act_tape(&mut tape, &vars, y, mv).unwrap();
        let w = tape.constant(Tensor::row(weights.to_vec()));
        let prod = tape.mul(out, w).unwrap();
        let s = tape.sum(prod).unwrap();
        let g = tape.backward(s).unwrap();
        let report = finite_difference_check(eval, x.data(), g.get(y).unwrap().data(), 1e-6).unwrap();
        assert!(report.max_rel_error < 1e-5, "{report:?}");
    }

    #[test]
    fn small_perturbations_give_small_changes() {
        let agent = build_surrogate_agent(AgentSpec::dense(SMALL, vec![16], 12)).unwrap();
        let x = random_image(SMALL, 10);
        let m = random_state(10);
        let a = agent_act(&agent, &x, &m).unwrap();
        for delta in [1e-2, 1e-3, 1e-4] {
            let shifted: Vec<f64> = x.data().iter().map(|v| (v + delta).min(1.0)).collect();
            let xs = ImageTensor::new(3, 4, 8, shifted).unwrap();
            let b = agent_act(&agent, &xs, &m).unwrap();
            let change = a
                .to_array()
                .iter()
                .zip(b.to_array())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            assert!(change < 100.0 * delta, "delta {delta}: change {change}");
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let agent = build_surrogate_agent(AgentSpec::dense(SMALL, vec![8], 3)).unwrap();
        let x = ImageTensor::filled(3, 4, 4, 0.5).unwrap();
        assert!(agent_act(&agent, &x, &StateVector::zero()).is_err());
    }

    #[test]
    fn structured_agent_steers_toward_bright_paint() {
        let dims = ImageDims::new(3, 8, 16);
        let agent = build_surrogate_agent(AgentSpec::structured(dims)).unwrap();
        let paint = |right: bool| {
            let mut d = vec![0.3; dims.len()];
            for c in 0..3 {
                for y in 4..8 {
                    for x in 0..16 {
                        if (x >= 12) == right && !(4..12).contains(&x) {
                            d[(c * 8 + y) * 16 + x] = 1.0;
                        }
                    }
                }
            }
            ImageTensor::new(3, 8, 16, d).unwrap()
        };
        let left = agent_act(&agent, &paint(false), &StateVector::zero()).unwrap();
        let right = agent_act(&agent, &paint(true), &StateVector::zero()).unwrap();
        assert!(right.steer > 0.0 && left.steer < 0.0, "{left:?} {right:?}");
    }
}
