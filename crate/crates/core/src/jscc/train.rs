//! Loss graph and the noiseless training loop.
//!
//! Each step encodes a minibatch, draws t latent samples, normalizes them to
//! the power budget and decodes without channel noise. Under the task
//! objective the frozen agent is applied to every reconstruction and
//! compared with coach actions computed once, off-tape, on the lossless
//! images. Gradients reach the encoder and decoder only.

use crate::agent::agent_act;
use crate::agent::{image_batch, state_batch, SurrogateAgent};
use crate::autodiff::{Adam, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::jscc::codec::{decode, encode, JsccCodec, Objective};
use crate::jscc::ops::{
    compute_tscc_loss, compute_vae_loss, normalize_power, pack_complex, reparameterize, LossBreakdown,
};
use crate::nn::MlpVars;
use crate::rng::{stream_key, StreamRng};
use crate::types::{ActionVector, CodecConfig, ImageTensor, Sample, StateVector};

/// One minibatch with its fixed latent noise.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    /// B×l images.
    pub x: Tensor,
    /// B×6 states.
    pub m: Tensor,
    /// B×3 coach actions (task) or B×l images (reconstruction).
    pub target: Tensor,
    /// t draws of B×d standard normals.
    pub eps: Vec<Tensor>,
}

struct Graph {
    loss: Var,
    rec: Var,
    kl: Var,
    enc: MlpVars,
    dec: MlpVars,
}

fn build_graph(
    tape: &mut Tape,
    codec: &JsccCodec,
    agent: Option<&SurrogateAgent>,
    batch: &TrainBatch,
) -> Result<Graph> {
    if batch.eps.is_empty() {
        return Err(Error::InvalidArgument("need at least one latent sample".into()));
    }
    let b = batch.x.rows();
    let d = codec.latent_dim();
    let k = codec.channel_uses();
    let gain = (k as f64 * codec.config.power_budget).sqrt();

    let enc = codec.encoder.net().register(tape, true);
    let dec = codec.decoder.net().register(tape, true);
    let x = tape.constant(batch.x.clone());
    let (mu, logvar, sigma) = codec.encoder.forward_tape(tape, &enc, x)?;

    // ½Σ(μ² + σ² − ln σ² − 1) per row
    let mu2 = tape.square(mu)?;
    let var = tape.square(sigma)?;
    let kl = tape.add(mu2, var)?;
    let kl = tape.sub(kl, logvar)?;
    let kl = tape.offset(kl, -1.0)?;
    let kl = tape.sum_rows(kl)?;
    let kl = tape.scale(kl, 0.5)?;

    let task = match codec.objective {
        Objective::Task => {
            let agent = agent.ok_or_else(|| Error::InvalidArgument("task objective needs an agent".into()))?;
            let vars = agent.register(tape);
            let m = tape.constant(batch.m.clone());
            Some((agent, vars, m))
        }
        Objective::Reconstruction { .. } => None,
    };
    let target = tape.constant(batch.target.clone());

    let mut rec: Option<Var> = None;
    for eps in &batch.eps {
        if eps.rows() != b || eps.cols() != d {
            return Err(Error::ShapeMismatch {
                op: "latent noise",
                lhs: vec![b, d],
                rhs: eps.shape().to_vec(),
            });
        }
        let e = tape.constant(eps.clone());
        let es = tape.mul(e, sigma)?;
        let z = tape.add(es, mu)?;

        // interleaved (re, im) rows normalized to (1/k)‖z̃‖² = P
        let sq = tape.square(z)?;
        let energy = tape.sum_rows(sq)?;
        let norm = tape.sqrt(energy)?;
        let norm = tape.broadcast(norm, b, d)?;
        let unit = tape.div(z, norm)?;
        let zt = tape.scale(unit, gain)?;

        let y = codec.decoder.forward_tape(tape, &dec, zt)?;
        let out = match &task {
            Some((agent, vars, m)) => agent.act_tape(tape, vars, y, *m)?,
            None => y,
        };
        let diff = tape.sub(out, target)?;
        let diff = tape.square(diff)?;
        let r = tape.sum_rows(diff)?;
        rec = Some(match rec {
            Some(acc) => tape.add(acc, r)?,
            None => r,
        });
    }
    let rec = tape.scale(rec.expect("non-empty eps"), 1.0 / batch.eps.len() as f64)?;
    let weighted = tape.scale(rec, codec.beta())?;
    let total = tape.add(weighted, kl)?;
    let loss = tape.mean(total)?;
    Ok(Graph {
        loss,
        rec,
        kl,
        enc,
        dec,
    })
}

fn breakdown(tape: &Tape, g: &Graph, beta: f64) -> LossBreakdown {
    LossBreakdown {
        reconstruction: tape.value(g.rec).mean(),
        kl: tape.value(g.kl).mean(),
        beta,
        total: tape.value(g.loss).data()[0],
    }
}

/// Batch loss and its gradient with respect to the flattened codec
/// parameters (encoder then decoder, see [`JsccCodec::flat_parameters`]).
pub fn loss_and_gradient(
    codec: &JsccCodec,
    agent: Option<&SurrogateAgent>,
    batch: &TrainBatch,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let mut tape = Tape::new();
    let g = build_graph(&mut tape, codec, agent, batch)?;
    let grads = tape.backward(g.loss)?;
    let mut flat = Vec::with_capacity(codec.encoder.net().parameter_count() + codec.decoder.net().parameter_count());
    for vars in [&g.enc, &g.dec] {
        for &(w, b) in vars.layer_vars() {
            for v in [w, b] {
                match grads.get(v) {
                    Some(t) => flat.extend_from_slice(t.data()),
                    None => flat.extend(std::iter::repeat_n(0.0, tape.value(v).len())),
                }
            }
        }
    }
    Ok((breakdown(&tape, &g, codec.beta()), flat))
}

/// The same batch loss computed one example at a time through the plain
/// encode/decode path and the scalar loss functions, without a tape.
pub fn batch_loss(codec: &JsccCodec, agent: Option<&SurrogateAgent>, batch: &TrainBatch) -> Result<LossBreakdown> {
    let dims = codec.dims();
    let b = batch.x.rows();
    let d = codec.latent_dim();
    let mut acc = LossBreakdown::new(0.0, 0.0, codec.beta());
    for row in 0..b {
        let x = ImageTensor::new(
            dims.channels,
            dims.height,
            dims.width,
            batch.x.data()[row * dims.len()..(row + 1) * dims.len()].to_vec(),
        )?;
        let latent = encode(&codec.encoder, &x)?;
        let mut outputs = Vec::with_capacity(batch.eps.len());
        for eps in &batch.eps {
            let z = reparameterize(&latent, &eps.data()[row * d..(row + 1) * d])?;
            let frame = normalize_power(&pack_complex(&z)?, codec.config.power_budget)?;
            outputs.push(decode(&codec.decoder, &frame)?);
        }
        let l = match codec.objective {
            Objective::Task => {
                let agent = agent.ok_or_else(|| Error::InvalidArgument("task objective needs an agent".into()))?;
                let mut m = [0.0; StateVector::DIM];
                m.copy_from_slice(&batch.m.data()[row * StateVector::DIM..(row + 1) * StateVector::DIM]);
                let m = StateVector::from_array(m);
                let a = ActionVector::from_slice(
                    &batch.target.data()[row * ActionVector::DIM..(row + 1) * ActionVector::DIM],
                )?;
                let hats = outputs
                    .iter()
                    .map(|y| agent_act(agent, y, &m))
                    .collect::<Result<Vec<_>>>()?;
                compute_tscc_loss(&a, &hats, &latent, codec.beta())?
            }
            Objective::Reconstruction { beta_rec } => compute_vae_loss(&x, &outputs, &latent, beta_rec)?,
        };
        acc.reconstruction += l.reconstruction / b as f64;
        acc.kl += l.kl / b as f64;
        acc.total += l.total / b as f64;
    }
    Ok(acc)
}

/// Trained codec and its per-step loss history.
#[derive(Debug, Clone)]
pub struct TrainedCodec {
    pub codec: JsccCodec,
    pub history: Vec<LossBreakdown>,
}

/// Trains a fresh codec against the frozen agent, with coach targets
/// `a = coach(x, m)` on the lossless images.
pub fn train_tscc(
    config: &CodecConfig,
    dataset: &[Sample],
    agent: &SurrogateAgent,
    coach: &SurrogateAgent,
) -> Result<TrainedCodec> {
    let dims = first_dims(dataset)?;
    let mut codec = JsccCodec::new(dims, config.clone(), Objective::Task)?;
    let history = fit(&mut codec, dataset, Some((agent, coach)))?;
    Ok(TrainedCodec { codec, history })
}

/// Trains a fresh codec on pixel reconstruction (β-VAE objective).
pub fn train_reconstruction(config: &CodecConfig, dataset: &[Sample], beta_rec: f64) -> Result<TrainedCodec> {
    let dims = first_dims(dataset)?;
    let mut codec = JsccCodec::new(dims, config.clone(), Objective::Reconstruction { beta_rec })?;
    let history = fit(&mut codec, dataset, None)?;
    Ok(TrainedCodec { codec, history })
}

fn first_dims(dataset: &[Sample]) -> Result<crate::types::ImageDims> {
    dataset
        .first()
        .map(|s| s.image.dims())
        .ok_or_else(|| Error::InvalidArgument("empty training set".into()))
}

/// Runs `config.epochs` passes of minibatch Adam on an existing codec.
pub fn fit(
    codec: &mut JsccCodec,
    dataset: &[Sample],
    task: Option<(&SurrogateAgent, &SurrogateAgent)>,
) -> Result<Vec<LossBreakdown>> {
    let cfg = codec.config.clone();
    cfg.validate()?;
    let dims = first_dims(dataset)?;
    if dims != codec.dims() || dataset.iter().any(|s| s.image.dims() != dims) {
        return Err(Error::InvalidArgument("training images do not match codec dims".into()));
    }
    let agent = match (codec.objective, task) {
        (Objective::Task, Some((agent, _))) => Some(agent),
        (Objective::Task, None) => return Err(Error::InvalidArgument("task objective needs agent and coach".into())),
        (Objective::Reconstruction { .. }, _) => None,
    };

    // coach targets are fixed for the whole run
    let targets: Vec<Vec<f64>> = match (codec.objective, task) {
        (Objective::Task, Some((_, coach))) => dataset
            .chunks(64)
            .map(|chunk| {
                let xs: Vec<&ImageTensor> = chunk.iter().map(|s| &s.image).collect();
                let ms: Vec<&StateVector> = chunk.iter().map(|s| &s.state).collect();
                let a = coach.act_batch(&image_batch(&xs)?, &state_batch(&ms))?;
                Ok(a.data()
                    .chunks(ActionVector::DIM)
                    .map(<[f64]>::to_vec)
                    .collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect(),
        _ => dataset.iter().map(|s| s.image.data().to_vec()).collect(),
    };

    let adam = Adam::new(cfg.learning_rate);
    let n = dataset.len();
    let bs = cfg.batch_size.min(n);
    let d = codec.latent_dim();
    let mut history = Vec::new();
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        StreamRng::new(cfg.seed, stream_key(&[0x5A, epoch as u64])).shuffle(&mut order);
        for idx in order.chunks(bs) {
            let batch = make_batch(dataset, &targets, idx, d, cfg.latent_samples, cfg.seed, step)?;
            let mut tape = Tape::new();
            let g = build_graph(&mut tape, codec, agent, &batch)?;
            let loss = breakdown(&tape, &g, codec.beta());
            if !loss.total.is_finite() {
                return Err(Error::Diverged {
                    step,
                    what: format!("loss {loss:?}"),
                });
            }
            let grads = tape.backward(g.loss).map_err(|e| Error::Diverged {
                step,
                what: e.to_string(),
            })?;
            for net in [codec.encoder.net_mut(), codec.decoder.net_mut()] {
                net.parameters_mut().for_each(|p| p.zero_grad());
            }
            codec.encoder.net_mut().accumulate_grads(&grads, &g.enc)?;
            codec.decoder.net_mut().accumulate_grads(&grads, &g.dec)?;
            for net in [codec.encoder.net_mut(), codec.decoder.net_mut()] {
                for p in net.parameters_mut() {
                    adam.update(p).map_err(|e| Error::Diverged {
                        step,
                        what: e.to_string(),
                    })?;
                }
            }
            history.push(loss);
            step += 1;
        }
    }
    Ok(history)
}

fn make_batch(
    dataset: &[Sample],
    targets: &[Vec<f64>],
    idx: &[usize],
    d: usize,
    t: usize,
    seed: u64,
    step: usize,
) -> Result<TrainBatch> {
    let xs: Vec<&ImageTensor> = idx.iter().map(|&i| &dataset[i].image).collect();
    let ms: Vec<&StateVector> = idx.iter().map(|&i| &dataset[i].state).collect();
    let width = targets[idx[0]].len();
    let target = Tensor::matrix(
        idx.len(),
        width,
        idx.iter().flat_map(|&i| targets[i].iter().copied()).collect(),
    )?;
    let mut rng = StreamRng::new(seed, stream_key(&[0xE5, step as u64]));
    let eps = (0..t)
        .map(|_| Tensor::matrix(idx.len(), d, rng.gaussian_vec(idx.len() * d)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainBatch {
        x: image_batch(&xs)?,
        m: state_batch(&ms),
        target,
        eps,
    })
}

/// Builds a batch over `samples` with the given targets and seeded noise.
pub fn batch_from_samples(
    samples: &[Sample],
    targets: Tensor,
    latent_dim: usize,
    t: usize,
    seed: u64,
) -> Result<TrainBatch> {
    let xs: Vec<&ImageTensor> = samples.iter().map(|s| &s.image).collect();
    let ms: Vec<&StateVector> = samples.iter().map(|s| &s.state).collect();
    let mut rng = StreamRng::new(seed, stream_key(&[0xE6]));
    let eps = (0..t)
        .map(|_| Tensor::matrix(samples.len(), latent_dim, rng.gaussian_vec(samples.len() * latent_dim)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainBatch {
        x: image_batch(&xs)?,
        m: state_batch(&ms),
        target: targets,
        eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{build_surrogate_agent, AgentSpec};
    use crate::autodiff::{finite_difference_check, pre_perturb};
    use crate::types::ImageDims;

    const DIMS: ImageDims = ImageDims::new(3, 4, 8);

    fn samples(n: usize, seed: u64) -> Vec<Sample> {
        let mut rng = StreamRng::new(seed, 1);
        (0..n)
            .map(|_| Sample {
                image: ImageTensor::new(3, 4, 8, (0..96).map(|_| rng.uniform()).collect()).unwrap(),
                state: StateVector::from_array([rng.uniform(), 0.5, 0.0, 0.0, rng.uniform_range(-1.0, 1.0), 1.0]),
            })
            .collect()
    }

    fn toy_config() -> CodecConfig {
        CodecConfig {
            latent_dim: 8,
            hidden_dims: vec![10],
            seed: 11,
            batch_size: 4,
            epochs: 1,
            ..CodecConfig::default()
        }
    }

    fn agent() -> SurrogateAgent {
        build_surrogate_agent(AgentSpec::dense(DIMS, vec![12], 2)).unwrap()
    }

    fn coach_targets(agent: &SurrogateAgent, s: &[Sample]) -> Tensor {
        let xs: Vec<&ImageTensor> = s.iter().map(|s| &s.image).collect();
        let ms: Vec<&StateVector> = s.iter().map(|s| &s.state).collect();
        agent.act_batch(&image_batch(&xs).unwrap(), &state_batch(&ms)).unwrap()
    }

    #[test]
    fn tape_loss_matches_plain_loss() {
        let ag = agent();
        let s = samples(3, 4);
        let codec = JsccCodec::new(
            DIMS,
            CodecConfig {
                latent_samples: 2,
                ..toy_config()
            },
            Objective::Task,
        )
        .unwrap();
        let batch = batch_from_samples(&s, coach_targets(&ag, &s), 8, 2, 1).unwrap();
        let (tape_loss, _) = loss_and_gradient(&codec, Some(&ag), &batch).unwrap();
        let plain = batch_loss(&codec, Some(&ag), &batch).unwrap();
        assert!(
            (tape_loss.total - plain.total).abs() < 1e-10 * plain.total.abs().max(1.0),
            "{tape_loss:?} {plain:?}"
        );
        assert!((tape_loss.kl - plain.kl).abs() < 1e-10);
    }

    #[test]
    fn tscc_gradient_matches_finite_differences() {
        let ag = agent();
        let s = samples(2, 5);
        let mut codec = JsccCodec::new(DIMS, toy_config(), Objective::Task).unwrap();
        let p = pre_perturb(&codec.flat_parameters(), 1e-3, 8);
        codec.set_flat_parameters(&p).unwrap();
        let batch = batch_from_samples(&s, coach_targets(&ag, &s), 8, 1, 2).unwrap();
        let (_, grad) = loss_and_gradient(&codec, Some(&ag), &batch).unwrap();
        let mut probe = codec.clone();
        let r = finite_difference_check(
            |q| {
                probe.set_flat_parameters(q)?;
                Ok(batch_loss(&probe, Some(&ag), &batch)?.total)
            },
            &p,
            &grad,
            1e-5,
        )
        .unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn reconstruction_gradient_matches_finite_differences() {
        let s = samples(2, 6);
        let codec = JsccCodec::new(DIMS, toy_config(), Objective::Reconstruction { beta_rec: 3.0 }).unwrap();
        let p = pre_perturb(&codec.flat_parameters(), 1e-3, 9);
        let mut codec = codec;
        codec.set_flat_parameters(&p).unwrap();
        let targets = image_batch(&s.iter().map(|s| &s.image).collect::<Vec<_>>()).unwrap();
        let batch = batch_from_samples(&s, targets, 8, 1, 3).unwrap();
        let (_, grad) = loss_and_gradient(&codec, None, &batch).unwrap();
        let mut probe = codec.clone();
        let r = finite_difference_check(
            |q| {
                probe.set_flat_parameters(q)?;
                Ok(batch_loss(&probe, None, &batch)?.total)
            },
            &p,
            &grad,
            1e-5,
        )
        .unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let ag = agent();
        let s = samples(8, 7);
        let cfg = CodecConfig {
            learning_rate: 0.0,
            epochs: 2,
            ..toy_config()
        };
        let fresh = JsccCodec::new(DIMS, cfg.clone(), Objective::Task).unwrap();
        let trained = train_tscc(&cfg, &s, &ag, &ag).unwrap();
        assert_eq!(trained.codec.flat_parameters(), fresh.flat_parameters());
        assert_eq!(trained.history.len(), 4);
    }

    #[test]
    fn training_reduces_loss_and_leaves_agent_frozen() {
        let ag = agent();
        let before = ag.checksum();
        let s = samples(32, 8);
        let cfg = CodecConfig {
            epochs: 25,
            batch_size: 8,
            learning_rate: 3e-3,
            ..toy_config()
        };
        let trained = train_tscc(&cfg, &s, &ag, &ag).unwrap();
        let h: Vec<f64> = trained.history.iter().map(|l| l.total).collect();
        assert_eq!(h.len(), 100);
        let head = h[..20].iter().sum::<f64>() / 20.0;
        let tail = h[h.len() - 20..].iter().sum::<f64>() / 20.0;
        assert!(tail < head, "{head} -> {tail}");
        assert_eq!(ag.checksum(), before);
    }

    #[test]
    fn training_is_deterministic() {
        let ag = agent();
        let s = samples(8, 9);
        let a = train_tscc(&toy_config(), &s, &ag, &ag).unwrap();
        let b = train_tscc(&toy_config(), &s, &ag, &ag).unwrap();
        assert_eq!(a.codec, b.codec);
    }

    #[test]
    fn empty_or_mismatched_sets_rejected() {
        let ag = agent();
        assert!(train_tscc(&toy_config(), &[], &ag, &ag).is_err());
        let mut codec = JsccCodec::new(DIMS, toy_config(), Objective::Task).unwrap();
        assert!(fit(&mut codec, &samples(2, 1), None).is_err());
    }
}
