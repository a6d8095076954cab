//! Training, evaluation and the SNR / compression-ratio sweeps.
//!
//! Every sweep point is an independent job run on a rayon pool. Noise for
//! held-out image `i` of job (method, snr, seed) comes from the stream
//! `stream_key([method, snr bits, seed, i])`, so results do not depend on
//! how jobs are scheduled or how many threads run them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use log::info;
use rayon::prelude::*;
use serde::Serialize;
use tscc_core::agent::{agent_act, build_surrogate_agent, coach_act, SurrogateAgent};
use tscc_core::baseline::{
    calibrate_quality, ldpc_build, run_digital_chain, CodecQuality, DigitalChain, LdpcCode, QamConstellation,
};
use tscc_core::jscc::{
    forward_pipeline, load_checkpoint, parameter_checksum, save_checkpoint, train_reconstruction, train_tscc,
    JsccCodec, Link, TrainedCodec,
};
use tscc_core::metrics::{batch_action_mse, ms_ssim, psnr, task_score};
use tscc_core::rng::{stream_key, StreamRng};
use tscc_core::{ActionVector, ChannelConfig, ImageTensor, Sample};

use crate::config::ExperimentConfig;
use crate::dataset::{build_dataset, build_dataset_sized, Dataset};
use crate::method::Method;
use crate::plot;
use crate::records::{emit_csv, to_csv_bytes, write_bytes, SweepRecord};

pub const SNR_CSV: &str = "sweep_snr.csv";
pub const RATIO_CSV: &str = "sweep_ratio.csv";
pub const EVAL_CSV: &str = "eval.csv";
pub const HISTORY_CSV: &str = "train_history.csv";
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";
pub const BANDWIDTH_FILE: &str = "bandwidth_saving.txt";

pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?)
}

pub fn build_agent(cfg: &ExperimentConfig) -> Result<SurrogateAgent> {
    Ok(build_surrogate_agent(cfg.agent.spec(cfg.dataset.dims()))?)
}

pub fn checkpoint_path(dir: &Path, method: Method, seed: u64) -> PathBuf {
    dir.join(format!("{method}-seed{seed}.ckpt"))
}

/// Writes the resolved config next to a run's outputs.
pub fn write_resolved_config(cfg: &ExperimentConfig) -> Result<()> {
    write_bytes(
        &cfg.experiment.out_dir.join(RESOLVED_CONFIG),
        cfg.to_toml_string()?.as_bytes(),
    )
}

fn train_one(
    cfg: &ExperimentConfig,
    method: Method,
    seed: u64,
    train: &[Sample],
    agent: &SurrogateAgent,
) -> Result<TrainedCodec> {
    let codec_cfg = cfg.codec.codec_config(seed);
    let trained = match method {
        Method::Tscc => train_tscc(&codec_cfg, train, agent, agent)?,
        Method::JsccRec => train_reconstruction(&codec_cfg, train, cfg.codec.beta_rec)?,
        Method::Digital => bail!("the digital chain has nothing to train"),
    };
    Ok(trained)
}

#[derive(Debug, Clone, Serialize)]
struct HistoryRow {
    method: Method,
    seed: u64,
    step: usize,
    reconstruction: f64,
    kl: f64,
    total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub method: Method,
    pub seed: u64,
    pub path: PathBuf,
    pub checksum: String,
    pub final_loss: f64,
}

/// Trains every neural method for every seed and saves the checkpoints.
pub fn run_training(cfg: &ExperimentConfig) -> Result<Vec<TrainReport>> {
    let data = build_dataset(&cfg.dataset)?;
    ensure!(!data.train.is_empty(), "training set is empty");
    let agent = build_agent(cfg)?;
    let dir = cfg.checkpoint_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let jobs: Vec<(Method, u64)> = cfg
        .experiment
        .methods
        .iter()
        .filter(|m| m.is_neural())
        .flat_map(|&m| cfg.experiment.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let pool = thread_pool(cfg.experiment.threads)?;
    let trained: Vec<TrainedCodec> = pool.install(|| {
        jobs.par_iter()
            .map(|&(m, s)| {
                info!("training {m} seed {s} on {} images", data.train.len());
                train_one(cfg, m, s, &data.train, &agent)
            })
            .collect::<Result<_>>()
    })?;
    let mut reports = Vec::new();
    let mut history = Vec::new();
    for (&(method, seed), t) in jobs.iter().zip(&trained) {
        let path = checkpoint_path(&dir, method, seed);
        save_checkpoint(&t.codec, &path).with_context(|| format!("saving {}", path.display()))?;
        for (step, l) in t.history.iter().enumerate() {
            history.push(HistoryRow {
                method,
                seed,
                step,
                reconstruction: l.reconstruction,
                kl: l.kl,
                total: l.total,
            });
        }
        reports.push(TrainReport {
            method,
            seed,
            path,
            checksum: parameter_checksum(&t.codec),
            final_loss: t.history.last().map(|l| l.total).unwrap_or(f64::NAN),
        });
    }
    write_bytes(
        &cfg.experiment.out_dir.join(HISTORY_CSV),
        &to_csv_bytes(&history, "method,seed,step,reconstruction,kl,total")?,
    )?;
    write_resolved_config(cfg)?;
    Ok(reports)
}

/// Trained codecs keyed by (method, seed), with the checksum seen at load.
pub struct CodecSet {
    codecs: BTreeMap<(Method, u64), (JsccCodec, String)>,
}

impl CodecSet {
    /// Loads a checkpoint for every neural (method, seed) in the config.
    /// Aborts naming the first method whose checkpoint is missing.
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let dir = cfg.checkpoint_dir();
        let mut codecs = BTreeMap::new();
        for &m in cfg.experiment.methods.iter().filter(|m| m.is_neural()) {
            for &s in &cfg.experiment.seeds {
                let path = checkpoint_path(&dir, m, s);
                if !path.is_file() {
                    bail!(
                        "missing checkpoint for method {m} (seed {s}): {} (run `tscc train` first)",
                        path.display()
                    );
                }
                let codec =
                    load_checkpoint(&path).with_context(|| format!("loading {m} checkpoint {}", path.display()))?;
                ensure!(
                    codec.dims() == cfg.dataset.dims(),
                    "{m} checkpoint was trained on {:?}, config uses {:?}",
                    codec.dims(),
                    cfg.dataset.dims()
                );
                let sum = parameter_checksum(&codec);
                codecs.insert((m, s), (codec, sum));
            }
        }
        Ok(Self { codecs })
    }

    pub fn from_codecs(codecs: impl IntoIterator<Item = ((Method, u64), JsccCodec)>) -> Self {
        Self {
            codecs: codecs
                .into_iter()
                .map(|(k, c)| {
                    let sum = parameter_checksum(&c);
                    (k, (c, sum))
                })
                .collect(),
        }
    }

    pub fn get(&self, method: Method, seed: u64) -> Result<&JsccCodec> {
        self.codecs
            .get(&(method, seed))
            .map(|(c, _)| c)
            .with_context(|| format!("no codec loaded for method {method} seed {seed}"))
    }

    /// Fails if any codec's parameters changed since loading.
    pub fn verify_unchanged(&self) -> Result<()> {
        for ((m, s), (c, sum)) in &self.codecs {
            ensure!(
                parameter_checksum(c) == *sum,
                "{m} seed {s} parameters changed during evaluation"
            );
        }
        Ok(())
    }
}

/// Code, constellation and calibrated quality of the digital baseline.
pub struct DigitalSetup {
    pub code: LdpcCode,
    pub qam: QamConstellation,
    pub quality: CodecQuality,
    pub max_iters: usize,
    pub interleaver_seed: u64,
}

impl DigitalSetup {
    pub fn new(cfg: &ExperimentConfig, calibration: &[ImageTensor]) -> Result<Self> {
        let g = &cfg.digital;
        let code = ldpc_build(g.ldpc_n, g.ldpc_k, g.column_weight, g.ldpc_seed)?;
        let qam = QamConstellation::new(g.qam_order)?;
        let mut setup = Self {
            code,
            qam,
            quality: CodecQuality::new(g.quality.unwrap_or(1.0))?,
            max_iters: g.max_iters,
            interleaver_seed: g.interleaver_seed,
        };
        if g.quality.is_none() {
            setup.quality = setup.calibrate(calibration, g.target_ratio)?.0;
        }
        Ok(setup)
    }

    pub fn chain(&self) -> DigitalChain<'_> {
        self.chain_at(self.quality)
    }

    pub fn chain_at(&self, quality: CodecQuality) -> DigitalChain<'_> {
        DigitalChain {
            max_iters: self.max_iters,
            interleaver_seed: self.interleaver_seed,
            ..DigitalChain::new(quality, &self.code, &self.qam)
        }
    }

    pub fn calibrate(&self, images: &[ImageTensor], target: f64) -> Result<(CodecQuality, f64)> {
        Ok(calibrate_quality(images, &self.chain(), target)?)
    }
}

/// Channel for held-out image `index` of job (method, snr, seed).
pub fn job_channel(cfg: &ExperimentConfig, method: Method, snr_db: f64, seed: u64, index: usize) -> ChannelConfig {
    ChannelConfig {
        kind: cfg.channel.kind.into(),
        snr_db,
        power_budget: cfg.codec.power_budget,
        seed,
        stream: stream_key(&[method.tag(), snr_db.to_bits(), seed, index as u64]),
    }
}

/// Reparameterization noise for held-out image `index` of a job.
pub fn job_epsilon(method: Method, snr_db: f64, seed: u64, index: usize, d: usize) -> Vec<f64> {
    StreamRng::new(
        seed,
        stream_key(&[method.tag(), snr_db.to_bits(), seed, index as u64, 0xE5]),
    )
    .gaussian_vec(d)
}

/// MS-SSIM with as many scales (up to 3) as the image size allows.
pub fn ms_ssim_auto(x: &ImageTensor, y: &ImageTensor) -> Result<f64> {
    let side = x.height().min(x.width());
    let window = side.min(7);
    let mut scales = 1;
    while scales < 3 && window << scales <= side {
        scales += 1;
    }
    Ok(ms_ssim(x, y, scales, window)?)
}

/// Metric accumulator over one held-out set.
#[derive(Debug, Default)]
struct Tally {
    pairs: Vec<(ActionVector, ActionVector)>,
    psnr: f64,
    ms_ssim: f64,
    failures: usize,
    ratio: f64,
}

impl Tally {
    fn add(
        &mut self,
        x: &ImageTensor,
        y: &ImageTensor,
        coach: ActionVector,
        act: ActionVector,
        ratio: f64,
        failed: bool,
    ) -> Result<()> {
        self.pairs.push((coach, act));
        self.psnr += psnr(x, y)?;
        self.ms_ssim += ms_ssim_auto(x, y)?;
        self.failures += failed as usize;
        self.ratio += ratio;
        Ok(())
    }

    fn record(self, method: Method, snr_db: f64, seed: u64, tau: f64) -> Result<SweepRecord> {
        let n = self.pairs.len() as f64;
        ensure!(n > 0.0, "held-out set is empty");
        let rec = SweepRecord {
            method,
            snr_db,
            compression_ratio: self.ratio / n,
            task_score: task_score(&self.pairs, tau)?,
            action_mse: batch_action_mse(&self.pairs)?,
            psnr: self.psnr / n,
            ms_ssim: self.ms_ssim / n,
            failure_rate: self.failures as f64 / n,
            seed,
        };
        rec.validate()?;
        Ok(rec)
    }
}

/// One neural sweep point: every held-out image through encoder, channel and decoder.
pub fn evaluate_codec(
    cfg: &ExperimentConfig,
    codec: &JsccCodec,
    agent: &SurrogateAgent,
    test: &[Sample],
    method: Method,
    snr_db: f64,
    seed: u64,
) -> Result<SweepRecord> {
    let mut t = Tally::default();
    for (i, s) in test.iter().enumerate() {
        let eps = job_epsilon(method, snr_db, seed, i, codec.latent_dim());
        let link = Link::Channel(job_channel(cfg, method, snr_db, seed, i));
        let out = forward_pipeline(codec, &s.image, &link, &eps)?;
        let a = coach_act(agent, &s.image, &s.state)?;
        let a_hat = agent_act(agent, &out.y, &s.state)?;
        t.add(&s.image, &out.y, a, a_hat, codec.compression_ratio(), false)?;
    }
    t.record(method, snr_db, seed, cfg.experiment.tau)
}

/// One digital-chain sweep point at the given source quality.
pub fn evaluate_digital(
    cfg: &ExperimentConfig,
    chain: &DigitalChain,
    agent: &SurrogateAgent,
    test: &[Sample],
    snr_db: f64,
    seed: u64,
) -> Result<SweepRecord> {
    let mut t = Tally::default();
    for (i, s) in test.iter().enumerate() {
        let out = run_digital_chain(&s.image, chain, &job_channel(cfg, Method::Digital, snr_db, seed, i))?;
        let a = coach_act(agent, &s.image, &s.state)?;
        let a_hat = agent_act(agent, &out.image, &s.state)?;
        t.add(&s.image, &out.image, a, a_hat, out.ratio, out.failed)?;
    }
    t.record(Method::Digital, snr_db, seed, cfg.experiment.tau)
}

/// Inputs shared by all evaluation jobs of a run.
pub struct EvalContext {
    pub agent: SurrogateAgent,
    pub data: Dataset,
    pub codecs: CodecSet,
    pub digital: Option<DigitalSetup>,
}

impl EvalContext {
    /// Loads checkpoints, builds the held-out set and calibrates the digital chain.
    /// Only the calibration slice of the training set is generated.
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self> {
        let codecs = CodecSet::load(cfg)?;
        Self::with_codecs(cfg, codecs)
    }

    pub fn with_codecs(cfg: &ExperimentConfig, codecs: CodecSet) -> Result<Self> {
        let uses_digital = cfg.experiment.methods.contains(&Method::Digital);
        let calib = if uses_digital {
            cfg.digital.calibration_images
        } else {
            0
        };
        let data = build_dataset_sized(&cfg.dataset, calib)?;
        let agent = build_agent(cfg)?;
        let digital = if uses_digital {
            let images: Vec<ImageTensor> = data.train.iter().map(|s| s.image.clone()).collect();
            let setup = DigitalSetup::new(cfg, &images)?;
            info!("digital chain quality q = {:.4}", setup.quality.q());
            Some(setup)
        } else {
            None
        };
        Ok(Self {
            agent,
            data,
            codecs,
            digital,
        })
    }
}

fn snr_jobs(cfg: &ExperimentConfig, grid: &[f64]) -> Vec<(Method, f64, u64)> {
    let mut jobs = Vec::new();
    for &m in &cfg.experiment.methods {
        for &snr in grid {
            for &s in &cfg.experiment.seeds {
                jobs.push((m, snr, s));
            }
        }
    }
    jobs
}

/// One record per (method, snr, seed), in config order.
pub fn snr_sweep_records(cfg: &ExperimentConfig, ctx: &EvalContext, grid: &[f64]) -> Result<Vec<SweepRecord>> {
    let jobs = snr_jobs(cfg, grid);
    let pool = thread_pool(cfg.experiment.threads)?;
    let records = pool.install(|| {
        jobs.par_iter()
            .map(|&(m, snr, seed)| {
                let test = &ctx.data.test;
                let rec = match m {
                    Method::Digital => {
                        let setup = ctx.digital.as_ref().context("digital chain not prepared")?;
                        evaluate_digital(cfg, &setup.chain(), &ctx.agent, test, snr, seed)?
                    }
                    _ => evaluate_codec(cfg, ctx.codecs.get(m, seed)?, &ctx.agent, test, m, snr, seed)?,
                };
                info!(
                    "{m} snr {snr} seed {seed}: task {:.3} mse {:.4}",
                    rec.task_score, rec.action_mse
                );
                Ok(rec)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    ctx.codecs.verify_unchanged()?;
    Ok(records)
}

/// SNR sweep over the configured grid; writes the CSV, a plot stub and the resolved config.
pub fn run_snr_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    let ctx = EvalContext::prepare(cfg)?;
    let records = snr_sweep_records(cfg, &ctx, &cfg.channel.snr_db)?;
    let out = &cfg.experiment.out_dir;
    emit_csv(&records, out.join(SNR_CSV))?;
    write_bytes(&out.join("plot_snr.py"), plot::snr_script(SNR_CSV).as_bytes())?;
    write_resolved_config(cfg)?;
    Ok(records)
}

/// All methods at one SNR; writes `eval.csv`.
pub fn run_eval(cfg: &ExperimentConfig, snr_db: f64) -> Result<Vec<SweepRecord>> {
    ensure!(snr_db.is_finite(), "SNR must be finite");
    let ctx = EvalContext::prepare(cfg)?;
    let records = snr_sweep_records(cfg, &ctx, &[snr_db])?;
    emit_csv(&records, cfg.experiment.out_dir.join(EVAL_CSV))?;
    write_resolved_config(cfg)?;
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioSweepOutcome {
    pub records: Vec<SweepRecord>,
    /// k/l of the TSCC codec.
    pub tscc_ratio: Option<f64>,
    /// Seed-mean TSCC task score at the sweep SNR.
    pub tscc_task_score: Option<f64>,
    /// Digital ratio reaching the TSCC task score, interpolated along the sweep.
    pub digital_ratio_at_equal_score: Option<f64>,
    /// 1 − ratio_TSCC / ratio_digital.
    pub bandwidth_saving: Option<f64>,
    pub note: String,
}

/// Linear interpolation of the ratio at which the (ratio, score) curve
/// first reaches `score`. None if it never does.
pub fn ratio_at_score(curve: &[(f64, f64)], score: f64) -> Option<f64> {
    let i = curve.iter().position(|&(_, s)| s >= score)?;
    if i == 0 {
        return Some(curve[0].0);
    }
    let (r0, s0) = curve[i - 1];
    let (r1, s1) = curve[i];
    Some(r0 + (score - s0) / (s1 - s0) * (r1 - r0))
}

fn mean_by<K: Ord + Copy>(items: impl Iterator<Item = (K, f64, f64)>) -> Vec<(f64, f64)> {
    let mut groups: BTreeMap<K, (f64, f64, usize)> = BTreeMap::new();
    for (k, a, b) in items {
        let e = groups.entry(k).or_insert((0.0, 0.0, 0));
        e.0 += a;
        e.1 += b;
        e.2 += 1;
    }
    groups
        .into_values()
        .map(|(a, b, n)| (a / n as f64, b / n as f64))
        .collect()
}

/// Digital chain over the target ratios plus the neural codecs at their
/// fixed ratio, all at `ratio_sweep.snr_db`.
pub fn ratio_sweep_records(cfg: &ExperimentConfig, ctx: &EvalContext) -> Result<RatioSweepOutcome> {
    let snr = cfg.ratio_sweep.snr_db;
    let seeds = &cfg.experiment.seeds;
    let pool = thread_pool(cfg.experiment.threads)?;
    let calib: Vec<ImageTensor> = ctx.data.train.iter().map(|s| s.image.clone()).collect();
    let qualities: Vec<CodecQuality> = match &ctx.digital {
        Some(setup) => pool.install(|| {
            cfg.ratio_sweep
                .target_ratios
                .par_iter()
                .map(|&t| setup.calibrate(&calib, t).map(|(q, _)| q))
                .collect::<Result<_>>()
        })?,
        None => Vec::new(),
    };
    #[derive(Clone, Copy)]
    enum Job {
        Digital(usize, u64),
        Neural(Method, u64),
    }
    let mut jobs = Vec::new();
    for &m in &cfg.experiment.methods {
        if m == Method::Digital {
            for i in 0..qualities.len() {
                jobs.extend(seeds.iter().map(|&s| Job::Digital(i, s)));
            }
        } else {
            jobs.extend(seeds.iter().map(|&s| Job::Neural(m, s)));
        }
    }
    let records: Vec<SweepRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&job| match job {
                Job::Digital(i, s) => {
                    let setup = ctx.digital.as_ref().context("digital chain not prepared")?;
                    evaluate_digital(cfg, &setup.chain_at(qualities[i]), &ctx.agent, &ctx.data.test, snr, s)
                }
                Job::Neural(m, s) => evaluate_codec(cfg, ctx.codecs.get(m, s)?, &ctx.agent, &ctx.data.test, m, snr, s),
            })
            .collect::<Result<_>>()
    })?;
    ctx.codecs.verify_unchanged()?;

    let tscc: Vec<&SweepRecord> = records.iter().filter(|r| r.method == Method::Tscc).collect();
    let tscc_ratio = tscc.first().map(|r| r.compression_ratio);
    let tscc_task_score =
        (!tscc.is_empty()).then(|| tscc.iter().map(|r| r.task_score).sum::<f64>() / tscc.len() as f64);
    // seed-mean digital curve, one point per target, ordered by achieved ratio
    let mut curve = mean_by(
        jobs.iter()
            .zip(&records)
            .filter_map(|(j, r)| matches!(j, Job::Digital(..)).then_some(r))
            .enumerate()
            .map(|(n, r)| (n / seeds.len(), r.compression_ratio, r.task_score)),
    );
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut matched, mut saving) = (None, None);
    let note = match (tscc_ratio, tscc_task_score) {
        (Some(rt), Some(st)) if !curve.is_empty() => match ratio_at_score(&curve, st) {
            Some(rd) => {
                matched = Some(rd);
                saving = Some(1.0 - rt / rd);
                if curve[0].1 >= st {
                    "the lowest digital ratio already reaches the TSCC score; saving is a lower bound".to_string()
                } else {
                    String::new()
                }
            }
            None => "the digital chain never reaches the TSCC task score on this sweep".to_string(),
        },
        _ => "needs both tscc and digital in the method list".to_string(),
    };
    Ok(RatioSweepOutcome {
        records,
        tscc_ratio,
        tscc_task_score,
        digital_ratio_at_equal_score: matched,
        bandwidth_saving: saving,
        note,
    })
}

pub fn bandwidth_summary(o: &RatioSweepOutcome) -> String {
    let f = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_else(|| "none".into());
    let mut s = format!(
        "tscc_ratio = {}\ntscc_task_score = {}\ndigital_ratio_at_equal_score = {}\nbandwidth_saving = {}\n",
        f(o.tscc_ratio),
        f(o.tscc_task_score),
        f(o.digital_ratio_at_equal_score),
        f(o.bandwidth_saving)
    );
    if !o.note.is_empty() {
        s.push_str(&format!("note = {}\n", o.note));
    }
    s
}

/// Ratio sweep; writes the CSV, the bandwidth-saving summary, a plot stub and the resolved config.
pub fn run_ratio_sweep(cfg: &ExperimentConfig) -> Result<RatioSweepOutcome> {
    let ctx = EvalContext::prepare(cfg)?;
    let outcome = ratio_sweep_records(cfg, &ctx)?;
    let out = &cfg.experiment.out_dir;
    emit_csv(&outcome.records, out.join(RATIO_CSV))?;
    write_bytes(&out.join(BANDWIDTH_FILE), bandwidth_summary(&outcome).as_bytes())?;
    write_bytes(&out.join("plot_ratio.py"), plot::ratio_script(RATIO_CSV).as_bytes())?;
    write_resolved_config(cfg)?;
    Ok(outcome)
}
