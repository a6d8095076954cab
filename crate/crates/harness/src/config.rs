//! Declarative experiment description, read from a TOML file.
//!
//! Every section and field has a default, so a config only needs to list
//! what it changes. Relative paths are resolved against the directory of
//! the config file when it is loaded.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use tscc_core::agent::AgentSpec;
use tscc_core::baseline::{QamConstellation, DEFAULT_BP_ITERS};
use tscc_core::scene::SceneSpec;
use tscc_core::{ChannelKind, CodecConfig, ImageDims};

use crate::method::Method;

pub const DEFAULT_SNR_GRID: [f64; 7] = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub codec: CodecSection,
    pub agent: AgentSection,
    pub channel: ChannelSection,
    pub digital: DigitalSection,
    pub ratio_sweep: RatioSweepSection,
    pub ber: BerSection,
    pub experiment: ExperimentSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Synthetic,
    Directory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Image directory, only read when `kind = "directory"`.
    pub path: Option<PathBuf>,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub train_count: usize,
    pub test_count: usize,
    /// Scene index of the first held-out scene (synthetic only).
    pub test_offset: u64,
    pub scene_seed: u64,
    pub max_curvature: f64,
    pub lighting: f64,
    pub min_obstacles: usize,
    pub max_obstacles: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Synthetic,
            path: None,
            channels: 3,
            height: 32,
            width: 64,
            train_count: 2000,
            test_count: 300,
            test_offset: 100_000,
            scene_seed: 1,
            max_curvature: 1.0,
            lighting: 0.4,
            min_obstacles: 0,
            max_obstacles: 2,
        }
    }
}

impl DatasetConfig {
    pub fn dims(&self) -> ImageDims {
        ImageDims::new(self.channels, self.height, self.width)
    }

    pub fn scene_spec(&self) -> SceneSpec {
        SceneSpec {
            dims: self.dims(),
            max_curvature: self.max_curvature,
            obstacles: (self.min_obstacles, self.max_obstacles),
            lighting: self.lighting,
            seed: self.scene_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecSection {
    pub latent_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub beta_c_rec: f64,
    /// Weight of the pixel term for the reconstruction-trained codec.
    pub beta_rec: f64,
    pub latent_samples: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub power_budget: f64,
}

impl Default for CodecSection {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            hidden_dims: vec![64],
            beta_c_rec: 2048.0,
            beta_rec: 1.0,
            latent_samples: 1,
            learning_rate: 1e-3,
            epochs: 20,
            batch_size: 16,
            power_budget: 1.0,
        }
    }
}

impl CodecSection {
    pub fn codec_config(&self, seed: u64) -> CodecConfig {
        CodecConfig {
            latent_dim: self.latent_dim,
            hidden_dims: self.hidden_dims.clone(),
            beta_c_rec: self.beta_c_rec,
            latent_samples: self.latent_samples,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            power_budget: self.power_budget,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKindName {
    Structured,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub kind: AgentKindName,
    /// Hidden widths of the dense agent.
    pub hidden_dims: Vec<usize>,
    pub seed: u64,
}

impl Default for AgentSection {
    fn default() -> Self {
        Self {
            kind: AgentKindName::Structured,
            hidden_dims: vec![256, 64],
            seed: 7,
        }
    }
}

impl AgentSection {
    pub fn spec(&self, dims: ImageDims) -> AgentSpec {
        match self.kind {
            AgentKindName::Structured => AgentSpec::structured(dims),
            AgentKindName::Dense => AgentSpec::dense(dims, self.hidden_dims.clone(), self.seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKindName {
    Awgn,
    Rayleigh,
}

impl From<ChannelKindName> for ChannelKind {
    fn from(k: ChannelKindName) -> Self {
        match k {
            ChannelKindName::Awgn => ChannelKind::Awgn,
            ChannelKindName::Rayleigh => ChannelKind::Rayleigh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub kind: ChannelKindName,
    pub snr_db: Vec<f64>,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            kind: ChannelKindName::Awgn,
            snr_db: DEFAULT_SNR_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DigitalSection {
    pub ldpc_n: usize,
    pub ldpc_k: usize,
    pub column_weight: usize,
    pub ldpc_seed: u64,
    pub qam_order: usize,
    pub max_iters: usize,
    pub interleaver_seed: u64,
    /// Source quality is calibrated so the mean channel ratio stays at or
    /// below this value on the calibration images.
    pub target_ratio: f64,
    /// Fixed quality; overrides `target_ratio` when set.
    pub quality: Option<f64>,
    /// Leading training images used for calibration.
    pub calibration_images: usize,
}

impl Default for DigitalSection {
    fn default() -> Self {
        Self {
            ldpc_n: 1536,
            ldpc_k: 512,
            column_weight: 3,
            ldpc_seed: 0,
            qam_order: 64,
            max_iters: DEFAULT_BP_ITERS,
            interleaver_seed: 0x1EAF,
            target_ratio: 0.2,
            quality: None,
            calibration_images: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioSweepSection {
    pub snr_db: f64,
    pub target_ratios: Vec<f64>,
}

impl Default for RatioSweepSection {
    fn default() -> Self {
        Self {
            snr_db: 10.0,
            target_ratios: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModulationName {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
}

impl ModulationName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Bpsk => "bpsk",
            Self::Qpsk => "qpsk",
            Self::Qam16 => "qam16",
            Self::Qam64 => "qam64",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BerSection {
    pub modulations: Vec<ModulationName>,
    /// Eb/N0 for BPSK, SNR per symbol for QAM.
    pub x_db: Vec<f64>,
    pub min_bits: usize,
    pub seed: u64,
}

impl Default for BerSection {
    fn default() -> Self {
        Self {
            modulations: vec![ModulationName::Bpsk, ModulationName::Qam64],
            x_db: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0],
            min_bits: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Action tolerance for the task score.
    pub tau: f64,
    pub out_dir: PathBuf,
    /// Defaults to `<out_dir>/checkpoints`.
    pub checkpoint_dir: Option<PathBuf>,
    pub threads: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            methods: vec![Method::Tscc, Method::JsccRec, Method::Digital],
            seeds: vec![0, 1, 2],
            tau: tscc_core::metrics::DEFAULT_TAU,
            out_dir: PathBuf::from("runs"),
            checkpoint_dir: None,
            threads: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing experiment config")?;
        Ok(cfg)
    }

    /// Reads, resolves relative paths against the file's directory, and validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.dataset.path.as_mut() {
            fix(p);
        }
        fix(&mut self.experiment.out_dir);
        if let Some(p) = self.experiment.checkpoint_dir.as_mut() {
            fix(p);
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.experiment
            .checkpoint_dir
            .clone()
            .unwrap_or_else(|| self.experiment.out_dir.join("checkpoints"))
    }

    pub fn validate(&self) -> Result<()> {
        let grid = &self.channel.snr_db;
        ensure!(!grid.is_empty(), "SNR grid is empty");
        ensure!(grid.iter().all(|s| s.is_finite()), "SNR grid must be finite");
        ensure!(
            grid.windows(2).all(|w| w[1] > w[0]),
            "SNR grid must be strictly ascending: {grid:?}"
        );
        ensure!(!self.experiment.methods.is_empty(), "no methods listed");
        ensure!(!self.experiment.seeds.is_empty(), "no seeds listed");
        ensure!(self.experiment.tau > 0.0, "tau must be > 0");
        ensure!(self.experiment.threads >= 1, "threads must be >= 1");
        let d = &self.dataset;
        ensure!(d.test_count >= 1, "test_count must be >= 1");
        match d.kind {
            DatasetKind::Synthetic => {
                self.dataset.scene_spec().validate()?;
                ensure!(d.train_count >= 1, "train_count must be >= 1");
            }
            DatasetKind::Directory => {
                let Some(p) = &d.path else {
                    bail!("dataset kind \"directory\" needs a path");
                };
                ensure!(p.is_dir(), "dataset directory {} does not exist", p.display());
                ensure!(!d.dims().is_empty(), "image dims must be positive");
            }
        }
        self.codec.codec_config(0).validate()?;
        ensure!(self.codec.beta_rec > 0.0, "beta_rec must be > 0");
        let g = &self.digital;
        ensure!(g.ldpc_n > g.ldpc_k && g.ldpc_k > 0, "LDPC needs n > k > 0");
        QamConstellation::new(g.qam_order)?;
        ensure!(g.max_iters >= 1, "max_iters must be >= 1");
        ensure!(g.calibration_images >= 1, "calibration_images must be >= 1");
        match g.quality {
            Some(q) => ensure!(q > 0.0 && q.is_finite(), "quality must be positive"),
            None => ensure!(g.target_ratio > 0.0, "target_ratio must be > 0"),
        }
        let r = &self.ratio_sweep;
        ensure!(r.snr_db.is_finite(), "ratio sweep SNR must be finite");
        ensure!(!r.target_ratios.is_empty(), "ratio sweep has no targets");
        ensure!(r.target_ratios.iter().all(|&t| t > 0.0), "target ratios must be > 0");
        ensure!(self.ber.min_bits >= 1, "min_bits must be >= 1");
        ensure!(self.ber.x_db.iter().all(|x| x.is_finite()), "BER grid must be finite");
        Ok(())
    }
}
