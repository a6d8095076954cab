use std::path::Path;

use tscc_harness::config::ExperimentConfig;

/// A few seconds end to end: 3×16×32 scenes, small codec, short LDPC code.
pub fn tiny_config(out: &Path) -> ExperimentConfig {
    let text = r#"
[dataset]
height = 16
width = 32
train_count = 48
test_count = 12

[codec]
latent_dim = 8
hidden_dims = [16]
epochs = 2
batch_size = 8

[channel]
snr_db = [-10.0, 0.0, 10.0, 20.0]

[digital]
ldpc_n = 192
ldpc_k = 64
target_ratio = 0.3
calibration_images = 4

[ratio_sweep]
target_ratios = [0.1, 0.2, 0.3]

[ber]
modulations = ["bpsk", "qam16"]
x_db = [0.0, 4.0]
min_bits = 640

[experiment]
seeds = [0, 1]
"#;
    let mut cfg = ExperimentConfig::from_toml_str(text).unwrap();
    cfg.experiment.out_dir = out.to_path_buf();
    cfg.validate().unwrap();
    cfg
}

#[allow(dead_code)]
pub fn write_config(cfg: &ExperimentConfig, path: &Path) {
    std::fs::write(path, cfg.to_toml_string().unwrap()).unwrap();
}
