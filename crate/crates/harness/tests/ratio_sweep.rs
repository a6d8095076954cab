use tscc_core::ImageTensor;
use tscc_harness::config::ExperimentConfig;
use tscc_harness::dataset::build_dataset_sized;
use tscc_harness::experiment::DigitalSetup;

/// Geometry of `configs/ratio.toml`.
fn wide_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.dataset.height = 64;
    cfg.dataset.width = 128;
    cfg.dataset.test_count = 1;
    cfg.digital.ldpc_n = 384;
    cfg.digital.ldpc_k = 128;
    cfg.digital.quality = Some(1.0);
    cfg
}

#[test]
fn digital_ratios_span_one_to_thirty_percent() {
    let cfg = wide_config();
    let data = build_dataset_sized(&cfg.dataset, 8).unwrap();
    let images: Vec<ImageTensor> = data.train.into_iter().map(|s| s.image).collect();
    let setup = DigitalSetup::new(&cfg, &images).unwrap();
    let (_, low) = setup.calibrate(&images, 0.01).unwrap();
    let (_, high) = setup.calibrate(&images, 0.3).unwrap();
    println!("achieved {low} .. {high}");
    assert!(low <= 0.01, "lowest ratio {low}");
    assert!((0.29..=0.3).contains(&high), "highest ratio {high}");
}

mod common;

#[test]
fn tscc_sits_at_k_over_l_and_saving_is_reported() {
    use tscc_harness::experiment::{run_ratio_sweep, run_training, BANDWIDTH_FILE, RATIO_CSV};
    use tscc_harness::{read_csv, Method};

    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_config(dir.path());
    cfg.experiment.methods = vec![Method::Tscc, Method::Digital];
    run_training(&cfg).unwrap();
    let outcome = run_ratio_sweep(&cfg).unwrap();

    let k_over_l = (cfg.codec.latent_dim / 2) as f64 / cfg.dataset.dims().len() as f64;
    assert_eq!(outcome.tscc_ratio, Some(k_over_l));
    let records = read_csv(dir.path().join(RATIO_CSV)).unwrap();
    assert_eq!(records, outcome.records);
    let tscc: Vec<_> = records.iter().filter(|r| r.method == Method::Tscc).collect();
    assert_eq!(tscc.len(), 2);
    assert!(tscc.iter().all(|r| r.compression_ratio == k_over_l && r.snr_db == 10.0));
    let digital: Vec<_> = records.iter().filter(|r| r.method == Method::Digital).collect();
    assert_eq!(digital.len(), 3 * 2);
    // higher targets never buy fewer channel uses
    assert!(digital[0].compression_ratio <= digital[2].compression_ratio);
    assert!(digital[2].compression_ratio <= digital[4].compression_ratio);
    let summary = std::fs::read_to_string(dir.path().join(BANDWIDTH_FILE)).unwrap();
    assert!(summary.contains("bandwidth_saving = "), "{summary}");
    if let Some(s) = outcome.bandwidth_saving {
        let rd = outcome.digital_ratio_at_equal_score.unwrap();
        assert!((s - (1.0 - k_over_l / rd)).abs() < 1e-12);
    }
}
