mod common;

use std::process::Command;

use tscc_harness::ber::{run_ber, BER_CSV, BER_HEADER};
use tscc_harness::experiment::{
    checkpoint_path, run_eval, run_snr_sweep, run_training, CodecSet, EVAL_CSV, HISTORY_CSV, RESOLVED_CONFIG, SNR_CSV,
};
use tscc_harness::{read_csv, ExperimentConfig, Method};

#[test]
fn sweep_without_checkpoints_names_the_method() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tiny_config(dir.path());
    let err = run_snr_sweep(&cfg).unwrap_err().to_string();
    assert!(err.contains("method tscc"), "{err}");

    let mut cfg = cfg;
    cfg.experiment.methods = vec![Method::Digital, Method::JsccRec];
    let err = run_snr_sweep(&cfg).unwrap_err().to_string();
    assert!(err.contains("method jscc-rec"), "{err}");
}

#[test]
fn train_then_sweep_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tiny_config(dir.path());
    let reports = run_training(&cfg).unwrap();
    assert_eq!(reports.len(), 2 * 2);
    assert!(dir.path().join(HISTORY_CSV).is_file());

    let records = run_snr_sweep(&cfg).unwrap();
    assert_eq!(records.len(), 3 * 4 * 2);
    let bytes = std::fs::read(dir.path().join(SNR_CSV)).unwrap();
    assert_eq!(read_csv(dir.path().join(SNR_CSV)).unwrap(), records);
    assert!(dir.path().join("plot_snr.py").is_file());
    let resolved =
        ExperimentConfig::from_toml_str(&std::fs::read_to_string(dir.path().join(RESOLVED_CONFIG)).unwrap()).unwrap();
    assert_eq!(resolved, cfg);

    for m in [Method::Tscc, Method::JsccRec] {
        for &snr in &cfg.channel.snr_db {
            let rows: Vec<_> = records.iter().filter(|r| r.method == m && r.snr_db == snr).collect();
            assert_eq!(rows.len(), 2, "{m} {snr}");
            assert!(rows.iter().all(|r| r.psnr.is_finite() && r.failure_rate == 0.0));
        }
    }
    // −10 dB is far below any working point of the short 64-QAM code
    let dig = |snr: f64| {
        records
            .iter()
            .filter(move |r| r.method == Method::Digital && r.snr_db == snr)
    };
    assert!(dig(-10.0).all(|r| r.failure_rate == 1.0));
    assert!(dig(20.0).all(|r| r.failure_rate == 0.0));

    // same config again, and on two worker threads: identical bytes
    run_snr_sweep(&cfg).unwrap();
    assert_eq!(std::fs::read(dir.path().join(SNR_CSV)).unwrap(), bytes);
    let mut two = cfg.clone();
    two.experiment.threads = 2;
    run_snr_sweep(&two).unwrap();
    assert_eq!(std::fs::read(dir.path().join(SNR_CSV)).unwrap(), bytes);

    let eval = run_eval(&cfg, 0.0).unwrap();
    assert_eq!(read_csv(dir.path().join(EVAL_CSV)).unwrap(), eval);
    let at_zero: Vec<_> = records.iter().filter(|r| r.snr_db == 0.0).cloned().collect();
    assert_eq!(eval, at_zero);
}

#[test]
fn truncated_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::tiny_config(dir.path());
    cfg.experiment.methods = vec![Method::Tscc];
    cfg.experiment.seeds = vec![3];
    run_training(&cfg).unwrap();
    let path = checkpoint_path(&cfg.checkpoint_dir(), Method::Tscc, 3);
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
    let err = format!("{:#}", CodecSet::load(&cfg).err().unwrap());
    assert!(err.contains("tscc"), "{err}");
}

#[test]
fn separate_processes_reproduce_the_sweep() {
    let exe = env!("CARGO_BIN_EXE_tscc");
    let dir = tempfile::tempdir().unwrap();
    let cli_out = dir.path().join("cli");
    let cfg = common::tiny_config(&cli_out);
    let cfg_path = dir.path().join("tiny.toml");
    common::write_config(&cfg, &cfg_path);

    for cmd in ["train", "sweep-snr"] {
        let st = Command::new(exe)
            .args([cmd, "--config", cfg_path.to_str().unwrap(), "--threads", "1"])
            .env("RUST_LOG", "warn")
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(st.success(), "{cmd} failed");
    }
    let cli_csv = std::fs::read(cli_out.join(SNR_CSV)).unwrap();

    // this process loads the checkpoints the other one trained
    let mut here = cfg.clone();
    here.experiment.out_dir = dir.path().join("lib");
    here.experiment.checkpoint_dir = Some(cli_out.join("checkpoints"));
    run_snr_sweep(&here).unwrap();
    assert_eq!(std::fs::read(here.experiment.out_dir.join(SNR_CSV)).unwrap(), cli_csv);

    // --seed narrows the run to one replicate
    let st = Command::new(exe)
        .args([
            "eval",
            "--snr",
            "-10",
            "--seed",
            "1",
            "--config",
            cfg_path.to_str().unwrap(),
        ])
        .env("RUST_LOG", "warn")
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(st.success());
    let rows = read_csv(cli_out.join(EVAL_CSV)).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.seed == 1 && r.snr_db == -10.0));
}

#[test]
fn ber_command_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::tiny_config(dir.path());
    let records = run_ber(&cfg).unwrap();
    assert_eq!(records.len(), 4);
    let text = std::fs::read_to_string(dir.path().join(BER_CSV)).unwrap();
    assert!(text.starts_with(BER_HEADER));
    assert_eq!(text.lines().count(), 5);
    let bpsk: Vec<_> = records.iter().filter(|r| r.modulation == "bpsk").collect();
    assert!(bpsk[0].ber >= bpsk[1].ber);
    assert!(records.iter().all(|r| r.bits >= 640));
}
