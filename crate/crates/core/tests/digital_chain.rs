use std::sync::OnceLock;

use tscc_core::baseline::{
    calibrate_quality, chain_budget, ldpc_build, run_digital_chain, CodecQuality, DigitalChain, LdpcCode,
    QamConstellation, FAILURE_GRAY,
};
use tscc_core::metrics::psnr;
use tscc_core::scene::{generate_dataset, SceneSpec};
use tscc_core::{ChannelConfig, ImageDims, ImageTensor};

fn code() -> &'static LdpcCode {
    static CODE: OnceLock<LdpcCode> = OnceLock::new();
    CODE.get_or_init(|| ldpc_build(1536, 512, 3, 0).unwrap())
}

fn scenes(n: usize) -> Vec<ImageTensor> {
    generate_dataset(&SceneSpec::new(ImageDims::new(3, 32, 64), 3), n)
        .unwrap()
        .into_iter()
        .map(|s| s.image)
        .collect()
}

#[test]
fn clean_at_high_snr_gray_at_low_snr() {
    let qam = QamConstellation::qam64();
    let chain = DigitalChain::new(CodecQuality::new(2.0).unwrap(), code(), &qam);
    let x = &scenes(1)[0];
    let good = run_digital_chain(x, &chain, &ChannelConfig::awgn(20.0, 1)).unwrap();
    assert!(!good.failed);
    assert!(psnr(x, &good.image).unwrap() > 25.0);

    let bad = run_digital_chain(x, &chain, &ChannelConfig::awgn(-5.0, 1)).unwrap();
    assert!(bad.failed);
    assert!(bad.image.data().iter().all(|&v| v == FAILURE_GRAY));
    assert_eq!(bad.channel_uses, good.channel_uses);
}

#[test]
fn channel_uses_are_coded_bits_over_six() {
    let qam = QamConstellation::qam64();
    let chain = DigitalChain::new(CodecQuality::new(4.0).unwrap(), code(), &qam);
    for x in scenes(5) {
        let b = chain_budget(&x, &chain).unwrap();
        assert_eq!(b.coded_bits, b.blocks * 1536);
        assert_eq!(b.channel_uses, b.coded_bits.div_ceil(6));
        assert!((b.ratio - b.channel_uses as f64 / x.len() as f64).abs() < 1e-15);
    }
}

#[test]
fn success_rate_transitions_around_threshold() {
    // coded 64-QAM crosses BER 1e-4 near 9.5 dB for this code
    let threshold = 9.5;
    let qam = QamConstellation::qam64();
    let chain = DigitalChain::new(CodecQuality::new(6.0).unwrap(), code(), &qam);
    let images = scenes(40);
    let rate = |snr: f64| {
        let ok = images
            .iter()
            .enumerate()
            .filter(|(i, x)| {
                !run_digital_chain(x, &chain, &ChannelConfig::awgn(snr, 11).with_stream(*i as u64))
                    .unwrap()
                    .failed
            })
            .count();
        ok as f64 / images.len() as f64
    };
    assert!(rate(threshold - 3.0) < 0.05);
    assert!(rate(threshold + 3.0) > 0.95);
}

#[test]
fn calibration_hits_target_ratios() {
    let qam = QamConstellation::qam64();
    let chain = DigitalChain::new(CodecQuality::new(1.0).unwrap(), code(), &qam);
    let images = scenes(8);
    let mut last = 0.0;
    for target in [0.05, 0.1, 0.2, 0.3] {
        let (q, ratio) = calibrate_quality(&images, &chain, target).unwrap();
        assert!(ratio <= target + 1e-12, "q {q:?} ratio {ratio}");
        assert!(ratio > last);
        last = ratio;
    }
}

#[test]
fn rayleigh_chain_runs() {
    let qam = QamConstellation::qam64();
    let chain = DigitalChain::new(CodecQuality::new(4.0).unwrap(), code(), &qam);
    let x = &scenes(1)[0];
    let out = run_digital_chain(x, &chain, &ChannelConfig::rayleigh(40.0, 2)).unwrap();
    assert!(!out.failed);
    let again = run_digital_chain(x, &chain, &ChannelConfig::rayleigh(40.0, 2)).unwrap();
    assert_eq!(out.image, again.image);
}
