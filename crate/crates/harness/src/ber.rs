//! Coded BER curves of the digital baseline.

use anyhow::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tscc_core::baseline::{ber_point, ldpc_build, LdpcCode, Modulation, QamConstellation};

use crate::config::{ExperimentConfig, ModulationName};
use crate::experiment::{thread_pool, write_resolved_config};
use crate::plot;
use crate::records::{to_csv_bytes, write_bytes};

pub const BER_CSV: &str = "ber.csv";
pub const BER_HEADER: &str = "modulation,x_db,bits,errors,ber,blocks,failed_blocks";
/// The BER that marks a digital link as working.
pub const BER_TARGET: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub modulation: String,
    pub x_db: f64,
    pub bits: usize,
    pub errors: usize,
    pub ber: f64,
    pub blocks: usize,
    pub failed_blocks: usize,
}

pub fn modulation(name: ModulationName) -> Modulation {
    match name {
        ModulationName::Bpsk => Modulation::Bpsk,
        ModulationName::Qpsk => Modulation::Qam(QamConstellation::qpsk()),
        ModulationName::Qam16 => Modulation::Qam(QamConstellation::qam16()),
        ModulationName::Qam64 => Modulation::Qam(QamConstellation::qam64()),
    }
}

pub fn build_code(cfg: &ExperimentConfig) -> Result<LdpcCode> {
    let g = &cfg.digital;
    Ok(ldpc_build(g.ldpc_n, g.ldpc_k, g.column_weight, g.ldpc_seed)?)
}

/// One record per (modulation, x) in config order.
pub fn ber_records(cfg: &ExperimentConfig, code: &LdpcCode) -> Result<Vec<BerRecord>> {
    let b = &cfg.ber;
    let jobs: Vec<(ModulationName, f64)> = b
        .modulations
        .iter()
        .flat_map(|&m| b.x_db.iter().map(move |&x| (m, x)))
        .collect();
    let pool = thread_pool(cfg.experiment.threads)?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(m, x)| {
                let p = ber_point(code, &modulation(m), x, b.min_bits, cfg.digital.max_iters, b.seed)?;
                log::info!("{} at {x} dB: {} errors in {} bits", m.as_str(), p.errors, p.bits);
                Ok(BerRecord {
                    modulation: m.as_str().to_string(),
                    x_db: x,
                    bits: p.bits,
                    errors: p.errors,
                    ber: p.ber(),
                    blocks: p.blocks,
                    failed_blocks: p.failed_blocks,
                })
            })
            .collect()
    })
}

/// Lowest x of an ascending curve from which the BER stays below `target`.
pub fn ber_threshold(curve: &[(f64, f64)], target: f64) -> Option<f64> {
    let last_bad = curve.iter().rposition(|&(_, ber)| ber >= target);
    match last_bad {
        None => curve.first().map(|p| p.0),
        Some(i) => curve.get(i + 1).map(|p| p.0),
    }
}

pub fn run_ber(cfg: &ExperimentConfig) -> Result<Vec<BerRecord>> {
    let code = build_code(cfg)?;
    let records = ber_records(cfg, &code)?;
    let out = &cfg.experiment.out_dir;
    write_bytes(&out.join(BER_CSV), &to_csv_bytes(&records, BER_HEADER)?)?;
    write_bytes(&out.join("plot_ber.py"), plot::ber_script(BER_CSV).as_bytes())?;
    write_resolved_config(cfg)?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_is_first_point_of_the_good_tail() {
        let c = [(7.0, 0.1), (8.0, 1e-3), (9.0, 5e-5), (10.0, 0.0)];
        assert_eq!(ber_threshold(&c, 1e-4), Some(9.0));
        // a noisy dip below target does not count if the curve comes back up
        let c = [(7.0, 0.1), (8.0, 0.0), (9.0, 2e-4), (10.0, 0.0)];
        assert_eq!(ber_threshold(&c, 1e-4), Some(10.0));
        assert_eq!(ber_threshold(&[(1.0, 0.5)], 1e-4), None);
        assert_eq!(ber_threshold(&[(1.0, 0.0)], 1e-4), Some(1.0));
    }
}
