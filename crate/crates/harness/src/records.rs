//! Sweep rows and their CSV form.
//!
//! Column order is fixed by the field order of [`SweepRecord`]:
//! `method,snr_db,compression_ratio,task_score,action_mse,psnr,ms_ssim,failure_rate,seed`.
//! Floats are written in shortest round-trip form, and an infinite PSNR
//! (lossless reconstruction) is written as `inf`.

use std::path::Path;

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};

use crate::method::Method;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub method: Method,
    pub snr_db: f64,
    pub compression_ratio: f64,
    pub task_score: f64,
    pub action_mse: f64,
    pub psnr: f64,
    pub ms_ssim: f64,
    /// Fraction of frames the digital chain could not decode; 0 for neural codecs.
    pub failure_rate: f64,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "method,snr_db,compression_ratio,task_score,action_mse,psnr,ms_ssim,failure_rate,seed";

impl SweepRecord {
    /// Every value finite except PSNR, which may be +∞.
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("snr_db", self.snr_db),
            ("compression_ratio", self.compression_ratio),
            ("task_score", self.task_score),
            ("action_mse", self.action_mse),
            ("ms_ssim", self.ms_ssim),
            ("failure_rate", self.failure_rate),
        ];
        for (name, v) in finite {
            ensure!(v.is_finite(), "{name} is not finite: {v}");
        }
        ensure!(
            !self.psnr.is_nan() && self.psnr != f64::NEG_INFINITY,
            "psnr is {}",
            self.psnr
        );
        ensure!((0.0..=1.0).contains(&self.task_score), "task_score out of range");
        ensure!((0.0..=1.0).contains(&self.failure_rate), "failure_rate out of range");
        Ok(())
    }
}

/// Serializes to CSV bytes; an empty slice gives the header line alone.
pub fn to_csv_bytes<T: Serialize>(records: &[T], header: &str) -> Result<Vec<u8>> {
    if records.is_empty() {
        return Ok(format!("{header}\n").into_bytes());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().context("flushing CSV")
}

pub fn emit_csv(records: &[SweepRecord], path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &to_csv_bytes(records, CSV_HEADER)?)
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn parse_csv(bytes: &[u8]) -> Result<Vec<SweepRecord>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    ensure!(header.join(",") == CSV_HEADER, "unexpected CSV header {header:?}");
    let mut out = Vec::new();
    for row in r.deserialize() {
        let rec: SweepRecord = row?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<SweepRecord>> {
    let path = path.as_ref();
    parse_csv(&std::fs::read(path).with_context(|| format!("reading {}", path.display()))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(method: Method, psnr: f64) -> SweepRecord {
        SweepRecord {
            method,
            snr_db: -10.0,
            compression_ratio: 8.0 / 6144.0,
            task_score: 0.25,
            action_mse: 0.1234567890123,
            psnr,
            ms_ssim: 0.5,
            failure_rate: 0.0,
            seed: 2,
        }
    }

    #[test]
    fn empty_is_header_only() {
        assert_eq!(
            to_csv_bytes::<SweepRecord>(&[], CSV_HEADER).unwrap(),
            format!("{CSV_HEADER}\n").into_bytes()
        );
        assert!(parse_csv(CSV_HEADER.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn infinity_written_as_inf() {
        let bytes = to_csv_bytes(&[rec(Method::Tscc, f64::INFINITY)], CSV_HEADER).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line.split(',').nth(5), Some("inf"));
        assert!(text.starts_with(CSV_HEADER));
    }

    #[test]
    fn roundtrip_recovers_records() {
        let records = vec![
            rec(Method::Tscc, 13.25),
            rec(Method::JsccRec, f64::INFINITY),
            rec(Method::Digital, 7.0),
        ];
        let back = parse_csv(&to_csv_bytes(&records, CSV_HEADER).unwrap()).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn nan_rejected_on_parse() {
        let text = format!("{CSV_HEADER}\ntscc,0,0.1,NaN,0.1,10,0.5,0,0\n");
        assert!(parse_csv(text.as_bytes()).is_err());
    }
}
