//! Regular LDPC codes: construction, systematic encoding, sum-product decoding.
//!
//! H has `n − k_info` rows and column weight 3 (configurable). Columns are
//! placed one at a time on the least-loaded rows; a column is rejected if it
//! shares two rows with any earlier column, so H has no 4-cycles. Gaussian
//! elimination over GF(2) brings H to reduced row-echelon form; the first
//! `k_info` non-pivot columns carry the message verbatim, any further
//! non-pivot columns are fixed to zero, and each pivot column is the parity
//! of its row over the non-pivot positions.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::rng::{stream_key, StreamRng};

/// Channel LLR magnitude cap; BP messages are clamped to the same range.
pub const LLR_CAP: f64 = 50.0;
const MAX_ATTEMPTS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct LdpcCode {
    n: usize,
    k_info: usize,
    column_weight: usize,
    seed: u64,
    /// Rows of H as variable indices.
    check_vars: Vec<Vec<usize>>,
    /// Columns of H as check indices.
    var_checks: Vec<Vec<usize>>,
    /// Codeword positions carrying the message, in message order.
    info_positions: Vec<usize>,
    /// (pivot column, packed RREF row) pairs.
    parity_rows: Vec<(usize, Vec<u64>)>,
}

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

fn try_build(n: usize, m: usize, wc: usize, rng: &mut StreamRng) -> Option<Vec<Vec<usize>>> {
    let cap = (n * wc).div_ceil(m);
    let mut degree = vec![0usize; m];
    let mut pairs: HashSet<(usize, usize)> = HashSet::new();
    let mut cols = Vec::with_capacity(n);
    for _ in 0..n {
        let mut placed = None;
        'attempt: for attempt in 0..200 {
            // widen the load cap if the tight one keeps failing
            let limit = cap + attempt / 50;
            let mut cand: Vec<usize> = (0..m).filter(|&r| degree[r] < limit).collect();
            if cand.len() < wc {
                continue;
            }
            let mut rows = Vec::with_capacity(wc);
            for _ in 0..wc {
                // prefer the least-loaded rows
                let min = cand.iter().map(|&r| degree[r]).min()?;
                let low: Vec<usize> = cand.iter().copied().filter(|&r| degree[r] <= min + 1).collect();
                let r = low[rng.below(low.len())];
                cand.retain(|&c| c != r);
                rows.push(r);
            }
            rows.sort_unstable();
            for i in 0..wc {
                for j in i + 1..wc {
                    if pairs.contains(&(rows[i], rows[j])) {
                        continue 'attempt;
                    }
                }
            }
            placed = Some(rows);
            break;
        }
        let rows = placed?;
        for i in 0..wc {
            degree[rows[i]] += 1;
            for j in i + 1..wc {
                pairs.insert((rows[i], rows[j]));
            }
        }
        cols.push(rows);
    }
    Some(cols)
}

/// Builds a seeded regular code; retries with derived seeds on failure.
pub fn ldpc_build(n: usize, k_info: usize, column_weight: usize, seed: u64) -> Result<LdpcCode> {
    if k_info == 0 || n <= k_info {
        return Err(Error::InvalidArgument(format!(
            "need n > k_info > 0, got ({n}, {k_info})"
        )));
    }
    let m = n - k_info;
    if column_weight < 2 || column_weight > m {
        return Err(Error::InvalidArgument(format!(
            "column weight {column_weight} invalid for {m} checks"
        )));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = StreamRng::new(seed, stream_key(&[0x1D, attempt as u64]));
        let Some(cols) = try_build(n, m, column_weight, &mut rng) else {
            continue;
        };
        let mut check_vars = vec![Vec::new(); m];
        for (v, rows) in cols.iter().enumerate() {
            for &r in rows {
                check_vars[r].push(v);
            }
        }
        if let Some((info_positions, parity_rows)) = systematize(n, k_info, &check_vars) {
            return Ok(LdpcCode {
                n,
                k_info,
                column_weight,
                seed,
                check_vars,
                var_checks: cols,
                info_positions,
                parity_rows,
            });
        }
    }
    Err(Error::LdpcConstruction(MAX_ATTEMPTS))
}

type Systematic = (Vec<usize>, Vec<(usize, Vec<u64>)>);

fn systematize(n: usize, k_info: usize, check_vars: &[Vec<usize>]) -> Option<Systematic> {
    let w = words(n);
    let mut rows: Vec<Vec<u64>> = check_vars
        .iter()
        .map(|vars| {
            let mut r = vec![0u64; w];
            for &v in vars {
                r[v / 64] ^= 1 << (v % 64);
            }
            r
        })
        .collect();
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..n {
        if rank == rows.len() {
            break;
        }
        let (wi, bit) = (col / 64, 1u64 << (col % 64));
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][wi] & bit != 0) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[wi] & bit != 0 {
                for (a, b) in row.iter_mut().zip(&pivot) {
                    *a ^= b;
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    let mut is_pivot = vec![false; n];
    pivots.iter().for_each(|&p| is_pivot[p] = true);
    let free: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
    if free.len() < k_info {
        return None;
    }
    let info = free[..k_info].to_vec();
    let parity = pivots.into_iter().zip(rows).collect();
    Some((info, parity))
}

impl LdpcCode {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_info(&self) -> usize {
        self.k_info
    }

    pub fn rate(&self) -> f64 {
        self.k_info as f64 / self.n as f64
    }

    pub fn column_weight(&self) -> usize {
        self.column_weight
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn checks(&self) -> usize {
        self.check_vars.len()
    }

    /// Variable indices of check `i`.
    pub fn check(&self, i: usize) -> &[usize] {
        &self.check_vars[i]
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    /// Rank of H over GF(2).
    pub fn rank(&self) -> usize {
        self.parity_rows.len()
    }

    /// True when every column pair shares at most one check.
    pub fn is_four_cycle_free(&self) -> bool {
        let mut seen = HashSet::new();
        for rows in &self.var_checks {
            for i in 0..rows.len() {
                for j in i + 1..rows.len() {
                    if !seen.insert((rows[i], rows[j])) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// H·cᵀ over GF(2).
    pub fn syndrome(&self, codeword: &[u8]) -> Vec<u8> {
        self.check_vars
            .iter()
            .map(|vars| vars.iter().fold(0u8, |acc, &v| acc ^ (codeword[v] & 1)))
            .collect()
    }

    pub fn is_codeword(&self, codeword: &[u8]) -> bool {
        codeword.len() == self.n && self.syndrome(codeword).iter().all(|&s| s == 0)
    }
}

/// Systematic encoding of `k_info` message bits (0/1) into `n` bits.
pub fn ldpc_encode(code: &LdpcCode, message: &[u8]) -> Result<Vec<u8>> {
    if message.len() != code.k_info {
        return Err(Error::DimensionMismatch {
            expected: code.k_info,
            actual: message.len(),
        });
    }
    let mut packed = vec![0u64; words(code.n)];
    for (&pos, &b) in code.info_positions.iter().zip(message) {
        if b & 1 == 1 {
            packed[pos / 64] |= 1 << (pos % 64);
        }
    }
    let mut parity = Vec::with_capacity(code.parity_rows.len());
    for (pivot, row) in &code.parity_rows {
        let ones: u32 = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
        parity.push((*pivot, (ones & 1) as u8));
    }
    let mut c = vec![0u8; code.n];
    for (&pos, &b) in code.info_positions.iter().zip(message) {
        c[pos] = b & 1;
    }
    for (pivot, b) in parity {
        c[pivot] = b;
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpOutcome {
    pub message: Vec<u8>,
    pub converged: bool,
    pub iterations: usize,
}

/// Flooding sum-product decoding. Positive LLR means bit 0.
pub fn ldpc_decode_bp(code: &LdpcCode, llrs: &[f64], max_iters: usize) -> Result<BpOutcome> {
    if llrs.len() != code.n {
        return Err(Error::DimensionMismatch {
            expected: code.n,
            actual: llrs.len(),
        });
    }
    let ch: Vec<f64> = llrs
        .iter()
        .map(|&l| if l.is_nan() { 0.0 } else { l.clamp(-LLR_CAP, LLR_CAP) })
        .collect();
    // edges laid out check-major
    let mut offsets = Vec::with_capacity(code.checks() + 1);
    offsets.push(0);
    for vars in &code.check_vars {
        offsets.push(offsets.last().unwrap() + vars.len());
    }
    let edge_var: Vec<usize> = code.check_vars.iter().flatten().copied().collect();
    let mut c2v = vec![0.0; edge_var.len()];
    let mut v2c: Vec<f64> = edge_var.iter().map(|&v| ch[v]).collect();
    let mut total = ch.clone();
    let mut hard: Vec<u8> = total.iter().map(|&t| (t < 0.0) as u8).collect();
    let mut iterations = 0;
    let mut converged = code.is_codeword(&hard);
    let mut prefix = Vec::new();
    while !converged && iterations < max_iters {
        iterations += 1;
        for c in 0..code.checks() {
            let (s, e) = (offsets[c], offsets[c + 1]);
            let t: Vec<f64> = v2c[s..e].iter().map(|&m| (0.5 * m).tanh()).collect();
            prefix.clear();
            let mut acc = 1.0;
            for &x in &t {
                prefix.push(acc);
                acc *= x;
            }
            let mut suffix = 1.0;
            for i in (0..t.len()).rev() {
                let p = (prefix[i] * suffix).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                c2v[s + i] = (2.0 * p.atanh()).clamp(-LLR_CAP, LLR_CAP);
                suffix *= t[i];
            }
        }
        total.copy_from_slice(&ch);
        for (ei, &v) in edge_var.iter().enumerate() {
            total[v] += c2v[ei];
        }
        for (ei, &v) in edge_var.iter().enumerate() {
            v2c[ei] = (total[v] - c2v[ei]).clamp(-LLR_CAP, LLR_CAP);
        }
        for (h, &t) in hard.iter_mut().zip(&total) {
            *h = (t < 0.0) as u8;
        }
        converged = code.is_codeword(&hard);
    }
    Ok(BpOutcome {
        message: code.info_positions.iter().map(|&p| hard[p]).collect(),
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> LdpcCode {
        ldpc_build(384, 128, 3, 1).unwrap()
    }

    fn random_msg(k: usize, rng: &mut StreamRng) -> Vec<u8> {
        (0..k).map(|_| rng.bit() as u8).collect()
    }

    #[test]
    fn structure() {
        let c = small();
        assert_eq!(c.rate(), 1.0 / 3.0);
        assert!(c.is_four_cycle_free());
        assert!(c.var_checks.iter().all(|r| r.len() == 3));
        assert!(c.rank() <= c.checks());
        assert_eq!(c, ldpc_build(384, 128, 3, 1).unwrap());
        assert_ne!(c.check_vars, ldpc_build(384, 128, 3, 2).unwrap().check_vars);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(ldpc_build(100, 100, 3, 0).is_err());
        assert!(ldpc_build(100, 0, 3, 0).is_err());
    }

    #[test]
    fn encode_properties() {
        let c = small();
        assert_eq!(ldpc_encode(&c, &[0; 128]).unwrap(), vec![0; 384]);
        let mut rng = StreamRng::new(3, 0);
        for _ in 0..200 {
            let u1 = random_msg(128, &mut rng);
            let u2 = random_msg(128, &mut rng);
            let c1 = ldpc_encode(&c, &u1).unwrap();
            let c2 = ldpc_encode(&c, &u2).unwrap();
            assert!(c.is_codeword(&c1));
            let u12: Vec<u8> = u1.iter().zip(&u2).map(|(a, b)| a ^ b).collect();
            let c12: Vec<u8> = c1.iter().zip(&c2).map(|(a, b)| a ^ b).collect();
            assert_eq!(ldpc_encode(&c, &u12).unwrap(), c12);
            let sys: Vec<u8> = c.info_positions().iter().map(|&p| c1[p]).collect();
            assert_eq!(sys, u1);
        }
        assert!(ldpc_encode(&c, &[0; 5]).is_err());
    }

    #[test]
    fn noiseless_decode() {
        let c = small();
        let mut rng = StreamRng::new(4, 0);
        let u = random_msg(128, &mut rng);
        let cw = ldpc_encode(&c, &u).unwrap();
        let llr: Vec<f64> = cw.iter().map(|&b| if b == 0 { 20.0 } else { -20.0 }).collect();
        let out = ldpc_decode_bp(&c, &llr, 50).unwrap();
        assert_eq!(out.message, u);
        assert!(out.converged && out.iterations <= 2);
    }

    #[test]
    fn single_error_corrected() {
        let c = small();
        let mut rng = StreamRng::new(5, 0);
        for trial in 0..20 {
            let u = random_msg(128, &mut rng);
            let cw = ldpc_encode(&c, &u).unwrap();
            let flip = rng.below(384);
            let llr: Vec<f64> = cw
                .iter()
                .enumerate()
                .map(|(i, &b)| {
                    let s = if b == 0 { 1.0 } else { -1.0 };
                    if i == flip {
                        -2.0 * s
                    } else {
                        8.0 * s
                    }
                })
                .collect();
            let out = ldpc_decode_bp(&c, &llr, 50).unwrap();
            assert!(out.converged, "trial {trial}");
            assert_eq!(out.message, u);
        }
    }

    #[test]
    fn erasures_recovered_and_garbage_flagged() {
        let c = small();
        let mut rng = StreamRng::new(6, 0);
        let u = random_msg(128, &mut rng);
        let cw = ldpc_encode(&c, &u).unwrap();
        let llr: Vec<f64> = cw
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                if i % 10 == 0 {
                    0.0
                } else if b == 0 {
                    5.0
                } else {
                    -5.0
                }
            })
            .collect();
        let out = ldpc_decode_bp(&c, &llr, 50).unwrap();
        assert!(out.converged);
        assert_eq!(out.message, u);

        let noise: Vec<f64> = (0..384).map(|_| rng.gaussian()).collect();
        let out = ldpc_decode_bp(&c, &noise, 20).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 20);
    }
}
