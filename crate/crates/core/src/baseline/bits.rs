//! MSB-first packed bit containers and Exp-Golomb codes.

use crate::error::{Error, Result};

/// A packed sequence of bits; bit 0 is the MSB of byte 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bitstream {
    bytes: Vec<u8>,
    len: usize,
}

impl Bitstream {
    pub fn new() -> Self {
        Self::default()
    }

    /// From a slice of 0/1 values.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut s = Self::new();
        for &b in bits {
            s.push(b != 0);
        }
        s
    }

    /// The first `len` bits of `bytes`.
    pub fn from_bytes(mut bytes: Vec<u8>, len: usize) -> Result<Self> {
        if len > bytes.len() * 8 {
            return Err(Error::InvalidArgument(format!(
                "{len} bits requested from {} bytes",
                bytes.len()
            )));
        }
        bytes.truncate(len.div_ceil(8));
        if !len.is_multiple_of(8) {
            let last = bytes.len() - 1;
            bytes[last] &= 0xFFu8 << (8 - len % 8);
        }
        Ok(Self { bytes, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Backing bytes; bits past `len` in the last byte are zero.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            let last = self.bytes.len() - 1;
            self.bytes[last] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    /// Appends the low `n` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, n: u32) {
        for i in (0..n).rev() {
            self.push((value >> i) & 1 == 1);
        }
    }

    pub fn push_bytes(&mut self, bytes: &[u8]) {
        if self.len.is_multiple_of(8) {
            self.bytes.extend_from_slice(bytes);
            self.len += bytes.len() * 8;
        } else {
            for &b in bytes {
                self.push_bits(b as u64, 8);
            }
        }
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.bytes[i / 8] & (0x80 >> (i % 8)) != 0
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 0x80 >> (i % 8);
        if bit {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    /// Unpacked 0/1 values.
    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }

    pub fn concat(&self, other: &Bitstream) -> Bitstream {
        let mut out = self.clone();
        out.append(other);
        out
    }

    pub fn append(&mut self, other: &Bitstream) {
        if self.len.is_multiple_of(8) {
            self.bytes.extend_from_slice(&other.bytes);
            self.len += other.len;
        } else {
            for i in 0..other.len {
                self.push(other.get(i));
            }
        }
    }

    /// (first `n` bits, the rest).
    pub fn split_at(&self, n: usize) -> Result<(Bitstream, Bitstream)> {
        if n > self.len {
            return Err(Error::InvalidArgument(format!(
                "split at {n} beyond length {}",
                self.len
            )));
        }
        let head = Bitstream::from_bytes(self.bytes[..n.div_ceil(8)].to_vec(), n)?;
        let mut tail = Bitstream::new();
        for i in n..self.len {
            tail.push(self.get(i));
        }
        Ok((head, tail))
    }

    /// Pads with zero bits up to a multiple of `m`; returns the pad count.
    pub fn pad_to_multiple(&mut self, m: usize) -> usize {
        let pad = (m - self.len % m) % m;
        for _ in 0..pad {
            self.push(false);
        }
        pad
    }

    pub fn write_ue(&mut self, v: u32) {
        let x = v as u64 + 1;
        let n = 64 - x.leading_zeros();
        self.push_bits(0, n - 1);
        self.push_bits(x, n);
    }

    /// Signed Exp-Golomb: 0, 1, −1, 2, −2, ... map to 0, 1, 2, 3, 4, ...
    pub fn write_se(&mut self, v: i32) {
        let u = if v > 0 { 2 * v as u32 - 1 } else { 2 * v.unsigned_abs() };
        self.write_ue(u);
    }
}

/// Sequential reader; every read past the end is a decode failure.
pub struct BitReader<'a> {
    stream: &'a Bitstream,
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(stream: &'a Bitstream) -> Self {
        Self { stream, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.stream.len() - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        if self.pos >= self.stream.len() {
            return Err(Error::DecodeFailure("unexpected end of bitstream".into()));
        }
        let b = self.stream.get(self.pos);
        self.pos += 1;
        Ok(b)
    }

    pub fn read_bits(&mut self, n: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_ue(&mut self) -> Result<u32> {
        let mut zeros = 0u32;
        while !self.read_bit()? {
            zeros += 1;
            if zeros > 31 {
                return Err(Error::DecodeFailure("Exp-Golomb prefix too long".into()));
            }
        }
        let rest = self.read_bits(zeros)?;
        let x = (1u64 << zeros) | rest;
        u32::try_from(x - 1).map_err(|_| Error::DecodeFailure("Exp-Golomb value overflow".into()))
    }

    pub fn read_se(&mut self) -> Result<i32> {
        let u = self.read_ue()?;
        let mag = u.div_ceil(2) as i64;
        let v = if u % 2 == 1 { mag } else { -mag };
        i32::try_from(v).map_err(|_| Error::DecodeFailure("signed Exp-Golomb overflow".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    #[test]
    fn push_and_get() {
        let mut s = Bitstream::new();
        s.push_bits(0b1011, 4);
        s.push(true);
        assert_eq!(s.len(), 5);
        assert_eq!(s.to_bits(), vec![1, 0, 1, 1, 1]);
        assert_eq!(s.as_bytes(), &[0b1011_1000]);
    }

    #[test]
    fn concat_split_accounting() {
        let mut rng = StreamRng::new(4, 0);
        for _ in 0..200 {
            let a: Vec<u8> = (0..rng.below(40)).map(|_| rng.bit() as u8).collect();
            let b: Vec<u8> = (0..rng.below(40)).map(|_| rng.bit() as u8).collect();
            let (sa, sb) = (Bitstream::from_bits(&a), Bitstream::from_bits(&b));
            let c = sa.concat(&sb);
            assert_eq!(c.len(), a.len() + b.len());
            let (h, t) = c.split_at(a.len()).unwrap();
            assert_eq!(h, sa);
            assert_eq!(t, sb);
        }
    }

    #[test]
    fn exp_golomb_roundtrip() {
        let mut s = Bitstream::new();
        let us = [0u32, 1, 2, 3, 7, 8, 255, 65_535, u32::MAX - 1];
        let ss = [0i32, 1, -1, 2, -2, 1000, -1000, i32::MAX, -i32::MAX];
        for &u in &us {
            s.write_ue(u);
        }
        for &v in &ss {
            s.write_se(v);
        }
        let mut r = BitReader::new(&s);
        for &u in &us {
            assert_eq!(r.read_ue().unwrap(), u);
        }
        for &v in &ss {
            assert_eq!(r.read_se().unwrap(), v);
        }
        assert_eq!(r.remaining(), 0);
        assert!(r.read_bit().is_err());
    }

    #[test]
    fn ue_code_lengths() {
        let mut s = Bitstream::new();
        s.write_ue(0);
        assert_eq!(s.to_bits(), vec![1]);
        let mut s = Bitstream::new();
        s.write_ue(3);
        assert_eq!(s.to_bits(), vec![0, 0, 1, 0, 0]);
    }

    #[test]
    fn from_bytes_masks_tail() {
        let s = Bitstream::from_bytes(vec![0xFF, 0xFF], 10).unwrap();
        assert_eq!(s.as_bytes(), &[0xFF, 0xC0]);
        assert!(Bitstream::from_bytes(vec![0], 9).is_err());
    }
}
