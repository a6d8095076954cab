//! Seeded random streams.
//!
//! Every stochastic draw in the crate goes through [`StreamRng`]: a ChaCha8
//! generator keyed by a 64-bit seed with a 64-bit stream selector. ChaCha is
//! counter based, so two streams under one seed never overlap and a job's
//! draws depend only on its `(seed, stream)` pair, never on scheduling.
//!
//! Normal variates use the Marsaglia polar method: draw `u, v` uniform on
//! (−1, 1) as `2·U − 1` from 53-bit uniforms, reject unless
//! `0 < s = u² + v² < 1`, then emit `u·f` followed by the cached `v·f` with
//! `f = sqrt(−2 ln s / s)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct StreamRng {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn bit(&mut self) -> bool {
        self.rng.gen::<bool>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.gen::<u64>()
    }

    /// Standard normal draw.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn gaussian_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.gaussian()).collect()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.rng);
    }
}

/// Deterministically folds a list of keys into one stream id (splitmix64 chain).
pub fn stream_key(parts: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
