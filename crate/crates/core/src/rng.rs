//! Deterministic pseudo-random numbers.
//!
//! All randomness (splits, shuffles, initialization, dropout) comes from
//! splitmix64 so that runs are reproducible bit for bit across platforms.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.next_f64()
    }

    /// Uniform integer in `[0, bound)`.
    ///
    /// Draws are rejected when they fall in the final incomplete block of
    /// `2^64`, so `r % bound` is unbiased.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        // 2^64 mod bound
        let rem = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u64();
            if rem == 0 || r < rem.wrapping_neg() {
                return r % bound;
            }
        }
    }

    /// In-place Fisher–Yates shuffle, walking from the last index down.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Derive an independent stream seed from a base seed and a path of tags,
/// e.g. `(seed, [epoch, batch])`.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut s = base;
    for &tag in tags {
        s = SplitMix64::new(s ^ tag.wrapping_mul(GOLDEN_GAMMA)).next_u64();
    }
    s
}
