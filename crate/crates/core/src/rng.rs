//! Counter-based SplitMix64 streams.
//!
//! Draw `i` (0-based) of the stream with key `k` is
//! `mix64(k + (i + 1) * 0x9E3779B97F4A7C15)` in wrapping 64-bit arithmetic,
//! where `mix64` is the SplitMix64 finalizer. A child stream with label `j`
//! has key `mix64(k ^ mix64(j + 0xD1B54A32D192ED03))`. Uniform doubles take
//! the top 53 bits: `(x >> 11) * 2^-53`.
//!
//! Every quantity above is plain integer arithmetic, so any implementation
//! that follows these three formulas reproduces the streams bit for bit.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const SPLIT: u64 = 0xD1B5_4A32_D192_ED03;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng {
            key: seed,
            counter: 0,
        }
    }

    /// Independent child stream; does not advance `self`.
    pub fn split(&self, label: u64) -> Self {
        CounterRng {
            key: mix64(self.key ^ mix64(label.wrapping_add(SPLIT))),
            counter: 0,
        }
    }

    /// Random access to draw `index` without touching the counter.
    pub fn at(&self, index: u64) -> u64 {
        mix64(self.key.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let x = self.at(self.counter);
        self.counter = self.counter.wrapping_add(1);
        x
    }

    /// Uniform on [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..bound` (Lemire's multiply-shift, no rejection;
    /// bias is below 2^-40 for the bounds used here).
    pub fn below(&mut self, bound: u64) -> u64 {
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// Standard normal via Box-Muller (consumes two draws).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn draws(&self) -> u64 {
        self.counter
    }
}
