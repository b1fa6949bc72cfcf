//! Counter-based random streams keyed by `(seed, stream index)`.
//!
//! Output `k` of a stream is a pure function of `(seed, index, k)`, so any
//! partition of agents across threads draws the same numbers.

use rand::RngCore;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline(always)]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key of stream `index` under `seed`.
pub fn stream_key(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed ^ 0x5851_f42d_4c95_7f2d).wrapping_add(index.wrapping_mul(GOLDEN)))
}

/// Word `k` of a stream is `mix64(key + (k + 1) · gamma)`, SplitMix64 with a
/// per-stream odd increment so distinct streams are not shifted copies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterStream {
    key: u64,
    gamma: u64,
    counter: u64,
}

impl CounterStream {
    pub fn new(seed: u64, index: u64) -> Self {
        let key = stream_key(seed, index);
        let gamma = mix64(key ^ GOLDEN) | 1;
        Self { key, gamma, counter: 0 }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Number of 64-bit words drawn so far.
    pub fn position(&self) -> u64 {
        self.counter
    }
}

impl RngCore for CounterStream {
    #[inline(always)]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline(always)]
    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(self.gamma)))
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let v = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&v[..chunk.len()]);
        }
    }
}
