//! Versioned random stream for split protocols.
//!
//! Version 1, reproducible from this description alone:
//!
//! * generator: ChaCha with 8 rounds, 256-bit key = the 64-bit seed in
//!   little-endian order followed by 24 zero bytes, stream 0, counter 0;
//!   each 64-bit draw joins two consecutive 32-bit output words, low word
//!   first;
//! * bounded draw in `[0, n)`: Lemire's multiply-and-reject, i.e. take the
//!   high 64 bits of `x * n` and redraw while the low 64 bits are below
//!   `(2^64 - n) mod n`;
//! * shuffle: Fisher-Yates from the last position down, swapping position
//!   `i` with a bounded draw in `[0, i]`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RNG_VERSION: u32 = 1;

pub struct SplitRng(ChaCha8Rng);

impl SplitRng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        SplitRng(ChaCha8Rng::from_seed(key))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `[0, n)`; `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "empty range");
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(n);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
