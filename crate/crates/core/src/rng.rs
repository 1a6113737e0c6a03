//! Counter-based random streams.
//!
//! A [`Stream`] is a pair `(key, counter)`: the n-th output is a pure function
//! of the key and n. That makes the full generator state two integers, which
//! snapshots can store verbatim, and makes derived child streams independent
//! of scheduling order.

use rand::RngCore;
use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_name(name: &str) -> u64 {
    // FNV-1a, then mixed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream {
            key: mix64(seed ^ GOLDEN_GAMMA),
            counter: 0,
        }
    }

    /// Stream keyed by `(master_seed, name)`.
    pub fn named(master_seed: u64, name: &str) -> Self {
        Stream {
            key: mix64(mix64(master_seed) ^ hash_name(name)),
            counter: 0,
        }
    }

    /// Independent child stream for slot `index`; does not advance `self`.
    pub fn child(&self, index: u64) -> Self {
        Stream {
            key: mix64(self.key ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))),
            counter: 0,
        }
    }

    pub fn from_parts(key: u64, counter: u64) -> Self {
        Stream { key, counter }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Number of 64-bit words drawn so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }
}

impl RngCore for Stream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        let c = self.counter;
        self.counter = c.wrapping_add(1);
        mix64(self.key.wrapping_add(mix64(c.wrapping_mul(GOLDEN_GAMMA))))
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}
