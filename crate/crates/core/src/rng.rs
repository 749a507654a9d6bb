//! Seeded random streams.
//!
//! Every augmented sentence draws from its own ChaCha stream keyed by
//! `(master seed, batch index, position in batch)`. Streams never overlap, so
//! the output of a batch does not depend on how sentences are scheduled
//! across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct StreamRng(ChaCha8Rng);

impl StreamRng {
    /// Stream for sentence `position` of batch `batch_index`.
    pub fn for_sentence(seed: u64, batch_index: u64, position: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&batch_index.to_le_bytes());
        key[16..24].copy_from_slice(&position.to_le_bytes());
        key[24..].copy_from_slice(b"una-sent");
        StreamRng(ChaCha8Rng::from_seed(key))
    }

    /// Stream owned by a vocabulary term, used for fixed per-term vectors.
    pub fn for_term(seed: u64, term: &str) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&fnv1a(term.as_bytes()).to_le_bytes());
        key[16..24].copy_from_slice(&(term.len() as u64).to_le_bytes());
        key[24..].copy_from_slice(b"una-term");
        StreamRng(ChaCha8Rng::from_seed(key))
    }

    /// Stream for an arbitrary labelled purpose (encoders, demos, tests).
    pub fn labelled(seed: u64, label: &[u8]) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        for (slot, byte) in key[8..].iter_mut().zip(label) {
            *slot = *byte;
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        // labels longer than the key fall back to the stream selector
        if label.len() > 24 {
            rng.set_stream(fnv1a(label));
        }
        StreamRng(rng)
    }
}

impl RngCore for StreamRng {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.0.try_fill_bytes(dest)
    }
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `DefaultHasher`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
