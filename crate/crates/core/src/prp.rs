//! Keyed pseudorandom permutation on `[0, u)`.
//!
//! A balanced 4-round Feistel network on `2h`-bit words, where `2^{2h}` is
//! the smallest even power of two covering the domain, with the keyed PRF
//! from [`crate::hash::prf64`] as round function. Outputs that land outside
//! the domain are re-encrypted (cycle walking) until they fall inside, which
//! restricts the permutation of `[0, 2^{2h})` to a permutation of `[0, u)`.

use crate::error::{invalid, Result};
use crate::hash::{prf64, HashKey};

const ROUNDS: u32 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeistelPrp {
    key: HashKey,
    domain: u64,
    half_bits: u32,
    mask: u64,
}

impl FeistelPrp {
    pub fn new(key: HashKey, domain: u64) -> Result<Self> {
        if domain == 0 {
            return Err(invalid("permutation domain must be non-empty"));
        }
        let bits = 64 - (domain - 1).leading_zeros();
        let half_bits = bits.div_ceil(2).max(1);
        Ok(Self {
            key,
            domain,
            half_bits,
            mask: if half_bits == 32 {
                u32::MAX as u64
            } else {
                (1u64 << half_bits) - 1
            },
        })
    }

    pub fn key(&self) -> &HashKey {
        &self.key
    }

    pub fn domain(&self) -> u64 {
        self.domain
    }

    fn round(&self, round: u32, half: u64) -> u64 {
        prf64(&self.key, round, half) & self.mask
    }

    fn encrypt_block(&self, x: u64) -> u64 {
        let mut left = x >> self.half_bits;
        let mut right = x & self.mask;
        for r in 0..ROUNDS {
            let next = left ^ self.round(r, right);
            left = right;
            right = next;
        }
        (left << self.half_bits) | right
    }

    fn decrypt_block(&self, y: u64) -> u64 {
        let mut left = y >> self.half_bits;
        let mut right = y & self.mask;
        for r in (0..ROUNDS).rev() {
            let prev = right ^ self.round(r, left);
            right = left;
            left = prev;
        }
        (left << self.half_bits) | right
    }

    /// # Panics
    ///
    /// Panics if `x` is outside the domain.
    pub fn permute(&self, x: u64) -> u64 {
        assert!(x < self.domain, "{x} outside permutation domain {}", self.domain);
        let mut y = self.encrypt_block(x);
        while y >= self.domain {
            y = self.encrypt_block(y);
        }
        y
    }

    /// # Panics
    ///
    /// Panics if `y` is outside the domain.
    pub fn invert(&self, y: u64) -> u64 {
        assert!(y < self.domain, "{y} outside permutation domain {}", self.domain);
        let mut x = self.decrypt_block(y);
        while x >= self.domain {
            x = self.decrypt_block(x);
        }
        x
    }
}
