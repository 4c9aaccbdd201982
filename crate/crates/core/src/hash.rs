//! Index derivation: `k` positions in `[0, m)` per element.
//!
//! Three modes share one interface:
//!
//! - **public**: SipHash-2-4 under a fixed, published key. Anyone can
//!   recompute the indices of any element.
//! - **keyed-prf**: SipHash-2-4 under a secret 128-bit key. Index `i` of `x`
//!   is `SipHash_key(i ‖ x) mod m`. The modulo bias is below `m / 2^64`,
//!   i.e. under `2^-50` for every `m` this crate is used with.
//! - **true-random**: each element's indices are drawn uniformly on first
//!   use and memoized. This is a literal random function, realized lazily.
//!
//! The true-random memo sits behind a mutex so queries can take `&self`. The
//! draw order (and thus the exact indices) follows the order of first use,
//! so a single writer must drive a filter whenever bit-exact replay matters.

use std::collections::HashMap;
use std::hash::Hasher;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use siphasher::sip::SipHasher24;

/// The key used by public-mode hashing. Published on purpose.
pub const PUBLIC_KEY: HashKey = HashKey(*b"advbloom-public!");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HashMode {
    Public,
    KeyedPrf,
    TrueRandom,
}

impl HashMode {
    pub fn tag(self) -> u8 {
        match self {
            HashMode::Public => 0,
            HashMode::KeyedPrf => 1,
            HashMode::TrueRandom => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(HashMode::Public),
            1 => Some(HashMode::KeyedPrf),
            2 => Some(HashMode::TrueRandom),
            _ => None,
        }
    }
}

/// 128-bit key material.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HashKey(pub [u8; 16]);

impl HashKey {
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut key = [0u8; 16];
        rng.fill(&mut key);
        HashKey(key)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl std::fmt::Debug for HashKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "HashKey(")?;
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

/// SipHash-2-4 of `(tag, x)` under `key`: the keyed PRF used for both
/// filter indices and Feistel round functions.
pub fn prf64(key: &HashKey, tag: u32, x: u64) -> u64 {
    let mut h = SipHasher24::new_with_key(&key.0);
    h.write_u32(tag);
    h.write_u64(x);
    h.finish()
}

struct RandomTable {
    rng: ChaCha8Rng,
    shape: Option<(usize, usize)>,
    memo: HashMap<u64, Vec<usize>>,
}

impl Clone for RandomTable {
    fn clone(&self) -> Self {
        Self {
            rng: self.rng.clone(),
            shape: self.shape,
            memo: self.memo.clone(),
        }
    }
}

pub struct HashFamily {
    mode: HashMode,
    key: HashKey,
    table: Option<Mutex<RandomTable>>,
}

impl HashFamily {
    pub fn public() -> Self {
        Self {
            mode: HashMode::Public,
            key: PUBLIC_KEY,
            table: None,
        }
    }

    pub fn keyed(key: HashKey) -> Self {
        Self {
            mode: HashMode::KeyedPrf,
            key,
            table: None,
        }
    }

    /// A truly random function whose lazy draws come from a ChaCha8 stream
    /// keyed by `seed`.
    pub fn true_random(seed: u64) -> Self {
        let key = HashKey::from_seed(seed);
        Self {
            mode: HashMode::TrueRandom,
            key,
            table: Some(Mutex::new(RandomTable {
                rng: ChaCha8Rng::from_seed(expand_key(&key)),
                shape: None,
                memo: HashMap::new(),
            })),
        }
    }

    /// Fresh family of the given mode with key material derived from `seed`.
    /// Public mode ignores the seed.
    pub fn from_seed(mode: HashMode, seed: u64) -> Self {
        match mode {
            HashMode::Public => Self::public(),
            HashMode::KeyedPrf => Self::keyed(HashKey::from_seed(seed)),
            HashMode::TrueRandom => Self::true_random(seed),
        }
    }

    pub fn mode(&self) -> HashMode {
        self.mode
    }

    pub fn key(&self) -> &HashKey {
        &self.key
    }

    /// Number of elements whose random indices have been drawn so far
    /// (always 0 outside true-random mode).
    pub fn memoized(&self) -> usize {
        self.table
            .as_ref()
            .map_or(0, |t| t.lock().expect("hash table poisoned").memo.len())
    }

    /// Returns exactly `k` indices in `[0, m)` for `x`. Repeated calls with the
    /// same `x` return the same list.
    ///
    /// # Panics
    ///
    /// In true-random mode, panics if called with a different `(m, k)` than
    /// the first call.
    pub fn derive_indices(&self, x: u64, m: usize, k: usize) -> Vec<usize> {
        match &self.table {
            None => (0..k as u32)
                .map(|i| (prf64(&self.key, i, x) % m as u64) as usize)
                .collect(),
            Some(table) => {
                let mut table = table.lock().expect("hash table poisoned");
                let shape = *table.shape.get_or_insert((m, k));
                assert_eq!(shape, (m, k), "true-random family reused with a different shape");
                if let Some(hit) = table.memo.get(&x) {
                    return hit.clone();
                }
                let drawn: Vec<usize> = (0..k).map(|_| table.rng.gen_range(0..m)).collect();
                table.memo.insert(x, drawn.clone());
                drawn
            }
        }
    }
}

fn expand_key(key: &HashKey) -> [u8; 32] {
    let mut seed = [0u8; 32];
    seed[..16].copy_from_slice(&key.0);
    seed[16..].copy_from_slice(&key.0);
    seed
}

impl Clone for HashFamily {
    fn clone(&self) -> Self {
        Self {
            mode: self.mode,
            key: self.key,
            table: self
                .table
                .as_ref()
                .map(|t| Mutex::new(t.lock().expect("hash table poisoned").clone())),
        }
    }
}

impl std::fmt::Debug for HashFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HashFamily")
            .field("mode", &self.mode)
            .field("memoized", &self.memoized())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_element() {
        for family in [
            HashFamily::public(),
            HashFamily::keyed(HashKey::from_seed(1)),
            HashFamily::true_random(1),
        ] {
            let a = family.derive_indices(5, 64, 3);
            let b = family.derive_indices(5, 64, 3);
            assert_eq!(a, b);
            assert_eq!(a.len(), 3);
        }
    }

    #[test]
    fn true_random_indices_in_range() {
        let family = HashFamily::true_random(9);
        let idx = family.derive_indices(0, 8, 2);
        assert_eq!(idx.len(), 2);
        assert!(idx.iter().all(|&i| i < 8));
        assert_eq!(family.memoized(), 1);
    }

    #[test]
    fn keys_change_indices() {
        let a = HashFamily::keyed(HashKey::from_seed(1));
        let b = HashFamily::keyed(HashKey::from_seed(2));
        let differs = (0..100).any(|x| a.derive_indices(x, 1024, 4) != b.derive_indices(x, 1024, 4));
        assert!(differs);
    }

    #[test]
    fn clone_preserves_memo() {
        let a = HashFamily::true_random(3);
        let first = a.derive_indices(11, 32, 4);
        let b = a.clone();
        assert_eq!(b.derive_indices(11, 32, 4), first);
    }

    #[test]
    #[should_panic]
    fn true_random_shape_is_fixed() {
        let a = HashFamily::true_random(3);
        a.derive_indices(1, 32, 4);
        a.derive_indices(2, 16, 4);
    }
}
