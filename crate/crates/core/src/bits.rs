use serde::{Deserialize, Serialize};

/// Fixed-length bit array. Bits can be set but never cleared.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitArray {
    words: Vec<u64>,
    len: usize,
}

impl BitArray {
    pub fn new(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Sets bit `i`; returns true if it was previously clear.
    pub fn set(&mut self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        let word = &mut self.words[i / 64];
        let fresh = *word & mask == 0;
        *word |= mask;
        fresh
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn all_set(&self, indices: &[usize]) -> bool {
        indices.iter().all(|&i| self.get(i))
    }

    /// Packs bit `i` into byte `i / 8` at position `i % 8` (least significant first).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for (i, byte) in out.iter_mut().enumerate() {
            let word = self.words[i / 8];
            *byte = (word >> ((i % 8) * 8)) as u8;
        }
        out
    }

    /// Inverse of [`BitArray::to_bytes`]. Padding bits past `len` must be zero.
    pub fn from_bytes(len: usize, bytes: &[u8]) -> Option<Self> {
        if bytes.len() != len.div_ceil(8) {
            return None;
        }
        let mut bits = Self::new(len);
        for (i, &byte) in bytes.iter().enumerate() {
            bits.words[i / 8] |= (byte as u64) << ((i % 8) * 8);
        }
        if !len.is_multiple_of(8) {
            let tail = bytes[bytes.len() - 1] >> (len % 8);
            if tail != 0 {
                return None;
            }
        }
        Some(bits)
    }

    pub fn to_bit_string(&self) -> String {
        (0..self.len)
            .map(|i| if self.get(i) { '1' } else { '0' })
            .collect()
    }
}

impl std::fmt::Debug for BitArray {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitArray({})", self.to_bit_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn set_reports_fresh_bits() {
        let mut b = BitArray::new(70);
        assert!(b.set(65));
        assert!(!b.set(65));
        assert!(b.get(65));
        assert_eq!(b.count_ones(), 1);
    }

    #[test]
    fn byte_layout_is_little_endian() {
        let mut b = BitArray::new(12);
        b.set(0);
        b.set(9);
        assert_eq!(b.to_bytes(), vec![0b0000_0001, 0b0000_0010]);
    }

    #[test]
    fn rejects_nonzero_padding() {
        assert!(BitArray::from_bytes(4, &[0b0001_0000]).is_none());
        assert!(BitArray::from_bytes(4, &[0, 0]).is_none());
    }

    proptest! {
        #[test]
        fn bytes_round_trip(len in 1usize..300, picks in proptest::collection::vec(any::<usize>(), 0..40)) {
            let mut b = BitArray::new(len);
            for p in picks {
                b.set(p % len);
            }
            let back = BitArray::from_bytes(len, &b.to_bytes()).unwrap();
            prop_assert_eq!(back, b);
        }
    }
}
