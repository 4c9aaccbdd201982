//! Versioned binary snapshots and a JSON debug dump of a [`BloomFilter`].
//!
//! Binary layout, version 1 (all integers little-endian):
//!
//! | offset | size      | field                                             |
//! |--------|-----------|---------------------------------------------------|
//! | 0      | 4         | magic `b"ABLM"`                                   |
//! | 4      | 2         | version (`1`)                                     |
//! | 6      | 1         | kind: 0 standard, 1 prf-backed, 2 ny-prp-wrapped  |
//! | 7      | 1         | hash mode: 0 public, 1 keyed-prf                  |
//! | 8      | 1         | flags: bit 0 insertable, bit 1 leaks key          |
//! | 9      | 1         | reserved, zero                                    |
//! | 10     | 8         | m                                                 |
//! | 18     | 4         | k                                                 |
//! | 22     | 8         | n                                                 |
//! | 30     | 8         | universe size                                     |
//! | 38     | 2         | key length `L` (16, or 32 for ny-prp-wrapped)     |
//! | 40     | L         | hash key, then the permutation key if present     |
//! | 40+L   | ⌈m/8⌉     | bit array, bit `i` in byte `i/8` at bit `i%8`     |
//!
//! Filters with truly random index derivation cannot be snapshotted: their
//! random function lives only in the in-memory memo table.

use serde::Serialize;

use crate::bits::BitArray;
use crate::error::{Error, Result};
use crate::filter::{BloomFilter, FilterKind};
use crate::hash::{HashFamily, HashKey, HashMode};
use crate::params::{FilterParams, Universe};
use crate::prp::FeistelPrp;

pub const MAGIC: [u8; 4] = *b"ABLM";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 40;

pub fn encode(filter: &BloomFilter) -> Result<Vec<u8>> {
    let mode = filter.hash().mode();
    if mode == HashMode::TrueRandom {
        return Err(Error::Unsupported(
            "true-random filters have no persistent key material".into(),
        ));
    }
    let params = filter.params();
    let mut key = filter.hash().key().as_bytes().to_vec();
    if let Some(prp_key) = filter.prp_key() {
        key.extend_from_slice(prp_key.as_bytes());
    }
    let flags = filter.is_insertable() as u8 | (filter.leaks_key() as u8) << 1;

    let mut out = Vec::with_capacity(HEADER_LEN + key.len() + params.m().div_ceil(8));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(filter.kind().tag());
    out.push(mode.tag());
    out.push(flags);
    out.push(0);
    out.extend_from_slice(&(params.m() as u64).to_le_bytes());
    out.extend_from_slice(&(params.k() as u32).to_le_bytes());
    out.extend_from_slice(&(params.n() as u64).to_le_bytes());
    out.extend_from_slice(&filter.universe().size().to_le_bytes());
    out.extend_from_slice(&(key.len() as u16).to_le_bytes());
    out.extend_from_slice(&key);
    out.extend(filter.bits().to_bytes());
    Ok(out)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Snapshot(msg.into())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| corrupt("truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn key_at(bytes: &[u8], at: usize) -> HashKey {
    HashKey(bytes[at..at + 16].try_into().unwrap())
}

pub fn decode(bytes: &[u8]) -> Result<BloomFilter> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let kind = FilterKind::from_tag(r.u8()?).ok_or_else(|| corrupt("unknown kind"))?;
    let mode = HashMode::from_tag(r.u8()?).ok_or_else(|| corrupt("unknown hash mode"))?;
    if mode == HashMode::TrueRandom {
        return Err(corrupt("true-random hash mode cannot be restored"));
    }
    let flags = r.u8()?;
    if flags & !0b11 != 0 || r.u8()? != 0 {
        return Err(corrupt("reserved bits set"));
    }
    let m = usize::try_from(r.u64()?).map_err(|_| corrupt("m too large"))?;
    let k = r.u32()? as usize;
    let n = usize::try_from(r.u64()?).map_err(|_| corrupt("n too large"))?;
    let u = r.u64()?;
    let params = FilterParams::new(m, k, n).map_err(|e| corrupt(e.to_string()))?;
    let universe = Universe::new(u).map_err(|e| corrupt(e.to_string()))?;

    let key_len = r.u16()? as usize;
    let expected_key_len = if kind == FilterKind::NyPrpWrapped { 32 } else { 16 };
    if key_len != expected_key_len {
        return Err(corrupt(format!("key length {key_len}, expected {expected_key_len}")));
    }
    let key = r.take(key_len)?;
    let hash = match mode {
        HashMode::Public => HashFamily::public(),
        _ => HashFamily::keyed(key_at(key, 0)),
    };
    if mode == HashMode::Public && key_at(key, 0) != *hash.key() {
        return Err(corrupt("public hash with a non-public key"));
    }
    let expected_kind = match (mode, kind) {
        (_, FilterKind::NyPrpWrapped) => FilterKind::NyPrpWrapped,
        (HashMode::Public, _) => FilterKind::Standard,
        _ => FilterKind::PrfBacked,
    };
    if kind != expected_kind {
        return Err(corrupt("kind does not match hash mode"));
    }
    let prp = if kind == FilterKind::NyPrpWrapped {
        Some(FeistelPrp::new(key_at(key, 16), u).map_err(|e| corrupt(e.to_string()))?)
    } else {
        None
    };

    let bits = BitArray::from_bytes(m, r.take(m.div_ceil(8))?)
        .ok_or_else(|| corrupt("bit array padding is not zero"))?;
    if r.pos != bytes.len() {
        return Err(corrupt("trailing bytes"));
    }
    let leaks_key = flags & 0b10 != 0 && prp.is_some();
    Ok(BloomFilter::from_parts(
        bits,
        params,
        universe,
        hash,
        kind,
        prp,
        flags & 1 != 0,
        leaks_key,
    ))
}

#[derive(Serialize)]
struct Dump<'a> {
    kind: FilterKind,
    hash_mode: HashMode,
    m: usize,
    k: usize,
    n: usize,
    universe: u64,
    insertable: bool,
    leaks_key: bool,
    popcount: usize,
    fill_ratio: f64,
    saturated: bool,
    bits: &'a str,
}

/// Human-readable JSON. Key material is deliberately left out.
pub fn debug_json(filter: &BloomFilter) -> String {
    let bits = filter.bits().to_bit_string();
    let dump = Dump {
        kind: filter.kind(),
        hash_mode: filter.hash().mode(),
        m: filter.params().m(),
        k: filter.params().k(),
        n: filter.params().n(),
        universe: filter.universe().size(),
        insertable: filter.is_insertable(),
        leaks_key: filter.leaks_key(),
        popcount: filter.popcount(),
        fill_ratio: filter.fill_ratio(),
        saturated: filter.is_saturated(),
        bits: &bits,
    };
    serde_json::to_string_pretty(&dump).expect("dump serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{Construction, FilterFactory, FilterSpec};
    use crate::params::ElementSet;
    use proptest::prelude::*;

    fn spec(construction: Construction) -> FilterSpec {
        FilterSpec::new(
            FilterParams::new(77, 3, 10).unwrap(),
            Universe::new(5000).unwrap(),
            construction,
        )
    }

    #[test]
    fn header_layout() {
        let f = spec(Construction::Standard).build(&[1, 2].into_iter().collect(), 0).unwrap();
        let bytes = encode(&f).unwrap();
        assert_eq!(&bytes[..4], b"ABLM");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(bytes[6], 0);
        assert_eq!(bytes[8], 1);
        assert_eq!(u64::from_le_bytes(bytes[10..18].try_into().unwrap()), 77);
        assert_eq!(u32::from_le_bytes(bytes[18..22].try_into().unwrap()), 3);
        assert_eq!(u16::from_le_bytes([bytes[38], bytes[39]]), 16);
        assert_eq!(bytes.len(), 40 + 16 + 10);
    }

    #[test]
    fn true_random_is_not_snapshotted() {
        let f = spec(Construction::TrueRandom).build(&ElementSet::new(), 0).unwrap();
        assert!(matches!(encode(&f), Err(Error::Unsupported(_))));
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let f = spec(Construction::KeyedPrf).build(&[9].into_iter().collect(), 3).unwrap();
        let good = encode(&f).unwrap();
        assert!(decode(&good[..good.len() - 1]).is_err());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut bad = good.clone();
        bad.push(0);
        assert!(decode(&bad).is_err());
        let mut bad = good;
        bad[4] = 2;
        assert!(decode(&bad).is_err());
    }

    #[test]
    fn json_dump_mentions_bits() {
        let f = spec(Construction::Standard).build(&[4].into_iter().collect(), 0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&debug_json(&f)).unwrap();
        assert_eq!(v["m"], 77);
        assert_eq!(v["bits"].as_str().unwrap().len(), 77);
        assert_eq!(v["kind"], "Standard");
    }

    proptest! {
        #[test]
        fn round_trip_preserves_queries(seed in any::<u64>(), members in proptest::collection::btree_set(0u64..5000, 0..30), which in 0usize..3) {
            let construction = [
                Construction::Standard,
                Construction::KeyedPrf,
                Construction::Ny { inner: HashMode::Public, insertable: true, leak_key: true },
            ][which];
            let f = spec(construction).build(&members, seed).unwrap();
            let back = decode(&encode(&f).unwrap()).unwrap();
            prop_assert_eq!(back.bits(), f.bits());
            prop_assert_eq!(back.kind(), f.kind());
            prop_assert_eq!(back.reveal(), f.reveal());
            for x in (0..5000).step_by(37) {
                prop_assert_eq!(back.query(x).unwrap(), f.query(x).unwrap());
            }
        }
    }
}
