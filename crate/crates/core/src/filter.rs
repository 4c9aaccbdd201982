//! Bit-array Bloom filters.
//!
//! A [`BloomFilter`] is the representation `M` together with everything
//! needed to query it: sizing, universe, the index-derivation family and,
//! for the PRP-wrapped kind, the permutation applied to elements before
//! hashing.

use serde::{Deserialize, Serialize};

use crate::bits::BitArray;
use crate::error::{Error, Result};
use crate::hash::{HashFamily, HashKey, HashMode};
use crate::params::{ElementSet, FilterParams, Universe};
use crate::prp::FeistelPrp;
use crate::stats::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FilterKind {
    /// Public hash functions.
    Standard,
    /// Keyed PRF or truly random index derivation.
    PrfBacked,
    /// Elements pass through a keyed permutation before an inner filter.
    NyPrpWrapped,
}

impl FilterKind {
    pub fn tag(self) -> u8 {
        match self {
            FilterKind::Standard => 0,
            FilterKind::PrfBacked => 1,
            FilterKind::NyPrpWrapped => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(FilterKind::Standard),
            1 => Some(FilterKind::PrfBacked),
            2 => Some(FilterKind::NyPrpWrapped),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BloomFilter {
    bits: BitArray,
    params: FilterParams,
    universe: Universe,
    hash: HashFamily,
    kind: FilterKind,
    prp: Option<FeistelPrp>,
    insertable: bool,
    leaks_key: bool,
}

impl BloomFilter {
    /// An empty, insertable filter. The kind follows the hash mode.
    pub fn new(params: FilterParams, universe: Universe, hash: HashFamily) -> Self {
        let kind = match hash.mode() {
            HashMode::Public => FilterKind::Standard,
            HashMode::KeyedPrf | HashMode::TrueRandom => FilterKind::PrfBacked,
        };
        Self {
            bits: BitArray::new(params.m()),
            params,
            universe,
            hash,
            kind,
            prp: None,
            insertable: true,
            leaks_key: false,
        }
    }

    /// Encodes `set`: every bit at an index of a member is set.
    pub fn build(
        set: &ElementSet,
        params: FilterParams,
        universe: Universe,
        hash: HashFamily,
    ) -> Result<Self> {
        let mut filter = Self::new(params, universe, hash);
        filter.encode_all(set)?;
        Ok(filter)
    }

    /// An empty PRP-wrapped filter. Static: [`BloomFilter::insert`] is refused
    /// unless [`BloomFilter::with_insertion`] re-enables it.
    pub fn ny_empty(
        params: FilterParams,
        universe: Universe,
        inner: HashFamily,
        prp_key: HashKey,
    ) -> Result<Self> {
        let prp = FeistelPrp::new(prp_key, universe.size())?;
        let mut filter = Self::new(params, universe, inner);
        filter.kind = FilterKind::NyPrpWrapped;
        filter.prp = Some(prp);
        filter.insertable = false;
        Ok(filter)
    }

    /// Builds the inner filter over `{PRP_key(x) : x ∈ set}`.
    pub fn ny_build(
        set: &ElementSet,
        params: FilterParams,
        universe: Universe,
        inner: HashFamily,
        prp_key: HashKey,
    ) -> Result<Self> {
        let mut filter = Self::ny_empty(params, universe, inner, prp_key)?;
        filter.encode_all(set)?;
        Ok(filter)
    }

    pub fn with_insertion(mut self, insertable: bool) -> Self {
        self.insertable = insertable;
        self
    }

    /// Makes [`BloomFilter::reveal`] prepend the permutation key to the bits.
    /// Only meaningful for the PRP-wrapped kind.
    pub fn with_leaked_key(mut self) -> Self {
        self.leaks_key = self.prp.is_some();
        self
    }

    fn encode_all(&mut self, set: &ElementSet) -> Result<()> {
        self.universe.check_set(set)?;
        for &x in set {
            self.encode(x)?;
        }
        Ok(())
    }

    fn encode(&mut self, x: u64) -> Result<()> {
        for i in self.indices_of(x)? {
            self.bits.set(i);
        }
        Ok(())
    }

    /// The `k` bit positions `x` maps to (after the permutation, if any).
    pub fn indices_of(&self, x: u64) -> Result<Vec<usize>> {
        self.universe.check(x)?;
        let mapped = self.prp.as_ref().map_or(x, |p| p.permute(x));
        Ok(self
            .hash
            .derive_indices(mapped, self.params.m(), self.params.k()))
    }

    /// True iff every derived index of `x` is set. Never changes the bits.
    pub fn query(&self, x: u64) -> Result<bool> {
        Ok(self.bits.all_set(&self.indices_of(x)?))
    }

    pub fn insert(&mut self, x: u64) -> Result<()> {
        if !self.insertable {
            return Err(Error::Unsupported(format!(
                "insert on a static {:?} filter",
                self.kind
            )));
        }
        self.encode(x)
    }

    pub fn popcount(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn fill_ratio(&self) -> f64 {
        self.popcount() as f64 / self.params.m() as f64
    }

    pub fn is_saturated(&self) -> bool {
        self.popcount() == self.params.m()
    }

    pub fn bits(&self) -> &BitArray {
        &self.bits
    }

    pub fn params(&self) -> &FilterParams {
        &self.params
    }

    pub fn universe(&self) -> Universe {
        self.universe
    }

    pub fn hash(&self) -> &HashFamily {
        &self.hash
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn prp_key(&self) -> Option<&HashKey> {
        self.prp.as_ref().map(|p| p.key())
    }

    pub fn is_insertable(&self) -> bool {
        self.insertable
    }

    pub fn leaks_key(&self) -> bool {
        self.leaks_key
    }

    /// The internal representation as handed out by a reveal oracle: the
    /// packed bit array, preceded by the 16 permutation-key bytes at offset 0
    /// when the filter leaks its key.
    pub fn reveal(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.params.m().div_ceil(8));
        if self.leaks_key {
            if let Some(prp) = &self.prp {
                out.extend_from_slice(prp.key().as_bytes());
            }
        }
        out.extend(self.bits.to_bytes());
        out
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        bits: BitArray,
        params: FilterParams,
        universe: Universe,
        hash: HashFamily,
        kind: FilterKind,
        prp: Option<FeistelPrp>,
        insertable: bool,
        leaks_key: bool,
    ) -> Self {
        Self {
            bits,
            params,
            universe,
            hash,
            kind,
            prp,
            insertable,
            leaks_key,
        }
    }
}

/// How a [`FilterSpec`] builds each fresh filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Construction {
    Standard,
    KeyedPrf,
    TrueRandom,
    /// PRP-wrapped filter over an inner filter with the given hash mode.
    Ny {
        inner: HashMode,
        insertable: bool,
        leak_key: bool,
    },
}

/// Builds a fresh filter (fresh keys, fresh random function) for each trial.
pub trait FilterFactory: Sync {
    fn build(&self, set: &ElementSet, seed: u64) -> Result<BloomFilter>;

    fn params(&self) -> FilterParams;

    fn universe(&self) -> Universe;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub params: FilterParams,
    pub universe: Universe,
    pub construction: Construction,
}

impl FilterSpec {
    pub fn new(params: FilterParams, universe: Universe, construction: Construction) -> Self {
        Self {
            params,
            universe,
            construction,
        }
    }

    pub fn standard(params: FilterParams, universe: Universe) -> Self {
        Self::new(params, universe, Construction::Standard)
    }

    /// Insertable PRP-wrapped filter over public hashes whose revealed
    /// representation carries the permutation key.
    pub fn key_leaking_ny(params: FilterParams, universe: Universe) -> Self {
        Self::new(
            params,
            universe,
            Construction::Ny {
                inner: HashMode::Public,
                insertable: true,
                leak_key: true,
            },
        )
    }

    /// An empty filter with fresh key material derived from `seed`.
    pub fn empty(&self, seed: u64) -> Result<BloomFilter> {
        let hash_seed = derive_seed(seed, "hash", 0);
        Ok(match self.construction {
            Construction::Standard => {
                BloomFilter::new(self.params, self.universe, HashFamily::public())
            }
            Construction::KeyedPrf => BloomFilter::new(
                self.params,
                self.universe,
                HashFamily::from_seed(HashMode::KeyedPrf, hash_seed),
            ),
            Construction::TrueRandom => BloomFilter::new(
                self.params,
                self.universe,
                HashFamily::from_seed(HashMode::TrueRandom, hash_seed),
            ),
            Construction::Ny {
                inner,
                insertable,
                leak_key,
            } => {
                let prp_key = HashKey::from_seed(derive_seed(seed, "prp", 0));
                let filter = BloomFilter::ny_empty(
                    self.params,
                    self.universe,
                    HashFamily::from_seed(inner, hash_seed),
                    prp_key,
                )?
                .with_insertion(insertable);
                if leak_key {
                    filter.with_leaked_key()
                } else {
                    filter
                }
            }
        })
    }
}

impl FilterFactory for FilterSpec {
    fn build(&self, set: &ElementSet, seed: u64) -> Result<BloomFilter> {
        let mut filter = self.empty(seed)?;
        filter.encode_all(set)?;
        Ok(filter)
    }

    fn params(&self) -> FilterParams {
        self.params
    }

    fn universe(&self) -> Universe {
        self.universe
    }
}

/// Wraps a filter construction in a keyed permutation: each build draws a
/// fresh permutation key and the result is static.
pub fn ny_wrap(inner: FilterSpec) -> FilterSpec {
    let inner_mode = match inner.construction {
        Construction::Standard => HashMode::Public,
        Construction::KeyedPrf => HashMode::KeyedPrf,
        Construction::TrueRandom => HashMode::TrueRandom,
        Construction::Ny { inner, .. } => inner,
    };
    FilterSpec::new(
        inner.params,
        inner.universe,
        Construction::Ny {
            inner: inner_mode,
            insertable: false,
            leak_key: false,
        },
    )
}
