//! Bloom filters under adversarial and privacy models.
//!
//! The crate provides:
//!
//! - bit-array Bloom filters with public, keyed-PRF, or truly random index
//!   derivation, and a PRP-wrapped variant that maps elements through a small
//!   domain Feistel permutation before hashing ([`filter`]);
//! - randomized-response set perturbation (Mangat and Warner), their privacy
//!   budgets, closed-form error rates and an empirical marginal auditor
//!   ([`private`]);
//! - a toy learned Bloom filter with a backup filter ([`learned`]);
//! - the adaptive AB and BP games together with the saturation attack on
//!   truly random filters ([`games`]);
//! - the ideal simulator, Real/Ideal experiments and the AB-to-simulator
//!   reduction ([`filic`]).
//!
//! Every randomized routine takes an explicit 64-bit seed; see [`stats::derive_seed`].

pub mod bits;
pub mod error;
pub mod filic;
pub mod filter;
pub mod games;
pub mod hash;
pub mod learned;
pub mod params;
pub mod private;
pub mod prp;
pub mod snapshot;
pub mod stats;

pub use error::{Error, Result};
pub use filter::{BloomFilter, Construction, FilterFactory, FilterKind, FilterSpec};
pub use hash::{HashFamily, HashKey, HashMode};
pub use params::{ElementSet, FilterParams, Universe};
