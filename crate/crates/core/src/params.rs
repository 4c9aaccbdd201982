//! Filter sizing and the integer universe.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Sets are ordered so that iteration (and therefore every seeded draw that
/// follows it) is reproducible.
pub type ElementSet = BTreeSet<u64>;

/// The universe `{0, …, size−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Universe {
    size: u64,
}

impl Universe {
    pub fn new(size: u64) -> Result<Self> {
        if size == 0 {
            return Err(invalid("universe size must be at least 1"));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn contains(&self, x: u64) -> bool {
        x < self.size
    }

    pub fn check(&self, x: u64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideUniverse {
                element: x,
                universe: self.size,
            })
        }
    }

    pub fn check_set(&self, set: &ElementSet) -> Result<()> {
        // sets are sorted, so only the largest element can be out of range
        match set.last() {
            Some(&x) => self.check(x),
            None => Ok(()),
        }
    }
}

/// Bit-array length `m`, hash count `k`, intended cardinality `n`, and an
/// optional target false-positive rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    m: usize,
    k: usize,
    n: usize,
    epsilon: Option<f64>,
}

impl FilterParams {
    pub fn new(m: usize, k: usize, n: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m must be at least 1"));
        }
        if k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        Ok(Self {
            m,
            k,
            n,
            epsilon: None,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        self.epsilon = Some(epsilon);
        Ok(self)
    }

    /// Parameters with `k = (m/n)·ln 2` rounded by [`optimal_k`].
    pub fn with_optimal_k(m: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("optimal k needs n >= 1"));
        }
        Self::new(m, optimal_k(m, n), n)
    }

    /// Sizes a filter for `n` elements at target rate `epsilon`:
    /// `m = ⌈−n·ln ε / (ln 2)²⌉` and `k` from [`optimal_k`].
    pub fn for_target_rate(n: usize, epsilon: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("sizing for a target rate needs n >= 1"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        let ln2 = std::f64::consts::LN_2;
        let m = (-(n as f64) * epsilon.ln() / (ln2 * ln2)).ceil().max(1.0) as usize;
        Self::new(m, optimal_k(m, n), n)?.with_epsilon(epsilon)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }
}

/// `k = (m/n)·ln 2`, rounded to the nearest integer (halves away from zero)
/// and clamped to at least 1. `n = 0` yields 1.
pub fn optimal_k(m: usize, n: usize) -> usize {
    if n == 0 {
        return 1;
    }
    let k = (m as f64 / n as f64 * std::f64::consts::LN_2).round();
    (k as usize).max(1)
}
