//! Real/Ideal experiments for insertable filters.
//!
//! The ideal world is a simulator that keeps only a bit array, a lazily
//! sampled random function `f` for inserted elements, the list of inserted
//! elements and the list of elements it has already answered positively.
//! Any other query is answered by sampling `k` fresh uniform positions,
//! whatever the element is.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitArray;
use crate::error::Result;
use crate::filter::{BloomFilter, FilterFactory};
use crate::games::{public_false_positive, GameConfig, NoyAdversary};
use crate::hash::{HashFamily, HashKey};
use crate::params::{ElementSet, FilterParams, Universe};
use crate::prp::FeistelPrp;
use crate::stats::{derive_seed, rng_for, Proportion};

#[derive(Debug, Clone)]
pub struct IdealSimulator {
    m: usize,
    k: usize,
    bits: BitArray,
    f: HashMap<u64, Vec<usize>>,
    inserted: Vec<u64>,
    inserted_set: HashSet<u64>,
    fp_list: Vec<u64>,
    fp_set: HashSet<u64>,
    ctr: usize,
    rng: ChaCha8Rng,
}

impl IdealSimulator {
    pub fn new(m: usize, k: usize, seed: u64) -> Self {
        Self {
            m,
            k,
            bits: BitArray::new(m),
            f: HashMap::new(),
            inserted: Vec::new(),
            inserted_set: HashSet::new(),
            fp_list: Vec::new(),
            fp_set: HashSet::new(),
            ctr: 0,
            rng: rng_for(seed, "simulator", 0),
        }
    }

    fn draw(&mut self) -> Vec<usize> {
        (0..self.k).map(|_| self.rng.gen_range(0..self.m)).collect()
    }

    /// Encodes every element of `set` through `f`; members count as inserted.
    pub fn sim_build(&mut self, set: &ElementSet) {
        for &x in set {
            self.sim_insert(x);
        }
    }

    pub fn sim_query(&mut self, x: u64) -> bool {
        if self.inserted_set.contains(&x) || self.fp_set.contains(&x) {
            return true;
        }
        let indices = self.draw();
        let hit = self.bits.all_set(&indices);
        if hit {
            self.fp_list.push(x);
            self.fp_set.insert(x);
        }
        hit
    }

    pub fn sim_insert(&mut self, x: u64) {
        if self.inserted_set.contains(&x) {
            return;
        }
        let indices = match self.f.get(&x) {
            Some(v) => v.clone(),
            None => {
                let v = self.draw();
                self.f.insert(x, v.clone());
                v
            }
        };
        for i in indices {
            self.bits.set(i);
        }
        self.inserted.push(x);
        self.inserted_set.insert(x);
        self.ctr += 1;
    }

    pub fn sim_reveal(&self) -> Vec<u8> {
        self.bits.to_bytes()
    }

    pub fn bits(&self) -> &BitArray {
        &self.bits
    }

    pub fn f(&self, x: u64) -> Option<&[usize]> {
        self.f.get(&x).map(Vec::as_slice)
    }

    pub fn inserted(&self) -> &[u64] {
        &self.inserted
    }

    /// Append-only; an element may also appear in `inserted` if it was a
    /// false positive before being inserted.
    pub fn fp_list(&self) -> &[u64] {
        &self.fp_list
    }

    pub fn ctr(&self) -> usize {
        self.ctr
    }

    /// `(popcount/m)^k`: the chance a fresh query comes back positive.
    pub fn density_fpr(&self) -> f64 {
        (self.bits.count_ones() as f64 / self.m as f64).powi(self.k as i32)
    }
}

/// Oracle-call budgets. The time budgets are recorded but not enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleBudget {
    pub q_u: usize,
    pub q_t: usize,
    pub q_v: usize,
    pub t_a: Option<u64>,
    pub t_s: Option<u64>,
    pub t_d: Option<u64>,
}

impl OracleBudget {
    pub fn new(q_u: usize, q_t: usize, q_v: usize) -> Self {
        Self {
            q_u,
            q_t,
            q_v,
            t_a: None,
            t_s: None,
            t_d: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Refused;

/// The three oracles an adversary sees. Calls past the budget, or on
/// elements outside the universe, are refused.
pub trait FilicOracles {
    fn query(&mut self, x: u64) -> std::result::Result<bool, Refused>;
    fn insert(&mut self, x: u64) -> std::result::Result<(), Refused>;
    fn reveal(&mut self) -> std::result::Result<Vec<u8>, Refused>;
    fn universe(&self) -> Universe;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdversaryOutput {
    Bit(bool),
    Word(u64),
    /// Replaces the output of any run that had an oracle call refused.
    Refused,
}

pub trait FilicAdversary: Sync {
    fn choose_set(&self, universe: Universe, rng: &mut ChaCha8Rng) -> ElementSet;

    fn run(&self, set: &ElementSet, oracles: &mut dyn FilicOracles, rng: &mut ChaCha8Rng) -> AdversaryOutput;
}

pub trait Distinguisher: Sync {
    fn decide(&self, out: &AdversaryOutput, rng: &mut ChaCha8Rng) -> bool;
}

/// Outputs 1 exactly when the adversary output the bit 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityDistinguisher;

impl Distinguisher for IdentityDistinguisher {
    fn decide(&self, out: &AdversaryOutput, _: &mut ChaCha8Rng) -> bool {
        matches!(out, AdversaryOutput::Bit(true))
    }
}

enum World<'a> {
    Real(&'a mut BloomFilter),
    Ideal(&'a mut IdealSimulator),
}

struct Budgeted<'a> {
    world: World<'a>,
    universe: Universe,
    left: OracleBudget,
    refused: bool,
}

impl Budgeted<'_> {
    fn spend(&mut self, which: fn(&mut OracleBudget) -> &mut usize, x: Option<u64>) -> std::result::Result<(), Refused> {
        let slot = which(&mut self.left);
        let in_universe = x.is_none_or(|x| self.universe.contains(x));
        if *slot == 0 || !in_universe {
            self.refused = true;
            return Err(Refused);
        }
        *slot -= 1;
        Ok(())
    }
}

impl FilicOracles for Budgeted<'_> {
    fn query(&mut self, x: u64) -> std::result::Result<bool, Refused> {
        self.spend(|b| &mut b.q_t, Some(x))?;
        Ok(match &mut self.world {
            World::Real(f) => f.query(x).map_err(|_| Refused)?,
            World::Ideal(s) => s.sim_query(x),
        })
    }

    fn insert(&mut self, x: u64) -> std::result::Result<(), Refused> {
        self.spend(|b| &mut b.q_u, Some(x))?;
        match &mut self.world {
            World::Real(f) => {
                if f.insert(x).is_err() {
                    self.refused = true;
                    return Err(Refused);
                }
            }
            World::Ideal(s) => s.sim_insert(x),
        }
        Ok(())
    }

    fn reveal(&mut self) -> std::result::Result<Vec<u8>, Refused> {
        self.spend(|b| &mut b.q_v, None)?;
        Ok(match &self.world {
            World::Real(f) => f.reveal(),
            World::Ideal(s) => s.sim_reveal(),
        })
    }

    fn universe(&self) -> Universe {
        self.universe
    }
}

impl<'a> Budgeted<'a> {
    fn new(world: World<'a>, universe: Universe, budget: OracleBudget) -> Self {
        Self {
            world,
            universe,
            left: budget,
            refused: false,
        }
    }
}

fn play<A, D>(mut oracles: Budgeted<'_>, set: &ElementSet, adversary: &A, distinguisher: &D, mut rng: ChaCha8Rng, seed: u64) -> bool
where
    A: FilicAdversary + ?Sized,
    D: Distinguisher + ?Sized,
{
    let mut out = adversary.run(set, &mut oracles, &mut rng);
    if oracles.refused {
        out = AdversaryOutput::Refused;
    }
    distinguisher.decide(&out, &mut rng_for(seed, "distinguisher", 0))
}

/// Oracles backed by a fresh filter from `factory`. Adversary randomness
/// is drawn exactly as in the NOY games for the same seed.
pub fn run_real<F, A, D>(adversary: &A, factory: &F, distinguisher: &D, budget: OracleBudget, seed: u64) -> Result<bool>
where
    F: FilterFactory + ?Sized,
    A: FilicAdversary + ?Sized,
    D: Distinguisher + ?Sized,
{
    let universe = factory.universe();
    let mut rng = rng_for(seed, "adversary", 0);
    let set = adversary.choose_set(universe, &mut rng);
    let mut filter = factory.build(&set, derive_seed(seed, "filter", 0))?;
    let oracles = Budgeted::new(World::Real(&mut filter), universe, budget);
    Ok(play(oracles, &set, adversary, distinguisher, rng, seed))
}

/// Oracles backed by the simulator with the given `m` and `k`.
pub fn run_ideal<A, D>(adversary: &A, distinguisher: &D, params: FilterParams, universe: Universe, budget: OracleBudget, seed: u64) -> bool
where
    A: FilicAdversary + ?Sized,
    D: Distinguisher + ?Sized,
{
    let mut rng = rng_for(seed, "adversary", 0);
    let set = adversary.choose_set(universe, &mut rng);
    let mut sim = IdealSimulator::new(params.m(), params.k(), derive_seed(seed, "filter", 0));
    sim.sim_build(&set);
    let oracles = Budgeted::new(World::Ideal(&mut sim), universe, budget);
    play(oracles, &set, adversary, distinguisher, rng, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageReport {
    pub q_u: usize,
    pub q_t: usize,
    pub q_v: usize,
    pub real: Proportion,
    pub ideal: Proportion,
    pub advantage: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// `|Pr[Real = 1] - Pr[Ideal = 1]|` with an interval built from the two
/// 99% Wilson intervals.
pub fn estimate_advantage<F, A, D>(adversary: &A, factory: &F, distinguisher: &D, budget: OracleBudget, trials: usize, seed: u64) -> Result<AdvantageReport>
where
    F: FilterFactory + ?Sized,
    A: FilicAdversary + ?Sized,
    D: Distinguisher + ?Sized,
{
    let params = factory.params();
    let universe = factory.universe();
    let pairs: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, "filic-trial", i as u64);
            let real = run_real(adversary, factory, distinguisher, budget, s)?;
            let ideal = run_ideal(adversary, distinguisher, params, universe, budget, s);
            Ok((real, ideal))
        })
        .collect::<Result<_>>()?;
    let real = Proportion::from_bools(pairs.iter().map(|p| p.0));
    let ideal = Proportion::from_bools(pairs.iter().map(|p| p.1));
    let (ci_lo, ci_hi) = difference_interval(real.wilson99(), ideal.wilson99());
    Ok(AdvantageReport {
        q_u: budget.q_u,
        q_t: budget.q_t,
        q_v: budget.q_v,
        real,
        ideal,
        advantage: (real.point() - ideal.point()).abs(),
        ci_lo,
        ci_hi,
    })
}

fn difference_interval(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let lo = a.0 - b.1;
    let hi = a.1 - b.0;
    let (lo, hi) = if lo > 0.0 {
        (lo, hi)
    } else if hi < 0.0 {
        (-hi, -lo)
    } else {
        (0.0, hi.max(-lo))
    };
    (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0))
}

/// Outputs a fixed bit and never touches its oracles.
#[derive(Debug, Clone, Copy)]
pub struct ConstantAdversary(pub bool);

impl FilicAdversary for ConstantAdversary {
    fn choose_set(&self, _: Universe, _: &mut ChaCha8Rng) -> ElementSet {
        ElementSet::new()
    }

    fn run(&self, _: &ElementSet, _: &mut dyn FilicOracles, _: &mut ChaCha8Rng) -> AdversaryOutput {
        AdversaryOutput::Bit(self.0)
    }
}

/// Runs an AB adversary through the membership oracle, spending the last
/// query on its challenge and outputting that answer.
#[derive(Debug, Clone, Copy)]
pub struct AbReduction<A> {
    pub inner: A,
    pub cfg: GameConfig,
}

pub fn ab_to_filic_adversary<A: NoyAdversary>(ab_adversary: A, cfg: GameConfig, q_t: usize) -> (AbReduction<A>, IdentityDistinguisher) {
    let cfg = GameConfig {
        t: q_t.saturating_sub(1),
        ..cfg
    };
    (AbReduction { inner: ab_adversary, cfg }, IdentityDistinguisher)
}

impl<A: NoyAdversary> FilicAdversary for AbReduction<A> {
    fn choose_set(&self, _: Universe, rng: &mut ChaCha8Rng) -> ElementSet {
        self.inner.choose_set(&self.cfg, rng)
    }

    fn run(&self, set: &ElementSet, oracles: &mut dyn FilicOracles, rng: &mut ChaCha8Rng) -> AdversaryOutput {
        // rule violations lose, as in the AB test
        let lose = AdversaryOutput::Bit(false);
        if set.len() != self.cfg.n {
            return lose;
        }
        let mut history: Vec<(u64, bool)> = Vec::new();
        let mut seen = HashSet::new();
        while history.len() < self.cfg.t {
            let Some(x) = self.inner.next_query(set, &history, &self.cfg, rng) else {
                break;
            };
            if set.contains(&x) || !seen.insert(x) {
                return lose;
            }
            match oracles.query(x) {
                Ok(a) => history.push((x, a)),
                Err(_) => return AdversaryOutput::Refused,
            }
        }
        let x = self.inner.finalize(set, &history, &self.cfg, rng).challenge;
        if set.contains(&x) || seen.contains(&x) || !oracles.universe().contains(x) {
            return lose;
        }
        match oracles.query(x) {
            Ok(a) => AdversaryOutput::Bit(a),
            Err(_) => AdversaryOutput::Refused,
        }
    }
}

/// Computes a likely false positive offline from public hashes, queries
/// it and outputs the answer.
#[derive(Debug, Clone, Copy)]
pub struct PublicCollisionAdversary {
    pub params: FilterParams,
    pub n: usize,
    pub search_limit: u64,
}

impl FilicAdversary for PublicCollisionAdversary {
    fn choose_set(&self, _: Universe, _: &mut ChaCha8Rng) -> ElementSet {
        (0..self.n as u64).collect()
    }

    fn run(&self, set: &ElementSet, oracles: &mut dyn FilicOracles, rng: &mut ChaCha8Rng) -> AdversaryOutput {
        let u = oracles.universe();
        let x = public_false_positive(set, self.params, u, self.n as u64, self.search_limit)
            .unwrap_or_else(|| fresh_non_member(set, u, rng));
        match oracles.query(x) {
            Ok(a) => AdversaryOutput::Bit(a),
            Err(_) => AdversaryOutput::Refused,
        }
    }
}

fn fresh_non_member(set: &ElementSet, universe: Universe, rng: &mut ChaCha8Rng) -> u64 {
    loop {
        let x = rng.gen_range(0..universe.size());
        if !set.contains(&x) {
            return x;
        }
    }
}

/// The insertable PRP-wrapped filter whose revealed representation starts
/// with its 16-byte permutation key.
pub fn key_leaking_ny_filter(params: FilterParams, universe: Universe) -> crate::filter::FilterSpec {
    crate::filter::FilterSpec::key_leaking_ny(params, universe)
}

/// Reveals the representation. If it carries a permutation key, searches
/// for a non-member whose permuted public-hash positions are all set;
/// otherwise picks a uniform non-member. Queries it and outputs the answer.
#[derive(Debug, Clone, Copy)]
pub struct KeyReadingAdversary {
    pub params: FilterParams,
    pub n: usize,
    pub search_limit: u64,
}

impl KeyReadingAdversary {
    fn predict(&self, set: &ElementSet, revealed: &[u8], universe: Universe) -> Option<u64> {
        let bit_bytes = self.params.m().div_ceil(8);
        if revealed.len() != 16 + bit_bytes {
            return None;
        }
        let key = HashKey(revealed[..16].try_into().ok()?);
        let bits = BitArray::from_bytes(self.params.m(), &revealed[16..])?;
        let prp = FeistelPrp::new(key, universe.size()).ok()?;
        let public = HashFamily::public();
        let end = universe.size().min(self.search_limit);
        (0..end).find(|x| {
            !set.contains(x) && bits.all_set(&public.derive_indices(prp.permute(*x), self.params.m(), self.params.k()))
        })
    }
}

impl FilicAdversary for KeyReadingAdversary {
    fn choose_set(&self, _: Universe, _: &mut ChaCha8Rng) -> ElementSet {
        (0..self.n as u64).collect()
    }

    fn run(&self, set: &ElementSet, oracles: &mut dyn FilicOracles, rng: &mut ChaCha8Rng) -> AdversaryOutput {
        let Ok(revealed) = oracles.reveal() else {
            return AdversaryOutput::Refused;
        };
        let u = oracles.universe();
        let x = self
            .predict(set, &revealed, u)
            .unwrap_or_else(|| fresh_non_member(set, u, rng));
        match oracles.query(x) {
            Ok(a) => AdversaryOutput::Bit(a),
            Err(_) => AdversaryOutput::Refused,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::{Construction, FilterSpec};
    use crate::games::{estimate_ab, run_ab_test, RandomAdversary, SaturationAdversary};

    #[derive(Debug, Clone, Copy, PartialEq)]
    enum Op {
        Query(u64),
        Insert(u64),
        Reveal,
    }

    /// Reference bookkeeping checked against the simulator after every step.
    #[derive(Clone, Default)]
    struct Model {
        inserted: Vec<u64>,
        fp: Vec<u64>,
    }

    fn step(sim: &mut IdealSimulator, model: &mut Model, op: Op) {
        let bits_before = sim.bits().clone();
        match op {
            Op::Query(x) => {
                let listed = model.inserted.contains(&x) || model.fp.contains(&x);
                let empty = bits_before.count_ones() == 0;
                let a = sim.sim_query(x);
                if listed {
                    assert!(a);
                } else if a {
                    model.fp.push(x);
                }
                if empty && !listed {
                    assert!(!a);
                }
                assert_eq!(sim.bits(), &bits_before, "queries never change M");
            }
            Op::Insert(x) => {
                let memo = sim.f(x).map(<[usize]>::to_vec);
                sim.sim_insert(x);
                if model.inserted.contains(&x) {
                    assert_eq!(sim.bits(), &bits_before);
                } else {
                    model.inserted.push(x);
                }
                if let Some(memo) = memo {
                    assert_eq!(sim.f(x).unwrap(), &memo[..]);
                }
            }
            Op::Reveal => assert_eq!(sim.sim_reveal(), bits_before.to_bytes()),
        }
        assert_eq!(sim.inserted(), &model.inserted[..]);
        assert_eq!(sim.fp_list(), &model.fp[..]);
        assert_eq!(sim.ctr(), model.inserted.len());
        let mut expected = BitArray::new(4);
        for x in &model.inserted {
            for &i in sim.f(*x).unwrap() {
                expected.set(i);
            }
        }
        assert_eq!(sim.bits(), &expected);
    }

    fn explore(sim: &IdealSimulator, model: &Model, depth: usize, ops: &[Op], visited: &mut usize) {
        *visited += 1;
        if depth == 0 {
            return;
        }
        for &op in ops {
            let mut s = sim.clone();
            let mut md = model.clone();
            step(&mut s, &mut md, op);
            explore(&s, &md, depth - 1, ops, visited);
        }
    }

    #[test]
    fn exhaustive_short_sequences() {
        let mut ops: Vec<Op> = (0..4).flat_map(|x| [Op::Query(x), Op::Insert(x)]).collect();
        ops.push(Op::Reveal);
        for seed in 0..2 {
            for set in [ElementSet::new(), [2].into_iter().collect()] {
                let mut sim = IdealSimulator::new(4, 2, seed);
                sim.sim_build(&set);
                let model = Model {
                    inserted: set.iter().copied().collect(),
                    fp: Vec::new(),
                };
                let mut visited = 0;
                explore(&sim, &model, 6, &ops, &mut visited);
                assert_eq!(visited, (0..=6).map(|d| 9usize.pow(d)).sum::<usize>());
            }
        }
    }

    #[test]
    fn quoted_behaviours() {
        let mut sim = IdealSimulator::new(8, 3, 1);
        for x in 0..20 {
            assert!(!sim.sim_query(x));
        }
        sim.sim_insert(5);
        sim.sim_insert(5);
        assert_eq!(sim.ctr(), 1);
        assert!(sim.sim_query(5));
        let mut full = IdealSimulator::new(1, 1, 0);
        full.sim_insert(0);
        assert!(full.sim_query(9));
        assert_eq!(full.fp_list(), &[9]);
        assert!(full.sim_query(9));
        assert_eq!(full.fp_list(), &[9]);
        full.sim_insert(9);
        assert_eq!(full.inserted(), &[0, 9]);
        assert_eq!(full.fp_list(), &[9]);
    }

    #[test]
    fn responses_ignore_labels() {
        let script = |labels: &dyn Fn(u64) -> u64| {
            let mut sim = IdealSimulator::new(16, 3, 42);
            sim.sim_build(&(0..4).map(labels).collect());
            let mut answers = Vec::new();
            for i in 0..200u64 {
                let x = labels(i % 37);
                if i % 11 == 0 {
                    sim.sim_insert(x);
                } else {
                    answers.push(sim.sim_query(x));
                }
            }
            (answers, sim.sim_reveal(), sim.ctr())
        };
        let base = script(&|x| x);
        assert_eq!(base, script(&|x| (x * 7919 + 13) % 100_003));
        assert_eq!(base, script(&|x| u64::MAX - x));
    }

    #[test]
    fn fresh_query_rate_matches_density() {
        let mut sim = IdealSimulator::new(64, 3, 3);
        sim.sim_build(&(0..20).collect());
        let expected = sim.density_fpr();
        let hits = Proportion::from_bools((1000..41_000).map(|x| sim.sim_query(x)));
        assert!((hits.point() - expected).abs() < 3.0 * hits.std_err(), "{} vs {expected}", hits.point());
    }

    fn standard(m: usize, k: usize, n: usize, u: u64) -> FilterSpec {
        FilterSpec::standard(FilterParams::new(m, k, n).unwrap(), Universe::new(u).unwrap())
    }

    #[test]
    fn constant_adversary_has_no_advantage() {
        let f = standard(64, 3, 8, 1000);
        for bit in [false, true] {
            let r = estimate_advantage(&ConstantAdversary(bit), &f, &IdentityDistinguisher, OracleBudget::new(0, 0, 0), 1000, 1).unwrap();
            assert_eq!(r.advantage, 0.0);
            assert_eq!(r.ci_lo, 0.0);
        }
    }

    #[test]
    fn replay_is_deterministic() {
        struct Parity;
        impl FilicAdversary for Parity {
            fn choose_set(&self, _: Universe, rng: &mut ChaCha8Rng) -> ElementSet {
                (0..5).map(|_| rng.gen_range(0..100)).collect()
            }
            fn run(&self, _: &ElementSet, o: &mut dyn FilicOracles, _: &mut ChaCha8Rng) -> AdversaryOutput {
                let ones: u32 = o.reveal().unwrap().iter().map(|b| b.count_ones()).sum();
                AdversaryOutput::Bit(ones % 2 == 1)
            }
        }
        let f = standard(64, 3, 5, 100);
        let p = f.params;
        for seed in 0..50 {
            let b = OracleBudget::new(0, 0, 1);
            assert_eq!(run_real(&Parity, &f, &IdentityDistinguisher, b, seed).unwrap(), run_real(&Parity, &f, &IdentityDistinguisher, b, seed).unwrap());
            assert_eq!(run_ideal(&Parity, &IdentityDistinguisher, p, f.universe, b, seed), run_ideal(&Parity, &IdentityDistinguisher, p, f.universe, b, seed));
        }
    }

    #[test]
    fn over_budget_is_refused() {
        struct Greedy;
        impl FilicAdversary for Greedy {
            fn choose_set(&self, _: Universe, _: &mut ChaCha8Rng) -> ElementSet {
                ElementSet::new()
            }
            fn run(&self, _: &ElementSet, o: &mut dyn FilicOracles, _: &mut ChaCha8Rng) -> AdversaryOutput {
                let _ = o.query(1);
                let _ = o.query(2);
                AdversaryOutput::Bit(true)
            }
        }
        struct SeesRefusal;
        impl Distinguisher for SeesRefusal {
            fn decide(&self, out: &AdversaryOutput, _: &mut ChaCha8Rng) -> bool {
                *out == AdversaryOutput::Refused
            }
        }
        let f = standard(64, 3, 0, 100);
        assert!(run_real(&Greedy, &f, &SeesRefusal, OracleBudget::new(0, 1, 0), 0).unwrap());
        assert!(!run_real(&Greedy, &f, &SeesRefusal, OracleBudget::new(0, 2, 0), 0).unwrap());
        assert!(run_ideal(&Greedy, &SeesRefusal, f.params, f.universe, OracleBudget::new(0, 1, 0), 0));
    }

    #[test]
    fn public_hashes_are_distinguishable() {
        let params = FilterParams::new(64, 3, 8).unwrap();
        let f = FilterSpec::standard(params, Universe::new(1 << 16).unwrap());
        let adv = PublicCollisionAdversary {
            params,
            n: 8,
            search_limit: 1 << 16,
        };
        let r = estimate_advantage(&adv, &f, &IdentityDistinguisher, OracleBudget::new(0, 1, 0), 1000, 2).unwrap();
        assert_eq!(r.real.successes, 1000);
        assert!(r.ci_lo > 0.5, "{r:?}");
    }

    #[test]
    fn key_leak_gives_advantage() {
        let params = FilterParams::new(256, 4, 32).unwrap();
        let u = Universe::new(1 << 16).unwrap();
        let f = key_leaking_ny_filter(params, u);
        let probe = f.build(&(0..32).collect(), 5).unwrap();
        let revealed = probe.reveal();
        assert_eq!(&revealed[..16], probe.prp_key().unwrap().as_bytes());
        let adv = KeyReadingAdversary {
            params,
            n: 32,
            search_limit: 1 << 16,
        };
        let r = estimate_advantage(&adv, &f, &IdentityDistinguisher, OracleBudget::new(0, 1, 1), 1000, 3).unwrap();
        assert!(r.advantage >= 0.9, "{r:?}");
        assert!(r.ideal.point() < 0.1);
    }

    #[test]
    fn wrapper_replays_the_ab_test() {
        let f = FilterSpec::new(FilterParams::new(4, 3, 20).unwrap(), Universe::new(1000).unwrap(), Construction::TrueRandom);
        let cfg = GameConfig::new(8, 20, Universe::new(1000).unwrap(), 0.5).unwrap();
        let (wrapped, d) = ab_to_filic_adversary(SaturationAdversary, cfg, 9);
        let budget = OracleBudget::new(0, 9, 0);
        for seed in 0..300 {
            let ab = run_ab_test(&f, &SaturationAdversary, &wrapped.cfg, seed).unwrap();
            assert_eq!(run_real(&wrapped, &f, &d, budget, seed).unwrap(), ab.win);
        }
        let est = estimate_ab(&f, &SaturationAdversary, &wrapped.cfg, 2000, 4).unwrap();
        assert!(est.win_rate() > 0.99);
    }

    #[test]
    fn random_wrapper_tracks_density_in_ideal_world() {
        let params = FilterParams::new(64, 3, 16).unwrap();
        let u = Universe::new(1 << 20).unwrap();
        let cfg = GameConfig::new(0, 16, u, 0.5).unwrap();
        let (wrapped, d) = ab_to_filic_adversary(RandomAdversary { queries: 0 }, cfg, 1);
        let budget = OracleBudget::new(0, 1, 0);
        let trials = 20_000u64;
        let hits = Proportion::from_bools((0..trials).map(|s| run_ideal(&wrapped, &d, params, u, budget, s)));
        let expected: f64 = (0..trials)
            .map(|s| {
                let mut sim = IdealSimulator::new(64, 3, derive_seed(s, "filter", 0));
                sim.sim_build(&(0..16).collect());
                sim.density_fpr()
            })
            .sum::<f64>()
            / trials as f64;
        assert!((hits.point() - expected).abs() < 3.0 * hits.std_err(), "{} vs {expected}", hits.point());
        let f = FilterSpec::new(params, u, Construction::KeyedPrf);
        let r = estimate_advantage(&wrapped, &f, &d, budget, 2000, 5).unwrap();
        assert_eq!(r.ci_lo, 0.0, "{r:?}");
    }
}
