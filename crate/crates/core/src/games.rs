//! Adaptive membership games against Bloom filters.
//!
//! An adversary picks a set `S` of exactly `n` elements, issues up to `t`
//! distinct membership queries outside `S`, and finally names a challenge
//! `x*` it has not queried. The AB test scores a win when `x*` is a false
//! positive. The BP test lets the adversary pass instead, and pays
//! `1/δ` for a correct bet and `-1/(1-δ)` for a wrong one.
//!
//! The harness enforces the rules. A violation is a forfeit: it never wins,
//! and in the BP test it is scored as a losing bet.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::filter::{BloomFilter, FilterFactory};
use crate::hash::HashFamily;
use crate::params::{optimal_k, ElementSet, FilterParams, Universe};
use crate::stats::{derive_seed, rng_for, CompensatedSum, MeanEstimate, Proportion};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    /// Security parameter; carried for reporting only.
    pub lambda: u32,
    pub t: usize,
    pub n: usize,
    pub universe: Universe,
    /// ε of the AB test, δ of the BP payout.
    pub delta: f64,
}

impl GameConfig {
    pub fn new(t: usize, n: usize, universe: Universe, delta: f64) -> Result<Self> {
        if n as u64 > universe.size() {
            return Err(invalid(format!("n = {n} exceeds universe size {}", universe.size())));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self {
            lambda: 128,
            t,
            n,
            universe,
            delta,
        })
    }

    pub fn with_lambda(mut self, lambda: u32) -> Self {
        self.lambda = lambda;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub bet: bool,
    pub challenge: u64,
}

/// Query history: `(x_i, answer_i)` in issue order.
pub type History = [(u64, bool)];

pub trait NoyAdversary: Sync {
    fn choose_set(&self, cfg: &GameConfig, rng: &mut ChaCha8Rng) -> ElementSet;

    /// `None` ends the query phase early.
    fn next_query(&self, set: &ElementSet, history: &History, cfg: &GameConfig, rng: &mut ChaCha8Rng) -> Option<u64>;

    fn finalize(&self, set: &ElementSet, history: &History, cfg: &GameConfig, rng: &mut ChaCha8Rng) -> Decision;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "element", rename_all = "kebab-case")]
pub enum Forfeit {
    WrongSetSize(u64),
    SetOutsideUniverse(u64),
    QueryOutsideUniverse(u64),
    QueryInSet(u64),
    RepeatedQuery(u64),
    InvalidChallenge(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub set: ElementSet,
    pub queries: Vec<u64>,
    pub answers: Vec<bool>,
    pub forfeit: Option<Forfeit>,
}

impl Transcript {
    pub fn history(&self) -> Vec<(u64, bool)> {
        self.queries.iter().copied().zip(self.answers.iter().copied()).collect()
    }

    fn is_fresh_challenge(&self, x: u64, universe: Universe) -> bool {
        universe.contains(x) && !self.set.contains(&x) && !self.queries.contains(&x)
    }
}

struct Played {
    transcript: Transcript,
    filter: Option<BloomFilter>,
    rng: ChaCha8Rng,
}

fn play<F, A>(factory: &F, adversary: &A, cfg: &GameConfig, seed: u64) -> Result<Played>
where
    F: FilterFactory + ?Sized,
    A: NoyAdversary + ?Sized,
{
    let mut rng = rng_for(seed, "adversary", 0);
    let set = adversary.choose_set(cfg, &mut rng);
    let mut transcript = Transcript {
        set,
        queries: Vec::new(),
        answers: Vec::new(),
        forfeit: None,
    };
    if transcript.set.len() != cfg.n {
        transcript.forfeit = Some(Forfeit::WrongSetSize(transcript.set.len() as u64));
        return Ok(Played { transcript, filter: None, rng });
    }
    if let Some(&last) = transcript.set.iter().next_back() {
        if !cfg.universe.contains(last) {
            transcript.forfeit = Some(Forfeit::SetOutsideUniverse(last));
            return Ok(Played { transcript, filter: None, rng });
        }
    }
    let filter = factory.build(&transcript.set, derive_seed(seed, "filter", 0))?;

    let mut history: Vec<(u64, bool)> = Vec::with_capacity(cfg.t);
    let mut seen = std::collections::HashSet::with_capacity(cfg.t);
    while history.len() < cfg.t {
        let Some(x) = adversary.next_query(&transcript.set, &history, cfg, &mut rng) else {
            break;
        };
        let violation = if !cfg.universe.contains(x) {
            Some(Forfeit::QueryOutsideUniverse(x))
        } else if transcript.set.contains(&x) {
            Some(Forfeit::QueryInSet(x))
        } else if !seen.insert(x) {
            Some(Forfeit::RepeatedQuery(x))
        } else {
            None
        };
        if violation.is_some() {
            transcript.forfeit = violation;
            break;
        }
        let answer = filter.query(x)?;
        history.push((x, answer));
        transcript.queries.push(x);
        transcript.answers.push(answer);
    }
    Ok(Played {
        transcript,
        filter: Some(filter),
        rng,
    })
}

/// Plays the query phase only.
pub fn run_adaptive_game<F, A>(factory: &F, adversary: &A, cfg: &GameConfig, seed: u64) -> Result<Transcript>
where
    F: FilterFactory + ?Sized,
    A: NoyAdversary + ?Sized,
{
    Ok(play(factory, adversary, cfg, seed)?.transcript)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbOutcome {
    pub win: bool,
    pub challenge: Option<u64>,
    pub forfeit: Option<Forfeit>,
    pub filter_saturated: bool,
    pub transcript: Transcript,
}

pub fn run_ab_test<F, A>(factory: &F, adversary: &A, cfg: &GameConfig, seed: u64) -> Result<AbOutcome>
where
    F: FilterFactory + ?Sized,
    A: NoyAdversary + ?Sized,
{
    let Played {
        mut transcript,
        filter,
        mut rng,
    } = play(factory, adversary, cfg, seed)?;
    let filter_saturated = filter.as_ref().is_some_and(|f| f.is_saturated());
    let Some(filter) = filter.filter(|_| transcript.forfeit.is_none()) else {
        return Ok(AbOutcome {
            win: false,
            challenge: None,
            forfeit: transcript.forfeit,
            filter_saturated,
            transcript,
        });
    };
    let history = transcript.history();
    // the bet bit is ignored: the AB test always bets
    let decision = adversary.finalize(&transcript.set, &history, cfg, &mut rng);
    let x = decision.challenge;
    let win = if transcript.is_fresh_challenge(x, cfg.universe) {
        filter.query(x)?
    } else {
        transcript.forfeit = Some(Forfeit::InvalidChallenge(x));
        false
    };
    Ok(AbOutcome {
        win,
        challenge: Some(x),
        forfeit: transcript.forfeit,
        filter_saturated,
        transcript,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitOutcome {
    pub bet: bool,
    pub false_positive: bool,
    pub profit: f64,
    pub forfeit: Option<Forfeit>,
    pub filter_saturated: bool,
    pub queries: usize,
    pub positive_answers: usize,
}

/// The three-case payout table.
pub fn profit(bet: bool, false_positive: bool, delta: f64) -> f64 {
    match (bet, false_positive) {
        (false, _) => 0.0,
        (true, true) => 1.0 / delta,
        (true, false) => -1.0 / (1.0 - delta),
    }
}

pub fn run_bp_test<F, A>(factory: &F, adversary: &A, cfg: &GameConfig, seed: u64) -> Result<ProfitOutcome>
where
    F: FilterFactory + ?Sized,
    A: NoyAdversary + ?Sized,
{
    let Played {
        mut transcript,
        filter,
        mut rng,
    } = play(factory, adversary, cfg, seed)?;
    let filter_saturated = filter.as_ref().is_some_and(|f| f.is_saturated());
    let queries = transcript.queries.len();
    let positive_answers = transcript.answers.iter().filter(|a| **a).count();
    let forfeited = |forfeit| ProfitOutcome {
        bet: true,
        false_positive: false,
        profit: profit(true, false, cfg.delta),
        forfeit: Some(forfeit),
        filter_saturated,
        queries,
        positive_answers,
    };
    if let Some(f) = transcript.forfeit {
        return Ok(forfeited(f));
    }
    let filter = filter.expect("filter exists without forfeit");
    let history = transcript.history();
    let decision = adversary.finalize(&transcript.set, &history, cfg, &mut rng);
    if !decision.bet {
        return Ok(ProfitOutcome {
            bet: false,
            false_positive: false,
            profit: 0.0,
            forfeit: None,
            filter_saturated,
            queries,
            positive_answers,
        });
    }
    let x = decision.challenge;
    if !transcript.is_fresh_challenge(x, cfg.universe) {
        transcript.forfeit = Some(Forfeit::InvalidChallenge(x));
        return Ok(forfeited(Forfeit::InvalidChallenge(x)));
    }
    let fp = filter.query(x)?;
    Ok(ProfitOutcome {
        bet: true,
        false_positive: fp,
        profit: profit(true, fp, cfg.delta),
        forfeit: None,
        filter_saturated,
        queries,
        positive_answers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbEstimate {
    pub wins: Proportion,
    pub ci: (f64, f64),
    pub forfeits: u64,
    pub saturated: u64,
}

impl AbEstimate {
    pub fn win_rate(&self) -> f64 {
        self.wins.point()
    }
}

fn trial_seeds(seed: u64, tag: &'static str, trials: usize) -> impl IndexedParallelIterator<Item = u64> {
    (0..trials).into_par_iter().map(move |i| derive_seed(seed, tag, i as u64))
}

pub fn estimate_ab<F, A>(factory: &F, adversary: &A, cfg: &GameConfig, trials: usize, seed: u64) -> Result<AbEstimate>
where
    F: FilterFactory + ?Sized,
    A: NoyAdversary + ?Sized,
{
    let outcomes: Vec<AbOutcome> = trial_seeds(seed, "ab-trial", trials)
        .map(|s| run_ab_test(factory, adversary, cfg, s))
        .collect::<Result<_>>()?;
    let wins = Proportion::from_bools(outcomes.iter().map(|o| o.win));
    Ok(AbEstimate {
        wins,
        ci: wins.wilson99(),
        forfeits: outcomes.iter().filter(|o| o.forfeit.is_some()).count() as u64,
        saturated: outcomes.iter().filter(|o| o.filter_saturated).count() as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpEstimate {
    pub profit: MeanEstimate,
    pub bets: u64,
    /// Bets on a false positive.
    pub wins: u64,
    pub forfeits: u64,
    pub saturated: Proportion,
    /// Positive answers among queries against non-saturated filters.
    pub unsaturated_positive_rate: Proportion,
}

pub fn estimate_bp<F, A>(factory: &F, adversary: &A, cfg: &GameConfig, trials: usize, seed: u64) -> Result<BpEstimate>
where
    F: FilterFactory + ?Sized,
    A: NoyAdversary + ?Sized,
{
    let outcomes: Vec<ProfitOutcome> = trial_seeds(seed, "bp-trial", trials)
        .map(|s| run_bp_test(factory, adversary, cfg, s))
        .collect::<Result<_>>()?;
    let profits: Vec<f64> = outcomes.iter().map(|o| o.profit).collect();
    let mut positives = Proportion::default();
    for o in outcomes.iter().filter(|o| !o.filter_saturated) {
        positives.merge(Proportion::new(o.positive_answers as u64, o.queries as u64));
    }
    Ok(BpEstimate {
        profit: MeanEstimate::from_samples(&profits),
        bets: outcomes.iter().filter(|o| o.bet).count() as u64,
        wins: outcomes.iter().filter(|o| o.bet && o.false_positive).count() as u64,
        forfeits: outcomes.iter().filter(|o| o.forfeit.is_some()).count() as u64,
        saturated: Proportion::from_bools(outcomes.iter().map(|o| o.filter_saturated)),
        unsaturated_positive_rate: positives,
    })
}

/// Draws a uniform element of `U ∖ excluded` by rejection, or `None` when
/// nothing is left.
fn fresh_element(
    universe: Universe,
    set: &ElementSet,
    history: &History,
    rng: &mut ChaCha8Rng,
) -> Option<u64> {
    let used = set.len() as u64 + history.len() as u64;
    if used >= universe.size() {
        return None;
    }
    loop {
        let x = rng.gen_range(0..universe.size());
        if !set.contains(&x) && !history.iter().any(|(q, _)| *q == x) {
            return Some(x);
        }
    }
}

/// `S = {0, …, n-1}`.
fn prefix_set(n: usize) -> ElementSet {
    (0..n as u64).collect()
}

/// Queries `t` fresh uniform non-members and bets on a fresh uniform
/// element only if every answer was positive.
#[derive(Debug, Clone, Copy, Default)]
pub struct SaturationAdversary;

pub fn saturation_adversary(_cfg: &GameConfig) -> SaturationAdversary {
    SaturationAdversary
}

impl NoyAdversary for SaturationAdversary {
    fn choose_set(&self, cfg: &GameConfig, _rng: &mut ChaCha8Rng) -> ElementSet {
        prefix_set(cfg.n)
    }

    fn next_query(&self, set: &ElementSet, history: &History, cfg: &GameConfig, rng: &mut ChaCha8Rng) -> Option<u64> {
        fresh_element(cfg.universe, set, history, rng)
    }

    fn finalize(&self, set: &ElementSet, history: &History, cfg: &GameConfig, rng: &mut ChaCha8Rng) -> Decision {
        let bet = history.iter().all(|(_, a)| *a);
        // with no fresh element left, any member is an invalid challenge
        let challenge = fresh_element(cfg.universe, set, history, rng).unwrap_or(0);
        Decision { bet, challenge }
    }
}

/// Uniform `n`-subset of the universe.
fn uniform_set(universe: Universe, n: usize, rng: &mut ChaCha8Rng) -> ElementSet {
    match usize::try_from(universe.size()) {
        Ok(u) => rand::seq::index::sample(rng, u, n).into_iter().map(|x| x as u64).collect(),
        Err(_) => {
            let mut set = ElementSet::new();
            while set.len() < n {
                set.insert(rng.gen_range(0..universe.size()));
            }
            set
        }
    }
}

/// Picks a uniform set, issues up to `queries` fresh uniform queries, ignores the answers and
/// always bets on a fresh uniform element.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomAdversary {
    pub queries: usize,
}

impl NoyAdversary for RandomAdversary {
    fn choose_set(&self, cfg: &GameConfig, rng: &mut ChaCha8Rng) -> ElementSet {
        uniform_set(cfg.universe, cfg.n, rng)
    }

    fn next_query(&self, set: &ElementSet, history: &History, cfg: &GameConfig, rng: &mut ChaCha8Rng) -> Option<u64> {
        if history.len() >= self.queries {
            return None;
        }
        fresh_element(cfg.universe, set, history, rng)
    }

    fn finalize(&self, set: &ElementSet, history: &History, cfg: &GameConfig, rng: &mut ChaCha8Rng) -> Decision {
        let challenge = fresh_element(cfg.universe, set, history, rng).unwrap_or(0);
        Decision { bet: true, challenge }
    }
}

/// Needs no queries: recomputes the public-hash filter for its own set and
/// searches offline for a non-member whose indices are all covered.
#[derive(Debug, Clone, Copy)]
pub struct PublicHashAdversary {
    pub params: FilterParams,
    pub search_limit: u64,
}

/// First non-member (scanning upwards from `start`) that the public-hash
/// filter over `set` accepts.
pub fn public_false_positive(
    set: &ElementSet,
    params: FilterParams,
    universe: Universe,
    start: u64,
    search_limit: u64,
) -> Option<u64> {
    let filter = BloomFilter::build(set, params, universe, HashFamily::public()).ok()?;
    let end = universe.size().min(start.saturating_add(search_limit));
    (start..end).find(|x| !set.contains(x) && filter.query(*x).unwrap_or(false))
}

impl NoyAdversary for PublicHashAdversary {
    fn choose_set(&self, cfg: &GameConfig, _rng: &mut ChaCha8Rng) -> ElementSet {
        prefix_set(cfg.n)
    }

    fn next_query(&self, _: &ElementSet, _: &History, _: &GameConfig, _: &mut ChaCha8Rng) -> Option<u64> {
        None
    }

    fn finalize(&self, set: &ElementSet, history: &History, cfg: &GameConfig, rng: &mut ChaCha8Rng) -> Decision {
        match public_false_positive(set, self.params, cfg.universe, 0, self.search_limit) {
            Some(x) => Decision { bet: true, challenge: x },
            None => Decision {
                bet: false,
                challenge: fresh_element(cfg.universe, set, history, rng).unwrap_or(0),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationProbability {
    pub exact: f64,
    pub lower_bound: f64,
}

/// Probability that `n·k` uniform index draws cover all `m` bits, together
/// with the bound `max(0, 1 - m·e^{-nk/m})`.
///
/// Evaluated in `f64` when every inclusion–exclusion term is at most one
/// in magnitude, and in exact integer arithmetic otherwise.
pub fn saturation_probability(m: u64, n: u64, k: u64) -> Result<SaturationProbability> {
    if m == 0 || k == 0 {
        return Err(invalid("saturation probability needs m, k >= 1"));
    }
    let throws = n
        .checked_mul(k)
        .ok_or_else(|| invalid("n*k overflows"))?;
    let mf = m as f64;
    let lower_bound = (1.0 - mf * (-(throws as f64) / mf).exp()).max(0.0);
    let exact = if throws == 0 {
        0.0
    } else if mf * (-(throws as f64) / mf).exp() <= 1.0 {
        coverage_float(m, throws)
    } else {
        coverage_exact(m, throws)
    };
    Ok(SaturationProbability {
        exact: exact.clamp(0.0, 1.0),
        lower_bound,
    })
}

fn coverage_float(m: u64, throws: u64) -> f64 {
    let mf = m as f64;
    let tf = throws as f64;
    let mut sum = CompensatedSum::new();
    sum.add(1.0);
    let mut ln_binom = 0.0f64;
    for j in 1..m {
        ln_binom += ((m - j + 1) as f64).ln() - (j as f64).ln();
        let ln_term = ln_binom + tf * (1.0 - j as f64 / mf).ln();
        let term = ln_term.exp();
        if term == 0.0 {
            break;
        }
        sum.add(if j % 2 == 1 { -term } else { term });
    }
    sum.total()
}

fn coverage_exact(m: u64, throws: u64) -> f64 {
    let exp = u32::try_from(throws).expect("exact path only runs for n*k < m ln m");
    let mut pos = BigUint::zero();
    let mut neg = BigUint::zero();
    let mut binom = BigUint::one();
    for j in 0..=m {
        if j > 0 {
            binom = binom * (m - j + 1) / j;
        }
        let term = &binom * BigUint::from(m - j).pow(exp);
        if j % 2 == 0 {
            pos += term;
        } else {
            neg += term;
        }
    }
    ratio_to_f64(&(pos - neg), &BigUint::from(m).pow(exp))
}

fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = den.bits() as i64 - num.bits() as i64 + 64;
    let q = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        (num >> (-shift) as u64) / den
    };
    q.to_f64().unwrap_or(f64::MAX) * 2f64.powi(-shift as i32)
}

/// Closed-form expected BP profit of the saturation adversary, given the
/// saturation probability and the per-query false-positive probability of
/// a non-saturated filter.
pub fn expected_profit_formula(p_s: f64, p_fp: f64, t: u32, delta: f64) -> f64 {
    let bet = p_s + p_fp.powi(t as i32) * (1.0 - p_s);
    let win = (p_s + p_fp * (1.0 - p_s)) / delta;
    let loss = (1.0 - p_fp) * (1.0 - p_s) / (1.0 - delta);
    bet * (win - loss)
}

/// `expected_profit_formula` with `p_fp = 0`, i.e. `p_s²/δ - p_s(1-p_s)/(1-δ)`.
pub fn profit_lower_bound(p_s: f64, delta: f64) -> f64 {
    expected_profit_formula(p_s, 0.0, 1, delta)
}

/// Whether the saturation attack is profitable with `k` chosen by the
/// usual `(m/n)·ln 2` rule: `δ < 1 - m·e^{-nk/m}`.
pub fn resilience_threshold_with_optimal_k(m: u64, n: u64, delta: f64) -> bool {
    if n == 0 || m == 0 {
        return false;
    }
    let k = optimal_k(m as usize, n as usize) as u64;
    match saturation_probability(m, n, k) {
        Ok(p) => delta < p.lower_bound,
        Err(_) => false,
    }
}
