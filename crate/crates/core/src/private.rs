//! Randomized-response set perturbation and differentially private filters.
//!
//! Both mechanisms flip one independent coin per universe element, so the
//! universe is enumerated explicitly and capped at [`ENUMERATION_CAP`].
//!
//! - **Mangat**: `S' ← S`, then each `x ∉ S` joins with probability `1 − p`.
//!   One-sided: `S ⊆ S'`. Budget `(ln 1/(1−p), ln(1−p), 0)`, asymmetric.
//! - **Warner**: each `x ∈ S` is kept with probability `p`, each `x ∉ S`
//!   joins with probability `1 − p`. Budget `(ln p/(1−p), 0)`, symmetric.
//!
//! A private filter is the base construction applied to `S'`; queries are
//! unchanged.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::filter::{BloomFilter, FilterFactory};
use crate::params::{ElementSet, FilterParams, Universe};
use crate::stats::{derive_seed, rng_for, Proportion, Z99};

/// Largest universe the perturbation routines will enumerate.
pub const ENUMERATION_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Mangat,
    Warner,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Mangat => "mangat",
            Mechanism::Warner => "warner",
        }
    }
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mangat" => Ok(Mechanism::Mangat),
            "warner" => Ok(Mechanism::Warner),
            other => Err(invalid(format!("unknown mechanism {other:?}"))),
        }
    }
}

/// Mechanism plus truthful-answer probability `p`.
///
/// Mangat accepts `p ∈ (0, 1]`, where `p = 1` adds nothing (and has an
/// unbounded budget). Warner requires `p ∈ (1/2, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    mode: Mechanism,
    p: f64,
}

impl PrivacyParams {
    pub fn new(mode: Mechanism, p: f64) -> Result<Self> {
        match mode {
            Mechanism::Mangat => check_mangat_p(p)?,
            Mechanism::Warner => check_warner_p(p)?,
        }
        Ok(Self { mode, p })
    }

    pub fn mangat(p: f64) -> Result<Self> {
        Self::new(Mechanism::Mangat, p)
    }

    pub fn warner(p: f64) -> Result<Self> {
        Self::new(Mechanism::Warner, p)
    }

    pub fn mode(&self) -> Mechanism {
        self.mode
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn perturb(&self, set: &ElementSet, universe: Universe, seed: u64) -> Result<PerturbedSet> {
        match self.mode {
            Mechanism::Mangat => mangat_perturb(set, universe, self.p, seed),
            Mechanism::Warner => warner_perturb(set, universe, self.p, seed),
        }
    }

    /// The mechanism as a plain set-to-set map, for auditing.
    pub fn as_mechanism(&self, universe: Universe) -> impl Fn(&ElementSet, u64) -> Result<ElementSet> + Sync + '_ {
        move |set, seed| Ok(self.perturb(set, universe, seed)?.perturbed)
    }
}

fn check_mangat_p(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("mangat p must lie in (0, 1], got {p}")))
    }
}

fn check_warner_p(p: f64) -> Result<()> {
    if p > 0.5 && p < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("warner p must lie in (1/2, 1), got {p}")))
    }
}

/// `(ε, ε′, δ)`. For symmetric budgets `epsilon_prime` is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub epsilon_prime: Option<f64>,
    pub delta: f64,
    pub symmetric: bool,
}

pub fn privacy_budget(params: &PrivacyParams) -> PrivacyBudget {
    let p = params.p;
    match params.mode {
        Mechanism::Mangat => PrivacyBudget {
            epsilon: (1.0 / (1.0 - p)).ln(),
            epsilon_prime: Some((1.0 - p).ln()),
            delta: 0.0,
            symmetric: false,
        },
        Mechanism::Warner => PrivacyBudget {
            epsilon: (p / (1.0 - p)).ln(),
            epsilon_prime: None,
            delta: 0.0,
            symmetric: true,
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedSet {
    pub original_size: usize,
    pub perturbed: ElementSet,
    pub mode: Mechanism,
    pub p: f64,
}

/// `|A ∪ B| − |A ∩ B|`, i.e. the size of the symmetric difference.
pub fn jaccard_distance(a: &ElementSet, b: &ElementSet) -> usize {
    a.symmetric_difference(b).count()
}

fn check_enumerable(set: &ElementSet, universe: Universe) -> Result<()> {
    if universe.size() > ENUMERATION_CAP {
        return Err(Error::UniverseTooLarge {
            universe: universe.size(),
            cap: ENUMERATION_CAP,
        });
    }
    universe.check_set(set)
}

/// Coins are drawn in increasing element order, one per non-member.
pub fn mangat_perturb(set: &ElementSet, universe: Universe, p: f64, seed: u64) -> Result<PerturbedSet> {
    check_mangat_p(p)?;
    check_enumerable(set, universe)?;
    let mut rng = rng_for(seed, "mangat", 0);
    let mut perturbed = set.clone();
    for x in 0..universe.size() {
        if !set.contains(&x) && rng.gen_bool(1.0 - p) {
            perturbed.insert(x);
        }
    }
    Ok(PerturbedSet {
        original_size: set.len(),
        perturbed,
        mode: Mechanism::Mangat,
        p,
    })
}

/// Coins are drawn in increasing element order, one per universe element.
pub fn warner_perturb(set: &ElementSet, universe: Universe, p: f64, seed: u64) -> Result<PerturbedSet> {
    check_warner_p(p)?;
    check_enumerable(set, universe)?;
    let mut rng = rng_for(seed, "warner", 0);
    let perturbed = (0..universe.size())
        .filter(|x| {
            let keep = if set.contains(x) { p } else { 1.0 - p };
            rng.gen_bool(keep)
        })
        .collect();
    Ok(PerturbedSet {
        original_size: set.len(),
        perturbed,
        mode: Mechanism::Warner,
        p,
    })
}

/// Expected `|S'|` for a set of size `s` in a universe of size `u`.
///
/// Mangat: `s + (1 − p)(u − s)`. Warner: `p·s + (1 − p)(u − s)`, which follows
/// from the per-element coins. The shorter form `s + p(u − s) − (1 − p)s`
/// (which equals `p·u`) does not match the mechanism and is not used.
pub fn expected_cardinality(mode: Mechanism, s: u64, u: u64, p: f64) -> f64 {
    let (s, u) = (s as f64, u as f64);
    match mode {
        Mechanism::Mangat => s + (1.0 - p) * (u - s),
        Mechanism::Warner => p * s + (1.0 - p) * (u - s),
    }
}

/// `(1 − e^{−k·n_eff/m})^k`.
pub fn expected_fpr(params: &FilterParams, n_eff: f64) -> f64 {
    let k = params.k() as f64;
    (1.0 - (-k * n_eff / params.m() as f64).exp()).powf(k)
}

/// Probability that a member is missing from `S'`.
pub fn expected_fnr(mode: Mechanism, p: f64) -> f64 {
    match mode {
        Mechanism::Mangat => 0.0,
        Mechanism::Warner => 1.0 - p,
    }
}

#[derive(Debug, Clone)]
pub struct PrivateFilter {
    pub filter: BloomFilter,
    pub perturbed: PerturbedSet,
}

/// Perturbs `set` and hands `S'` to the base construction.
pub fn build_private_filter<F: FilterFactory + ?Sized>(
    set: &ElementSet,
    factory: &F,
    privacy: &PrivacyParams,
    seed: u64,
) -> Result<PrivateFilter> {
    let perturbed = privacy.perturb(set, factory.universe(), derive_seed(seed, "perturb", 0))?;
    let filter = factory.build(&perturbed.perturbed, derive_seed(seed, "filter", 0))?;
    Ok(PrivateFilter { filter, perturbed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Outcome of a per-element marginal audit.
///
/// `ratio_point = Pr[x ∈ M(S)] / Pr[x ∈ M(S_neighbor)]`, estimated from two
/// independent batches. `ratio_ci` divides the 99% Wilson bounds of the two
/// frequencies crosswise, so it is conservative.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub mode: Option<Mechanism>,
    pub p: Option<f64>,
    pub epsilon_claimed: f64,
    pub claimed_ratio: f64,
    pub ratio_point: f64,
    pub ratio_ci: (f64, f64),
    pub verdict: Verdict,
    #[serde(skip)]
    pub numerator: Proportion,
    #[serde(skip)]
    pub denominator: Proportion,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

fn marginal<M>(mechanism: &M, set: &ElementSet, x: u64, trials: u64, seed: u64, tag: &str) -> Result<Proportion>
where
    M: Fn(&ElementSet, u64) -> Result<ElementSet> + Sync + ?Sized,
{
    let hits: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|i| mechanism(set, derive_seed(seed, tag, i)).map(|out| out.contains(&x)))
        .collect::<Result<_>>()?;
    Ok(Proportion::from_bools(hits))
}

/// Audits `Pr[x ∈ M(a)] ≤ claimed_ratio · Pr[x ∈ M(b)]` empirically.
///
/// This checks one output event (membership of `x`), so it can refute a
/// claimed bound but never certify it. A zero denominator frequency yields
/// [`Verdict::Inconclusive`]; [`Verdict::Fail`] requires the whole ratio
/// interval to lie above the claim.
pub fn dp_audit_pair<M>(
    mechanism: &M,
    a: &ElementSet,
    b: &ElementSet,
    x: u64,
    claimed_ratio: f64,
    trials: u64,
    seed: u64,
) -> Result<AuditReport>
where
    M: Fn(&ElementSet, u64) -> Result<ElementSet> + Sync + ?Sized,
{
    if trials == 0 {
        return Err(invalid("audit needs at least one trial"));
    }
    let numerator = marginal(mechanism, a, x, trials, seed, "audit-input")?;
    let denominator = marginal(mechanism, b, x, trials, seed, "audit-neighbor")?;
    let (num_lo, num_hi) = numerator.wilson(Z99);
    let (den_lo, den_hi) = denominator.wilson(Z99);

    let (ratio_point, ratio_ci, verdict) = if denominator.successes == 0 || den_lo <= 0.0 {
        let point = if denominator.successes == 0 {
            0.0
        } else {
            numerator.point() / denominator.point()
        };
        // unbounded above; f64::MAX keeps the report finite
        (point, (0.0, f64::MAX), Verdict::Inconclusive)
    } else {
        let ci = (num_lo / den_hi, num_hi / den_lo);
        let verdict = if ci.0 > claimed_ratio * (1.0 + 1e-12) {
            Verdict::Fail
        } else {
            Verdict::Pass
        };
        (numerator.point() / denominator.point(), ci, verdict)
    };
    Ok(AuditReport {
        mode: None,
        p: None,
        epsilon_claimed: claimed_ratio.ln(),
        claimed_ratio,
        ratio_point,
        ratio_ci,
        verdict,
        numerator,
        denominator,
    })
}

/// Audits `privacy` on `set` against its neighbor differing in `x`:
/// `S ∖ {x}` when `x ∈ S` (bound `e^ε`), `S ∪ {x}` otherwise (bound `e^ε′`
/// for Mangat, `e^ε` for Warner).
pub fn dp_audit(
    privacy: &PrivacyParams,
    universe: Universe,
    set: &ElementSet,
    x: u64,
    trials: u64,
    seed: u64,
) -> Result<AuditReport> {
    universe.check(x)?;
    let budget = privacy_budget(privacy);
    let mut neighbor = set.clone();
    let claimed = if set.contains(&x) {
        neighbor.remove(&x);
        budget.epsilon.exp()
    } else {
        neighbor.insert(x);
        budget.epsilon_prime.unwrap_or(budget.epsilon).exp()
    };
    let mechanism = privacy.as_mechanism(universe);
    let mut report = dp_audit_pair(&mechanism, set, &neighbor, x, claimed, trials, seed)?;
    report.mode = Some(privacy.mode);
    report.p = Some(privacy.p);
    Ok(report)
}
