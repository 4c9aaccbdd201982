//! One function per experiment; each returns its metric columns in the
//! order declared by [`Experiment::metrics`].

use advbloom::filic::{
    ab_to_filic_adversary, estimate_advantage, AdvantageReport, ConstantAdversary, FilicAdversary, IdentityDistinguisher,
    KeyReadingAdversary, OracleBudget, PublicCollisionAdversary,
};
use advbloom::games::{
    estimate_ab, estimate_bp, expected_profit_formula, profit_lower_bound, resilience_threshold_with_optimal_k,
    saturation_probability, GameConfig, PublicHashAdversary, RandomAdversary, SaturationAdversary,
};
use advbloom::params::optimal_k;
use advbloom::private::{build_private_filter, dp_audit, expected_cardinality, expected_fnr, expected_fpr, privacy_budget, Mechanism, PrivacyParams};
use advbloom::stats::{derive_seed, rng_for, CompensatedSum, Proportion};
use advbloom::{Construction, ElementSet, Error, FilterFactory, FilterParams, FilterSpec, HashMode, Result, Universe};
use rand::seq::index;
use rand::Rng;

use crate::config::{Experiment, Point, Value};

pub fn run_point(experiment: Experiment, point: &Point, trials: u64, seed: u64) -> Result<Vec<Value>> {
    match experiment {
        Experiment::FprEstimate => fpr_estimate(point, trials, seed),
        Experiment::PrivacyAudit => privacy_audit(point, trials, seed),
        Experiment::BpAttack => bp_attack(point, trials, seed),
        Experiment::AbGame => ab_game(point, trials, seed),
        Experiment::FilicDistinguish => filic_distinguish(point, trials, seed),
        Experiment::SaturationScan => saturation_scan(point, trials, seed),
        Experiment::ErrorAnalysis => error_analysis(point, trials, seed),
    }
}

fn usize_of(point: &Point, key: &str) -> Result<usize> {
    usize::try_from(point.int(key)).map_err(|_| Error::InvalidParameter(format!("{key} too large")))
}

fn params(point: &Point) -> Result<FilterParams> {
    FilterParams::new(usize_of(point, "m")?, usize_of(point, "k")?, usize_of(point, "n")?)
}

fn universe(point: &Point) -> Result<Universe> {
    Universe::new(point.int("u"))
}

fn construction(name: &str) -> Construction {
    match name {
        "standard" => Construction::Standard,
        "keyed-prf" => Construction::KeyedPrf,
        "true-random" => Construction::TrueRandom,
        "ny" => Construction::Ny {
            inner: HashMode::Public,
            insertable: false,
            leak_key: false,
        },
        "key-leaking-ny" => Construction::Ny {
            inner: HashMode::Public,
            insertable: true,
            leak_key: true,
        },
        other => unreachable!("choice validated at parse time: {other}"),
    }
}

fn random_set(universe: Universe, n: usize, seed: u64) -> Result<ElementSet> {
    let u = usize::try_from(universe.size()).map_err(|_| Error::InvalidParameter("universe too large".into()))?;
    if n > u {
        return Err(Error::InvalidParameter(format!("set size {n} exceeds universe size {u}")));
    }
    let mut rng = rng_for(seed, "set", 0);
    Ok(index::sample(&mut rng, u, n).into_iter().map(|x| x as u64).collect())
}

fn closed_form_fpr(p: &FilterParams, n: f64) -> f64 {
    expected_fpr(p, n)
}

fn fpr_estimate(point: &Point, trials: u64, seed: u64) -> Result<Vec<Value>> {
    let params = params(point)?;
    let universe = universe(point)?;
    let spec = FilterSpec::new(params, universe, construction(point.text("construction")));
    let per_build = point.int("queries-per-build").max(1);
    if universe.size() <= params.n() as u64 {
        return Err(Error::InvalidParameter("no non-members to query".into()));
    }
    let builds = trials.div_ceil(per_build);
    let mut hits = Proportion::default();
    for b in 0..builds {
        let build_seed = derive_seed(seed, "build", b);
        let set = random_set(universe, params.n(), build_seed)?;
        let filter = spec.build(&set, build_seed)?;
        let mut rng = rng_for(build_seed, "queries", 0);
        let count = per_build.min(trials - b * per_build);
        for _ in 0..count {
            let x = loop {
                let x = rng.gen_range(0..universe.size());
                if !set.contains(&x) {
                    break x;
                }
            };
            hits.record(filter.query(x)?);
        }
    }
    let (lo, hi) = hits.wilson99();
    Ok(vec![
        Value::Int(hits.trials),
        Value::Int(hits.successes),
        Value::Float(hits.point()),
        Value::Float(lo),
        Value::Float(hi),
        Value::Float(closed_form_fpr(&params, params.n() as f64)),
    ])
}

fn mechanism(name: &str) -> Mechanism {
    match name {
        "mangat" => Mechanism::Mangat,
        "warner" => Mechanism::Warner,
        other => unreachable!("choice validated at parse time: {other}"),
    }
}

/// Infinite budgets (Mangat at `p = 1`) are reported as empty cells.
fn finite_or_empty(v: Option<f64>) -> Value {
    match v {
        Some(v) if v.is_finite() => Value::Float(v),
        _ => Value::Empty,
    }
}

fn privacy_audit(point: &Point, trials: u64, seed: u64) -> Result<Vec<Value>> {
    let privacy = PrivacyParams::new(mechanism(point.text("mode")), point.float("p"))?;
    let universe = universe(point)?;
    let s = point.int("s");
    if s > universe.size() {
        return Err(Error::InvalidParameter(format!("set size {s} exceeds universe size")));
    }
    let set: ElementSet = (0..s).collect();
    let report = dp_audit(&privacy, universe, &set, point.int("x"), trials, seed)?;
    let budget = privacy_budget(&privacy);
    Ok(vec![
        finite_or_empty(Some(budget.epsilon)),
        finite_or_empty(budget.epsilon_prime),
        finite_or_empty(Some(report.claimed_ratio)),
        Value::Float(report.ratio_point),
        Value::Float(report.ratio_ci.0),
        Value::Float(report.ratio_ci.1),
        Value::Text(report.verdict.name().to_string()),
    ])
}

fn game_config(point: &Point, n: usize, t: usize, delta: f64) -> Result<GameConfig> {
    GameConfig::new(t, n, universe(point)?, delta)
}

fn bp_attack(point: &Point, trials: u64, seed: u64) -> Result<Vec<Value>> {
    let params = params(point)?;
    let t = usize_of(point, "t")?;
    let delta = point.float("delta");
    let cfg = game_config(point, params.n(), t, delta)?;
    let spec = FilterSpec::new(params, cfg.universe, construction(point.text("construction")));
    let est = estimate_bp(&spec, &SaturationAdversary, &cfg, trials as usize, seed)?;
    let ps = saturation_probability(params.m() as u64, params.n() as u64, params.k() as u64)?;
    let p_fp = est.unsaturated_positive_rate.point();
    let t32 = u32::try_from(t).unwrap_or(u32::MAX);
    Ok(vec![
        Value::Float(est.profit.mean),
        Value::Float(est.profit.std_err),
        Value::Float(est.profit.ci_lo),
        Value::Float(est.profit.ci_hi),
        Value::Int(est.bets),
        Value::Float(est.wins as f64 / trials as f64),
        Value::Float(est.saturated.point()),
        Value::Float(p_fp),
        Value::Float(ps.exact),
        Value::Float(ps.lower_bound),
        Value::Float(profit_lower_bound(ps.exact, delta)),
        Value::Float(expected_profit_formula(ps.exact, p_fp, t32, delta)),
    ])
}

fn ab_game(point: &Point, trials: u64, seed: u64) -> Result<Vec<Value>> {
    let params = params(point)?;
    let t = usize_of(point, "t")?;
    let cfg = game_config(point, params.n(), t, 0.5)?;
    let spec = FilterSpec::new(params, cfg.universe, construction(point.text("construction")));
    let trials = trials as usize;
    let est = match point.text("adversary") {
        "random" => estimate_ab(&spec, &RandomAdversary { queries: t }, &cfg, trials, seed)?,
        "saturation" => estimate_ab(&spec, &SaturationAdversary, &cfg, trials, seed)?,
        "public-hash" => {
            let adv = PublicHashAdversary {
                params,
                search_limit: 1 << 20,
            };
            estimate_ab(&spec, &adv, &cfg, trials, seed)?
        }
        other => unreachable!("choice validated at parse time: {other}"),
    };
    Ok(vec![
        Value::Float(est.win_rate()),
        Value::Float(est.ci.0),
        Value::Float(est.ci.1),
        Value::Int(est.forfeits),
        Value::Float(est.saturated as f64 / trials as f64),
        Value::Float(closed_form_fpr(&params, params.n() as f64)),
    ])
}

fn filic_distinguish(point: &Point, trials: u64, seed: u64) -> Result<Vec<Value>> {
    let params = params(point)?;
    let universe = universe(point)?;
    if params.n() as u64 > universe.size() {
        return Err(Error::InvalidParameter("n exceeds universe size".into()));
    }
    let spec = FilterSpec::new(params, universe, construction(point.text("filter")));
    let budget = OracleBudget::new(usize_of(point, "q_u")?, usize_of(point, "q_t")?, usize_of(point, "q_v")?);
    let trials = trials as usize;
    let run = |adv: &dyn FilicAdversary| -> Result<AdvantageReport> {
        estimate_advantage(adv, &spec, &IdentityDistinguisher, budget, trials, seed)
    };
    let cfg = GameConfig::new(0, params.n(), universe, 0.5)?;
    let report = match point.text("adversary") {
        "key-reading" => run(&KeyReadingAdversary {
            params,
            n: params.n(),
            search_limit: universe.size(),
        })?,
        "public-collision" => run(&PublicCollisionAdversary {
            params,
            n: params.n(),
            search_limit: universe.size(),
        })?,
        "constant" => run(&ConstantAdversary(true))?,
        "ab-random" => {
            let (adv, _) = ab_to_filic_adversary(RandomAdversary { queries: usize::MAX }, cfg, budget.q_t);
            run(&adv)?
        }
        "ab-saturation" => {
            let (adv, _) = ab_to_filic_adversary(SaturationAdversary, cfg, budget.q_t);
            run(&adv)?
        }
        other => unreachable!("choice validated at parse time: {other}"),
    };
    Ok(vec![
        Value::Float(report.real.point()),
        Value::Float(report.ideal.point()),
        Value::Float(report.advantage),
        Value::Float(report.ci_lo),
        Value::Float(report.ci_hi),
    ])
}

fn saturation_scan(point: &Point, trials: u64, seed: u64) -> Result<Vec<Value>> {
    let (m, n, k) = (point.int("m"), point.int("n"), point.int("k"));
    let delta = point.float("delta");
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let ps = saturation_probability(m, n, k)?;
    let params = FilterParams::new(usize_of(point, "m")?, usize_of(point, "k")?, usize_of(point, "n")?)?;
    let universe = Universe::new(n.max(1))?;
    let spec = FilterSpec::new(params, universe, Construction::TrueRandom);
    let set: ElementSet = (0..n).collect();
    let mut freq = Proportion::default();
    for i in 0..trials {
        freq.record(spec.build(&set, derive_seed(seed, "build", i))?.is_saturated());
    }
    let (lo, hi) = freq.wilson99();
    let ok = if n == 0 { 1 } else { optimal_k(params.m(), params.n()) as u64 };
    Ok(vec![
        Value::Float(ps.exact),
        Value::Float(ps.lower_bound),
        Value::Float(freq.point()),
        Value::Float(lo),
        Value::Float(hi),
        Value::Float(profit_lower_bound(ps.exact, delta)),
        Value::Int(ok),
        Value::Bool(resilience_threshold_with_optimal_k(m, n, delta)),
    ])
}

fn error_analysis(point: &Point, trials: u64, seed: u64) -> Result<Vec<Value>> {
    let s = usize_of(point, "s")?;
    let universe = universe(point)?;
    let params = FilterParams::new(usize_of(point, "m")?, usize_of(point, "k")?, s)?;
    let spec = FilterSpec::new(params, universe, construction(point.text("construction")));
    let privacy = match point.text("mode") {
        "none" => None,
        mode => Some(PrivacyParams::new(mechanism(mode), point.float("p"))?),
    };
    let u = universe.size();

    let mut card = CompensatedSum::new();
    let mut fnr = Proportion::default();
    let mut fpr = Proportion::default();
    let mut nonmember = Proportion::default();
    for i in 0..trials {
        let trial_seed = derive_seed(seed, "build", i);
        let set = random_set(universe, s, trial_seed)?;
        let (filter, effective) = match &privacy {
            Some(pp) => {
                let pf = build_private_filter(&set, &spec, pp, trial_seed)?;
                (pf.filter, pf.perturbed.perturbed)
            }
            None => (spec.build(&set, trial_seed)?, set.clone()),
        };
        card.add(effective.len() as f64);
        for &x in &set {
            fnr.record(!filter.query(x)?);
        }
        let mut rng = rng_for(trial_seed, "queries", 0);
        for _ in 0..100 {
            let x = rng.gen_range(0..u);
            let hit = filter.query(x)?;
            if !set.contains(&x) {
                nonmember.record(hit);
            }
            if !effective.contains(&x) {
                fpr.record(hit);
            }
        }
    }
    let (budget, n_eff, fnr_expected) = match &privacy {
        Some(pp) => (
            Some(privacy_budget(pp)),
            expected_cardinality(pp.mode(), s as u64, u, pp.p()),
            expected_fnr(pp.mode(), pp.p()),
        ),
        None => (None, s as f64, 0.0),
    };
    Ok(vec![
        finite_or_empty(budget.map(|b| b.epsilon)),
        finite_or_empty(budget.and_then(|b| b.epsilon_prime)),
        Value::Float(n_eff),
        Value::Float(card.total() / trials as f64),
        Value::Float(fnr_expected),
        Value::Float(fnr.point()),
        Value::Float(expected_fpr(&params, n_eff)),
        Value::Float(fpr.point()),
        Value::Float(nonmember.point()),
    ])
}
