//! A toy learned Bloom filter: a score model acting as pre-filter, backed by
//! a classical filter over the members the model misses.
//!
//! The model memorizes a score per training element. Members score in
//! `[τ, 1]` and non-members in `[0, τ)`, except that each training score is
//! pushed to the wrong side of `τ` with a configurable probability. Elements
//! never seen in training score 0, so the model alone never accepts them.

use std::collections::HashMap;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::filter::{BloomFilter, FilterFactory};
use crate::params::{ElementSet, Universe};
use crate::private::{PerturbedSet, PrivacyParams};
use crate::stats::{derive_seed, rng_for, Proportion};

pub const DEFAULT_TAU: f64 = 0.5;

/// Labelled pairs: every `(x, true)` has `x ∈ S`, every `(x, false)` has `x ∉ S`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingDataset {
    pairs: Vec<(u64, bool)>,
}

impl TrainingDataset {
    pub fn pairs(&self) -> &[(u64, bool)] {
        &self.pairs
    }

    pub fn positives(&self) -> impl Iterator<Item = u64> + '_ {
        self.pairs.iter().filter(|(_, y)| *y).map(|(x, _)| *x)
    }

    pub fn negatives(&self) -> impl Iterator<Item = u64> + '_ {
        self.pairs.iter().filter(|(_, y)| !*y).map(|(x, _)| *x)
    }
}

/// Positives are all of `set`; negatives are `negatives_count` distinct
/// elements drawn uniformly from `U ∖ S`.
pub fn make_training_set(
    set: &ElementSet,
    universe: Universe,
    negatives_count: usize,
    seed: u64,
) -> Result<TrainingDataset> {
    universe.check_set(set)?;
    let outside = universe.size() - set.len() as u64;
    if negatives_count as u64 > outside {
        return Err(invalid(format!(
            "cannot sample {negatives_count} negatives from {outside} non-members"
        )));
    }
    let mut rng = rng_for(seed, "training", 0);
    let outside = usize::try_from(outside).map_err(|_| invalid("universe too large for sampling"))?;
    let mut ranks = index::sample(&mut rng, outside, negatives_count).into_vec();
    ranks.sort_unstable();

    // map the r-th non-member rank to its element by skipping members
    let mut pairs: Vec<(u64, bool)> = set.iter().map(|&x| (x, true)).collect();
    let mut members = set.iter().peekable();
    let mut skipped = 0u64;
    for r in ranks {
        let mut x = r as u64 + skipped;
        while let Some(&&s) = members.peek() {
            if s <= x {
                skipped += 1;
                x += 1;
                members.next();
            } else {
                break;
            }
        }
        pairs.push((x, false));
    }
    Ok(TrainingDataset { pairs })
}

/// Trains a memorized-score model with separate flip rates for members and
/// non-members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTrainer {
    pub tau: f64,
    pub member_noise: f64,
    pub non_member_noise: f64,
}

impl ThresholdTrainer {
    pub fn new(noise: f64) -> Self {
        Self {
            tau: DEFAULT_TAU,
            member_noise: noise,
            non_member_noise: noise,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(invalid(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        for noise in [self.member_noise, self.non_member_noise] {
            if !(0.0..0.5).contains(&noise) {
                return Err(invalid(format!("noise must lie in [0, 1/2), got {noise}")));
            }
        }
        Ok(())
    }

    pub fn train(&self, data: &TrainingDataset, seed: u64) -> Result<LearningModel> {
        self.validate()?;
        let tau = self.tau;
        let mut rng = rng_for(seed, "model", 0);
        let mut scores = HashMap::with_capacity(data.pairs.len());
        let mut false_pos = Proportion::default();
        let mut false_neg = Proportion::default();
        for &(x, label) in &data.pairs {
            let noise = if label { self.member_noise } else { self.non_member_noise };
            let flipped = rng.gen_bool(noise);
            let high = label != flipped;
            let score = if high {
                rng.gen_range(tau..=1.0)
            } else {
                rng.gen_range(0.0..tau)
            };
            scores.insert(x, score);
            if label {
                false_neg.record(!high);
            } else {
                false_pos.record(high);
            }
        }
        Ok(LearningModel {
            scores,
            tau,
            eps_p: claimed_rate(false_pos, self.non_member_noise),
            eps_n: claimed_rate(false_neg, self.member_noise),
            trainer: *self,
            seed,
        })
    }
}

/// Measured training rate plus three standard errors of the configured noise.
fn claimed_rate(observed: Proportion, noise: f64) -> f64 {
    if observed.trials == 0 {
        return noise;
    }
    let slack = 3.0 * (noise * (1.0 - noise) / observed.trials as f64).sqrt();
    (observed.point() + slack).min(1.0)
}

pub fn train_threshold_model(data: &TrainingDataset, noise: f64, seed: u64) -> Result<LearningModel> {
    ThresholdTrainer::new(noise).train(data, seed)
}

#[derive(Debug, Clone)]
pub struct LearningModel {
    scores: HashMap<u64, f64>,
    tau: f64,
    eps_p: f64,
    eps_n: f64,
    trainer: ThresholdTrainer,
    seed: u64,
}

/// Everything needed to retrain a model bit-for-bit from its training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub tau: f64,
    pub eps_p: f64,
    pub eps_n: f64,
    pub noise: f64,
    pub non_member_noise: f64,
    pub seed: u64,
}

impl LearningModel {
    pub fn score(&self, x: u64) -> f64 {
        self.scores.get(&x).copied().unwrap_or(0.0)
    }

    pub fn accepts(&self, x: u64) -> bool {
        self.score(x) >= self.tau
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Claimed bound on `Pr[L(x) ≥ τ]` for non-members.
    pub fn eps_p(&self) -> f64 {
        self.eps_p
    }

    /// Claimed bound on `Pr[L(x) < τ]` for members.
    pub fn eps_n(&self) -> f64 {
        self.eps_n
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        ModelSnapshot {
            tau: self.tau,
            eps_p: self.eps_p,
            eps_n: self.eps_n,
            noise: self.trainer.member_noise,
            non_member_noise: self.trainer.non_member_noise,
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.snapshot()).expect("snapshot serializes")
    }

    pub fn restore(snapshot: &ModelSnapshot, data: &TrainingDataset) -> Result<Self> {
        let trainer = ThresholdTrainer {
            tau: snapshot.tau,
            member_noise: snapshot.noise,
            non_member_noise: snapshot.non_member_noise,
        };
        trainer.train(data, snapshot.seed)
    }
}

#[derive(Debug, Clone)]
pub struct LearnedFilter {
    model: LearningModel,
    backup: BloomFilter,
    backup_set: ElementSet,
}

impl LearnedFilter {
    pub fn model(&self) -> &LearningModel {
        &self.model
    }

    pub fn backup(&self) -> &BloomFilter {
        &self.backup
    }

    /// `{x ∈ S : L(x) < τ}`.
    pub fn backup_set(&self) -> &ElementSet {
        &self.backup_set
    }

    pub fn query(&self, x: u64) -> Result<bool> {
        self.backup.universe().check(x)?;
        Ok(self.model.accepts(x) || self.backup.query(x)?)
    }
}

/// Builds the backup filter over the members the model rejects.
pub fn learned_build<F: FilterFactory + ?Sized>(
    set: &ElementSet,
    factory: &F,
    model: LearningModel,
    seed: u64,
) -> Result<LearnedFilter> {
    let backup_set: ElementSet = set.iter().copied().filter(|&x| !model.accepts(x)).collect();
    let backup = factory.build(&backup_set, derive_seed(seed, "backup", 0))?;
    Ok(LearnedFilter {
        model,
        backup,
        backup_set,
    })
}

pub fn learned_query(filter: &LearnedFilter, x: u64) -> Result<bool> {
    filter.query(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnedConfig {
    /// Requested number of negatives; capped by the available non-members.
    pub negatives: usize,
    pub trainer: ThresholdTrainer,
}

#[derive(Debug, Clone)]
pub struct LearnedPipeline {
    pub filter: LearnedFilter,
    pub training: TrainingDataset,
}

/// Training-set generation, model training and backup construction, all
/// driven by `set` and `seed` alone.
pub fn learned_pipeline<F: FilterFactory + ?Sized>(
    set: &ElementSet,
    factory: &F,
    config: &LearnedConfig,
    seed: u64,
) -> Result<LearnedPipeline> {
    let universe = factory.universe();
    let available = (universe.size() - set.len() as u64).min(config.negatives as u64) as usize;
    let training = make_training_set(set, universe, available, derive_seed(seed, "dataset", 0))?;
    let model = config.trainer.train(&training, derive_seed(seed, "train", 0))?;
    let filter = learned_build(set, factory, model, seed)?;
    Ok(LearnedPipeline { filter, training })
}

#[derive(Debug, Clone)]
pub struct PrivateLearned {
    pub pipeline: LearnedPipeline,
    pub perturbed: PerturbedSet,
}

/// Perturbs `set` first; every later stage sees only `S'`.
pub fn private_learned_build<F: FilterFactory + ?Sized>(
    set: &ElementSet,
    factory: &F,
    privacy: &PrivacyParams,
    config: &LearnedConfig,
    seed: u64,
) -> Result<PrivateLearned> {
    let perturbed = privacy.perturb(set, factory.universe(), derive_seed(seed, "perturb", 0))?;
    let pipeline = learned_pipeline(&perturbed.perturbed, factory, config, derive_seed(seed, "pipeline", 0))?;
    Ok(PrivateLearned { pipeline, perturbed })
}
