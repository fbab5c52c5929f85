//! Threshold-classifier evaluation over large sampled pair sets.
//!
//! A similarity measure becomes a classifier `score > t`. Thresholds are tuned
//! on validation pairs over a uniform grid, and test pairs are summarized by
//! their confusion counts, classification rate and F1 (similar = positive).
//!
//! Pairs are drawn in fixed-size chunks, each from its own seeded ChaCha
//! stream, so results do not depend on scheduling.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{DataError, LabeledItemSet, PairIndex, PairSampler};
use crate::measures::{Family, Similarity};
use crate::par::{self, Execution};

/// Pairs drawn per rng stream.
pub const PAIR_CHUNK: usize = 4096;

// rng stream tags
pub(crate) const STREAM_TUNE: u64 = 1;
pub(crate) const STREAM_EVAL: u64 = 2;
pub(crate) const STREAM_VALIDATION: u64 = 3;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("measure expects {expected} features, item set has {found}")]
    FeatureCount { expected: usize, found: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    pub n_triplets: usize,
    /// Probability that a sampled pair is a similar pair.
    pub positive_fraction: f64,
    pub seed: u64,
    /// Number of uniformly spaced candidate thresholds on `[0, 1]`.
    pub threshold_grid: usize,
    pub execution: Execution,
}

impl EvalConfig {
    pub fn new(n_triplets: usize, seed: u64) -> Self {
        EvalConfig {
            n_triplets,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.n_triplets == 0 {
            return Err(EvalError::InvalidConfig("n_triplets must be >= 1".into()));
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return Err(EvalError::InvalidConfig(format!(
                "positive_fraction must lie in (0, 1), got {}",
                self.positive_fraction
            )));
        }
        if self.threshold_grid < 2 {
            return Err(EvalError::InvalidConfig("threshold grid needs at least 2 points".into()));
        }
        Ok(())
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_triplets: 100_000,
            positive_fraction: 0.5,
            seed: 0,
            threshold_grid: 1001,
            execution: Execution::default(),
        }
    }
}

/// Confusion counts and derived metrics of a threshold classifier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalResult {
    pub classification_rate: f64,
    pub f1: f64,
    pub threshold: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl EvalResult {
    pub fn from_counts(tp: u64, fp: u64, tn: u64, fn_: u64, threshold: f64) -> Self {
        let n = tp + fp + tn + fn_;
        let classification_rate = if n == 0 { 0.0 } else { (tp + tn) as f64 / n as f64 };
        let f1_den = 2 * tp + fp + fn_;
        let f1 = if f1_den == 0 { 0.0 } else { (2 * tp) as f64 / f1_den as f64 };
        EvalResult {
            classification_rate,
            f1,
            threshold,
            tp,
            fp,
            tn,
            fn_,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `family=<tag> cr=<float> f1=<float> t=<float> n=<int> seed=<int>`
    pub fn result_line(&self, family: Family, seed: u64) -> String {
        format!(
            "family={} cr={:.6} f1={:.6} t={:.6} n={} seed={}",
            family,
            self.classification_rate,
            self.f1,
            self.threshold,
            self.total(),
            seed
        )
    }
}

impl fmt::Display for EvalResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cr={:.6} f1={:.6} t={:.6} tp={} fp={} tn={} fn={}",
            self.classification_rate, self.f1, self.threshold, self.tp, self.fp, self.tn, self.fn_
        )
    }
}

/// Uniform candidate thresholds `k / (len - 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdGrid {
    points: Vec<f64>,
}

impl ThresholdGrid {
    pub fn uniform(len: usize) -> Self {
        assert!(len >= 2, "threshold grid needs at least 2 points");
        let last = (len - 1) as f64;
        ThresholdGrid {
            points: (0..len).map(|k| k as f64 / last).collect(),
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of grid points strictly below `score`; the pair is predicted
    /// similar at threshold index `j` iff `j < bucket(score)`.
    pub fn bucket(&self, score: f64) -> usize {
        self.points.partition_point(|&t| t < score)
    }

    pub fn histogram(&self) -> ScoreHistogram {
        ScoreHistogram {
            similar: vec![0; self.len() + 1],
            dissimilar: vec![0; self.len() + 1],
        }
    }
}

/// Pair counts per grid bucket, split by label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScoreHistogram {
    similar: Vec<u64>,
    dissimilar: Vec<u64>,
}

impl ScoreHistogram {
    pub fn add(&mut self, bucket: usize, similar: bool) {
        if similar {
            self.similar[bucket] += 1;
        } else {
            self.dissimilar[bucket] += 1;
        }
    }

    pub fn merge(&mut self, other: &ScoreHistogram) {
        for (a, b) in self.similar.iter_mut().zip(&other.similar) {
            *a += b;
        }
        for (a, b) in self.dissimilar.iter_mut().zip(&other.dissimilar) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.similar.iter().chain(&self.dissimilar).sum()
    }

    /// Grid index with the most correct predictions, the smallest on ties,
    /// together with that count.
    pub fn best_index(&self) -> (usize, u64) {
        let n_thresholds = self.similar.len() - 1;
        // at index 0: similar pairs in buckets >= 1 are correct, dissimilar in bucket 0
        let mut tp: u64 = self.similar[1..].iter().sum();
        let mut tn: u64 = self.dissimilar[0];
        let (mut best, mut best_correct) = (0, tp + tn);
        for j in 1..n_thresholds {
            tp -= self.similar[j];
            tn += self.dissimilar[j];
            if tp + tn > best_correct {
                best = j;
                best_correct = tp + tn;
            }
        }
        (best, best_correct)
    }
}

fn chunk_rng(seed: u64, stream: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream << 40) | chunk as u64);
    rng
}

/// Deterministic sample of `n` labeled pairs drawn from `stream`.
pub fn sample_pairs(
    sampler: &PairSampler<'_>,
    n: usize,
    positive_fraction: f64,
    seed: u64,
    stream: u64,
    exec: Execution,
) -> Vec<PairIndex> {
    let n_chunks = n.div_ceil(PAIR_CHUNK);
    par::map_indices(n_chunks, exec, |c| {
        let len = PAIR_CHUNK.min(n - c * PAIR_CHUNK);
        sampler.sample_indices(len, positive_fraction, &mut chunk_rng(seed, stream, c))
    })
    .into_iter()
    .flatten()
    .collect()
}

fn check_feature_count<M: Similarity + ?Sized>(measure: &M, items: &LabeledItemSet) -> Result<(), EvalError> {
    match measure.feature_count() {
        Some(m) if m != items.feature_count() => Err(EvalError::FeatureCount {
            expected: m,
            found: items.feature_count(),
        }),
        _ => Ok(()),
    }
}

/// Histogram of a measure's scores over a fixed pair list.
pub fn histogram_of<M: Similarity + ?Sized>(
    measure: &M,
    items: &LabeledItemSet,
    pairs: &[PairIndex],
    grid: &ThresholdGrid,
    exec: Execution,
) -> ScoreHistogram {
    let it = items.items();
    let parts = par::map_chunks(pairs, PAIR_CHUNK, exec, |_, chunk| {
        let mut h = grid.histogram();
        for p in chunk {
            let s = measure.similarity(&it[p.first].features, &it[p.second].features);
            h.add(grid.bucket(s), p.similar);
        }
        h
    });
    let mut total = grid.histogram();
    for h in &parts {
        total.merge(h);
    }
    total
}

/// Grid threshold maximizing the classification rate on sampled validation
/// pairs; ties go to the smallest threshold.
pub fn tune_threshold<M: Similarity + ?Sized>(
    measure: &M,
    val_items: &LabeledItemSet,
    cfg: &EvalConfig,
) -> Result<f64, EvalError> {
    cfg.validate()?;
    check_feature_count(measure, val_items)?;
    let sampler = PairSampler::new(val_items)?;
    let grid = ThresholdGrid::uniform(cfg.threshold_grid);
    let n_chunks = cfg.n_triplets.div_ceil(PAIR_CHUNK);
    let it = val_items.items();
    let parts = par::map_indices(n_chunks, cfg.execution, |c| {
        let len = PAIR_CHUNK.min(cfg.n_triplets - c * PAIR_CHUNK);
        let mut rng = chunk_rng(cfg.seed, STREAM_TUNE, c);
        let mut h = grid.histogram();
        for _ in 0..len {
            let p = sampler.sample_pair(cfg.positive_fraction, &mut rng);
            let s = measure.similarity(&it[p.first].features, &it[p.second].features);
            h.add(grid.bucket(s), p.similar);
        }
        h
    });
    let mut total = grid.histogram();
    for h in &parts {
        total.merge(h);
    }
    let (best, _) = total.best_index();
    Ok(grid.points()[best])
}

/// Confusion counts of `score > threshold` on sampled test pairs.
pub fn evaluate<M: Similarity + ?Sized>(
    measure: &M,
    threshold: f64,
    test_items: &LabeledItemSet,
    cfg: &EvalConfig,
) -> Result<EvalResult, EvalError> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(EvalError::InvalidThreshold(threshold));
    }
    check_feature_count(measure, test_items)?;
    let sampler = PairSampler::new(test_items)?;
    let n_chunks = cfg.n_triplets.div_ceil(PAIR_CHUNK);
    let it = test_items.items();
    let parts = par::map_indices(n_chunks, cfg.execution, |c| {
        let len = PAIR_CHUNK.min(cfg.n_triplets - c * PAIR_CHUNK);
        let mut rng = chunk_rng(cfg.seed, STREAM_EVAL, c);
        let mut counts = [0u64; 4];
        for _ in 0..len {
            let p = sampler.sample_pair(cfg.positive_fraction, &mut rng);
            let predicted = measure.similarity(&it[p.first].features, &it[p.second].features) > threshold;
            let slot = match (predicted, p.similar) {
                (true, true) => 0,
                (true, false) => 1,
                (false, false) => 2,
                (false, true) => 3,
            };
            counts[slot] += 1;
        }
        counts
    });
    let c = parts.iter().fold([0u64; 4], |mut acc, p| {
        for (a, b) in acc.iter_mut().zip(p) {
            *a += b;
        }
        acc
    });
    Ok(EvalResult::from_counts(c[0], c[1], c[2], c[3], threshold))
}
