//! Mini-batch training with validation early stopping.
//!
//! Each iteration samples a balanced batch of similar/dissimilar pairs,
//! computes the contrastive objective and takes one projected optimizer step.
//! Every `eval_every` iterations the current measure is scored on a fixed
//! sample of validation pairs (threshold tuned on the fly); the best measure
//! seen so far is kept and returned, never the last iterate.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{DataError, LabeledItemSet, PairIndex, PairSampler};
use crate::eval::{self, ThresholdGrid, STREAM_VALIDATION};
use crate::loss::{batch_objective_with, LossConfig, LossError};
use crate::measures::{BaselineParams, Family, Measure, MeasureError, TverskyParams};
use crate::optim::{OptimError, Optimizer, OptimizerConfig};
use crate::par::Execution;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("non-finite objective {value} at iteration {iteration}")]
    NonFiniteObjective { iteration: usize, value: f64 },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("train and validation sets disagree on feature count ({train} vs {val})")]
    FeatureMismatch { train: usize, val: usize },
}

/// What a validation evaluation is compared against when counting toward
/// early stopping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StopComparator {
    /// Below the best accuracy seen so far by more than the delta.
    #[default]
    Best,
    /// Below the previous evaluation by more than the delta.
    Previous,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub max_iterations: usize,
    pub batch_size: usize,
    pub loss: LossConfig,
    pub optimizer: OptimizerConfig,
    /// Symmetric Tversky (`beta` tied to `alpha`). Ignored for baselines.
    pub symmetric: bool,
    pub eval_every: usize,
    pub patience_evals: usize,
    pub patience_delta: f64,
    pub comparator: StopComparator,
    /// Size of the fixed validation pair sample.
    pub val_pairs: usize,
    pub threshold_grid: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl TrainConfig {
    /// Defaults for a family: Nesterov SGD (lr 0.01) for `ts`, Adagrad
    /// (lr 0.01) for `wts`, Adam (lr 0.001) with 1e-4 L1/L2 for baselines.
    pub fn for_family(family: Family) -> Self {
        let (optimizer, reg) = match family {
            Family::Ts => (OptimizerConfig::sgd_nesterov(0.01), 0.0),
            Family::Wts => (OptimizerConfig::adagrad(0.01), 0.0),
            Family::Euclidean | Family::Cosine => (OptimizerConfig::adam(0.001), 1e-4),
        };
        TrainConfig {
            max_iterations: 2000,
            batch_size: 128,
            loss: LossConfig {
                margin: 0.5,
                l1_coeff: reg,
                l2_coeff: reg,
            },
            optimizer,
            symmetric: true,
            eval_every: 1,
            patience_evals: 20,
            patience_delta: 0.01,
            comparator: StopComparator::Best,
            val_pairs: 50_000,
            threshold_grid: 1001,
            seed: 0,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::InvalidConfig(msg.to_owned()));
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be >= 1");
        }
        if self.patience_evals == 0 {
            return bad("patience_evals must be >= 1");
        }
        if self.patience_delta.is_nan() || self.patience_delta < 0.0 {
            return bad("patience_delta must be >= 0");
        }
        if self.val_pairs == 0 {
            return bad("val_pairs must be >= 1");
        }
        if self.threshold_grid < 2 {
            return bad("threshold_grid must be >= 2");
        }
        self.loss.validate()?;
        self.optimizer.validate()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    EarlyStop,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxIterations => "max_iterations",
            StopReason::EarlyStop => "early_stop",
        })
    }
}

/// One validation evaluation. Displays as the progress line
/// `iter=<n> objective=<float> val_acc=<float> best=<float>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalRecord {
    pub iteration: usize,
    pub objective: f64,
    pub val_accuracy: f64,
    pub best: f64,
}

impl fmt::Display for EvalRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iter={} objective={:.6} val_acc={:.6} best={:.6}",
            self.iteration, self.objective, self.val_accuracy, self.best
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub best_params: Measure,
    pub best_val_accuracy: f64,
    pub best_iteration: usize,
    pub iterations_run: usize,
    pub stop_reason: StopReason,
    pub history: Vec<EvalRecord>,
}

/// Patience counter over validation accuracies.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    delta: f64,
    comparator: StopComparator,
    best: f64,
    previous: Option<f64>,
    below: usize,
}

impl EarlyStopping {
    // absorbs rounding in differences such as 0.80 - 0.79
    const TOLERANCE: f64 = 1e-9;

    pub fn new(patience: usize, delta: f64, comparator: StopComparator) -> Self {
        EarlyStopping {
            patience,
            delta,
            comparator,
            best: f64::NEG_INFINITY,
            previous: None,
            below: 0,
        }
    }

    /// Records one evaluation; true once `patience` consecutive evaluations
    /// have fallen more than `delta` below the reference.
    pub fn observe(&mut self, accuracy: f64) -> bool {
        let reference = match self.comparator {
            StopComparator::Best => Some(self.best),
            StopComparator::Previous => self.previous,
        };
        let dropped = reference.is_some_and(|r| r - accuracy > self.delta + Self::TOLERANCE);
        if dropped {
            self.below += 1;
        } else {
            self.below = 0;
        }
        self.best = self.best.max(accuracy);
        self.previous = Some(accuracy);
        self.below >= self.patience
    }

    pub fn consecutive_below(&self) -> usize {
        self.below
    }
}

/// Source of validation accuracy for the training loop.
pub trait ValidationScorer {
    fn accuracy(&mut self, measure: &Measure) -> Result<f64, TrainError>;
}

/// Accuracy at the best grid threshold on a fixed, seeded sample of balanced
/// validation pairs. The sample is drawn once and reused for every call.
pub struct PairValidator<'a> {
    items: &'a LabeledItemSet,
    pairs: Vec<PairIndex>,
    grid: ThresholdGrid,
    execution: Execution,
}

impl<'a> PairValidator<'a> {
    pub fn new(
        items: &'a LabeledItemSet,
        n_pairs: usize,
        grid_len: usize,
        seed: u64,
        execution: Execution,
    ) -> Result<Self, TrainError> {
        let sampler = PairSampler::new(items)?;
        let pairs = eval::sample_pairs(&sampler, n_pairs, 0.5, seed, STREAM_VALIDATION, execution);
        Ok(PairValidator {
            items,
            pairs,
            grid: ThresholdGrid::uniform(grid_len),
            execution,
        })
    }

    /// Best accuracy and the grid threshold achieving it.
    pub fn best_threshold(&self, measure: &Measure) -> (f64, f64) {
        let hist = eval::histogram_of(measure, self.items, &self.pairs, &self.grid, self.execution);
        let (idx, correct) = hist.best_index();
        (correct as f64 / self.pairs.len() as f64, self.grid.points()[idx])
    }
}

impl ValidationScorer for PairValidator<'_> {
    fn accuracy(&mut self, measure: &Measure) -> Result<f64, TrainError> {
        Ok(self.best_threshold(measure).0)
    }
}

/// Random starting point: `alpha, beta ~ U(0, 1)` (`beta = alpha` when
/// symmetric), Tversky weights `~ U(0.25, 1)`, baseline weights all 1.
pub fn initialize_params<R: Rng + ?Sized>(family: Family, symmetric: bool, m: usize, rng: &mut R) -> Measure {
    match family {
        Family::Ts | Family::Wts => {
            let alpha: f64 = rng.random();
            let beta = if symmetric { alpha } else { rng.random() };
            let weights = (family == Family::Wts).then(|| (0..m).map(|_| rng.random_range(0.25..=1.0)).collect());
            Measure::Tversky(
                TverskyParams::new(alpha, beta, weights, symmetric).expect("initial parameters lie in their boxes"),
            )
        }
        Family::Euclidean => Measure::Euclidean(BaselineParams::uniform(m)),
        Family::Cosine => Measure::Cosine(BaselineParams::uniform(m)),
    }
}

pub fn train(
    train_items: &LabeledItemSet,
    val_items: &LabeledItemSet,
    family: Family,
    cfg: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    train_observed(train_items, val_items, family, cfg, &mut |_| {})
}

/// [`train`] with a callback invoked after every validation evaluation.
pub fn train_observed(
    train_items: &LabeledItemSet,
    val_items: &LabeledItemSet,
    family: Family,
    cfg: &TrainConfig,
    on_eval: &mut dyn FnMut(&EvalRecord),
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    if train_items.feature_count() != val_items.feature_count() {
        return Err(TrainError::FeatureMismatch {
            train: train_items.feature_count(),
            val: val_items.feature_count(),
        });
    }
    let mut validator = PairValidator::new(val_items, cfg.val_pairs, cfg.threshold_grid, cfg.seed, cfg.execution)?;
    train_with(train_items, family, cfg, &mut validator, on_eval)
}

/// The training loop against an arbitrary validation scorer.
pub fn train_with(
    train_items: &LabeledItemSet,
    family: Family,
    cfg: &TrainConfig,
    validator: &mut dyn ValidationScorer,
    on_eval: &mut dyn FnMut(&EvalRecord),
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    let sampler = PairSampler::new(train_items)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut measure = initialize_params(family, cfg.symmetric, train_items.feature_count(), &mut rng);
    let mut optimizer = Optimizer::new(cfg.optimizer, measure.parameter_count())?;
    let mut stopping = EarlyStopping::new(cfg.patience_evals, cfg.patience_delta, cfg.comparator);

    let mut best: Option<(Measure, f64, usize)> = None;
    let mut history = Vec::new();
    let mut stop_reason = StopReason::MaxIterations;
    let mut iterations_run = 0;

    for iteration in 1..=cfg.max_iterations {
        let batch = sampler.balanced_batch(cfg.batch_size, &mut rng);
        let objective = batch_objective_with(&batch, &measure, &cfg.loss, cfg.execution)?;
        if !objective.value.is_finite() {
            return Err(TrainError::NonFiniteObjective {
                iteration,
                value: objective.value,
            });
        }
        optimizer.step(&mut measure, &objective.gradient)?;
        iterations_run = iteration;

        if iteration % cfg.eval_every != 0 && iteration != cfg.max_iterations {
            continue;
        }
        let accuracy = validator.accuracy(&measure)?;
        if best.as_ref().is_none_or(|(_, acc, _)| accuracy > *acc) {
            best = Some((measure.clone(), accuracy, iteration));
        }
        let record = EvalRecord {
            iteration,
            objective: objective.value,
            val_accuracy: accuracy,
            best: best.as_ref().map_or(accuracy, |b| b.1),
        };
        on_eval(&record);
        history.push(record);
        if stopping.observe(accuracy) {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }

    let (best_params, best_val_accuracy, best_iteration) = best.expect("the final iteration is always evaluated");
    Ok(TrainReport {
        best_params,
        best_val_accuracy,
        best_iteration,
        iterations_run,
        stop_reason,
        history,
    })
}
