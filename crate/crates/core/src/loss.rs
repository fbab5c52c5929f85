//! Margin contrastive loss and the regularized mini-batch objective.

use thiserror::Error;

use crate::data::PairExample;
use crate::measures::{Measure, MeasureError};
use crate::par::{self, Execution};

/// Pairs per work chunk when the batch objective fans out.
const OBJECTIVE_CHUNK: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("predicted similarity {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("margin {0} outside (0, 1]")]
    InvalidMargin(f64),
    #[error("regularization coefficient {name} = {value} must be finite and >= 0")]
    InvalidRegularization { name: &'static str, value: f64 },
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    pub margin: f64,
    pub l1_coeff: f64,
    pub l2_coeff: f64,
}

impl LossConfig {
    pub fn new(margin: f64, l1_coeff: f64, l2_coeff: f64) -> Result<Self, LossError> {
        let cfg = LossConfig {
            margin,
            l1_coeff,
            l2_coeff,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// No regularization.
    pub fn with_margin(margin: f64) -> Result<Self, LossError> {
        Self::new(margin, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<(), LossError> {
        check_margin(self.margin)?;
        for (name, value) in [("l1", self.l1_coeff), ("l2", self.l2_coeff)] {
            if !value.is_finite() || value < 0.0 {
                return Err(LossError::InvalidRegularization { name, value });
            }
        }
        Ok(())
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            margin: 0.5,
            l1_coeff: 0.0,
            l2_coeff: 0.0,
        }
    }
}

fn check_margin(margin: f64) -> Result<(), LossError> {
    if margin > 0.0 && margin <= 1.0 {
        Ok(())
    } else {
        Err(LossError::InvalidMargin(margin))
    }
}

fn check_inputs(s_hat: f64, margin: f64) -> Result<(), LossError> {
    if !(0.0..=1.0).contains(&s_hat) {
        return Err(LossError::ScoreOutOfRange(s_hat));
    }
    check_margin(margin)
}

fn loss_unchecked(similar: bool, s_hat: f64, margin: f64) -> f64 {
    if similar {
        1.0 - s_hat
    } else {
        (margin - 1.0 + s_hat).max(0.0)
    }
}

fn loss_grad_unchecked(similar: bool, s_hat: f64, margin: f64) -> f64 {
    if similar {
        -1.0
    } else if margin - 1.0 + s_hat > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `s (1 - s_hat) + (1 - s) max(margin - 1 + s_hat, 0)`.
///
/// A dissimilar pair costs nothing once `s_hat <= 1 - margin`.
pub fn contrastive_loss(similar: bool, s_hat: f64, margin: f64) -> Result<f64, LossError> {
    check_inputs(s_hat, margin)?;
    Ok(loss_unchecked(similar, s_hat, margin))
}

/// dL/ds_hat. The hinge kink of a dissimilar pair takes subgradient 0.
pub fn contrastive_loss_grad(similar: bool, s_hat: f64, margin: f64) -> Result<f64, LossError> {
    check_inputs(s_hat, margin)?;
    Ok(loss_grad_unchecked(similar, s_hat, margin))
}

/// Objective value and gradient for one mini-batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    pub value: f64,
    /// Mean contrastive loss, without regularization.
    pub data_loss: f64,
    /// Gradient in the flat layout of [`Measure::parameters`].
    pub gradient: Vec<f64>,
    /// Pairs whose score or gradient hit a degeneracy convention.
    pub degenerate_pairs: usize,
}

struct ChunkSum {
    loss: f64,
    grad: Vec<f64>,
    degenerate: usize,
}

pub fn batch_objective(batch: &[PairExample<'_>], measure: &Measure, cfg: &LossConfig) -> Result<Objective, LossError> {
    batch_objective_with(batch, measure, cfg, Execution::default())
}

/// Mean contrastive loss over the batch plus `l1 sum|theta| + l2 sum theta^2`
/// over the learnable parameters, with its gradient.
pub fn batch_objective_with(
    batch: &[PairExample<'_>],
    measure: &Measure,
    cfg: &LossConfig,
    exec: Execution,
) -> Result<Objective, LossError> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let expected_m = measure.weights().map(<[f64]>::len);
    for pair in batch {
        if pair.x.len() != pair.y.len() {
            return Err(MeasureError::LengthMismatch(pair.x.len(), pair.y.len()).into());
        }
        if let Some(m) = expected_m {
            if pair.x.len() != m {
                return Err(MeasureError::FeatureCount {
                    expected: m,
                    found: pair.x.len(),
                }
                .into());
            }
        }
    }

    let n_params = measure.parameter_count();
    let margin = cfg.margin;
    let partials = par::map_chunks(batch, OBJECTIVE_CHUNK, exec, |_, chunk| {
        let mut acc = ChunkSum {
            loss: 0.0,
            grad: vec![0.0; n_params],
            degenerate: 0,
        };
        for pair in chunk {
            let (x, y) = (pair.x.as_slice(), pair.y.as_slice());
            let scored = measure.score_unchecked(x, y);
            acc.loss += loss_unchecked(pair.similar, scored.value, margin);
            let dl = loss_grad_unchecked(pair.similar, scored.value, margin);
            let g = measure.gradient_unchecked(x, y);
            if scored.degenerate || g.degenerate {
                acc.degenerate += 1;
            }
            if dl != 0.0 {
                for (a, gi) in acc.grad.iter_mut().zip(&g.values) {
                    *a += dl * gi;
                }
            }
        }
        acc
    });

    let mut loss = 0.0;
    let mut grad = vec![0.0; n_params];
    let mut degenerate = 0;
    for part in partials {
        loss += part.loss;
        for (a, g) in grad.iter_mut().zip(&part.grad) {
            *a += g;
        }
        degenerate += part.degenerate;
    }
    let n = batch.len() as f64;
    let data_loss = loss / n;
    for g in &mut grad {
        *g /= n;
    }

    let params = measure.parameters();
    let mut reg = 0.0;
    if cfg.l1_coeff > 0.0 || cfg.l2_coeff > 0.0 {
        for (g, &theta) in grad.iter_mut().zip(&params) {
            let sign = if theta > 0.0 {
                1.0
            } else if theta < 0.0 {
                -1.0
            } else {
                0.0
            };
            reg += cfg.l1_coeff * theta.abs() + cfg.l2_coeff * theta * theta;
            *g += cfg.l1_coeff * sign + 2.0 * cfg.l2_coeff * theta;
        }
    }

    Ok(Objective {
        value: data_loss + reg,
        data_loss,
        gradient: grad,
        degenerate_pairs: degenerate,
    })
}
