//! First-order optimizers with projection onto the parameter boxes.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::measures::{Measure, MeasureError};

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("gradient has {found} entries, parameters have {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite gradient for parameter {name} ({value})")]
    NonFiniteGradient { name: String, value: f64 },
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
    #[error("unknown optimizer {0:?} (expected sgd_nesterov, adagrad or adam)")]
    UnknownFamily(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OptimizerFamily {
    SgdNesterov,
    Adagrad,
    Adam,
}

impl OptimizerFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerFamily::SgdNesterov => "sgd_nesterov",
            OptimizerFamily::Adagrad => "adagrad",
            OptimizerFamily::Adam => "adam",
        }
    }
}

impl fmt::Display for OptimizerFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OptimizerFamily {
    type Err = OptimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd_nesterov" | "sgd" | "nesterov" => Ok(OptimizerFamily::SgdNesterov),
            "adagrad" => Ok(OptimizerFamily::Adagrad),
            "adam" => Ok(OptimizerFamily::Adam),
            other => Err(OptimError::UnknownFamily(other.to_owned())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub family: OptimizerFamily,
    pub learning_rate: f64,
    /// Nesterov momentum coefficient.
    pub momentum: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Denominator guard for Adagrad and Adam.
    pub epsilon: f64,
}

impl OptimizerConfig {
    pub fn new(family: OptimizerFamily, learning_rate: f64) -> Self {
        OptimizerConfig {
            family,
            learning_rate,
            momentum: 0.9,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn sgd_nesterov(learning_rate: f64) -> Self {
        Self::new(OptimizerFamily::SgdNesterov, learning_rate)
    }

    pub fn adagrad(learning_rate: f64) -> Self {
        Self::new(OptimizerFamily::Adagrad, learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self::new(OptimizerFamily::Adam, learning_rate)
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        let bad = |what: String| Err(OptimError::InvalidConfig(what));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        for (name, v) in [
            ("momentum", self.momentum),
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        Ok(())
    }
}

/// Per-parameter accumulators of one optimizer.
#[derive(Clone, Debug, PartialEq)]
pub enum OptimizerState {
    SgdNesterov { velocity: Vec<f64> },
    Adagrad { sum_sq: Vec<f64> },
    Adam { m: Vec<f64>, v: Vec<f64>, t: u64 },
}

impl OptimizerState {
    /// Zeroed state for `n` parameters.
    pub fn new(family: OptimizerFamily, n: usize) -> Self {
        match family {
            OptimizerFamily::SgdNesterov => OptimizerState::SgdNesterov {
                velocity: vec![0.0; n],
            },
            OptimizerFamily::Adagrad => OptimizerState::Adagrad {
                sum_sq: vec![0.0; n],
            },
            OptimizerFamily::Adam => OptimizerState::Adam {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
        }
    }

    pub fn family(&self) -> OptimizerFamily {
        match self {
            OptimizerState::SgdNesterov { .. } => OptimizerFamily::SgdNesterov,
            OptimizerState::Adagrad { .. } => OptimizerFamily::Adagrad,
            OptimizerState::Adam { .. } => OptimizerFamily::Adam,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            OptimizerState::SgdNesterov { velocity } => velocity.len(),
            OptimizerState::Adagrad { sum_sq } => sum_sq.len(),
            OptimizerState::Adam { m, .. } => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One unconstrained update of `params` in place.
    ///
    /// Nesterov: `v <- mu v - lr g`, `theta <- theta + mu v - lr g`.
    /// Adagrad: `G <- G + g^2`, `theta <- theta - lr g / sqrt(G + eps)`.
    /// Adam: bias-corrected moments, `theta <- theta - lr m_hat / (sqrt(v_hat) + eps)`.
    pub fn apply(
        &mut self,
        cfg: &OptimizerConfig,
        params: &mut [f64],
        grads: &[f64],
        names: &[String],
    ) -> Result<(), OptimError> {
        if self.family() != cfg.family {
            return Err(OptimError::InvalidConfig(format!(
                "state is for {}, config is for {}",
                self.family(),
                cfg.family
            )));
        }
        for found in [grads.len(), self.len()] {
            if found != params.len() {
                return Err(OptimError::ShapeMismatch {
                    expected: params.len(),
                    found,
                });
            }
        }
        if let Some((i, &value)) = grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            let name = names.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
            return Err(OptimError::NonFiniteGradient { name, value });
        }
        let lr = cfg.learning_rate;
        match self {
            OptimizerState::SgdNesterov { velocity } => {
                let mu = cfg.momentum;
                for ((p, v), &g) in params.iter_mut().zip(velocity.iter_mut()).zip(grads) {
                    *v = mu * *v - lr * g;
                    *p += mu * *v - lr * g;
                }
            }
            OptimizerState::Adagrad { sum_sq } => {
                for ((p, acc), &g) in params.iter_mut().zip(sum_sq.iter_mut()).zip(grads) {
                    *acc += g * g;
                    *p -= lr * g / (*acc + cfg.epsilon).sqrt();
                }
            }
            OptimizerState::Adam { m, v, t } => {
                *t += 1;
                let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
                let c1 = 1.0 - b1.powi(*t as i32);
                let c2 = 1.0 - b2.powi(*t as i32);
                for (((p, mi), vi), &g) in params.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(grads) {
                    *mi = b1 * *mi + (1.0 - b1) * g;
                    *vi = b2 * *vi + (1.0 - b2) * g * g;
                    let m_hat = *mi / c1;
                    let v_hat = *vi / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
                }
            }
        }
        Ok(())
    }
}

/// Optimizer config plus its state, stepping a [`Measure`] in place.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    state: OptimizerState,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, n_params: usize) -> Result<Self, OptimError> {
        cfg.validate()?;
        Ok(Optimizer {
            state: OptimizerState::new(cfg.family, n_params),
            cfg,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    /// Update followed by projection onto the measure's boxes.
    pub fn step(&mut self, measure: &mut Measure, grads: &[f64]) -> Result<(), OptimError> {
        let mut params = measure.parameters();
        let names = measure.parameter_names();
        self.state.apply(&self.cfg, &mut params, grads, &names)?;
        measure.set_parameters(&params)?;
        measure.project()?;
        Ok(())
    }
}

/// Pure form of [`Optimizer::step`].
pub fn step(
    params: &Measure,
    grads: &[f64],
    state: &OptimizerState,
    cfg: &OptimizerConfig,
) -> Result<(Measure, OptimizerState), OptimError> {
    cfg.validate()?;
    let mut opt = Optimizer {
        cfg: *cfg,
        state: state.clone(),
    };
    let mut measure = params.clone();
    opt.step(&mut measure, grads)?;
    Ok((measure, opt.state))
}

/// Box projection of a measure's parameters; see [`Measure::project`].
pub fn project(params: &Measure) -> Result<Measure, MeasureError> {
    let mut m = params.clone();
    m.project()?;
    Ok(m)
}
