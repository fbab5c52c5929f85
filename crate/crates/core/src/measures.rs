//! Similarity measures over binary feature vectors and their parameter
//! gradients.
//!
//! The Tversky ratio model compares the (weighted) mass of shared features
//! against the shared mass plus `alpha` times the features only in `x` and
//! `beta` times the features only in `y`. Features absent from both vectors
//! never contribute. Without weights every feature has weight 1, which is the
//! plain cardinality form (Jaccard at `alpha = beta = 1`, Dice at `1/2`).
//!
//! The weighted Euclidean and weighted Cosine baselines map onto `[0, 1]` so
//! that the same contrastive objective applies to every family.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::FeatureVector;

/// Lower bound on the largest weight; keeps a measure from collapsing to the
/// degenerate all-zero weighting.
pub const MIN_WEIGHT: f64 = 1e-6;

/// Upper box bound for baseline weights.
pub const BASELINE_WEIGHT_CAP: f64 = 1e6;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("feature vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("measure expects {expected} features, got {found}")]
    FeatureCount { expected: usize, found: usize },
    #[error("parameter {name} = {value} outside its range {range}")]
    OutOfRange {
        name: String,
        value: f64,
        range: &'static str,
    },
    #[error("parameter {name} is not finite ({value})")]
    NonFinite { name: String, value: f64 },
    #[error("symmetric measure requires alpha == beta ({alpha} vs {beta})")]
    Asymmetric { alpha: f64, beta: f64 },
    #[error("all weights are below {MIN_WEIGHT}")]
    DegenerateWeights,
    #[error("expected {expected} parameters, got {found}")]
    ParameterCount { expected: usize, found: usize },
    #[error("unknown measure family {0:?} (expected ts, wts, euclidean or cosine)")]
    UnknownFamily(String),
}

/// Measure family tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Unweighted Tversky.
    Ts,
    /// Weighted Tversky.
    Wts,
    Euclidean,
    Cosine,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Ts, Family::Wts, Family::Euclidean, Family::Cosine];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Ts => "ts",
            Family::Wts => "wts",
            Family::Euclidean => "euclidean",
            Family::Cosine => "cosine",
        }
    }

    pub fn is_tversky(self) -> bool {
        matches!(self, Family::Ts | Family::Wts)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| MeasureError::UnknownFamily(s.to_owned()))
    }
}

/// Parameters of the (weighted) Tversky ratio model.
#[derive(Clone, Debug, PartialEq)]
pub struct TverskyParams {
    alpha: f64,
    beta: f64,
    weights: Option<Vec<f64>>,
    symmetric: bool,
}

impl TverskyParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        weights: Option<Vec<f64>>,
        symmetric: bool,
    ) -> Result<Self, MeasureError> {
        let p = TverskyParams {
            alpha,
            beta,
            weights,
            symmetric,
        };
        p.validate()?;
        Ok(p)
    }

    /// Symmetric measure with `beta = alpha`.
    pub fn symmetric(alpha: f64, weights: Option<Vec<f64>>) -> Result<Self, MeasureError> {
        Self::new(alpha, alpha, weights, true)
    }

    pub fn jaccard() -> Self {
        TverskyParams {
            alpha: 1.0,
            beta: 1.0,
            weights: None,
            symmetric: true,
        }
    }

    pub fn dice() -> Self {
        TverskyParams {
            alpha: 0.5,
            beta: 0.5,
            weights: None,
            symmetric: true,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        check_unit("alpha", self.alpha)?;
        check_unit("beta", self.beta)?;
        if self.symmetric && self.alpha.to_bits() != self.beta.to_bits() {
            return Err(MeasureError::Asymmetric {
                alpha: self.alpha,
                beta: self.beta,
            });
        }
        if let Some(w) = &self.weights {
            for (i, &wi) in w.iter().enumerate() {
                check_unit(&format!("w[{i}]"), wi)?;
            }
            if !w.iter().any(|&wi| wi >= MIN_WEIGHT) {
                return Err(MeasureError::DegenerateWeights);
            }
        }
        Ok(())
    }
}

/// Attribute weights of the Euclidean and Cosine baselines.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineParams {
    weights: Vec<f64>,
}

impl BaselineParams {
    pub fn new(weights: Vec<f64>) -> Result<Self, MeasureError> {
        for (i, &w) in weights.iter().enumerate() {
            let name = format!("w[{i}]");
            if !w.is_finite() {
                return Err(MeasureError::NonFinite { name, value: w });
            }
            if !(0.0..=BASELINE_WEIGHT_CAP).contains(&w) {
                return Err(MeasureError::OutOfRange {
                    name,
                    value: w,
                    range: "[0, 1e6]",
                });
            }
        }
        if !weights.iter().any(|&w| w >= MIN_WEIGHT) {
            return Err(MeasureError::DegenerateWeights);
        }
        Ok(BaselineParams { weights })
    }

    pub fn uniform(m: usize) -> Self {
        BaselineParams {
            weights: vec![1.0; m],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn check_unit(name: &str, v: f64) -> Result<(), MeasureError> {
    if !v.is_finite() {
        return Err(MeasureError::NonFinite {
            name: name.to_owned(),
            value: v,
        });
    }
    if !(0.0..=1.0).contains(&v) {
        return Err(MeasureError::OutOfRange {
            name: name.to_owned(),
            value: v,
            range: "[0, 1]",
        });
    }
    Ok(())
}

/// A score together with whether the empty-denominator convention applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scored {
    pub value: f64,
    pub degenerate: bool,
}

/// Partial derivatives of the Tversky score. For symmetric parameters `beta`
/// is `None` and `alpha` holds the total derivative along `alpha = beta`.
#[derive(Clone, Debug, PartialEq)]
pub struct TverskyGradient {
    pub alpha: f64,
    pub beta: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub degenerate: bool,
}

/// Gradient in the flat parameter layout of [`Measure::parameters`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

fn check_lengths(x: &FeatureVector, y: &FeatureVector) -> Result<(), MeasureError> {
    if x.len() != y.len() {
        return Err(MeasureError::LengthMismatch(x.len(), y.len()));
    }
    Ok(())
}

fn check_weights(weights: Option<&[f64]>, m: usize) -> Result<(), MeasureError> {
    match weights {
        Some(w) if w.len() != m => Err(MeasureError::FeatureCount {
            expected: w.len(),
            found: m,
        }),
        _ => Ok(()),
    }
}

/// Shared, x-only and y-only (weighted) masses.
#[derive(Clone, Copy, Debug)]
struct Masses {
    shared: f64,
    only_x: f64,
    only_y: f64,
}

fn tversky_masses(x: &[u8], y: &[u8], weights: Option<&[f64]>) -> Masses {
    match weights {
        None => {
            let (mut shared, mut only_x, mut only_y) = (0u32, 0u32, 0u32);
            for (&a, &b) in x.iter().zip(y) {
                shared += u32::from(a & b);
                only_x += u32::from(a & !b & 1);
                only_y += u32::from(!a & b & 1);
            }
            Masses {
                shared: f64::from(shared),
                only_x: f64::from(only_x),
                only_y: f64::from(only_y),
            }
        }
        Some(w) => {
            let mut m = Masses {
                shared: 0.0,
                only_x: 0.0,
                only_y: 0.0,
            };
            // branch-free: weights are finite and non-negative, so adding
            // `wi * 0.0` leaves each sum bitwise unchanged
            for ((&a, &b), &wi) in x.iter().zip(y).zip(w) {
                m.shared += wi * f64::from(a & b);
                m.only_x += wi * f64::from(a & !b & 1);
                m.only_y += wi * f64::from(!a & b & 1);
            }
            m
        }
    }
}

fn tversky_ratio(masses: Masses, alpha: f64, beta: f64) -> (f64, f64) {
    // distinctive terms are summed first so that swapping x and y with
    // alpha == beta gives a bitwise identical denominator
    let denom = masses.shared + (alpha * masses.only_x + beta * masses.only_y);
    (masses.shared, denom)
}

fn tversky_unchecked(x: &[u8], y: &[u8], p: &TverskyParams) -> Scored {
    let masses = tversky_masses(x, y, p.weights.as_deref());
    let (num, denom) = tversky_ratio(masses, p.alpha, p.beta);
    if denom > 0.0 {
        Scored {
            value: num / denom,
            degenerate: false,
        }
    } else {
        Scored {
            value: 1.0,
            degenerate: true,
        }
    }
}

/// Tversky similarity of `x` to `y`.
///
/// Returns 1.0 when neither vector has any (positively weighted) relevant
/// feature; see [`tversky_score_detailed`] for the flag.
pub fn tversky_score(x: &FeatureVector, y: &FeatureVector, p: &TverskyParams) -> Result<f64, MeasureError> {
    tversky_score_detailed(x, y, p).map(|s| s.value)
}

pub fn tversky_score_detailed(
    x: &FeatureVector,
    y: &FeatureVector,
    p: &TverskyParams,
) -> Result<Scored, MeasureError> {
    check_lengths(x, y)?;
    check_weights(p.weights(), x.len())?;
    Ok(tversky_unchecked(x.as_slice(), y.as_slice(), p))
}

/// Exact partial derivatives of the Tversky score by the quotient rule.
///
/// With `S = N / D`, `N` the shared mass and `D = N + alpha P + beta Q`:
/// `dS/dalpha = -N P / D^2`, `dS/dbeta = -N Q / D^2`, and for a weight `w_i`
/// the derivative is `(D - N) / D^2` for a shared feature, `-alpha N / D^2`
/// for an x-only feature, `-beta N / D^2` for a y-only feature and 0 when the
/// feature is absent from both.
pub fn tversky_grad(x: &FeatureVector, y: &FeatureVector, p: &TverskyParams) -> Result<TverskyGradient, MeasureError> {
    check_lengths(x, y)?;
    check_weights(p.weights(), x.len())?;
    Ok(tversky_grad_unchecked(x.as_slice(), y.as_slice(), p))
}

fn tversky_grad_unchecked(x: &[u8], y: &[u8], p: &TverskyParams) -> TverskyGradient {
    let masses = tversky_masses(x, y, p.weights.as_deref());
    let (num, denom) = tversky_ratio(masses, p.alpha, p.beta);
    if denom <= 0.0 {
        return TverskyGradient {
            alpha: 0.0,
            beta: (!p.symmetric).then_some(0.0),
            weights: p.weights.as_ref().map(|w| vec![0.0; w.len()]),
            degenerate: true,
        };
    }
    let d2 = denom * denom;
    let d_alpha = -num * masses.only_x / d2;
    let d_beta = -num * masses.only_y / d2;
    let weights = p.weights.as_ref().map(|_| {
        let shared = (denom - num) / d2;
        let only_x = -p.alpha * num / d2;
        let only_y = -p.beta * num / d2;
        x.iter()
            .zip(y)
            .map(|(&a, &b)| match (a, b) {
                (1, 1) => shared,
                (1, 0) => only_x,
                (0, 1) => only_y,
                _ => 0.0,
            })
            .collect()
    });
    let (alpha, beta) = if p.symmetric {
        (d_alpha + d_beta, None)
    } else {
        (d_alpha, Some(d_beta))
    };
    TverskyGradient {
        alpha,
        beta,
        weights,
        degenerate: false,
    }
}

fn squared_distance(x: &[u8], y: &[u8], w: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(w)
        .filter(|((a, b), _)| a != b)
        .map(|(_, &wi)| wi)
        .sum()
}

/// `1 / (1 + d)` with `d` the weighted Euclidean distance.
pub fn euclidean_score(x: &FeatureVector, y: &FeatureVector, p: &BaselineParams) -> Result<f64, MeasureError> {
    check_lengths(x, y)?;
    check_weights(Some(&p.weights), x.len())?;
    Ok(euclidean_unchecked(x.as_slice(), y.as_slice(), &p.weights))
}

fn euclidean_unchecked(x: &[u8], y: &[u8], w: &[f64]) -> f64 {
    1.0 / (1.0 + squared_distance(x, y, w).sqrt())
}

struct CosineParts {
    inner: f64,
    norm_x: f64,
    norm_y: f64,
}

fn cosine_parts(x: &[u8], y: &[u8], w: &[f64]) -> CosineParts {
    let mut parts = CosineParts {
        inner: 0.0,
        norm_x: 0.0,
        norm_y: 0.0,
    };
    for ((&a, &b), &wi) in x.iter().zip(y).zip(w) {
        if a == 1 {
            parts.norm_x += wi;
            if b == 1 {
                parts.inner += wi;
            }
        }
        if b == 1 {
            parts.norm_y += wi;
        }
    }
    parts
}

/// Weighted cosine `<x,y>_w / (|x|_w |y|_w)`, with 1.0 when both weighted
/// norms vanish and 0.0 when exactly one does.
pub fn cosine_score(x: &FeatureVector, y: &FeatureVector, p: &BaselineParams) -> Result<f64, MeasureError> {
    check_lengths(x, y)?;
    check_weights(Some(&p.weights), x.len())?;
    Ok(cosine_unchecked(x.as_slice(), y.as_slice(), &p.weights).value)
}

fn cosine_unchecked(x: &[u8], y: &[u8], w: &[f64]) -> Scored {
    let CosineParts {
        inner,
        norm_x,
        norm_y,
    } = cosine_parts(x, y, w);
    match (norm_x > 0.0, norm_y > 0.0) {
        (false, false) => Scored {
            value: 1.0,
            degenerate: true,
        },
        (true, true) => Scored {
            // sqrt of a product is exact for x == y, unlike the product of
            // two square roots
            value: (inner / (norm_x * norm_y).sqrt()).min(1.0),
            degenerate: false,
        },
        _ => Scored {
            value: 0.0,
            degenerate: true,
        },
    }
}

/// Per-weight gradient of a baseline similarity score.
pub fn baseline_grad(
    x: &FeatureVector,
    y: &FeatureVector,
    p: &BaselineParams,
    family: Family,
) -> Result<Gradient, MeasureError> {
    check_lengths(x, y)?;
    check_weights(Some(&p.weights), x.len())?;
    let (x, y) = (x.as_slice(), y.as_slice());
    Ok(match family {
        Family::Cosine => cosine_grad_unchecked(x, y, &p.weights),
        _ => euclidean_grad_unchecked(x, y, &p.weights),
    })
}

fn euclidean_grad_unchecked(x: &[u8], y: &[u8], w: &[f64]) -> Gradient {
    let d = squared_distance(x, y, w).sqrt();
    if d == 0.0 {
        // identical vectors are a true zero; differing features carrying
        // only zero weight sit on the sqrt kink
        let degenerate = x != y;
        return Gradient {
            values: vec![0.0; w.len()],
            degenerate,
        };
    }
    let scale = -1.0 / (2.0 * d * (1.0 + d) * (1.0 + d));
    Gradient {
        values: x
            .iter()
            .zip(y)
            .map(|(a, b)| if a != b { scale } else { 0.0 })
            .collect(),
        degenerate: false,
    }
}

fn cosine_grad_unchecked(x: &[u8], y: &[u8], w: &[f64]) -> Gradient {
    let CosineParts {
        inner,
        norm_x,
        norm_y,
    } = cosine_parts(x, y, w);
    if norm_x <= 0.0 || norm_y <= 0.0 {
        return Gradient {
            values: vec![0.0; w.len()],
            degenerate: true,
        };
    }
    let root = (norm_x * norm_y).sqrt();
    let score = inner / root;
    let values = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let shared = if a & b == 1 { 1.0 / root } else { 0.0 };
            let fx = if a == 1 { 1.0 / norm_x } else { 0.0 };
            let fy = if b == 1 { 1.0 / norm_y } else { 0.0 };
            shared - 0.5 * score * (fx + fy)
        })
        .collect();
    Gradient {
        values,
        degenerate: false,
    }
}

/// Anything that scores a pair of feature vectors. Implemented by
/// [`Measure`]; evaluation code accepts any implementor so that fixed or
/// scripted scorers can stand in for a learned measure.
pub trait Similarity: Sync {
    /// Score for vectors of equal length. Callers guarantee the lengths.
    fn similarity(&self, x: &FeatureVector, y: &FeatureVector) -> f64;

    /// Feature count the scorer is tied to, if any.
    fn feature_count(&self) -> Option<usize> {
        None
    }
}

/// A similarity measure with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Measure {
    Tversky(TverskyParams),
    Euclidean(BaselineParams),
    Cosine(BaselineParams),
}

impl Measure {
    pub fn family(&self) -> Family {
        match self {
            Measure::Tversky(p) if p.weights.is_some() => Family::Wts,
            Measure::Tversky(_) => Family::Ts,
            Measure::Euclidean(_) => Family::Euclidean,
            Measure::Cosine(_) => Family::Cosine,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            Measure::Tversky(p) => p.symmetric || p.alpha == p.beta,
            _ => true,
        }
    }

    pub fn weights(&self) -> Option<&[f64]> {
        match self {
            Measure::Tversky(p) => p.weights(),
            Measure::Euclidean(p) | Measure::Cosine(p) => Some(p.weights()),
        }
    }

    pub fn score(&self, x: &FeatureVector, y: &FeatureVector) -> Result<f64, MeasureError> {
        self.score_detailed(x, y).map(|s| s.value)
    }

    pub fn score_detailed(&self, x: &FeatureVector, y: &FeatureVector) -> Result<Scored, MeasureError> {
        check_lengths(x, y)?;
        check_weights(self.weights(), x.len())?;
        Ok(self.score_unchecked(x.as_slice(), y.as_slice()))
    }

    pub(crate) fn score_unchecked(&self, x: &[u8], y: &[u8]) -> Scored {
        match self {
            Measure::Tversky(p) => tversky_unchecked(x, y, p),
            Measure::Euclidean(p) => Scored {
                value: euclidean_unchecked(x, y, &p.weights),
                degenerate: false,
            },
            Measure::Cosine(p) => cosine_unchecked(x, y, &p.weights),
        }
    }

    /// Gradient of the score in the layout of [`Measure::parameters`].
    pub fn gradient(&self, x: &FeatureVector, y: &FeatureVector) -> Result<Gradient, MeasureError> {
        check_lengths(x, y)?;
        check_weights(self.weights(), x.len())?;
        Ok(self.gradient_unchecked(x.as_slice(), y.as_slice()))
    }

    pub(crate) fn gradient_unchecked(&self, x: &[u8], y: &[u8]) -> Gradient {
        match self {
            Measure::Tversky(p) => {
                let g = tversky_grad_unchecked(x, y, p);
                let mut values = Vec::with_capacity(self.parameter_count());
                values.push(g.alpha);
                values.extend(g.beta);
                values.extend(g.weights.into_iter().flatten());
                Gradient {
                    values,
                    degenerate: g.degenerate,
                }
            }
            Measure::Euclidean(p) => euclidean_grad_unchecked(x, y, &p.weights),
            Measure::Cosine(p) => cosine_grad_unchecked(x, y, &p.weights),
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            Measure::Tversky(p) => {
                1 + usize::from(!p.symmetric) + p.weights.as_ref().map_or(0, Vec::len)
            }
            Measure::Euclidean(p) | Measure::Cosine(p) => p.weights.len(),
        }
    }

    /// Learnable parameters as a flat vector: `alpha`, then `beta` unless the
    /// measure is symmetric, then the weights.
    pub fn parameters(&self) -> Vec<f64> {
        match self {
            Measure::Tversky(p) => {
                let mut v = vec![p.alpha];
                if !p.symmetric {
                    v.push(p.beta);
                }
                v.extend(p.weights.iter().flatten());
                v
            }
            Measure::Euclidean(p) | Measure::Cosine(p) => p.weights.clone(),
        }
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let weight_names = |n: usize| (0..n).map(|i| format!("w[{i}]"));
        match self {
            Measure::Tversky(p) => {
                let mut v = vec!["alpha".to_owned()];
                if !p.symmetric {
                    v.push("beta".to_owned());
                }
                v.extend(weight_names(p.weights.as_ref().map_or(0, Vec::len)));
                v
            }
            Measure::Euclidean(p) | Measure::Cosine(p) => weight_names(p.weights.len()).collect(),
        }
    }

    /// Overwrites the learnable parameters without range checks; call
    /// [`Measure::project`] afterwards to restore the invariants.
    pub fn set_parameters(&mut self, values: &[f64]) -> Result<(), MeasureError> {
        let expected = self.parameter_count();
        if values.len() != expected {
            return Err(MeasureError::ParameterCount {
                expected,
                found: values.len(),
            });
        }
        match self {
            Measure::Tversky(p) => {
                p.alpha = values[0];
                let rest = if p.symmetric {
                    p.beta = values[0];
                    &values[1..]
                } else {
                    p.beta = values[1];
                    &values[2..]
                };
                if let Some(w) = &mut p.weights {
                    w.copy_from_slice(rest);
                }
            }
            Measure::Euclidean(p) | Measure::Cosine(p) => p.weights.copy_from_slice(values),
        }
        Ok(())
    }

    /// Clamps every parameter into its box: `[0, 1]` for Tversky, `[0, 1e6]`
    /// for baseline weights. If no weight reaches [`MIN_WEIGHT`], the largest
    /// one (the last among ties) is raised to it.
    pub fn project(&mut self) -> Result<(), MeasureError> {
        for (name, value) in self.parameter_names().into_iter().zip(self.parameters()) {
            if !value.is_finite() {
                return Err(MeasureError::NonFinite { name, value });
            }
        }
        let (weights, cap) = match self {
            Measure::Tversky(p) => {
                p.alpha = p.alpha.clamp(0.0, 1.0);
                p.beta = if p.symmetric { p.alpha } else { p.beta.clamp(0.0, 1.0) };
                match &mut p.weights {
                    Some(w) => (w, 1.0),
                    None => return Ok(()),
                }
            }
            Measure::Euclidean(p) | Measure::Cosine(p) => (&mut p.weights, BASELINE_WEIGHT_CAP),
        };
        for w in weights.iter_mut() {
            *w = w.clamp(0.0, cap);
        }
        if !weights.iter().any(|&w| w >= MIN_WEIGHT) {
            if let Some(largest) = weights.iter_mut().max_by(|a, b| a.total_cmp(b)) {
                *largest = MIN_WEIGHT;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        match self {
            Measure::Tversky(p) => p.validate(),
            Measure::Euclidean(p) | Measure::Cosine(p) => BaselineParams::new(p.weights.clone()).map(|_| ()),
        }
    }
}

impl Similarity for Measure {
    fn similarity(&self, x: &FeatureVector, y: &FeatureVector) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        self.score_unchecked(x.as_slice(), y.as_slice()).value
    }

    fn feature_count(&self) -> Option<usize> {
        self.weights().map(<[f64]>::len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(bits: &[u8]) -> FeatureVector {
        FeatureVector::new(bits.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn jaccard_example() {
        let x = fv(&[1, 1, 0]);
        let y = fv(&[0, 1, 1]);
        let s = tversky_score(&x, &y, &TverskyParams::jaccard()).unwrap();
        assert_eq!(s, 1.0 / 3.0);
    }

    #[test]
    fn identical_vectors_score_one() {
        let x = fv(&[1, 0, 1, 1]);
        for (a, b) in [(0.0, 0.0), (0.3, 0.9), (1.0, 1.0)] {
            let p = TverskyParams::new(a, b, Some(vec![0.2, 0.0, 0.7, 1.0]), false).unwrap();
            assert_eq!(tversky_score(&x, &x, &p).unwrap(), 1.0);
        }
    }

    #[test]
    fn weighted_example() {
        let p = TverskyParams::new(1.0, 1.0, Some(vec![0.5, 1.0, 0.25]), true).unwrap();
        let s = tversky_score(&fv(&[1, 1, 0]), &fv(&[0, 1, 1]), &p).unwrap();
        assert!(close(s, 1.0 / 1.75, 1e-15));
        assert!(close(s, 0.5714, 1e-4));
    }

    #[test]
    fn asymmetric_example() {
        let p = TverskyParams::new(1.0, 0.0, None, false).unwrap();
        let x = fv(&[1, 1, 1]);
        let y = fv(&[1, 0, 0]);
        assert_eq!(tversky_score(&x, &y, &p).unwrap(), 1.0 / 3.0);
        assert_eq!(tversky_score(&y, &x, &p).unwrap(), 1.0);
    }

    #[test]
    fn empty_vectors_use_convention() {
        let z = fv(&[0, 0, 0]);
        let s = tversky_score_detailed(&z, &z, &TverskyParams::jaccard()).unwrap();
        assert_eq!(s, Scored { value: 1.0, degenerate: true });
        let g = tversky_grad(&z, &z, &TverskyParams::jaccard()).unwrap();
        assert!(g.degenerate);
        assert_eq!(g.alpha, 0.0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let e = tversky_score(&fv(&[1, 0]), &fv(&[1]), &TverskyParams::jaccard());
        assert_eq!(e, Err(MeasureError::LengthMismatch(2, 1)));
        let p = TverskyParams::symmetric(0.5, Some(vec![1.0; 3])).unwrap();
        assert!(tversky_score(&fv(&[1, 0]), &fv(&[1, 1]), &p).is_err());
        assert!(euclidean_score(&fv(&[1, 0]), &fv(&[1]), &BaselineParams::uniform(2)).is_err());
    }

    #[test]
    fn tversky_grad_hand_value() {
        let p = TverskyParams::new(1.0, 1.0, None, false).unwrap();
        let g = tversky_grad(&fv(&[1, 1, 0]), &fv(&[0, 1, 1]), &p).unwrap();
        assert!(close(g.alpha, -1.0 / 9.0, 1e-15));
        assert!(close(g.beta.unwrap(), -1.0 / 9.0, 1e-15));

        let x = fv(&[1, 0, 1, 0]);
        let p = TverskyParams::new(0.4, 0.7, Some(vec![0.3, 0.9, 0.5, 0.2]), false).unwrap();
        let g = tversky_grad(&x, &x, &p).unwrap();
        assert_eq!((g.alpha, g.beta), (0.0, Some(0.0)));
        // absent-from-both features have zero weight derivative
        let w = g.weights.unwrap();
        assert_eq!((w[1], w[3]), (0.0, 0.0));
    }

    #[test]
    fn symmetric_grad_is_total_derivative() {
        let x = fv(&[1, 1, 1, 0]);
        let y = fv(&[0, 1, 0, 1]);
        let asym = TverskyParams::new(0.6, 0.6, None, false).unwrap();
        let sym = TverskyParams::symmetric(0.6, None).unwrap();
        let ga = tversky_grad(&x, &y, &asym).unwrap();
        let gs = tversky_grad(&x, &y, &sym).unwrap();
        assert_eq!(gs.beta, None);
        assert!(close(gs.alpha, ga.alpha + ga.beta.unwrap(), 1e-15));
    }

    #[test]
    fn euclidean_examples() {
        let x = fv(&[1, 0]);
        let y = fv(&[0, 1]);
        assert_eq!(euclidean_score(&x, &x, &BaselineParams::uniform(2)).unwrap(), 1.0);
        let s = euclidean_score(&x, &y, &BaselineParams::uniform(2)).unwrap();
        assert!(close(s, 1.0 / (1.0 + 2f64.sqrt()), 1e-15));
        let p = BaselineParams::new(vec![0.0, 0.25]).unwrap();
        assert!(close(euclidean_score(&x, &y, &p).unwrap(), 1.0 / 1.5, 1e-15));

        let g = baseline_grad(&x, &y, &BaselineParams::uniform(2), Family::Euclidean).unwrap();
        let d = 2f64.sqrt();
        let expect = -(1.0 / ((1.0 + d) * (1.0 + d))) * (1.0 / (2.0 * d));
        assert!(close(g.values[0], expect, 1e-15));
        assert!(close(g.values[0], -0.0607, 1e-4));
        let g = baseline_grad(&x, &x, &BaselineParams::uniform(2), Family::Euclidean).unwrap();
        assert_eq!(g.values, vec![0.0, 0.0]);
        assert!(!g.degenerate);
    }

    #[test]
    fn cosine_examples() {
        let u = BaselineParams::uniform(3);
        let x = fv(&[1, 1, 0]);
        assert_eq!(cosine_score(&x, &x, &u).unwrap(), 1.0);
        assert_eq!(cosine_score(&x, &fv(&[0, 1, 1]), &u).unwrap(), 0.5);
        assert_eq!(cosine_score(&x, &fv(&[0, 0, 1]), &u).unwrap(), 0.0);
        let z = fv(&[0, 0, 0]);
        assert_eq!(cosine_score(&z, &z, &u).unwrap(), 1.0);
        assert_eq!(cosine_score(&x, &z, &u).unwrap(), 0.0);
        assert!(baseline_grad(&x, &z, &u, Family::Cosine).unwrap().degenerate);
        // odd weights still give exactly 1 on identical inputs
        let p = BaselineParams::new(vec![0.1, 0.7, 3.3]).unwrap();
        let v = fv(&[1, 1, 1]);
        assert_eq!(cosine_score(&v, &v, &p).unwrap(), 1.0);
    }

    #[test]
    fn flat_parameter_layout() {
        let mut m = Measure::Tversky(TverskyParams::new(0.2, 0.4, Some(vec![0.5, 0.6]), false).unwrap());
        assert_eq!(m.parameters(), vec![0.2, 0.4, 0.5, 0.6]);
        assert_eq!(m.parameter_names(), vec!["alpha", "beta", "w[0]", "w[1]"]);
        m.set_parameters(&[0.3, 0.1, 0.9, 0.8]).unwrap();
        assert_eq!(m.parameters(), vec![0.3, 0.1, 0.9, 0.8]);

        let mut s = Measure::Tversky(TverskyParams::symmetric(0.2, None).unwrap());
        assert_eq!(s.parameter_count(), 1);
        s.set_parameters(&[0.7]).unwrap();
        match &s {
            Measure::Tversky(p) => assert_eq!(p.alpha().to_bits(), p.beta().to_bits()),
            _ => unreachable!(),
        }
        assert!(s.set_parameters(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn projection_rules() {
        let mut m = Measure::Tversky(TverskyParams::symmetric(0.5, Some(vec![0.5, 0.5])).unwrap());
        m.set_parameters(&[1.3, -0.2, 0.5]).unwrap();
        m.project().unwrap();
        assert_eq!(m.parameters(), vec![1.0, 0.0, 0.5]);

        m.set_parameters(&[0.5, 0.0, 0.0]).unwrap();
        m.project().unwrap();
        assert_eq!(m.parameters(), vec![0.5, 0.0, MIN_WEIGHT]);

        m.set_parameters(&[f64::NAN, 0.0, 0.0]).unwrap();
        assert!(matches!(m.project(), Err(MeasureError::NonFinite { .. })));

        let mut b = Measure::Euclidean(BaselineParams::uniform(2));
        b.set_parameters(&[2e6, -1.0]).unwrap();
        b.project().unwrap();
        assert_eq!(b.parameters(), vec![BASELINE_WEIGHT_CAP, 0.0]);
    }

    #[test]
    fn parameter_validation() {
        assert!(TverskyParams::new(1.1, 0.5, None, false).is_err());
        assert!(TverskyParams::new(0.5, 0.4, None, true).is_err());
        assert!(matches!(
            TverskyParams::new(0.5, 0.5, Some(vec![0.0, 0.0]), true),
            Err(MeasureError::DegenerateWeights)
        ));
        assert!(BaselineParams::new(vec![-1.0]).is_err());
        assert!(BaselineParams::new(vec![0.0]).is_err());
    }

    #[test]
    fn family_tags() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
        }
        assert!("lmnn".parse::<Family>().is_err());
        assert_eq!(Measure::Tversky(TverskyParams::dice()).family(), Family::Ts);
    }
}
