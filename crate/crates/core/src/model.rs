//! On-disk model file: a TOML document holding the measure family, its
//! parameters, the feature names, the decision threshold and training
//! metadata.
//!
//! Floats are written in shortest round-trip form, so a saved model reloads
//! with bitwise identical parameters.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{BaselineParams, Family, Measure, MeasureError, TverskyParams};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse model file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize model: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("unsupported model format_version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("feature names differ at position {index}: model has {model:?}, data has {data:?}")]
    FeatureNameMismatch {
        index: usize,
        model: String,
        data: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub iterations: u64,
    pub best_val_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub family: Family,
    pub symmetric: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub threshold: f64,
    pub margin: f64,
    pub feature_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub training: TrainingMetadata,
}

impl ModelFile {
    pub fn new(
        measure: &Measure,
        feature_names: Vec<String>,
        threshold: f64,
        margin: f64,
        training: TrainingMetadata,
    ) -> Result<Self, ModelError> {
        let (alpha, beta, symmetric) = match measure {
            Measure::Tversky(p) => (Some(p.alpha()), Some(p.beta()), p.is_symmetric()),
            _ => (None, None, true),
        };
        let model = ModelFile {
            format_version: FORMAT_VERSION,
            family: measure.family(),
            symmetric,
            alpha,
            beta,
            threshold,
            margin,
            feature_names,
            weights: measure.weights().map(<[f64]>::to_vec),
            training,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn measure(&self) -> Result<Measure, ModelError> {
        let missing = |what: &str| ModelError::Invalid(format!("{} model lacks {what}", self.family));
        Ok(match self.family {
            Family::Ts | Family::Wts => {
                let alpha = self.alpha.ok_or_else(|| missing("alpha"))?;
                let beta = self.beta.ok_or_else(|| missing("beta"))?;
                let weights = match (self.family, &self.weights) {
                    (Family::Wts, None) => return Err(missing("weights")),
                    (Family::Ts, Some(_)) => {
                        return Err(ModelError::Invalid("ts model must not carry weights".into()))
                    }
                    (_, w) => w.clone(),
                };
                Measure::Tversky(TverskyParams::new(alpha, beta, weights, self.symmetric)?)
            }
            Family::Euclidean | Family::Cosine => {
                let w = self.weights.clone().ok_or_else(|| missing("weights"))?;
                let p = BaselineParams::new(w)?;
                if self.family == Family::Euclidean {
                    Measure::Euclidean(p)
                } else {
                    Measure::Cosine(p)
                }
            }
        })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.format_version != FORMAT_VERSION {
            return Err(ModelError::Version(self.format_version));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.feature_names.len() {
                return Err(ModelError::Invalid(format!(
                    "{} weights for {} feature names",
                    w.len(),
                    self.feature_names.len()
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ModelError::Invalid(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if !(self.margin > 0.0 && self.margin <= 1.0) {
            return Err(ModelError::Invalid(format!("margin {} outside (0, 1]", self.margin)));
        }
        self.measure()?;
        Ok(())
    }

    /// Fails with the first position where `names` differs from the model.
    pub fn check_feature_names(&self, names: &[String]) -> Result<(), ModelError> {
        let n = self.feature_names.len().max(names.len());
        for index in 0..n {
            let model = self.feature_names.get(index);
            let data = names.get(index);
            if model != data {
                return Err(ModelError::FeatureNameMismatch {
                    index,
                    model: model.cloned().unwrap_or_else(|| "<none>".into()),
                    data: data.cloned().unwrap_or_else(|| "<none>".into()),
                });
            }
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String, ModelError> {
        Ok(toml::to_string(self)?)
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ModelError> {
        let model: ModelFile = toml::from_str(s)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        fs::write(path, self.to_toml_string()?).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta() -> TrainingMetadata {
        TrainingMetadata {
            seed: 3,
            iterations: 10,
            best_val_accuracy: 0.875,
        }
    }

    fn names(m: usize) -> Vec<String> {
        (0..m).map(|i| format!("attr_{i}")).collect()
    }

    #[test]
    fn every_family_round_trips() {
        let measures = [
            Measure::Tversky(TverskyParams::jaccard()),
            Measure::Tversky(TverskyParams::new(0.1, 0.7, Some(vec![0.3, 0.9, 0.0]), false).unwrap()),
            Measure::Euclidean(BaselineParams::new(vec![1.5, 0.0, 2.0]).unwrap()),
            Measure::Cosine(BaselineParams::uniform(3)),
        ];
        for m in measures {
            let model = ModelFile::new(&m, names(3), 0.4, 0.5, meta()).unwrap();
            let text = model.to_toml_string().unwrap();
            let back = ModelFile::from_toml_str(&text).unwrap();
            assert_eq!(back, model);
            assert_eq!(back.measure().unwrap(), m);
        }
    }

    #[test]
    fn rejects_inconsistent_files() {
        let m = Measure::Tversky(TverskyParams::symmetric(0.5, Some(vec![0.5; 3])).unwrap());
        let mut model = ModelFile::new(&m, names(3), 0.4, 0.5, meta()).unwrap();
        model.feature_names.pop();
        assert!(model.validate().is_err());

        let good = ModelFile::new(&m, names(3), 0.4, 0.5, meta()).unwrap();
        let text = good.to_toml_string().unwrap().replace("format_version = 1", "format_version = 9");
        assert!(matches!(ModelFile::from_toml_str(&text), Err(ModelError::Version(9))));

        let text = good.to_toml_string().unwrap().replace("alpha = 0.5", "alpha = 1.5");
        assert!(ModelFile::from_toml_str(&text).is_err());
    }

    #[test]
    fn feature_name_check_reports_first_difference() {
        let m = Measure::Cosine(BaselineParams::uniform(3));
        let model = ModelFile::new(&m, names(3), 0.4, 0.5, meta()).unwrap();
        assert!(model.check_feature_names(&names(3)).is_ok());
        let mut other = names(3);
        other[1] = "snout".into();
        match model.check_feature_names(&other) {
            Err(ModelError::FeatureNameMismatch { index, model, data }) => {
                assert_eq!((index, model.as_str(), data.as_str()), (1, "attr_1", "snout"));
            }
            r => panic!("unexpected {r:?}"),
        }
        assert!(model.check_feature_names(&names(2)).is_err());
    }

    proptest! {
        #[test]
        fn parameters_round_trip_bitwise(
            alpha in 0.0f64..=1.0,
            beta in 0.0f64..=1.0,
            weights in prop::collection::vec(0.0f64..=1.0, 1..20),
            threshold in 0.0f64..=1.0,
        ) {
            let mut w = weights;
            w[0] = w[0].max(1e-3);
            let m = Measure::Tversky(TverskyParams::new(alpha, beta, Some(w.clone()), false).unwrap());
            let model = ModelFile::new(&m, names(w.len()), threshold, 0.5, meta()).unwrap();
            let back = ModelFile::from_toml_str(&model.to_toml_string().unwrap()).unwrap();
            let bm = back.measure().unwrap();
            let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
            prop_assert_eq!(bits(bm.parameters()), bits(m.parameters()));
            prop_assert_eq!(back.threshold.to_bits(), threshold.to_bits());
        }
    }
}
