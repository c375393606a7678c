//! Regression trees and the two ensembles built from them: bagged random
//! forests and stagewise least-squares boosting.

mod boost;
mod cart;
mod forest;

pub use boost::{BoostModel, BoostStage};
pub use cart::{AllFeatures, FeatureSampler, Node, RegressionTree, UniformSubset};
pub use forest::ForestModel;

use ndarray::ArrayView2;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Shared training configuration. The tree-growth limits apply to every
/// learner; `mtry` and `bootstrap` only to forests (boosting stages always
/// see the full feature set, unresampled).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub min_leaf_size: usize,
    pub max_depth: usize,
    /// Features sampled per split; `None` resolves to ⌈p/3⌉.
    pub mtry: Option<usize>,
    pub n_trees: usize,
    /// Multiplier on each boosting stage, in (0, 1].
    pub shrinkage: f64,
    pub seed: u64,
    pub bootstrap: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            min_leaf_size: 5,
            max_depth: 20,
            mtry: None,
            n_trees: 100,
            shrinkage: 1.0,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl TrainConfig {
    pub fn with_n_trees(mut self, n_trees: usize) -> Self {
        self.n_trees = n_trees;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_min_leaf_size(mut self, min_leaf_size: usize) -> Self {
        self.min_leaf_size = min_leaf_size;
        self
    }

    pub fn with_max_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth;
        self
    }

    pub fn with_mtry(mut self, mtry: usize) -> Self {
        self.mtry = Some(mtry);
        self
    }

    pub fn with_shrinkage(mut self, shrinkage: f64) -> Self {
        self.shrinkage = shrinkage;
        self
    }

    pub fn with_bootstrap(mut self, bootstrap: bool) -> Self {
        self.bootstrap = bootstrap;
        self
    }

    pub(crate) fn validate(&self, n_features: usize) -> Result<()> {
        if self.min_leaf_size < 1 {
            return Err(Error::Validation("min_leaf_size must be at least 1".into()));
        }
        if self.n_trees < 1 {
            return Err(Error::Validation("n_trees must be at least 1".into()));
        }
        if let Some(m) = self.mtry {
            if m < 1 || m > n_features {
                return Err(Error::Validation(format!(
                    "mtry = {m} must lie in 1..={n_features}"
                )));
            }
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::Validation(format!(
                "shrinkage must lie in (0, 1], got {}",
                self.shrinkage
            )));
        }
        Ok(())
    }
}

pub(crate) fn validate_training_data(x: ArrayView2<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::Validation("training data has no rows".into()));
    }
    if x.nrows() != y.len() {
        return Err(Error::Validation(format!(
            "design matrix has {} rows but response has {}",
            x.nrows(),
            y.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(
            "training data contains non-finite values".into(),
        ));
    }
    Ok(())
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(serde::Serialize, serde::Deserialize)]
struct ModelEnvelope<T> {
    format_version: u32,
    kind: String,
    model: T,
}

/// Serialize a model into the self-describing text format. JSON carries
/// shortest-roundtrip floats, so deserialized models predict bit-identically.
pub(crate) fn model_to_json<T: Serialize>(kind: &str, model: &T) -> String {
    serde_json::to_string(&ModelEnvelope {
        format_version: MODEL_FORMAT_VERSION,
        kind: kind.to_string(),
        model,
    })
    .expect("model serializes")
}

pub(crate) fn model_from_json<T: DeserializeOwned>(kind: &str, text: &str) -> Result<T> {
    let envelope: ModelEnvelope<T> = serde_json::from_str(text)
        .map_err(|e| Error::ModelFormat(format!("unreadable model file: {e}")))?;
    if envelope.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {}",
            envelope.format_version
        )));
    }
    if envelope.kind != kind {
        return Err(Error::ModelFormat(format!(
            "expected a {kind} model, found {}",
            envelope.kind
        )));
    }
    Ok(envelope.model)
}
