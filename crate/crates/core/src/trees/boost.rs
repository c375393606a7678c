//! Stagewise boosting under squared loss.
//!
//! Each stage fits a tree to the current residual over the full feature set
//! and receives the closed-form combination coefficient
//! `β = ⟨r, h⟩ / ⟨h, h⟩`, the stationary point of the stage's squared
//! training error in β.

use ndarray::{Array1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::cart::{AllFeatures, RegressionTree};
use super::{model_from_json, model_to_json, validate_training_data, TrainConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostStage {
    pub tree: RegressionTree,
    pub beta: f64,
}

/// A fitted boosting model: `F(x) = F₀ + Σ ν·βₘ·hₘ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    /// F₀, the mean of the training responses.
    pub initial: f64,
    stages: Vec<BoostStage>,
    pub shrinkage: f64,
    n_features: usize,
}

impl BoostModel {
    pub fn fit(x: ArrayView2<f64>, y: &[f64], config: &TrainConfig) -> Result<Self> {
        validate_training_data(x, y)?;
        config.validate(x.ncols())?;
        let initial = mean_response(y);
        let mut current: Vec<f64> = vec![initial; y.len()];
        let mut stages = Vec::new();
        for _ in 0..config.n_trees {
            let residual: Vec<f64> = y
                .iter()
                .zip(&current)
                .map(|(yi, fi)| yi - fi)
                .collect();
            if residual.iter().all(|&r| r == 0.0) {
                break;
            }
            let tree = RegressionTree::fit(x, &residual, config, &mut AllFeatures)?;
            let h = tree.predict(x)?;
            let hh: f64 = h.iter().map(|v| v * v).sum();
            if hh == 0.0 {
                break;
            }
            let rh: f64 = residual.iter().zip(h.iter()).map(|(a, b)| a * b).sum();
            let beta = rh / hh;
            for (fi, hi) in current.iter_mut().zip(h.iter()) {
                *fi += config.shrinkage * beta * hi;
            }
            stages.push(BoostStage { tree, beta });
        }
        Ok(BoostModel {
            initial,
            stages,
            shrinkage: config.shrinkage,
            n_features: x.ncols(),
        })
    }

    pub fn stages(&self) -> &[BoostStage] {
        &self.stages
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::SchemaMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        Ok(Array1::from_iter(x.rows().into_iter().map(|row| {
            let mut f = self.initial;
            for stage in &self.stages {
                f += self.shrinkage * stage.beta * stage.tree.predict_row(row);
            }
            f
        })))
    }

    pub fn to_json(&self) -> String {
        model_to_json("boost", self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        model_from_json("boost", text)
    }
}

/// Mean of the responses; a constant vector returns its value exactly so
/// that the first residual is identically zero.
fn mean_response(y: &[f64]) -> f64 {
    let first = y[0];
    if y.iter().all(|&v| v == first) {
        first
    } else {
        y.iter().sum::<f64>() / y.len() as f64
    }
}
