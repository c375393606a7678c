//! Bagged, feature-subsampled forests of regression trees.

use ndarray::{Array1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cart::{RegressionTree, UniformSubset};
use super::{model_from_json, model_to_json, validate_training_data, TrainConfig};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// A fitted random forest. Prediction is the arithmetic mean of the member
/// trees in index order, so results do not depend on how many workers
/// trained or evaluated them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<RegressionTree>,
    pub mtry: usize,
    pub seed: u64,
    pub bootstrap: bool,
    n_features: usize,
}

impl ForestModel {
    /// Train `config.n_trees` trees, each on a bootstrap resample (unless
    /// disabled) with `mtry` features sampled per split. Tree `i`'s RNG is
    /// derived from `(seed, i)`, so the forest is identical under any
    /// training parallelism and the first `k` trees always form the same
    /// `k`-tree forest.
    pub fn fit(x: ArrayView2<f64>, y: &[f64], config: &TrainConfig) -> Result<Self> {
        validate_training_data(x, y)?;
        config.validate(x.ncols())?;
        let p = x.ncols();
        let n = x.nrows();
        let mtry = config.mtry.unwrap_or(p.div_ceil(3)).clamp(1, p);
        let trees = (0..config.n_trees)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(config.seed, i as u64));
                let indices: Vec<usize> = if config.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut sampler = UniformSubset {
                    mtry,
                    rng: &mut rng,
                };
                RegressionTree::fit_on_indices(x, y, indices, config, &mut sampler)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ForestModel {
            trees,
            mtry,
            seed: config.seed,
            bootstrap: config.bootstrap,
            n_features: p,
        })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Mean prediction over the member trees, per row.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::SchemaMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        let k = self.trees.len() as f64;
        Ok(Array1::from_iter(x.rows().into_iter().map(|row| {
            self.trees
                .iter()
                .map(|t| t.predict_row(row))
                .sum::<f64>()
                / k
        })))
    }

    pub fn to_json(&self) -> String {
        model_to_json("forest", self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        model_from_json("forest", text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::AllFeatures;
    use ndarray::Array2;
    use rand::Rng;

    fn random_data(seed: u64, n: usize, p: usize) -> (Array2<f64>, Vec<f64>) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut x = Array2::<f64>::zeros((n, p));
        x.mapv_inplace(|_| rng.random::<f64>());
        let y: Vec<f64> = (0..n)
            .map(|i| x[[i, 0]] * 3.0 + rng.random::<f64>() * 0.1)
            .collect();
        (x, y)
    }

    #[test]
    fn degenerate_forest_equals_single_tree() {
        let (x, y) = random_data(1, 60, 3);
        let config = TrainConfig::default()
            .with_n_trees(1)
            .with_mtry(3)
            .with_bootstrap(false);
        let forest = ForestModel::fit(x.view(), &y, &config).unwrap();
        let tree = RegressionTree::fit(x.view(), &y, &config, &mut AllFeatures).unwrap();
        let (fp, tp) = (forest.predict(x.view()).unwrap(), tree.predict(x.view()).unwrap());
        assert_eq!(fp, tp);
    }

    #[test]
    fn constant_response_predicts_the_constant() {
        let (x, _) = random_data(2, 40, 2);
        let y = vec![3.25; 40];
        let forest =
            ForestModel::fit(x.view(), &y, &TrainConfig::default().with_n_trees(7)).unwrap();
        for v in forest.predict(x.view()).unwrap() {
            assert_eq!(v, 3.25);
        }
    }

    #[test]
    fn same_seed_same_model_under_any_parallelism() {
        let (x, y) = random_data(3, 80, 4);
        let (xt, _) = random_data(4, 20, 4);
        let config = TrainConfig::default().with_n_trees(12).with_seed(99);

        let sequential = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| ForestModel::fit(x.view(), &y, &config).unwrap());
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| ForestModel::fit(x.view(), &y, &config).unwrap());

        assert_eq!(sequential, parallel);
        let (ps, pp) = (
            sequential.predict(xt.view()).unwrap(),
            parallel.predict(xt.view()).unwrap(),
        );
        for (a, b) in ps.iter().zip(pp.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn mean_prediction_examples_and_oracle() {
        let (x, y) = random_data(5, 50, 3);
        let config = TrainConfig::default().with_n_trees(10).with_seed(7);
        let forest = ForestModel::fit(x.view(), &y, &config).unwrap();
        let (probe, _) = random_data(6, 20, 3);
        let got = forest.predict(probe.view()).unwrap();
        // Naive averaging oracle over the member trees.
        for (i, row) in probe.rows().into_iter().enumerate() {
            let mut sum = 0.0;
            for tree in forest.trees() {
                sum += tree.predict_row(row);
            }
            assert_eq!(got[i], sum / forest.trees().len() as f64);
        }
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let (x, y) = random_data(8, 30, 3);
        let forest =
            ForestModel::fit(x.view(), &y, &TrainConfig::default().with_n_trees(2)).unwrap();
        let wrong = Array2::<f64>::zeros((4, 2));
        assert!(matches!(
            forest.predict(wrong.view()),
            Err(Error::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn json_roundtrip_preserves_predictions_bitwise() {
        let (x, y) = random_data(9, 60, 3);
        let config = TrainConfig::default().with_n_trees(5).with_seed(21);
        let forest = ForestModel::fit(x.view(), &y, &config).unwrap();
        let restored = ForestModel::from_json(&forest.to_json()).unwrap();
        let (a, b) = (
            forest.predict(x.view()).unwrap(),
            restored.predict(x.view()).unwrap(),
        );
        for (u, v) in a.iter().zip(b.iter()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn wrong_kind_is_model_format_error() {
        let (x, y) = random_data(10, 30, 2);
        let forest =
            ForestModel::fit(x.view(), &y, &TrainConfig::default().with_n_trees(2)).unwrap();
        let text = forest.to_json().replace("\"forest\"", "\"boost\"");
        assert!(matches!(
            ForestModel::from_json(&text),
            Err(Error::ModelFormat(_))
        ));
    }
}
